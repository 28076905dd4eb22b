// Command-line front-end: fit, predict, simulate, rate, surface, baseline.
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "funadd/baselines.hpp"
#include "funadd/fit.hpp"
#include "funadd/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw funadd::input_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw funadd::input_error("cannot open output file: " + path.string());
  out << content;
}

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// Sidecar emitted next to every output file. The hash covers the input file
// bytes and the flag values, so identical runs produce identical hashes.
void write_manifest(const fs::path& output_file, const std::string& command,
                    std::uint64_t config_hash, std::uint64_t seed) {
  nlohmann::ordered_json m;
  m["command"] = command;
  char hex[24];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(config_hash));
  m["config_hash"] = hex;
  m["seed"] = seed;
  m["tool_version"] = kToolVersion;
  m["timestamp"] = iso_timestamp();
  write_file(output_file.string() + ".manifest.json", m.dump(2) + "\n");
}

funadd::LambdaGrid parse_lambda_grid(const std::string& s) {
  double lo, hi;
  int count;
  if (std::sscanf(s.c_str(), "%lf:%lf:%d", &lo, &hi, &count) != 3)
    throw funadd::input_error("--lambda-grid expects lo:hi:count");
  return funadd::LambdaGrid::log_spaced(lo, hi, count);
}

struct CommonFlags {
  double lambda = -1;
  std::string lambda_grid;
  int m = 2;
  int threads = 1;
  std::uint64_t seed = 1;
  bool interp = false;
  std::string out_dir = ".";
};

funadd::FitOptions make_fit_options(const CommonFlags& f) {
  funadd::FitOptions opt;
  opt.kernel.m = f.m;
  opt.threads = f.threads;
  if (f.lambda > 0) opt.fixed_lambda = f.lambda;
  if (!f.lambda_grid.empty()) opt.lambda_grid = parse_lambda_grid(f.lambda_grid);
  return opt;
}

funadd::ExperimentConfig config_from_json(const json& j) {
  funadd::ExperimentConfig cfg;
  try {
    cfg.design = funadd::design_from_string(j.at("design").get<std::string>());
    cfg.nu = j.value("nu", cfg.nu);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.n_train = j.value("n_train", cfg.n_train);
    cfg.n_test = j.value("n_test", cfg.n_test);
    cfg.grid_size = j.value("grid_size", cfg.grid_size);
    cfg.replications = j.value("replications", cfg.replications);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const json::exception& e) {
    throw funadd::input_error(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw funadd::input_error("malformed config " + path + ": " + e.what());
  }
}

int cmd_fit(const std::string& dataset_path, const CommonFlags& flags) {
  const std::string raw_csv = read_file(dataset_path);
  const funadd::CurveDataset dataset = funadd::dataset_from_csv(raw_csv);
  const funadd::FitOptions opt = make_fit_options(flags);
  const funadd::FitResult fit = funadd::fit_thinplate(dataset, opt);

  const fs::path out = fs::path(flags.out_dir) / "fit.json";
  fs::create_directories(flags.out_dir);
  write_file(out, funadd::fit_to_json(fit));
  write_manifest(out, "fit", funadd::fnv1a(raw_csv, funadd::fnv1a(std::to_string(flags.m))),
                 flags.seed);

  const Eigen::VectorXd fitted = fit.coef.fitted;
  const double in_rmspe = funadd::rmspe(fitted, dataset.responses());
  std::cout << "lambda: " << fit.coef.lambda
            << (opt.fixed_lambda ? " (fixed by --lambda)" : " (selected by GCV)") << "\n"
            << "gcv: " << fit.coef.gcv << "\n"
            << "edf: " << fit.coef.edf << "\n"
            << "in_sample_rmspe: " << in_rmspe << "\n"
            << "fit written to " << out.string() << "\n";
  return 0;
}

int cmd_predict(const std::string& fit_path, const std::string& data_path,
                const CommonFlags& flags) {
  const funadd::FitResult fit = funadd::fit_from_json(read_file(fit_path));
  const std::string raw_csv = read_file(data_path);

  fs::create_directories(flags.out_dir);
  const fs::path out = fs::path(flags.out_dir) / "predictions.csv";

  std::ostringstream body;
  body << "prediction\n";
  bool empty_input = false;
  try {
    const funadd::CurveDataset newdata = funadd::dataset_from_csv(raw_csv);
    const Eigen::VectorXd pred = funadd::predict_batch(fit, newdata, flags.interp);
    char buf[40];
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g\n", pred[i]);
      body << buf;
    }
  } catch (const funadd::input_error& e) {
    if (std::string(e.what()).find("no data rows") == std::string::npos) throw;
    empty_input = true;
  }
  write_file(out, body.str());
  write_manifest(out, "predict", funadd::fnv1a(raw_csv), flags.seed);
  std::cout << "predictions written to " << out.string()
            << (empty_input ? " (empty input)" : "") << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags) {
  const json j = parse_json_file(config_path);
  funadd::ExperimentConfig cfg = config_from_json(j);
  std::vector<funadd::Method> methods;
  if (j.contains("methods")) {
    for (const auto& name : j.at("methods"))
      methods.push_back(funadd::method_from_string(name.get<std::string>()));
  } else {
    methods = {funadd::Method::thinspline, funadd::Method::flr, funadd::Method::fpca};
  }

  const auto summaries = funadd::run_experiment(cfg, methods, flags.threads);

  fs::create_directories(flags.out_dir);
  const fs::path results = fs::path(flags.out_dir) / "results.csv";
  const fs::path summary = fs::path(flags.out_dir) / "summary.csv";
  write_file(results, funadd::results_to_csv(cfg, summaries));
  write_file(summary, funadd::summary_to_csv(cfg, summaries));
  const std::uint64_t h = funadd::fnv1a(j.dump());
  write_manifest(results, "simulate", h, cfg.seed);
  write_manifest(summary, "simulate", h, cfg.seed);

  std::cout << funadd::summary_to_csv(cfg, summaries);
  return 0;
}

int cmd_rate(const std::string& config_path, const CommonFlags& flags) {
  const json j = parse_json_file(config_path);
  funadd::ExperimentConfig cfg = config_from_json(j);
  std::vector<int> n_list;
  int reps = 10;
  funadd::Method method = funadd::Method::thinspline;
  try {
    n_list = j.at("n_list").get<std::vector<int>>();
    reps = j.value("rate_replications", reps);
    method = funadd::method_from_string(j.value("method", "thinspline"));
  } catch (const json::exception& e) {
    throw funadd::input_error(std::string("config: ") + e.what());
  }

  const funadd::RateResult result =
      funadd::rate_study(cfg, n_list, reps, cfg.seed, flags.threads, method);

  fs::create_directories(flags.out_dir);
  const fs::path out = fs::path(flags.out_dir) / "rate.csv";
  write_file(out, funadd::rate_to_csv(result));
  write_manifest(out, "rate", funadd::fnv1a(j.dump()), cfg.seed);

  std::cout << funadd::rate_to_csv(result) << "loglog_slope: " << result.loglog_slope << "\n";
  return 0;
}

int cmd_surface(const std::string& fit_path, int t_count, int x_count,
                const CommonFlags& flags) {
  const std::string fit_text = read_file(fit_path);
  const funadd::FitResult fit = funadd::fit_from_json(fit_text);
  std::vector<double> tg(static_cast<std::size_t>(t_count)), xg(static_cast<std::size_t>(x_count));
  for (int i = 0; i < t_count; ++i) tg[static_cast<std::size_t>(i)] = double(i) / (t_count - 1);
  for (int i = 0; i < x_count; ++i) xg[static_cast<std::size_t>(i)] = double(i) / (x_count - 1);

  fs::create_directories(flags.out_dir);
  const fs::path out = fs::path(flags.out_dir) / "surface.csv";
  write_file(out, funadd::surface_to_csv(fit, tg, xg));
  write_manifest(out, "surface", funadd::fnv1a(fit_text), flags.seed);

  // nonlinearity diagnostic: residual of the best affine-in-x approximation
  const Eigen::MatrixXd f = funadd::eval_surface(fit, tg, xg);
  double sx = 0, sxx = 0, sy = 0, sxy = 0;
  const double cells = double(f.size());
  for (Eigen::Index a = 0; a < f.rows(); ++a)
    for (Eigen::Index b = 0; b < f.cols(); ++b) {
      const double x = xg[static_cast<std::size_t>(b)];
      sx += x;
      sxx += x * x;
      sy += f(a, b);
      sxy += x * f(a, b);
    }
  const double slope = (cells * sxy - sx * sy) / (cells * sxx - sx * sx);
  const double icept = (sy - slope * sx) / cells;
  double max_resid = 0;
  for (Eigen::Index a = 0; a < f.rows(); ++a)
    for (Eigen::Index b = 0; b < f.cols(); ++b)
      max_resid = std::max(max_resid,
                           std::abs(f(a, b) - icept - slope * xg[static_cast<std::size_t>(b)]));
  std::cout << "surface written to " << out.string() << "\n"
            << "max_affine_residual: " << max_resid << "\n";
  return 0;
}

int cmd_baseline(const std::string& which, const std::string& dataset_path, int k,
                 const CommonFlags& flags) {
  const std::string raw_csv = read_file(dataset_path);
  const funadd::CurveDataset dataset = funadd::dataset_from_csv(raw_csv);
  fs::create_directories(flags.out_dir);

  if (which == "flr") {
    std::optional<double> lam;
    if (flags.lambda > 0) lam = flags.lambda;
    funadd::LambdaGrid grid = flags.lambda_grid.empty()
                                  ? funadd::LambdaGrid::default_grid()
                                  : parse_lambda_grid(flags.lambda_grid);
    const funadd::FlrFit fit = funadd::fit_flr_ss(dataset, lam, grid);
    const fs::path out = fs::path(flags.out_dir) / "flr.json";
    write_file(out, funadd::flr_to_json(fit));
    write_manifest(out, "baseline flr", funadd::fnv1a(raw_csv), flags.seed);
    const double in_rmspe =
        funadd::rmspe(funadd::predict_flr_batch(fit, dataset), dataset.responses());
    std::cout << "lambda: " << fit.lambda << "\nedf: " << fit.edf
              << "\nin_sample_rmspe: " << in_rmspe << "\nfit written to " << out.string()
              << "\n";
  } else if (which == "fpca") {
    std::optional<int> kk;
    if (k > 0) kk = k;
    const funadd::FpcaFit fit = funadd::fit_fpca(dataset, kk);
    const fs::path out = fs::path(flags.out_dir) / "fpca.json";
    write_file(out, funadd::fpca_to_json(fit));
    write_manifest(out, "baseline fpca", funadd::fnv1a(raw_csv), flags.seed);
    const double in_rmspe =
        funadd::rmspe(funadd::predict_fpca_batch(fit, dataset), dataset.responses());
    std::cout << "k: " << fit.k << "\nin_sample_rmspe: " << in_rmspe << "\nfit written to "
              << out.string() << "\n";
  } else {
    throw funadd::input_error("baseline: expected 'flr' or 'fpca'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Additive functional regression with thin-plate penalties"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string dataset_path, fit_path, data_path, config_path, baseline_kind;
  int k = -1, t_count = 50, x_count = 50;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--lambda", flags.lambda, "Fixed smoothing parameter (bypasses GCV)");
    sub->add_option("--lambda-grid", flags.lambda_grid, "GCV grid as lo:hi:count");
    sub->add_option("--m", flags.m, "Thin-plate order (only 2 supported)");
    sub->add_option("--threads", flags.threads, "Worker threads");
    sub->add_option("--seed", flags.seed, "Seed recorded in the run manifest");
    sub->add_flag("--interp", flags.interp, "Interpolate curves onto the training grid");
    sub->add_option("--out", flags.out_dir, "Output directory");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the thin-plate model to a dataset");
  fit_cmd->add_option("dataset", dataset_path, "Dataset CSV")->required();
  add_common(fit_cmd);

  CLI::App* predict_cmd = app.add_subcommand("predict", "Predict responses for new curves");
  predict_cmd->add_option("fit", fit_path, "fit.json from a previous fit")->required();
  predict_cmd->add_option("newdata", data_path, "New curves CSV")->required();
  add_common(predict_cmd);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run a replicated simulation experiment");
  sim_cmd->add_option("config", config_path, "Experiment config JSON")->required();
  add_common(sim_cmd);

  CLI::App* rate_cmd = app.add_subcommand("rate", "Empirical excess-risk study over n");
  rate_cmd->add_option("config", config_path, "Rate config JSON")->required();
  add_common(rate_cmd);

  CLI::App* surf_cmd = app.add_subcommand("surface", "Export the fitted surface as CSV");
  surf_cmd->add_option("fit", fit_path, "fit.json")->required();
  surf_cmd->add_option("--t-points", t_count, "Surface grid size in t");
  surf_cmd->add_option("--x-points", x_count, "Surface grid size in x");
  add_common(surf_cmd);

  CLI::App* base_cmd = app.add_subcommand("baseline", "Fit a baseline estimator (flr or fpca)");
  base_cmd->add_option("kind", baseline_kind, "flr or fpca")->required();
  base_cmd->add_option("dataset", dataset_path, "Dataset CSV")->required();
  base_cmd->add_option("--k", k, "Number of FPCA components (default: 5-fold CV)");
  add_common(base_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return cmd_fit(dataset_path, flags);
    if (predict_cmd->parsed()) return cmd_predict(fit_path, data_path, flags);
    if (sim_cmd->parsed()) return cmd_simulate(config_path, flags);
    if (rate_cmd->parsed()) return cmd_rate(config_path, flags);
    if (surf_cmd->parsed()) return cmd_surface(fit_path, t_count, x_count, flags);
    if (base_cmd->parsed()) return cmd_baseline(baseline_kind, dataset_path, k, flags);
  } catch (const funadd::input_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const funadd::numeric_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
