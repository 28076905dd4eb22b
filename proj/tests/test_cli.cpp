// End-to-end checks of the command-line tool. The binary path arrives as
// argv[1]; everything runs inside a scratch directory under /tmp.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "funadd/curves.hpp"
#include "funadd/simgen.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void check(bool ok, const std::string& what) {
  if (ok) {
    std::cout << "  ok: " << what << "\n";
  } else {
    ++g_failures;
    std::cout << "  FAILED: " << what << "\n";
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& cmd) {
  const fs::path log = fs::temp_directory_path() / "funadd_cli_test.log";
  const int status = std::system((cmd + " > " + log.string() + " 2>&1").c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: cli_tests <path-to-binary>\n";
    return 2;
  }
  const std::string bin = argv[1];

  char tmpl[] = "/tmp/funadd_cli_XXXXXX";
  const fs::path dir = mkdtemp(tmpl);
  const auto in_dir = [&](const std::string& name) { return (dir / name).string(); };

  // noiseless linear dataset for the fit flow
  funadd::ExperimentConfig cfg;
  cfg.design = funadd::Design::linear_wellspaced;
  cfg.nu = 2.0;
  cfg.sigma = 0.0;
  cfg.n_train = 25;
  cfg.n_test = 6;
  cfg.grid_size = 41;
  const funadd::SimulatedData data = funadd::gen_linear_design(cfg, 77);
  funadd::write_csv_dataset(data.train, in_dir("train.csv"));
  funadd::write_csv_dataset(data.test, in_dir("test.csv"));

  {
    std::cout << "fit:\n";
    const RunResult r = run(bin + " fit " + in_dir("train.csv") + " --out " + in_dir("fit1"));
    check(r.exit_code == 0, "exit 0");
    check(r.output.find("selected by GCV") != std::string::npos, "reports GCV selection");
    check(r.output.find("in_sample_rmspe") != std::string::npos, "prints in-sample rmspe");
    check(fs::exists(dir / "fit1" / "fit.json"), "writes fit.json");
    check(fs::exists(dir / "fit1" / "fit.json.manifest.json"), "writes manifest sidecar");
    const std::string manifest = slurp(dir / "fit1" / "fit.json.manifest.json");
    check(manifest.find("\"command\": \"fit\"") != std::string::npos, "manifest names command");
    check(manifest.find("config_hash") != std::string::npos, "manifest has config hash");
  }

  {
    std::cout << "noiseless data admits a near-interpolating fit:\n";
    // GCV scores the interpolation edge as +inf, so drive lambda down by hand
    const RunResult r = run(bin + " fit " + in_dir("train.csv") + " --lambda 1e-8 --out " +
                            in_dir("fit_small"));
    const auto pos = r.output.find("in_sample_rmspe: ");
    const double rmspe = std::strtod(r.output.c_str() + pos + 17, nullptr);
    check(rmspe < 1e-3, "noiseless in-sample rmspe below 1e-3");
  }

  {
    std::cout << "fit determinism:\n";
    run(bin + " fit " + in_dir("train.csv") + " --out " + in_dir("fit2"));
    check(slurp(dir / "fit1" / "fit.json") == slurp(dir / "fit2" / "fit.json"),
          "identical fit.json bytes on refit");
  }

  {
    std::cout << "fit with fixed lambda:\n";
    const RunResult r = run(bin + " fit " + in_dir("train.csv") + " --lambda 0.01 --out " +
                            in_dir("fit_fixed"));
    check(r.exit_code == 0, "exit 0");
    check(r.output.find("fixed by --lambda") != std::string::npos, "reports fixed lambda");
    check(r.output.find("lambda: 0.01") != std::string::npos, "echoes the value");
  }

  {
    std::cout << "predict:\n";
    const RunResult r = run(bin + " predict " + in_dir("fit1") + "/fit.json " +
                            in_dir("test.csv") + " --out " + in_dir("pred"));
    check(r.exit_code == 0, "exit 0");
    const std::string preds = slurp(dir / "pred" / "predictions.csv");
    check(preds.rfind("prediction\n", 0) == 0, "header present");
    int lines = -1;  // don't count the header
    for (char c : preds)
      if (c == '\n') ++lines;
    check(lines == 6, "one prediction per curve");
    check(fs::exists(dir / "pred" / "predictions.csv.manifest.json"), "manifest sidecar");
  }

  {
    std::cout << "predict on the training file reproduces fitted values:\n";
    const RunResult fit_out =
        run(bin + " fit " + in_dir("train.csv") + " --lambda 0.001 --out " + in_dir("fit3"));
    const auto pos = fit_out.output.find("in_sample_rmspe: ");
    const double in_rmspe = std::strtod(fit_out.output.c_str() + pos + 17, nullptr);
    run(bin + " predict " + in_dir("fit3") + "/fit.json " + in_dir("train.csv") + " --out " +
        in_dir("pred_train"));
    std::istringstream preds(slurp(dir / "pred_train" / "predictions.csv"));
    std::string line;
    std::getline(preds, line);  // header
    double ss = 0;
    int count = 0;
    while (std::getline(preds, line)) {
      const double p = std::strtod(line.c_str(), nullptr);
      const double d = p - data.train.responses()[count];
      ss += d * d;
      ++count;
    }
    const double rmspe = std::sqrt(ss / count);
    check(count == 25, "25 predictions");
    check(std::abs(rmspe - in_rmspe) < 1e-6, "prediction rmspe matches the fit report");
  }

  {
    std::cout << "empty newdata:\n";
    std::ofstream(dir / "empty.csv") << "t";  // header only, grid from the training file
    {
      std::ofstream out(dir / "empty.csv");
      out << slurp(dir / "train.csv").substr(0, slurp(dir / "train.csv").find('\n') + 1);
    }
    const RunResult r = run(bin + " predict " + in_dir("fit1") + "/fit.json " +
                            in_dir("empty.csv") + " --out " + in_dir("pred_empty"));
    check(r.exit_code == 0, "exit 0");
    check(slurp(dir / "pred_empty" / "predictions.csv") == "prediction\n",
          "header-only predictions.csv");
  }

  {
    std::cout << "grid mismatch:\n";
    funadd::TimeGrid coarse = funadd::TimeGrid::uniform(21);
    Eigen::MatrixXd vals = Eigen::MatrixXd::Constant(2, 21, 0.1);
    funadd::write_csv_dataset(
        funadd::CurveDataset(coarse, vals, Eigen::VectorXd::Zero(2)), in_dir("coarse.csv"));
    const RunResult bad = run(bin + " predict " + in_dir("fit1") + "/fit.json " +
                              in_dir("coarse.csv") + " --out " + in_dir("pred_bad"));
    check(bad.exit_code == 2, "exit 2 without --interp");
    const RunResult good = run(bin + " predict " + in_dir("fit1") + "/fit.json " +
                               in_dir("coarse.csv") + " --interp --out " + in_dir("pred_ok"));
    check(good.exit_code == 0, "exit 0 with --interp");
  }

  {
    std::cout << "input errors:\n";
    std::ofstream(dir / "bad.csv") << "t,0,0.5,0.25\n1,1,1,1\n";
    const RunResult r = run(bin + " fit " + in_dir("bad.csv") + " --out " + in_dir("badout"));
    check(r.exit_code == 2, "exit 2 on malformed csv");
    check(r.output.find("grid not increasing") != std::string::npos, "names the problem");
    const RunResult missing = run(bin + " fit " + in_dir("nope.csv"));
    check(missing.exit_code == 2, "exit 2 on missing file");
  }

  {
    std::cout << "simulate:\n";
    std::ofstream(dir / "sim.json")
        << "{\"design\":\"linear_wellspaced\",\"nu\":2.0,\"sigma\":0.5,\"n_train\":15,"
           "\"n_test\":8,\"grid_size\":31,\"replications\":3,\"seed\":5,"
           "\"methods\":[\"flr\",\"fpca\"]}";
    const RunResult r =
        run(bin + " simulate " + in_dir("sim.json") + " --out " + in_dir("sim"));
    check(r.exit_code == 0, "exit 0");
    const std::string summary = slurp(dir / "sim" / "summary.csv");
    check(summary.find("flr") != std::string::npos, "summary has flr row");
    check(summary.find("fpca") != std::string::npos, "summary has fpca row");
    const std::string results = slurp(dir / "sim" / "results.csv");
    check(results.find(",2,") != std::string::npos, "results has per-rep rows");
    check(fs::exists(dir / "sim" / "summary.csv.manifest.json"), "manifest sidecar");

    std::ofstream(dir / "badcfg.json") << "{\"design\":\"linear_wellspaced\",";
    const RunResult bad = run(bin + " simulate " + in_dir("badcfg.json"));
    check(bad.exit_code == 2, "exit 2 on malformed config");
    check(bad.output.find("badcfg.json") != std::string::npos, "names the offending file");
    std::ofstream(dir / "badcfg2.json") << "{\"design\":\"warp\"}";
    check(run(bin + " simulate " + in_dir("badcfg2.json")).exit_code == 2,
          "exit 2 on unknown design");
  }

  {
    std::cout << "rate:\n";
    std::ofstream(dir / "rate.json")
        << "{\"design\":\"linear_wellspaced\",\"nu\":2.0,\"sigma\":0.5,\"n_test\":10,"
           "\"grid_size\":31,\"seed\":3,\"n_list\":[10,20],\"rate_replications\":2}";
    const RunResult r = run(bin + " rate " + in_dir("rate.json") + " --out " + in_dir("rate"));
    check(r.exit_code == 0, "exit 0");
    check(r.output.find("loglog_slope") != std::string::npos, "prints the slope");
    check(slurp(dir / "rate" / "rate.csv").rfind("n,mean_excess_risk\n", 0) == 0,
          "rate.csv header");
  }

  {
    std::cout << "surface:\n";
    const RunResult r = run(bin + " surface " + in_dir("fit1") + "/fit.json --t-points 8 "
                            "--x-points 9 --out " + in_dir("surf"));
    check(r.exit_code == 0, "exit 0");
    check(r.output.find("max_affine_residual") != std::string::npos,
          "reports the nonlinearity residual");
    const std::string surf = slurp(dir / "surf" / "surface.csv");
    check(surf.rfind("t,x,F\n", 0) == 0, "surface.csv header");
    int lines = -1;
    for (char c : surf)
      if (c == '\n') ++lines;
    check(lines == 72, "8 x 9 grid rows");
  }

  {
    std::cout << "baselines:\n";
    const RunResult flr =
        run(bin + " baseline flr " + in_dir("train.csv") + " --out " + in_dir("flr"));
    check(flr.exit_code == 0, "flr exit 0");
    check(fs::exists(dir / "flr" / "flr.json"), "flr.json written");
    const RunResult fpca = run(bin + " baseline fpca " + in_dir("train.csv") + " --k 3 --out " +
                               in_dir("fpca"));
    check(fpca.exit_code == 0, "fpca exit 0");
    check(fpca.output.find("k: 3") != std::string::npos, "honors --k");
    check(fs::exists(dir / "fpca" / "fpca.json"), "fpca.json written");
    check(run(bin + " baseline nope " + in_dir("train.csv")).exit_code == 2,
          "unknown baseline kind exits 2");
  }

  fs::remove_all(dir);
  if (g_failures > 0) {
    std::cout << g_failures << " check(s) failed\n";
    return 1;
  }
  std::cout << "all cli checks passed\n";
  return 0;
}
