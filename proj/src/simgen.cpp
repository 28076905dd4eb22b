#include "funadd/simgen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace funadd {

namespace {
constexpr int kSeriesTruncation = 50;
constexpr double kSqrt3 = 1.7320508075688772;
}  // namespace

Design design_from_string(const std::string& name) {
  if (name == "linear_wellspaced") return Design::linear_wellspaced;
  if (name == "linear_closelyspaced") return Design::linear_closelyspaced;
  if (name == "nonlinear_cos") return Design::nonlinear_cos;
  if (name == "nonlinear_texp") return Design::nonlinear_texp;
  throw input_error("unknown design: " + name);
}

std::string design_to_string(Design design) {
  switch (design) {
    case Design::linear_wellspaced: return "linear_wellspaced";
    case Design::linear_closelyspaced: return "linear_closelyspaced";
    case Design::nonlinear_cos: return "nonlinear_cos";
    case Design::nonlinear_texp: return "nonlinear_texp";
  }
  throw input_error("unknown design enum");
}

bool is_linear_design(Design design) {
  return design == Design::linear_wellspaced || design == Design::linear_closelyspaced;
}

void ExperimentConfig::validate() const {
  if (n_train < 1 || n_test < 1) throw input_error("config: n_train and n_test must be >= 1");
  if (!(sigma >= 0.0)) throw input_error("config: sigma must be nonnegative");
  if (grid_size < 2) throw input_error("config: grid_size must be >= 2");
  if (replications < 1) throw input_error("config: replications must be >= 1");
  if (is_linear_design(design)) {
    if (!(nu > 0.0)) throw input_error("config: linear designs need nu > 0");
  }
}

std::vector<double> well_spaced_zeta(double nu) {
  std::vector<double> zeta(kSeriesTruncation);
  for (int k = 1; k <= kSeriesTruncation; ++k)
    zeta[static_cast<std::size_t>(k - 1)] =
        ((k % 2 == 1) ? 1.0 : -1.0) * std::pow(static_cast<double>(k), -nu / 2.0);
  return zeta;
}

std::vector<double> closely_spaced_zeta(double nu) {
  // zeta_1 = 1; zeta_j = 0.2(-1)^(j+1)(1 - 0.0001 j) for j = 2,3,4;
  // zeta_{5j+k} = 0.2(-1)^(5j+k+1)(5j)^(-nu/2) - 0.0001 k for j >= 1, 0 <= k <= 4.
  // Applied literally: the block rule overwrites nothing below index 5 and
  // fills 5..50 (j up to 10 at k = 0).
  std::vector<double> zeta(kSeriesTruncation, 0.0);
  zeta[0] = 1.0;
  for (int j = 2; j <= 4; ++j)
    zeta[static_cast<std::size_t>(j - 1)] =
        0.2 * ((j % 2 == 1) ? 1.0 : -1.0) * (1.0 - 0.0001 * j);
  for (int j = 1; 5 * j <= kSeriesTruncation; ++j) {
    for (int k = 0; k <= 4; ++k) {
      const int idx = 5 * j + k;
      if (idx > kSeriesTruncation) break;
      const double sign = (idx % 2 == 1) ? 1.0 : -1.0;  // (-1)^(idx+1)
      zeta[static_cast<std::size_t>(idx - 1)] =
          0.2 * sign * std::pow(5.0 * j, -nu / 2.0) - 0.0001 * k;
    }
  }
  return zeta;
}

Eigen::VectorXd beta0_values(const TimeGrid& grid) {
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(p, 0.3);
  for (int k = 2; k <= kSeriesTruncation; ++k) {
    const double coef = 4.0 * std::numbers::sqrt2 * ((k % 2 == 1) ? 1.0 : -1.0) /
                        (static_cast<double>(k) * k);
    for (Eigen::Index j = 0; j < p; ++j)
      beta[j] += coef * std::cos(k * std::numbers::pi * grid[static_cast<std::size_t>(j)]);
  }
  return beta;
}

namespace {

struct LinearPieces {
  Eigen::MatrixXd values;
  Eigen::VectorXd eta0;
  Eigen::VectorXd y;
};

LinearPieces draw_linear(int n, const TimeGrid& grid, const std::vector<double>& zeta,
                         const Eigen::VectorXd& beta, double sigma, std::mt19937_64& rng) {
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  std::uniform_real_distribution<double> unif(-kSqrt3, kSqrt3);
  std::normal_distribution<double> noise(0.0, sigma);

  // cosine table: row k-2 holds sqrt(2) cos(k pi t)
  Eigen::MatrixXd cosines(kSeriesTruncation - 1, p);
  for (int k = 2; k <= kSeriesTruncation; ++k)
    for (Eigen::Index j = 0; j < p; ++j)
      cosines(k - 2, j) =
          std::numbers::sqrt2 * std::cos(k * std::numbers::pi * grid[static_cast<std::size_t>(j)]);

  LinearPieces out;
  out.values.resize(n, p);
  out.eta0.resize(n);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    Eigen::RowVectorXd x = Eigen::RowVectorXd::Constant(p, zeta[0] * unif(rng));
    for (int k = 2; k <= kSeriesTruncation; ++k)
      x += zeta[static_cast<std::size_t>(k - 1)] * unif(rng) * cosines.row(k - 2);
    out.values.row(i) = x;
    const Eigen::VectorXd integrand = x.transpose().cwiseProduct(beta);
    out.eta0[i] = quadrature_1d(integrand, grid);
    out.y[i] = out.eta0[i] + (sigma > 0.0 ? noise(rng) : 0.0);
  }
  return out;
}

}  // namespace

SimulatedData gen_linear_design(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  if (!is_linear_design(config.design))
    throw input_error("gen_linear_design: config selects a nonlinear design");
  const TimeGrid grid = TimeGrid::uniform(static_cast<std::size_t>(config.grid_size));
  const std::vector<double> zeta = config.design == Design::linear_wellspaced
                                       ? well_spaced_zeta(config.nu)
                                       : closely_spaced_zeta(config.nu);
  const Eigen::VectorXd beta = beta0_values(grid);
  std::mt19937_64 rng(seed);
  LinearPieces tr = draw_linear(config.n_train, grid, zeta, beta, config.sigma, rng);
  LinearPieces te = draw_linear(config.n_test, grid, zeta, beta, config.sigma, rng);
  return SimulatedData{CurveDataset(grid, std::move(tr.values), std::move(tr.y)),
                       CurveDataset(grid, std::move(te.values), std::move(te.y)),
                       std::move(tr.eta0), std::move(te.eta0)};
}

double nonlinear_curve_value(double u1, double u2, double t) {
  return std::cos(u1) * std::sin(std::numbers::pi * t / 5.0) +
         std::sin(u1) * std::cos(std::numbers::pi * t / 5.0) +
         std::cos(u2) * std::sin(2.0 * std::numbers::pi * t / 5.0) +
         std::sin(u2) * std::cos(2.0 * std::numbers::pi * t / 5.0);
}

double nonlinear_eta0(Design design, const TimeGrid& unit_grid, const Eigen::VectorXd& values) {
  if (is_linear_design(design)) throw input_error("nonlinear_eta0: linear design given");
  const Eigen::Index p = static_cast<Eigen::Index>(unit_grid.size());
  if (values.size() != p) throw input_error("nonlinear_eta0: curve length mismatch");
  Eigen::VectorXd integrand(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double t = 10.0 * unit_grid[static_cast<std::size_t>(j)];
    const double x = values[j];
    integrand[j] = design == Design::nonlinear_cos ? std::cos(t - x - 5.0) : t * std::exp(x);
  }
  return 10.0 * quadrature_1d(integrand, unit_grid);
}

namespace {

struct NonlinearPieces {
  Eigen::MatrixXd values;
  Eigen::VectorXd eta0;
  Eigen::VectorXd y;
};

// Curves live on [0,10]; they are stored on the unit grid s = t/10 and every
// time integral picks up the factor 10, so downstream code keeps its [0,1]
// contract.
NonlinearPieces draw_nonlinear(int n, const TimeGrid& unit_grid, Design design, double sigma,
                               std::mt19937_64& rng) {
  const Eigen::Index p = static_cast<Eigen::Index>(unit_grid.size());
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, sigma);

  NonlinearPieces out;
  out.values.resize(n, p);
  out.eta0.resize(n);
  out.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    for (Eigen::Index j = 0; j < p; ++j)
      out.values(i, j) =
          nonlinear_curve_value(u1, u2, 10.0 * unit_grid[static_cast<std::size_t>(j)]);
    out.eta0[i] = nonlinear_eta0(design, unit_grid, out.values.row(i).transpose());
    out.y[i] = out.eta0[i] + (sigma > 0.0 ? noise(rng) : 0.0);
  }
  return out;
}

}  // namespace

SimulatedData gen_nonlinear_design(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  if (is_linear_design(config.design))
    throw input_error("gen_nonlinear_design: config selects a linear design");
  const TimeGrid grid = TimeGrid::uniform(static_cast<std::size_t>(config.grid_size));
  std::mt19937_64 rng(seed);
  NonlinearPieces tr = draw_nonlinear(config.n_train, grid, config.design, config.sigma, rng);
  NonlinearPieces te = draw_nonlinear(config.n_test, grid, config.design, config.sigma, rng);
  return SimulatedData{CurveDataset(grid, std::move(tr.values), std::move(tr.y)),
                       CurveDataset(grid, std::move(te.values), std::move(te.y)),
                       std::move(tr.eta0), std::move(te.eta0)};
}

SimulatedData generate_replication(const ExperimentConfig& config, std::uint64_t seed) {
  return is_linear_design(config.design) ? gen_linear_design(config, seed)
                                         : gen_nonlinear_design(config, seed);
}

double rmspe(const Eigen::VectorXd& predicted, const Eigen::VectorXd& actual) {
  if (predicted.size() != actual.size()) throw input_error("rmspe: length mismatch");
  if (predicted.size() == 0) throw input_error("rmspe: empty input");
  return std::sqrt((predicted - actual).squaredNorm() / static_cast<double>(predicted.size()));
}

Method method_from_string(const std::string& name) {
  if (name == "thinspline") return Method::thinspline;
  if (name == "flr") return Method::flr;
  if (name == "fpca") return Method::fpca;
  throw input_error("unknown method: " + name);
}

std::string method_to_string(Method method) {
  switch (method) {
    case Method::thinspline: return "thinspline";
    case Method::flr: return "flr";
    case Method::fpca: return "fpca";
  }
  throw input_error("unknown method enum");
}

MethodRunner make_method_runner(Method method, int threads) {
  switch (method) {
    case Method::thinspline:
      return [threads](const CurveDataset& train, const CurveDataset& test) {
        FitOptions opt;
        opt.threads = threads;
        FitResult fit = fit_thinplate(train, opt);
        return predict_batch(fit, test);
      };
    case Method::flr:
      return [](const CurveDataset& train, const CurveDataset& test) {
        FlrFit fit = fit_flr_ss(train);
        return predict_flr_batch(fit, test);
      };
    case Method::fpca:
      return [](const CurveDataset& train, const CurveDataset& test) {
        FpcaFit fit = fit_fpca(train);
        return predict_fpca_batch(fit, test);
      };
  }
  throw input_error("unknown method enum");
}

std::vector<RmspeSummary> run_replications(
    const ExperimentConfig& config,
    const std::vector<std::pair<std::string, MethodRunner>>& methods) {
  config.validate();
  if (methods.empty()) throw input_error("run_replications: no methods given");

  std::vector<RmspeSummary> summaries(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) summaries[m].method = methods[m].first;

  for (int rep = 0; rep < config.replications; ++rep) {
    const SimulatedData data =
        generate_replication(config, config.seed + static_cast<std::uint64_t>(rep));
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        const Eigen::VectorXd pred = methods[m].second(data.train, data.test);
        summaries[m].per_rep.push_back(rmspe(pred, data.test.responses()));
      } catch (const std::exception&) {
        ++summaries[m].failures;
      }
    }
  }

  for (auto& s : summaries) {
    if (s.failures > config.replications / 20)
      throw numeric_error("run_replications: method " + s.method + " failed " +
                          std::to_string(s.failures) + " of " +
                          std::to_string(config.replications) + " replications");
    const auto& v = s.per_rep;
    if (v.empty()) continue;
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.mean = mean;
    s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  return summaries;
}

std::vector<RmspeSummary> run_experiment(const ExperimentConfig& config,
                                         const std::vector<Method>& methods, int threads) {
  std::vector<std::pair<std::string, MethodRunner>> runners;
  runners.reserve(methods.size());
  for (Method m : methods)
    runners.emplace_back(method_to_string(m), make_method_runner(m, threads));
  return run_replications(config, runners);
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace

std::string results_to_csv(const ExperimentConfig& config,
                           const std::vector<RmspeSummary>& summaries) {
  std::ostringstream out;
  out << "design,nu,sigma,method,rep,rmspe\n";
  for (const auto& s : summaries)
    for (std::size_t r = 0; r < s.per_rep.size(); ++r)
      out << design_to_string(config.design) << "," << fmt(config.nu) << ","
          << fmt(config.sigma) << "," << s.method << "," << r << "," << fmt(s.per_rep[r])
          << "\n";
  return out.str();
}

std::string summary_to_csv(const ExperimentConfig& config,
                           const std::vector<RmspeSummary>& summaries) {
  std::ostringstream out;
  out << "design,nu,sigma,method,mean,sd\n";
  for (const auto& s : summaries)
    out << design_to_string(config.design) << "," << fmt(config.nu) << "," << fmt(config.sigma)
        << "," << s.method << "," << fmt(s.mean) << "," << fmt(s.sd) << "\n";
  return out.str();
}

RateResult rate_study(const ExperimentConfig& base, const std::vector<int>& n_list,
                      int replications, std::uint64_t seed, int threads, Method method) {
  if (n_list.empty()) throw input_error("rate_study: empty n list");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw input_error("rate_study: n list must be increasing");
  if (replications < 1) throw input_error("rate_study: replications must be >= 1");

  const MethodRunner runner = make_method_runner(method, threads);
  RateResult result;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    ExperimentConfig cfg = base;
    cfg.n_train = n_list[ni];
    cfg.replications = replications;
    double acc = 0.0;
    for (int rep = 0; rep < replications; ++rep) {
      const std::uint64_t rep_seed =
          seed + static_cast<std::uint64_t>(ni) * 100003ULL + static_cast<std::uint64_t>(rep);
      const SimulatedData data = generate_replication(cfg, rep_seed);
      const Eigen::VectorXd pred = runner(data.train, data.test);
      acc += (pred - data.test_eta0).squaredNorm() / static_cast<double>(pred.size());
    }
    result.points.push_back(RatePoint{n_list[ni], acc / replications});
  }

  // least-squares slope of log(excess risk) on log(n)
  const std::size_t k = result.points.size();
  if (k >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& pt : result.points) {
      const double lx = std::log(static_cast<double>(pt.n));
      const double ly = std::log(std::max(pt.mean_excess_risk, 1e-300));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    const double kk = static_cast<double>(k);
    result.loglog_slope = (kk * sxy - sx * sy) / (kk * sxx - sx * sx);
  }
  return result;
}

std::string rate_to_csv(const RateResult& result) {
  std::ostringstream out;
  out << "n,mean_excess_risk\n";
  for (const auto& pt : result.points) out << pt.n << "," << fmt(pt.mean_excess_risk) << "\n";
  return out.str();
}

}  // namespace funadd
