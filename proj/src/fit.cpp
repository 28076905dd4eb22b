#include "funadd/fit.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

namespace funadd {

LambdaGrid LambdaGrid::log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2)
    throw input_error("LambdaGrid: need 0 < lo < hi and count >= 2");
  LambdaGrid g;
  g.values.resize(static_cast<std::size_t>(count));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i)
    g.values[static_cast<std::size_t>(i)] =
        std::exp(lhi + (llo - lhi) * static_cast<double>(i) / (count - 1));
  return g;
}

void LambdaGrid::validate() const {
  if (values.empty()) throw input_error("LambdaGrid: empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0)) throw input_error("LambdaGrid: values must be positive");
    if (i > 0 && !(values[i] < values[i - 1]))
      throw input_error("LambdaGrid: values must be strictly decreasing");
  }
}

PenalizedSolver::PenalizedSolver(const GramMatrices& gram, const Eigen::VectorXd& y) {
  n_ = gram.sigma.rows();
  if (gram.sigma.cols() != n_ || gram.xi.rows() != n_ || y.size() != n_)
    throw input_error("PenalizedSolver: dimension mismatch");
  if (gram.xi.cols() != 1)
    throw input_error("PenalizedSolver: expected single reduced Xi column");
  if (n_ < 2) throw input_error("PenalizedSolver: need at least 2 observations");

  y_mean_ = y.mean();
  yc_ = y.array() - y_mean_;
  sigma_ = gram.sigma;

  // Constrain against span{1, Xi}: the intercept direction must stay in the
  // constraint set even though its coefficient is reported merged into the
  // intercept, otherwise Q2^T Sigma Q2 picks up negative eigenvalues of the
  // semi-kernel and the penalized problem degenerates. Column pivoting
  // handles datasets where every curve has the same mean (Xi collinear
  // with 1): the rank drops to one and the redundant coefficient is zero.
  Eigen::MatrixXd b(n_, 2);
  b.col(0).setOnes();
  b.col(1) = gram.xi.col(0);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(b);
  qr.setThreshold(1e-10);
  rank_ = qr.rank();
  if (rank_ < 1 || rank_ >= n_)
    throw input_error("degenerate design: too few curves for the null-space columns");
  Eigen::MatrixXd q = qr.householderQ();
  q1_ = q.leftCols(rank_);
  q2_ = q.rightCols(n_ - rank_);
  r_ = qr.matrixQR().topLeftCorner(rank_, rank_).triangularView<Eigen::Upper>();
  perm_ = qr.colsPermutation().indices();

  Eigen::MatrixXd s = q2_.transpose() * sigma_ * q2_;
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success)
    throw numeric_error("PenalizedSolver: eigendecomposition failed");
  evecs_ = eig.eigenvectors();
  evals_ = eig.eigenvalues();
  q2ty_ = evecs_.transpose() * (q2_.transpose() * yc_);
  jitter_floor_ = 1e-10 * std::abs(s.trace()) / static_cast<double>(s.rows());
}

Eigen::VectorXd PenalizedSolver::shrink_diag(double lambda) const {
  if (!(lambda > 0.0)) throw input_error("lambda must be positive");
  const double nl = static_cast<double>(n_) * lambda;
  Eigen::VectorXd denom = evals_.array() + nl;
  for (Eigen::Index k = 0; k < denom.size(); ++k)
    if (denom[k] < jitter_floor_) denom[k] = jitter_floor_ + nl * 1e-16 + 1e-300;
  return denom;
}

PenalizedCoefficients PenalizedSolver::solve(double lambda) const {
  const Eigen::VectorXd denom = shrink_diag(lambda);
  const double nl = static_cast<double>(n_) * lambda;

  const Eigen::VectorXd z = (q2ty_.array() / denom.array()).matrix();
  PenalizedCoefficients out;
  out.lambda = lambda;
  out.c = q2_ * (evecs_ * z);
  const Eigen::VectorXd d_perm = r_.triangularView<Eigen::Upper>().solve(
      Eigen::VectorXd(q1_.transpose() * (yc_ - sigma_ * out.c)));
  Eigen::Vector2d d = Eigen::Vector2d::Zero();
  for (Eigen::Index k = 0; k < rank_; ++k) d[perm_[k]] = d_perm[k];
  out.intercept = y_mean_ + d[0];
  out.d3 = d[1];

  const double tr_hat = static_cast<double>(n_) - nl * (1.0 / denom.array()).sum();
  out.edf = tr_hat + 1.0;  // the separately estimated intercept counts as one df

  out.fitted = Eigen::VectorXd::Constant(n_, y_mean_) + yc_ - nl * (q2_ * (evecs_ * z));
  if (!out.fitted.allFinite() || !out.c.allFinite() || !std::isfinite(out.d3))
    throw numeric_error("penalized solve produced non-finite values; try a larger lambda");

  const double denom_gcv = 1.0 - out.edf / static_cast<double>(n_);
  if (denom_gcv <= 0.0) {
    out.gcv = std::numeric_limits<double>::infinity();
  } else {
    const double rss = (out.fitted - (yc_.array() + y_mean_).matrix()).squaredNorm();
    out.gcv = (rss / static_cast<double>(n_)) / (denom_gcv * denom_gcv);
  }
  return out;
}

double PenalizedSolver::gcv(double lambda) const { return solve(lambda).gcv; }

Eigen::MatrixXd PenalizedSolver::hat_matrix(double lambda) const {
  const Eigen::VectorXd denom = shrink_diag(lambda);
  const double nl = static_cast<double>(n_) * lambda;
  Eigen::MatrixXd inner =
      evecs_ * (1.0 / denom.array()).matrix().asDiagonal() * evecs_.transpose();
  return Eigen::MatrixXd::Identity(n_, n_) - nl * (q2_ * inner * q2_.transpose());
}

PenalizedCoefficients solve_penalized(const GramMatrices& gram, const Eigen::VectorXd& y,
                                      double lambda) {
  return PenalizedSolver(gram, y).solve(lambda);
}

Eigen::MatrixXd hat_matrix(const GramMatrices& gram, const Eigen::VectorXd& y, double lambda) {
  return PenalizedSolver(gram, y).hat_matrix(lambda);
}

double gcv_score(const GramMatrices& gram, const Eigen::VectorXd& y, double lambda) {
  return PenalizedSolver(gram, y).gcv(lambda);
}

std::pair<double, PenalizedCoefficients> select_lambda(const GramMatrices& gram,
                                                       const Eigen::VectorXd& y,
                                                       const LambdaGrid& grid) {
  grid.validate();
  PenalizedSolver solver(gram, y);
  double best_score = std::numeric_limits<double>::infinity();
  double best_lambda = grid.values.front();
  // grid is decreasing, so keeping the first score within tolerance of the
  // minimum breaks ties toward the larger lambda
  for (double lam : grid.values) {
    const double score = solver.gcv(lam);
    if (std::isfinite(score) && score < best_score * (1.0 - 1e-12) - 1e-300) {
      best_score = score;
      best_lambda = lam;
    }
  }
  if (!std::isfinite(best_score))
    throw numeric_error("select_lambda: GCV was infinite on the whole grid");
  return {best_lambda, solver.solve(best_lambda)};
}

FitResult fit_thinplate(const CurveDataset& raw, const FitOptions& options) {
  options.kernel.validate();
  auto [scaled, tf] = fit_transform(raw);
  GramMatrices gram = assemble_gram(scaled, options.kernel, options.threads);
  PenalizedCoefficients coef;
  if (options.fixed_lambda) {
    coef = solve_penalized(gram, scaled.responses(), *options.fixed_lambda);
  } else {
    coef = select_lambda(gram, scaled.responses(), options.lambda_grid).second;
  }
  return FitResult{std::move(coef), tf, std::move(scaled), options.kernel};
}

double predict(const FitResult& fit, const FunctionalCurve& raw_curve, bool interp) {
  FunctionalCurve curve = raw_curve;
  if (!(curve.grid == fit.training.grid())) {
    if (!interp)
      throw input_error("predict: curve grid does not match training grid (pass interp)");
    curve = interpolate_to_grid(curve, fit.training.grid());
  }
  const Eigen::VectorXd x = fit.transform.apply_clipped(curve.values);
  const double xbar = quadrature_1d(x, fit.training.grid());
  const Eigen::VectorXd k = cross_kernel_integrals(fit.training, x, fit.kernel);
  return fit.coef.intercept + fit.coef.d3 * xbar + fit.coef.c.dot(k);
}

Eigen::VectorXd predict_batch(const FitResult& fit, const CurveDataset& raw, bool interp) {
  Eigen::VectorXd out(raw.n());
  for (Eigen::Index i = 0; i < raw.n(); ++i) out[i] = predict(fit, raw.curve(i), interp);
  return out;
}

Eigen::MatrixXd eval_surface(const FitResult& fit, const std::vector<double>& t_grid,
                             const std::vector<double>& x_grid) {
  for (double t : t_grid)
    if (t < 0.0 || t > 1.0) throw input_error("eval_surface: t outside [0,1]");
  for (double x : x_grid)
    if (x < 0.0 || x > 1.0) throw input_error("eval_surface: x outside [0,1]");
  Eigen::MatrixXd f(static_cast<Eigen::Index>(t_grid.size()),
                    static_cast<Eigen::Index>(x_grid.size()));
  const Eigen::Index n = fit.training.n();
  for (std::size_t a = 0; a < t_grid.size(); ++a) {
    for (std::size_t b = 0; b < x_grid.size(); ++b) {
      double v = fit.coef.intercept + fit.coef.d3 * x_grid[b];
      for (Eigen::Index i = 0; i < n; ++i)
        v += fit.coef.c[i] * point_curve_integral(t_grid[a], x_grid[b], fit.training.grid(),
                                                  fit.training.values().row(i).transpose(),
                                                  fit.kernel);
      f(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
    }
  }
  return f;
}

std::string surface_to_csv(const FitResult& fit, const std::vector<double>& t_grid,
                           const std::vector<double>& x_grid) {
  Eigen::MatrixXd f = eval_surface(fit, t_grid, x_grid);
  std::ostringstream out;
  out << "t,x,F\n";
  char buf[128];
  for (std::size_t a = 0; a < t_grid.size(); ++a)
    for (std::size_t b = 0; b < x_grid.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", t_grid[a], x_grid[b],
                    f(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      out << buf;
    }
  return out.str();
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::ordered_json j;
  j["m"] = fit.kernel.m;
  j["lambda"] = fit.coef.lambda;
  j["intercept"] = fit.coef.intercept;
  j["d3"] = fit.coef.d3;
  j["gcv"] = fit.coef.gcv;
  j["edf"] = fit.coef.edf;
  j["c"] = std::vector<double>(fit.coef.c.data(), fit.coef.c.data() + fit.coef.c.size());
  j["transform"] = {{"kind", fit.transform.kind == ValueTransform::Kind::minmax ? "minmax"
                                                                                : "identity"},
                    {"lo", fit.transform.lo},
                    {"hi", fit.transform.hi}};
  j["grid"] = fit.training.grid().points();
  std::vector<std::vector<double>> curves(static_cast<std::size_t>(fit.training.n()));
  for (Eigen::Index i = 0; i < fit.training.n(); ++i) {
    curves[static_cast<std::size_t>(i)].assign(
        fit.training.values().row(i).begin(), fit.training.values().row(i).end());
  }
  j["curves"] = curves;
  j["responses"] = std::vector<double>(fit.training.responses().data(),
                                       fit.training.responses().data() +
                                           fit.training.responses().size());
  return j.dump(2) + "\n";
}

FitResult fit_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("fit json parse error: ") + e.what());
  }
  try {
    TpsKernelSpec kernel{j.at("m").get<int>()};
    kernel.validate();
    PenalizedCoefficients coef;
    coef.lambda = j.at("lambda").get<double>();
    coef.intercept = j.at("intercept").get<double>();
    coef.d3 = j.at("d3").get<double>();
    coef.gcv = j.value("gcv", 0.0);
    coef.edf = j.value("edf", 0.0);
    std::vector<double> c = j.at("c").get<std::vector<double>>();
    coef.c = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));

    ValueTransform tf;
    const std::string kind = j.at("transform").at("kind").get<std::string>();
    tf.kind = kind == "minmax" ? ValueTransform::Kind::minmax : ValueTransform::Kind::identity;
    tf.lo = j.at("transform").at("lo").get<double>();
    tf.hi = j.at("transform").at("hi").get<double>();

    TimeGrid grid(j.at("grid").get<std::vector<double>>());
    auto curves = j.at("curves").get<std::vector<std::vector<double>>>();
    std::vector<double> responses = j.at("responses").get<std::vector<double>>();
    if (curves.size() != responses.size() || curves.size() != c.size())
      throw input_error("fit json: inconsistent sizes");
    Eigen::MatrixXd values(static_cast<Eigen::Index>(curves.size()),
                           static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (curves[i].size() != grid.size()) throw input_error("fit json: curve length mismatch");
      values.row(static_cast<Eigen::Index>(i)) = Eigen::Map<Eigen::RowVectorXd>(
          curves[i].data(), static_cast<Eigen::Index>(curves[i].size()));
    }
    Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(responses.data(),
                                                    static_cast<Eigen::Index>(responses.size()));
    CurveDataset training(std::move(grid), std::move(values), std::move(y), tf);
    return FitResult{std::move(coef), tf, std::move(training), kernel};
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("fit json: ") + e.what());
  }
}

void save_fit_json(const FitResult& fit, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open output file: " + path);
  out << fit_to_json(fit);
}

FitResult load_fit_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open fit file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return fit_from_json(buf.str());
}

}  // namespace funadd
