#include "funadd/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

namespace funadd {

namespace {

// integral (beta'')^2 discretized with second differences scaled by the
// (average) grid spacing: P = D2^T D2 / h^3 with D2 rows [1, -2, 1].
Eigen::MatrixXd second_difference_penalty(const TimeGrid& grid) {
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  if (p < 3) throw input_error("fit_flr_ss: need at least 3 grid points");
  const double h = (grid.points().back() - grid.points().front()) / static_cast<double>(p - 1);
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p - 2, p);
  for (Eigen::Index j = 0; j < p - 2; ++j) {
    d2(j, j) = 1.0;
    d2(j, j + 1) = -2.0;
    d2(j, j + 2) = 1.0;
  }
  return d2.transpose() * d2 / (h * h * h);
}

struct FlrWork {
  Eigen::MatrixXd a_centered;  // rows: quadrature-weighted curves, column-centered
  Eigen::RowVectorXd a_mean;
  Eigen::VectorXd y_centered;
  double y_mean;
  Eigen::MatrixXd gram;     // Ac^T Ac
  Eigen::MatrixXd penalty;  // second-difference matrix
  Eigen::VectorXd aty;      // Ac^T yc
};

FlrWork flr_workspace(const CurveDataset& dataset) {
  const Eigen::Index n = dataset.n();
  if (n < 3) throw input_error("fit_flr_ss: need at least 3 curves");
  FlrWork w;
  Eigen::MatrixXd a =
      dataset.values().array().rowwise() * dataset.grid().quad_weights().transpose().array();
  w.a_mean = a.colwise().mean();
  w.a_centered = a.rowwise() - w.a_mean;
  w.y_mean = dataset.responses().mean();
  w.y_centered = dataset.responses().array() - w.y_mean;
  w.gram = w.a_centered.transpose() * w.a_centered;
  w.penalty = second_difference_penalty(dataset.grid());
  w.aty = w.a_centered.transpose() * w.y_centered;
  return w;
}

struct FlrSolve {
  Eigen::VectorXd beta;
  double edf;
  double gcv;
};

FlrSolve flr_solve(const FlrWork& w, Eigen::Index n, double lambda) {
  if (!(lambda > 0.0)) throw input_error("fit_flr_ss: lambda must be positive");
  Eigen::MatrixXd m = w.gram + static_cast<double>(n) * lambda * w.penalty;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  if (ldlt.info() != Eigen::Success)
    throw numeric_error("fit_flr_ss: penalized system could not be factorized");
  FlrSolve s;
  s.beta = ldlt.solve(w.aty);
  if (!s.beta.allFinite())
    throw numeric_error("fit_flr_ss: singular penalized system, increase lambda");
  const double tr_hat = (ldlt.solve(w.gram)).trace();
  s.edf = tr_hat + 1.0;
  const Eigen::VectorXd resid = w.y_centered - w.a_centered * s.beta;
  const double denom = 1.0 - s.edf / static_cast<double>(n);
  s.gcv = denom <= 0.0 ? std::numeric_limits<double>::infinity()
                       : (resid.squaredNorm() / static_cast<double>(n)) / (denom * denom);
  return s;
}

}  // namespace

FlrFit fit_flr_ss(const CurveDataset& dataset, std::optional<double> lambda,
                  const LambdaGrid& grid) {
  FlrWork w = flr_workspace(dataset);
  const Eigen::Index n = dataset.n();

  double chosen;
  if (lambda) {
    chosen = *lambda;
  } else {
    grid.validate();
    double best_score = std::numeric_limits<double>::infinity();
    chosen = grid.values.front();
    for (double lam : grid.values) {
      const double score = flr_solve(w, n, lam).gcv;
      if (std::isfinite(score) && score < best_score * (1.0 - 1e-12) - 1e-300) {
        best_score = score;
        chosen = lam;
      }
    }
  }
  FlrSolve s = flr_solve(w, n, chosen);
  const double alpha = w.y_mean - (w.a_mean * s.beta).value();
  FlrFit fit{alpha, std::move(s.beta), chosen, dataset.grid(), s.gcv, s.edf};
  return fit;
}

double predict_flr(const FlrFit& fit, const FunctionalCurve& curve, bool interp) {
  FunctionalCurve c = curve;
  if (!(c.grid == fit.grid)) {
    if (!interp) throw input_error("predict_flr: grid mismatch (pass interp)");
    c = interpolate_to_grid(c, fit.grid);
  }
  const Eigen::VectorXd integrand = c.values.cwiseProduct(fit.beta);
  return fit.alpha + quadrature_1d(integrand, fit.grid);
}

Eigen::VectorXd predict_flr_batch(const FlrFit& fit, const CurveDataset& dataset, bool interp) {
  Eigen::VectorXd out(dataset.n());
  for (Eigen::Index i = 0; i < dataset.n(); ++i)
    out[i] = predict_flr(fit, dataset.curve(i), interp);
  return out;
}

namespace {

struct FpcaComponents {
  Eigen::VectorXd mean_curve;
  Eigen::MatrixXd eigenfunctions;  // k x p
  Eigen::MatrixXd scores;          // n x k
  int k_available;
};

FpcaComponents fpca_components(const Eigen::MatrixXd& values, const TimeGrid& grid, int k_max) {
  const Eigen::Index n = values.rows();
  const Eigen::Index p = values.cols();
  FpcaComponents out;
  out.mean_curve = values.colwise().mean().transpose();
  const Eigen::MatrixXd centered = values.rowwise() - out.mean_curve.transpose();
  const Eigen::ArrayXd sqrt_w = grid.quad_weights().array().sqrt();
  const Eigen::MatrixXd b = centered.array().rowwise() * sqrt_w.transpose();
  Eigen::MatrixXd cov = b.transpose() * b / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw numeric_error("fit_fpca: eigendecomposition failed");

  // eigenvalues come back ascending; keep the top ones with usable mass
  const double tol = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> order;
  for (Eigen::Index j = p - 1; j >= 0; --j)
    if (eig.eigenvalues()[j] > tol) order.push_back(j);
  out.k_available = static_cast<int>(std::min<std::size_t>(order.size(),
                                                           static_cast<std::size_t>(k_max)));

  out.eigenfunctions.resize(out.k_available, p);
  for (int k = 0; k < out.k_available; ++k) {
    Eigen::VectorXd u = eig.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    // canonical sign: first component of u with nonzero magnitude is positive
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      if (std::abs(u[j]) > 1e-12) {
        if (u[j] < 0.0) u = -u;
        break;
      }
    }
    out.eigenfunctions.row(k) = (u.array() / sqrt_w).transpose();
  }
  // scores s_ik = integral (X_i - mean) phi_k = b_i . u_k
  out.scores.resize(n, out.k_available);
  for (int k = 0; k < out.k_available; ++k)
    out.scores.col(k) = b * (out.eigenfunctions.row(k).transpose().array() * sqrt_w).matrix();
  return out;
}

struct ScoreRegression {
  double intercept;
  Eigen::VectorXd coef;
};

ScoreRegression regress_scores(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y, int k) {
  const Eigen::Index n = scores.rows();
  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  design.rightCols(k) = scores.leftCols(k);
  Eigen::VectorXd sol = design.colPivHouseholderQr().solve(y);
  return {sol[0], sol.tail(k)};
}

}  // namespace

FpcaFit fit_fpca(const CurveDataset& dataset, std::optional<int> k, int cv_folds) {
  const Eigen::Index n = dataset.n();
  const int k_ceiling = static_cast<int>(std::min<Eigen::Index>(n - 1, dataset.values().cols()));
  if (k) {
    if (*k < 1 || *k > k_ceiling)
      throw input_error("fit_fpca: k must be in [1, min(n-1, p)]");
  }
  if (n < (k ? *k + 1 : 3)) throw input_error("fit_fpca: not enough curves");

  int chosen_k;
  if (k) {
    chosen_k = *k;
  } else {
    const int k_max = std::min<int>(10, static_cast<int>(n) - 2);
    if (k_max < 1) throw input_error("fit_fpca: not enough curves for cross-validation");
    // deterministic interleaved folds; low-rank covariances can cap the
    // usable k below k_max, so track how many folds scored each candidate
    std::vector<double> cv_err(static_cast<std::size_t>(k_max), 0.0);
    std::vector<int> cv_folds_scored(static_cast<std::size_t>(k_max), 0);
    for (int fold = 0; fold < cv_folds; ++fold) {
      std::vector<Eigen::Index> train_idx, test_idx;
      for (Eigen::Index i = 0; i < n; ++i)
        (static_cast<int>(i % cv_folds) == fold ? test_idx : train_idx).push_back(i);
      if (test_idx.empty() || static_cast<int>(train_idx.size()) < k_max + 2) continue;
      Eigen::MatrixXd tr_vals(static_cast<Eigen::Index>(train_idx.size()),
                              dataset.values().cols());
      Eigen::VectorXd tr_y(static_cast<Eigen::Index>(train_idx.size()));
      for (std::size_t i = 0; i < train_idx.size(); ++i) {
        tr_vals.row(static_cast<Eigen::Index>(i)) = dataset.values().row(train_idx[i]);
        tr_y[static_cast<Eigen::Index>(i)] = dataset.responses()[train_idx[i]];
      }
      FpcaComponents comp = fpca_components(tr_vals, dataset.grid(), k_max);
      const Eigen::ArrayXd w = dataset.grid().quad_weights().array();
      for (int kk = 1; kk <= std::min(k_max, comp.k_available); ++kk) {
        ScoreRegression reg = regress_scores(comp.scores, tr_y, kk);
        for (Eigen::Index ti : test_idx) {
          const Eigen::VectorXd xc =
              dataset.values().row(ti).transpose() - comp.mean_curve;
          double pred = reg.intercept;
          for (int q = 0; q < kk; ++q)
            pred += reg.coef[q] *
                    (xc.array() * w * comp.eigenfunctions.row(q).transpose().array()).sum();
          const double e = pred - dataset.responses()[ti];
          cv_err[static_cast<std::size_t>(kk - 1)] += e * e;
        }
        ++cv_folds_scored[static_cast<std::size_t>(kk - 1)];
      }
    }
    chosen_k = 1;
    double best = cv_err[0];
    for (int kk = 2; kk <= k_max; ++kk) {
      // candidates must have been scored on exactly the folds k=1 saw,
      // otherwise the error sums are not comparable
      if (cv_folds_scored[static_cast<std::size_t>(kk - 1)] != cv_folds_scored[0]) continue;
      if (cv_err[static_cast<std::size_t>(kk - 1)] < best * (1.0 - 1e-12)) {
        best = cv_err[static_cast<std::size_t>(kk - 1)];
        chosen_k = kk;
      }
    }
  }

  FpcaComponents comp = fpca_components(dataset.values(), dataset.grid(), chosen_k);
  if (comp.k_available < chosen_k) {
    if (k) throw input_error("fit_fpca: requested k exceeds available covariance rank");
    chosen_k = comp.k_available;  // CV fold ranks can exceed the full-data rank
  }
  if (chosen_k < 1) throw numeric_error("fit_fpca: covariance has no usable components");
  ScoreRegression reg = regress_scores(comp.scores, dataset.responses(), chosen_k);
  return FpcaFit{std::move(comp.mean_curve), comp.eigenfunctions.topRows(chosen_k),
                 std::move(reg.coef), reg.intercept, chosen_k, dataset.grid()};
}

double predict_fpca(const FpcaFit& fit, const FunctionalCurve& curve, bool interp) {
  FunctionalCurve c = curve;
  if (!(c.grid == fit.grid)) {
    if (!interp) throw input_error("predict_fpca: grid mismatch (pass interp)");
    c = interpolate_to_grid(c, fit.grid);
  }
  const Eigen::ArrayXd w = fit.grid.quad_weights().array();
  const Eigen::ArrayXd xc = (c.values - fit.mean_curve).array();
  double pred = fit.intercept;
  for (int k = 0; k < fit.k; ++k)
    pred += fit.scores_coef[k] * (xc * w * fit.eigenfunctions.row(k).transpose().array()).sum();
  return pred;
}

Eigen::VectorXd predict_fpca_batch(const FpcaFit& fit, const CurveDataset& dataset, bool interp) {
  Eigen::VectorXd out(dataset.n());
  for (Eigen::Index i = 0; i < dataset.n(); ++i)
    out[i] = predict_fpca(fit, dataset.curve(i), interp);
  return out;
}

std::string flr_to_json(const FlrFit& fit) {
  nlohmann::ordered_json j;
  j["model"] = "flr_smoothing_spline";
  j["alpha"] = fit.alpha;
  j["lambda"] = fit.lambda;
  j["gcv"] = fit.gcv;
  j["edf"] = fit.edf;
  j["grid"] = fit.grid.points();
  j["beta"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
  return j.dump(2) + "\n";
}

FlrFit flr_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    TimeGrid grid(j.at("grid").get<std::vector<double>>());
    std::vector<double> beta = j.at("beta").get<std::vector<double>>();
    if (beta.size() != grid.size()) throw input_error("flr json: beta length mismatch");
    FlrFit fit{j.at("alpha").get<double>(),
               Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size())),
               j.at("lambda").get<double>(), std::move(grid), j.value("gcv", 0.0),
               j.value("edf", 0.0)};
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("flr json: ") + e.what());
  }
}

std::string fpca_to_json(const FpcaFit& fit) {
  nlohmann::ordered_json j;
  j["model"] = "fpca_regression";
  j["k"] = fit.k;
  j["intercept"] = fit.intercept;
  j["grid"] = fit.grid.points();
  j["mean_curve"] = std::vector<double>(fit.mean_curve.data(),
                                        fit.mean_curve.data() + fit.mean_curve.size());
  j["scores_coef"] = std::vector<double>(fit.scores_coef.data(),
                                         fit.scores_coef.data() + fit.scores_coef.size());
  std::vector<std::vector<double>> ef(static_cast<std::size_t>(fit.k));
  for (int k = 0; k < fit.k; ++k)
    ef[static_cast<std::size_t>(k)].assign(fit.eigenfunctions.row(k).begin(),
                                           fit.eigenfunctions.row(k).end());
  j["eigenfunctions"] = ef;
  return j.dump(2) + "\n";
}

FpcaFit fpca_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    TimeGrid grid(j.at("grid").get<std::vector<double>>());
    const int k = j.at("k").get<int>();
    std::vector<double> mean = j.at("mean_curve").get<std::vector<double>>();
    std::vector<double> coef = j.at("scores_coef").get<std::vector<double>>();
    auto ef = j.at("eigenfunctions").get<std::vector<std::vector<double>>>();
    if (mean.size() != grid.size() || static_cast<int>(ef.size()) != k ||
        static_cast<int>(coef.size()) != k)
      throw input_error("fpca json: inconsistent sizes");
    Eigen::MatrixXd eigf(k, static_cast<Eigen::Index>(grid.size()));
    for (int q = 0; q < k; ++q) {
      if (ef[static_cast<std::size_t>(q)].size() != grid.size())
        throw input_error("fpca json: eigenfunction length mismatch");
      eigf.row(q) = Eigen::Map<Eigen::RowVectorXd>(ef[static_cast<std::size_t>(q)].data(),
                                                   static_cast<Eigen::Index>(grid.size()));
    }
    return FpcaFit{
        Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
        std::move(eigf),
        Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size())),
        j.at("intercept").get<double>(), k, std::move(grid)};
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("fpca json: ") + e.what());
  }
}

}  // namespace funadd
