#ifndef FUNADD_BASELINES_HPP
#define FUNADD_BASELINES_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "funadd/fit.hpp"

namespace funadd {

/// Functional linear regression with a second-derivative smoothing penalty:
/// minimize (1/n) sum (Y_i - alpha - integral X_i beta)^2 + lambda * integral (beta'')^2.
/// beta is represented on the training grid; the penalty is the squared
/// second difference scaled by the grid spacing.
struct FlrFit {
  double alpha = 0;
  Eigen::VectorXd beta;  // on the training grid
  double lambda = 0;
  TimeGrid grid;
  double gcv = 0;
  double edf = 0;
};

FlrFit fit_flr_ss(const CurveDataset& dataset, std::optional<double> lambda = std::nullopt,
                  const LambdaGrid& grid = LambdaGrid::default_grid());
double predict_flr(const FlrFit& fit, const FunctionalCurve& curve, bool interp = false);
Eigen::VectorXd predict_flr_batch(const FlrFit& fit, const CurveDataset& dataset,
                                  bool interp = false);

/// Truncated functional-PCA regression: curves are centered, the
/// quadrature-weighted sample covariance is eigendecomposed, and Y is
/// regressed on the first k score vectors plus an intercept. Eigenfunction
/// signs are canonicalized (first weighted component positive) so fits are
/// deterministic.
struct FpcaFit {
  Eigen::VectorXd mean_curve;
  Eigen::MatrixXd eigenfunctions;  // k x p, orthonormal under quadrature weights
  Eigen::VectorXd scores_coef;     // length k
  double intercept = 0;
  int k = 0;
  TimeGrid grid;
};

/// k chosen by 5-fold cross-validation over 1..min(10, n-2) when not given.
FpcaFit fit_fpca(const CurveDataset& dataset, std::optional<int> k = std::nullopt,
                 int cv_folds = 5);
double predict_fpca(const FpcaFit& fit, const FunctionalCurve& curve, bool interp = false);
Eigen::VectorXd predict_fpca_batch(const FpcaFit& fit, const CurveDataset& dataset,
                                   bool interp = false);

std::string flr_to_json(const FlrFit& fit);
FlrFit flr_from_json(const std::string& text);
std::string fpca_to_json(const FpcaFit& fit);
FpcaFit fpca_from_json(const std::string& text);

}  // namespace funadd

#endif  // FUNADD_BASELINES_HPP
