#ifndef FUNADD_FIT_HPP
#define FUNADD_FIT_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "funadd/tps_kernel.hpp"

namespace funadd {

/// Strictly decreasing list of positive lambda values (largest first, so GCV
/// tie-breaking toward the smoother model falls out of a plain argmin scan).
struct LambdaGrid {
  std::vector<double> values;

  static LambdaGrid log_spaced(double lo, double hi, int count);
  static LambdaGrid default_grid() { return log_spaced(1e-8, 1e2, 50); }
  void validate() const;
};

/// Coefficients and diagnostics for one lambda, without dataset references.
struct PenalizedCoefficients {
  Eigen::VectorXd c;     // kernel coefficients, 1^T c = 0 and Xi^T c = 0
  double intercept = 0;  // mean of Y plus the constant null-space coefficient
  double d3 = 0;         // coefficient on the curve-mean column
  double lambda = 0;
  double edf = 0;        // trace of the hat map plus 1 for the intercept
  double gcv = 0;
  Eigen::VectorXd fitted;  // on the training responses
};

/// Shared spectral work for solving the penalized system at many lambdas.
///
/// Responses are centered by their mean, then the kernel coefficients are
/// constrained against the full null-space column span {1, Xi}: the constant
/// columns are absorbed into the intercept for estimation, but dropping the
/// 1^T c = 0 constraint would expose negative directions of the semi-kernel
/// (it is positive definite only conditionally on that span). The kernel
/// block is reduced to S = Q2^T Sigma Q2 with Q2 orthogonal to {1, Xi} and
/// eigendecomposed once, after which each lambda costs O(n^2). A fixed jitter
/// guards eigenvalues of S + n*lambda*I that fall at or below zero (S is
/// positive semidefinite only up to rounding).
class PenalizedSolver {
public:
  PenalizedSolver(const GramMatrices& gram, const Eigen::VectorXd& y);

  PenalizedCoefficients solve(double lambda) const;
  double gcv(double lambda) const;

  /// Hat matrix on centered responses: H = I - n*lambda*Q2*(S+n*lambda*I)^-1*Q2^T.
  /// Fitted values are mean(y) + H * (y - mean(y)).
  Eigen::MatrixXd hat_matrix(double lambda) const;

  Eigen::Index n() const { return n_; }
  double y_mean() const { return y_mean_; }

private:
  Eigen::Index n_;
  double y_mean_;
  Eigen::VectorXd yc_;       // centered responses
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd q1_, q2_;  // from column-pivoted QR of B = [1, Xi]
  Eigen::MatrixXd r_;        // leading rank x rank triangular factor
  Eigen::VectorXi perm_;     // column permutation chosen by the pivoting
  Eigen::Index rank_ = 0;    // 1 when Xi is collinear with the intercept
  Eigen::MatrixXd evecs_;    // eigenvectors of S = Q2^T Sigma Q2
  Eigen::VectorXd evals_;
  Eigen::VectorXd q2ty_;     // Q2^T yc rotated into the eigenbasis
  double jitter_floor_;

  Eigen::VectorXd shrink_diag(double lambda) const;  // 1/(d_k + n*lambda), guarded
};

PenalizedCoefficients solve_penalized(const GramMatrices& gram, const Eigen::VectorXd& y,
                                      double lambda);
Eigen::MatrixXd hat_matrix(const GramMatrices& gram, const Eigen::VectorXd& y, double lambda);
double gcv_score(const GramMatrices& gram, const Eigen::VectorXd& y, double lambda);

/// Scans the grid, returns the minimizing lambda (ties within 1e-12 relative
/// break toward the larger lambda) and the refit at the winner. Lambdas whose
/// edf reaches n get score +infinity and are skipped.
std::pair<double, PenalizedCoefficients> select_lambda(const GramMatrices& gram,
                                                       const Eigen::VectorXd& y,
                                                       const LambdaGrid& grid);

struct FitOptions {
  TpsKernelSpec kernel;
  std::optional<double> fixed_lambda;
  LambdaGrid lambda_grid = LambdaGrid::default_grid();
  int threads = 1;
};

/// Everything needed to predict on new curves.
struct FitResult {
  PenalizedCoefficients coef;
  ValueTransform transform;
  CurveDataset training;  // transformed curves + responses
  TpsKernelSpec kernel;
};

/// Full pipeline on a raw dataset: value transform, Gram assembly, lambda by
/// GCV (or fixed), refit at the winner.
FitResult fit_thinplate(const CurveDataset& raw, const FitOptions& options = {});

/// Prediction for one curve on the raw scale. The curve is interpolated onto
/// the training grid when interp is set (grid mismatch otherwise errors), then
/// mapped through the stored transform with clipping.
double predict(const FitResult& fit, const FunctionalCurve& raw_curve, bool interp = false);
Eigen::VectorXd predict_batch(const FitResult& fit, const CurveDataset& raw, bool interp = false);

/// Fitted surface F(t,x) on a tensor grid; row i is t_grid[i], column j is
/// x_grid[j]. The t-linear null-space direction is unidentifiable after the
/// intercept reduction and enters with coefficient zero.
Eigen::MatrixXd eval_surface(const FitResult& fit, const std::vector<double>& t_grid,
                             const std::vector<double>& x_grid);
std::string surface_to_csv(const FitResult& fit, const std::vector<double>& t_grid,
                           const std::vector<double>& x_grid);

/// JSON round trip; the document carries enough (coefficients, transform,
/// grid, training curves) to reconstruct predictions without the source CSV.
std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(const std::string& text);
void save_fit_json(const FitResult& fit, const std::string& path);
FitResult load_fit_json(const std::string& path);

}  // namespace funadd

#endif  // FUNADD_FIT_HPP
