#ifndef FUNADD_TPS_KERNEL_HPP
#define FUNADD_TPS_KERNEL_HPP

#include <Eigen/Dense>
#include <string>

#include "funadd/curves.hpp"

namespace funadd {

/// Thin-plate spline order. Fitting is implemented for m = 2 only; larger
/// orders are rejected rather than approximated.
struct TpsKernelSpec {
  int m = 2;

  int null_dim() const { return m * (m + 1) / 2; }
  void validate() const {
    if (m < 2) throw input_error("TpsKernelSpec: order m must be >= 2");
  }
};

/// Radial semi-kernel profile x^(2m-2) * log(x), continued by 0 at x = 0.
double j_m(double x, int m);

/// j_m of the Euclidean distance between (t,x) and (s,y).
double semikernel_point(double t, double x, double s, double y, const TpsKernelSpec& spec);

/// Sigma and the reduced design matrix Xi of the penalized system. The m=2
/// null-space columns for xi_1 = 1 and xi_2 = t integrate to the constants 1
/// and 1/2 for every curve, so both are absorbed into a separately estimated
/// intercept and only the xi_3 column (curve means) is kept.
struct GramMatrices {
  Eigen::MatrixXd sigma;  // n x n, symmetric
  Eigen::MatrixXd xi;     // n x 1 after reduction
};

/// Double trapezoid quadrature of the semi-kernel along two curves:
/// integral over t,s of j_m(sqrt((t-s)^2 + (xa(t)-xb(s))^2)).
double curve_pair_integral(const TimeGrid& grid, const Eigen::VectorXd& xa,
                           const Eigen::VectorXd& xb, const TpsKernelSpec& spec);

/// Sigma_ij = curve_pair_integral(X_i, X_j); only the upper triangle is
/// computed, then the matrix is symmetrized by averaging with its transpose.
Eigen::MatrixXd assemble_sigma(const CurveDataset& dataset, const TpsKernelSpec& spec,
                               int threads = 1);

/// Column of curve means (m = 2 only).
Eigen::MatrixXd assemble_xi(const CurveDataset& dataset, const TpsKernelSpec& spec);

/// True when the curve-mean column is (numerically) constant, i.e. every
/// curve shares one mean value and the column is collinear with the
/// intercept. The fit still proceeds (the constraint degrades to 1^T c = 0
/// and the d3 term acts as a constant offset); this flags the situation for
/// diagnostics.
bool xi_confounded_with_intercept(const Eigen::MatrixXd& xi, double tol = 1e-10);

GramMatrices assemble_gram(const CurveDataset& dataset, const TpsKernelSpec& spec,
                           int threads = 1);

/// Kernel integrals of one new curve (already transformed, on the training
/// grid) against every training curve; entry i feeds the c_i term of the
/// prediction formula.
Eigen::VectorXd cross_kernel_integrals(const CurveDataset& train, const Eigen::VectorXd& new_values,
                                       const TpsKernelSpec& spec);

/// Single s-integral for surface evaluation:
/// integral over s of j_m(sqrt((t-s)^2 + (x - xi(s))^2)).
double point_curve_integral(double t, double x, const TimeGrid& grid, const Eigen::VectorXd& xi,
                            const TpsKernelSpec& spec);

/// Binary Sigma cache: magic, n, m, content key, then row-major doubles
/// (little-endian). load returns false on missing file or key mismatch.
std::uint64_t sigma_cache_key(const CurveDataset& dataset, const TpsKernelSpec& spec);
bool load_sigma_cache(const std::string& path, std::uint64_t key, Eigen::MatrixXd& sigma_out);
void save_sigma_cache(const std::string& path, std::uint64_t key, const Eigen::MatrixXd& sigma,
                      int m);

}  // namespace funadd

#endif  // FUNADD_TPS_KERNEL_HPP
