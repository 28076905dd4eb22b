// Independent reference implementations used by the unit and acceptance
// tests. Everything here is deliberately written against the math, not
// against the library internals: dense solves instead of the QR shortcut,
// and a generic quadratic minimizer instead of the spectral closed form.

#ifndef FUNADD_TESTS_ORACLES_HPP
#define FUNADD_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <random>

#include "funadd/curves.hpp"
#include "funadd/tps_kernel.hpp"

namespace oracles {

// Constraint block of the stationarity system: the intercept column stacked
// with the reduced Xi. The library merges the intercept coefficient into its
// reported intercept, but the system the coefficients satisfy involves both
// columns.
inline Eigen::MatrixXd constraint_columns(const Eigen::MatrixXd& xi) {
  Eigen::MatrixXd b(xi.rows(), xi.cols() + 1);
  b.col(0).setOnes();
  b.rightCols(xi.cols()) = xi;
  return b;
}

struct DenseSolution {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
};

// Literal dense solve of the stationarity system
//   (Sigma + n*lambda*I) c + Xi d = yc
//   Xi^T Sigma c + Xi^T Xi d    = Xi^T yc
// with yc the centered responses.
inline DenseSolution dense_solve(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi,
                                 const Eigen::VectorXd& yc, double lambda) {
  const Eigen::Index n = sigma.rows();
  const Eigen::Index k = xi.cols();
  Eigen::MatrixXd a(n + k, n + k);
  a.topLeftCorner(n, n) = sigma + static_cast<double>(n) * lambda *
                                      Eigen::MatrixXd::Identity(n, n);
  a.topRightCorner(n, k) = xi;
  a.bottomLeftCorner(k, n) = xi.transpose() * sigma;
  a.bottomRightCorner(k, k) = xi.transpose() * xi;
  Eigen::VectorXd rhs(n + k);
  rhs.head(n) = yc;
  rhs.tail(k) = xi.transpose() * yc;
  const Eigen::VectorXd sol = a.fullPivLu().solve(rhs);
  DenseSolution out;
  out.c = sol.head(n);
  out.d = sol.tail(k);
  return out;
}

// (1/n) ||yc - Xi d - Sigma c||^2 + lambda c^T Sigma c
inline double penalized_objective(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi,
                                  const Eigen::VectorXd& yc, double lambda,
                                  const Eigen::VectorXd& c, const Eigen::VectorXd& d) {
  const Eigen::VectorXd resid = yc - xi * d - sigma * c;
  return resid.squaredNorm() / static_cast<double>(yc.size()) +
         lambda * c.dot(sigma * c);
}

struct CgResult {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  double objective = 0;
  bool converged = false;
};

// Generic iterative solution of the first-order conditions of the quadratic
// objective over (c, d3). The raw quadratic is unbounded below off the cone
// where the semi-kernel is conditionally positive definite, so a plain
// descent method diverges along saddle directions; instead we minimize the
// squared gradient norm, whose unique zero is the claimed solution. That is
// conjugate gradients on the (positive semidefinite) normal equations
// A^T A z = A^T b of the gradient system A z = b.
inline CgResult cg_stationary(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi,
                              const Eigen::VectorXd& yc, double lambda, int max_iter = 20000,
                              double tol = 1e-14) {
  const Eigen::Index n = sigma.rows();
  const Eigen::Index k = xi.cols();
  const double dn = static_cast<double>(n);

  // gradient of the objective is A z - b with A symmetric
  auto apply_a = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd c = z.head(n);
    const Eigen::VectorXd sc = sigma * c;
    const Eigen::VectorXd xd = xi * z.tail(k);
    Eigen::VectorXd out(n + k);
    out.head(n) = (2.0 / dn) * (sigma * (sc + xd)) + 2.0 * lambda * sc;
    out.tail(k) = (2.0 / dn) * (xi.transpose() * (sc + xd));
    return out;
  };
  Eigen::VectorXd b(n + k);
  b.head(n) = (2.0 / dn) * (sigma * yc);
  b.tail(k) = (2.0 / dn) * (xi.transpose() * yc);

  const Eigen::VectorXd atb = apply_a(b);  // A^T b = A b (A symmetric)
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n + k);
  Eigen::VectorXd r = atb;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = tol * tol * std::max(1.0, atb.squaredNorm());
  CgResult res;
  for (int it = 0; it < max_iter; ++it) {
    if (rr <= stop) {
      res.converged = true;
      break;
    }
    const Eigen::VectorXd ap = apply_a(apply_a(p));
    const double curv = p.dot(ap);
    if (curv <= 0.0) break;
    const double alpha = rr / curv;
    z += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  res.converged = res.converged || rr <= stop;
  res.c = z.head(n);
  res.d = z.tail(k);
  res.objective = penalized_objective(sigma, xi, yc, lambda, res.c, res.d);
  return res;
}

// Smallest eigenvalue of the kernel block restricted to the complement of the
// Xi column. The semi-kernel is only conditionally positive definite, so this
// can be negative; closed-form identities (and the dense solve) are exact only
// when n*lambda exceeds its magnitude, otherwise the library's jitter guard
// takes over. Tests use this to pick lambdas in the well-posed regime.
inline double reduced_min_eigenvalue(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi) {
  const Eigen::Index n = sigma.rows();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(xi);
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd q2 = q.rightCols(n - xi.cols());
  Eigen::MatrixXd s = q2.transpose() * sigma * q2;
  s = 0.5 * (s + s.transpose()).eval();
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().minCoeff();
}

// Smallest lambda at which the reduced system S + n*lambda*I is safely
// positive definite.
inline double safe_lambda_floor(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& xi,
                                double margin = 0.05) {
  const double min_eig = reduced_min_eigenvalue(sigma, xi);
  return (margin + std::max(0.0, -min_eig)) / static_cast<double>(sigma.rows());
}

// Smooth random curves: low-order cosine series with bounded coefficients.
inline Eigen::MatrixXd random_curves(int n, const funadd::TimeGrid& grid, std::mt19937_64& rng) {
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Eigen::MatrixXd values(n, p);
  for (int i = 0; i < n; ++i) {
    const double a0 = unif(rng), a1 = unif(rng), a2 = unif(rng), a3 = unif(rng);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double t = grid[static_cast<std::size_t>(j)];
      values(i, j) = 0.5 * a0 + 0.4 * a1 * std::cos(3.14159265358979 * t) +
                     0.3 * a2 * std::cos(2 * 3.14159265358979 * t) +
                     0.2 * a3 * std::sin(3 * 3.14159265358979 * t);
    }
  }
  return values;
}

inline funadd::CurveDataset random_dataset(int n, int p, std::mt19937_64& rng,
                                           double noise_sd = 0.3) {
  funadd::TimeGrid grid = funadd::TimeGrid::uniform(static_cast<std::size_t>(p));
  Eigen::MatrixXd values = random_curves(n, grid, rng);
  std::normal_distribution<double> noise(0.0, noise_sd);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd sq = values.row(i).transpose().cwiseProduct(values.row(i).transpose());
    y[i] = funadd::quadrature_1d(sq, grid) + noise(rng);
  }
  return funadd::CurveDataset(std::move(grid), std::move(values), std::move(y));
}

}  // namespace oracles

#endif  // FUNADD_TESTS_ORACLES_HPP
