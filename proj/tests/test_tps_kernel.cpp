#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "funadd/tps_kernel.hpp"
#include "oracles.hpp"

using namespace funadd;

namespace {
const TpsKernelSpec kSpec{};
}

TEST_CASE("radial profile j_m") {
  CHECK(j_m(1.0, 2) == 0.0);
  CHECK(j_m(0.0, 2) == 0.0);
  const double e = std::exp(1.0);
  CHECK(j_m(e, 2) == doctest::Approx(e * e).epsilon(1e-14));
  CHECK_THROWS_AS(j_m(-0.5, 2), input_error);
}

TEST_CASE("semikernel point values") {
  CHECK(semikernel_point(0.3, 0.4, 0.3, 0.4, kSpec) == 0.0);
  CHECK(semikernel_point(0.0, 0.0, 1.0, 0.0, kSpec) == doctest::Approx(0.0));
  // distance 0.5: 0.25 * ln(0.5)
  CHECK(semikernel_point(0.0, 0.0, 0.3, 0.4, kSpec) ==
        doctest::Approx(0.25 * std::log(0.5)).epsilon(1e-14));
  CHECK(0.25 * std::log(0.5) == doctest::Approx(-0.173287).epsilon(1e-5));
  CHECK_THROWS_AS(semikernel_point(std::nan(""), 0, 0, 0, kSpec), input_error);
}

TEST_CASE("semikernel is symmetric in its two points") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double t = unif(rng), x = unif(rng), s = unif(rng), y = unif(rng);
    CHECK(semikernel_point(t, x, s, y, kSpec) == semikernel_point(s, y, t, x, kSpec));
  }
}

TEST_CASE("sigma for identical curves is a constant block") {
  const TimeGrid g = TimeGrid::uniform(31);
  Eigen::MatrixXd vals(2, 31);
  for (int j = 0; j < 31; ++j) {
    vals(0, j) = 0.3 + 0.2 * std::sin(6.0 * g[static_cast<std::size_t>(j)]);
    vals(1, j) = vals(0, j);
  }
  const CurveDataset ds(g, vals, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd sigma = assemble_sigma(ds, kSpec);
  CHECK(sigma(0, 0) == doctest::Approx(sigma(0, 1)).epsilon(1e-12));
  CHECK(sigma(0, 0) == doctest::Approx(sigma(1, 1)).epsilon(1e-12));
  CHECK(sigma(0, 1) == sigma(1, 0));
}

TEST_CASE("sigma for one constant curve matches the analytic double integral") {
  // X == 0: Sigma_11 = int int (t-s)^2 log|t-s| dt ds = 2*(-1/9 + 1/16) = -7/72
  const TimeGrid g = TimeGrid::uniform(201);
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(201);
  const double s11 = curve_pair_integral(g, z, z, kSpec);
  CHECK(s11 == doctest::Approx(-7.0 / 72.0).epsilon(1e-6));
  CHECK(s11 < 0.0);
}

TEST_CASE("sigma entry for constant curves 0 and 1 vs refined oracle") {
  auto entry = [](std::size_t m) {
    const TimeGrid g = TimeGrid::uniform(m);
    return curve_pair_integral(g, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m)),
                               Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m)), kSpec);
  };
  const double oracle = entry(2001);
  // oracle is converged to well under 1e-6 (2001- vs 4001-point agreement)
  CHECK(std::abs(entry(4001) - oracle) < 1e-6);
  CHECK(std::abs(entry(201) - oracle) < 1e-5);

  // O(h^2) decay: each halving of h cuts the error by ~4
  const double e51 = std::abs(entry(51) - oracle);
  const double e101 = std::abs(entry(101) - oracle);
  const double e201 = std::abs(entry(201) - oracle);
  CHECK(e51 / e101 == doctest::Approx(4.0).epsilon(0.25));
  CHECK(e101 / e201 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("xi column of curve means") {
  const TimeGrid g = TimeGrid::uniform(41);
  Eigen::MatrixXd vals(2, 41);
  vals.row(0).setConstant(0.7);
  for (int j = 0; j < 41; ++j) vals(1, j) = g[static_cast<std::size_t>(j)];
  const CurveDataset ds(g, vals, Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd xi = assemble_xi(ds, kSpec);
  CHECK(xi.rows() == 2);
  CHECK(xi.cols() == 1);
  CHECK(xi(0, 0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(xi(1, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_FALSE(xi_confounded_with_intercept(xi));

  CHECK_THROWS_AS(assemble_xi(ds, TpsKernelSpec{3}), input_error);
}

TEST_CASE("equal-mean curves collapse the xi column onto the intercept") {
  // two distinct curves with identical means: the column is constant, which
  // the diagnostic flags while the QR fit itself stays well posed
  const TimeGrid g = TimeGrid::uniform(41);
  Eigen::MatrixXd vals(3, 41);
  for (int j = 0; j < 41; ++j) {
    const double t = g[static_cast<std::size_t>(j)];
    vals(0, j) = 0.5;
    vals(1, j) = 0.5 + 0.3 * std::cos(2.0 * std::acos(-1.0) * t);  // full period, mean 0.5
    vals(2, j) = 0.5 + 0.1 * std::cos(4.0 * std::acos(-1.0) * t);
  }
  const CurveDataset ds(g, vals, Eigen::VectorXd::Zero(3));
  const Eigen::MatrixXd xi = assemble_xi(ds, kSpec);
  CHECK(xi_confounded_with_intercept(xi, 1e-8));
}

TEST_CASE("sigma is permutation-equivariant") {
  std::mt19937_64 rng(17);
  const CurveDataset ds = oracles::random_dataset(6, 31, rng);
  const Eigen::MatrixXd sigma = assemble_sigma(ds, kSpec);

  const std::vector<int> perm = {4, 2, 0, 5, 1, 3};
  Eigen::MatrixXd pvals(6, 31);
  for (int i = 0; i < 6; ++i) pvals.row(i) = ds.values().row(perm[static_cast<std::size_t>(i)]);
  const CurveDataset pds(ds.grid(), pvals, Eigen::VectorXd::Zero(6));
  const Eigen::MatrixXd psigma = assemble_sigma(pds, kSpec);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      CHECK(psigma(i, j) ==
            doctest::Approx(sigma(perm[static_cast<std::size_t>(i)],
                                  perm[static_cast<std::size_t>(j)])).epsilon(1e-13));
}

TEST_CASE("threaded assembly matches single-threaded") {
  std::mt19937_64 rng(23);
  const CurveDataset ds = oracles::random_dataset(7, 41, rng);
  const Eigen::MatrixXd s1 = assemble_sigma(ds, kSpec, 1);
  const Eigen::MatrixXd s4 = assemble_sigma(ds, kSpec, 4);
  CHECK((s1 - s4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conditional positive semidefiniteness on constrained vectors") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 8 + trial;
    const CurveDataset raw = oracles::random_dataset(n, 41, rng);
    auto [ds, tf] = fit_transform(raw);
    const GramMatrices g = assemble_gram(ds, kSpec);
    const double scale = g.sigma.norm();

    // project random vectors onto {c : 1^T c = 0, Xi^T c = 0}
    Eigen::MatrixXd constraints(n, 2);
    constraints.col(0).setOnes();
    constraints.col(1) = g.xi.col(0);
    const Eigen::MatrixXd q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(constraints).householderQ();
    const Eigen::MatrixXd basis = q.rightCols(n - 2);
    for (int rep = 0; rep < 5; ++rep) {
      Eigen::VectorXd raw_c(n);
      for (int i = 0; i < n; ++i) raw_c[i] = gauss(rng);
      const Eigen::VectorXd c = basis * (basis.transpose() * raw_c);
      CHECK(c.dot(g.sigma * c) >= -1e-8 * c.squaredNorm() * scale);
    }
  }
}

TEST_CASE("sigma cache round trip") {
  std::mt19937_64 rng(31);
  const CurveDataset ds = oracles::random_dataset(5, 21, rng);
  const Eigen::MatrixXd sigma = assemble_sigma(ds, kSpec);
  const std::uint64_t key = sigma_cache_key(ds, kSpec);

  const std::string path = "sigma_cache_test.bin";
  save_sigma_cache(path, key, sigma, kSpec.m);
  Eigen::MatrixXd loaded;
  CHECK(load_sigma_cache(path, key, loaded));
  CHECK((loaded - sigma).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(load_sigma_cache(path, key + 1, loaded));
  CHECK_FALSE(load_sigma_cache("does_not_exist.bin", key, loaded));
  std::remove(path.c_str());

  // key changes with content
  Eigen::MatrixXd vals = ds.values();
  vals(0, 0) += 1e-9;
  const CurveDataset other(ds.grid(), vals, ds.responses());
  CHECK(sigma_cache_key(other, kSpec) != key);
}
