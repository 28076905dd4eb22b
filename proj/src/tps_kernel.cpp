#include "funadd/tps_kernel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace funadd {

double j_m(double x, int m) {
  if (x < 0.0) throw input_error("j_m: negative argument");
  if (x == 0.0) return 0.0;
  return std::pow(x, 2 * m - 2) * std::log(x);
}

double semikernel_point(double t, double x, double s, double y, const TpsKernelSpec& spec) {
  spec.validate();
  if (!std::isfinite(t) || !std::isfinite(x) || !std::isfinite(s) || !std::isfinite(y))
    throw input_error("semikernel_point: non-finite input");
  const double d2 = (t - s) * (t - s) + (x - y) * (x - y);
  if (d2 == 0.0) return 0.0;
  // x^(2m-2) log x at x = sqrt(d2) equals d2^(m-1) * log(d2) / 2.
  if (spec.m == 2) return 0.5 * d2 * std::log(d2);
  return 0.5 * std::pow(d2, spec.m - 1) * std::log(d2);
}

namespace {

// Inner accumulation for one row of the double quadrature; d2 and k are
// caller-provided scratch to avoid reallocation in the hot loop.
inline double weighted_row_sum_m2(const Eigen::ArrayXd& d2, const Eigen::ArrayXd& w,
                                  Eigen::ArrayXd& k) {
  k = (d2 > 0.0).select(0.5 * d2 * d2.log(), 0.0);
  return (w * k).sum();
}

}  // namespace

double curve_pair_integral(const TimeGrid& grid, const Eigen::VectorXd& xa,
                           const Eigen::VectorXd& xb, const TpsKernelSpec& spec) {
  spec.validate();
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  if (xa.size() != p || xb.size() != p)
    throw input_error("curve_pair_integral: curve length does not match grid");
  const Eigen::Map<const Eigen::ArrayXd> t(grid.points().data(), p);
  const Eigen::ArrayXd w = grid.quad_weights().array();
  const Eigen::ArrayXd xbv = xb.array();
  Eigen::ArrayXd d2(p), k(p);
  double acc = 0.0;
  if (spec.m == 2) {
    for (Eigen::Index a = 0; a < p; ++a) {
      d2 = (t[a] - t).square() + (xa[a] - xbv).square();
      acc += w[a] * weighted_row_sum_m2(d2, w, k);
    }
  } else {
    const double q = spec.m - 1;
    for (Eigen::Index a = 0; a < p; ++a) {
      d2 = (t[a] - t).square() + (xa[a] - xbv).square();
      k = (d2 > 0.0).select(0.5 * d2.pow(q) * d2.log(), 0.0);
      acc += w[a] * (w * k).sum();
    }
  }
  return acc;
}

Eigen::MatrixXd assemble_sigma(const CurveDataset& dataset, const TpsKernelSpec& spec,
                               int threads) {
  spec.validate();
  const Eigen::Index n = dataset.n();
  if (n == 0) throw input_error("assemble_sigma: empty dataset");
  Eigen::MatrixXd sigma(n, n);

  // Upper triangle (i <= j) flattened into independent work items.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);

  const TimeGrid& grid = dataset.grid();
  const Eigen::MatrixXd& vals = dataset.values();
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    sigma(i, j) = curve_pair_integral(grid, vals.row(i).transpose(), vals.row(j).transpose(), spec);
  });
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) sigma(i, j) = sigma(j, i);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return sigma;
}

Eigen::MatrixXd assemble_xi(const CurveDataset& dataset, const TpsKernelSpec& spec) {
  spec.validate();
  if (spec.m != 2)
    throw input_error("assemble_xi: only thin-plate order m=2 is supported (got m=" +
                      std::to_string(spec.m) + ")");
  const Eigen::Index n = dataset.n();
  Eigen::MatrixXd xi(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    xi(i, 0) = quadrature_1d(Eigen::VectorXd(dataset.values().row(i).transpose()), dataset.grid());
  return xi;
}

bool xi_confounded_with_intercept(const Eigen::MatrixXd& xi, double tol) {
  if (xi.cols() != 1 || xi.rows() == 0) throw input_error("expected single Xi column");
  const double span = xi.col(0).maxCoeff() - xi.col(0).minCoeff();
  return span <= tol * std::max(1.0, xi.col(0).cwiseAbs().maxCoeff());
}

GramMatrices assemble_gram(const CurveDataset& dataset, const TpsKernelSpec& spec, int threads) {
  GramMatrices g;
  g.xi = assemble_xi(dataset, spec);
  g.sigma = assemble_sigma(dataset, spec, threads);
  return g;
}

Eigen::VectorXd cross_kernel_integrals(const CurveDataset& train, const Eigen::VectorXd& new_values,
                                       const TpsKernelSpec& spec) {
  const Eigen::Index n = train.n();
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out[i] =
        curve_pair_integral(train.grid(), new_values, train.values().row(i).transpose(), spec);
  return out;
}

double point_curve_integral(double t, double x, const TimeGrid& grid, const Eigen::VectorXd& xi,
                            const TpsKernelSpec& spec) {
  spec.validate();
  const Eigen::Index p = static_cast<Eigen::Index>(grid.size());
  if (xi.size() != p) throw input_error("point_curve_integral: curve length mismatch");
  const Eigen::Map<const Eigen::ArrayXd> s(grid.points().data(), p);
  const Eigen::ArrayXd w = grid.quad_weights().array();
  Eigen::ArrayXd d2 = (t - s).square() + (x - xi.array()).square();
  Eigen::ArrayXd k(p);
  if (spec.m == 2) return weighted_row_sum_m2(d2, w, k);
  k = (d2 > 0.0).select(0.5 * d2.pow(double(spec.m - 1)) * d2.log(), 0.0);
  return (w * k).sum();
}

std::uint64_t sigma_cache_key(const CurveDataset& dataset, const TpsKernelSpec& spec) {
  std::uint64_t h = fnv1a(&spec.m, sizeof(spec.m));
  h = fnv1a(dataset.grid().points().data(), dataset.grid().points().size() * sizeof(double), h);
  h = fnv1a(dataset.values().data(),
            static_cast<std::size_t>(dataset.values().size()) * sizeof(double), h);
  return h;
}

namespace {
constexpr char kSigmaMagic[8] = {'F', 'A', 'S', 'I', 'G', 'M', 'A', '1'};
}

bool load_sigma_cache(const std::string& path, std::uint64_t key, Eigen::MatrixXd& sigma_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint32_t n = 0, m = 0;
  std::uint64_t stored_key = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&m), sizeof(m));
  in.read(reinterpret_cast<char*>(&stored_key), sizeof(stored_key));
  if (!in || std::memcmp(magic, kSigmaMagic, 8) != 0 || stored_key != key) return false;
  Eigen::MatrixXd sigma(n, n);
  // stored row-major; Sigma is symmetric so the layout swap is harmless,
  // but read into the declared order anyway
  std::vector<double> buf(static_cast<std::size_t>(n) * n);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(double)));
  if (!in) return false;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) sigma(i, j) = buf[static_cast<std::size_t>(i) * n + j];
  sigma_out = std::move(sigma);
  return true;
}

void save_sigma_cache(const std::string& path, std::uint64_t key, const Eigen::MatrixXd& sigma,
                      int m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open sigma cache for writing: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(sigma.rows());
  const std::uint32_t mm = static_cast<std::uint32_t>(m);
  out.write(kSigmaMagic, 8);
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&mm), sizeof(mm));
  out.write(reinterpret_cast<const char*>(&key), sizeof(key));
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j) {
      const double v = sigma(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

}  // namespace funadd
