#ifndef FUNADD_CURVES_HPP
#define FUNADD_CURVES_HPP

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "funadd/common.hpp"

namespace funadd {

/// Ordered sampling times in [0,1]. Trapezoid quadrature weights are
/// precomputed at construction; all types here are immutable once built.
class TimeGrid {
public:
  explicit TimeGrid(std::vector<double> points);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  const std::vector<double>& points() const { return points_; }
  const Eigen::VectorXd& quad_weights() const { return weights_; }

  bool operator==(const TimeGrid& other) const { return points_ == other.points_; }

  static TimeGrid uniform(std::size_t n_points, double lo = 0.0, double hi = 1.0);

private:
  std::vector<double> points_;
  Eigen::VectorXd weights_;
};

/// Composite trapezoid approximation of the integral of f over the grid span.
/// Exact for piecewise-linear f on the grid.
double quadrature_1d(std::span<const double> f_values, const TimeGrid& grid);
double quadrature_1d(const Eigen::VectorXd& f_values, const TimeGrid& grid);

struct FunctionalCurve {
  TimeGrid grid;
  Eigen::VectorXd values;

  FunctionalCurve(TimeGrid g, Eigen::VectorXd v);
};

/// Affine map of curve values into [0,1]. Prediction-time application clips
/// out-of-range values into [0,1] after mapping; lo/hi always come from the
/// training data, never refit.
struct ValueTransform {
  enum class Kind { identity, minmax };

  Kind kind = Kind::identity;
  double lo = 0.0;
  double hi = 1.0;

  double apply(double v) const {
    if (kind == Kind::identity) return v;
    return (v - lo) / (hi - lo);
  }
  double apply_clipped(double v) const {
    double u = apply(v);
    if (u < 0.0) return 0.0;
    if (u > 1.0) return 1.0;
    return u;
  }
  Eigen::VectorXd apply_clipped(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd apply_clipped(const Eigen::MatrixXd& v) const;
};

/// n curves sharing one grid plus responses. Curve i lives in row i of
/// values(). The transform records how the stored values relate to the raw
/// scale (identity until fit_transform has been applied).
class CurveDataset {
public:
  CurveDataset(TimeGrid grid, Eigen::MatrixXd values, Eigen::VectorXd responses,
               ValueTransform transform = {});

  Eigen::Index n() const { return values_.rows(); }
  const TimeGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& values() const { return values_; }
  const Eigen::VectorXd& responses() const { return responses_; }
  const ValueTransform& transform() const { return transform_; }

  FunctionalCurve curve(Eigen::Index i) const;

private:
  TimeGrid grid_;
  Eigen::MatrixXd values_;
  Eigen::VectorXd responses_;
  ValueTransform transform_;
};

/// Pooled min/max transform over all curve values. Degenerate input
/// (max == min) is represented as minmax with lo = v - 0.5, hi = v + 0.5 so
/// every value maps to 0.5 while keeping hi > lo.
ValueTransform make_minmax_transform(const Eigen::MatrixXd& raw_values);

/// Rescales a raw dataset into [0,1] and returns it with the fitted transform.
std::pair<CurveDataset, ValueTransform> fit_transform(const CurveDataset& raw);

/// Applies a stored (training) transform to new data, clipping into [0,1].
CurveDataset apply_transform(const CurveDataset& raw, const ValueTransform& tf);

/// Linear interpolation of a curve onto a new grid; endpoints extended by
/// nearest value.
FunctionalCurve interpolate_to_grid(const FunctionalCurve& curve, const TimeGrid& grid);

/// CSV dataset I/O. Format: first row is the literal `t` followed by the grid
/// points; each later row is the response followed by the curve values.
/// Values are written with 17 significant digits so write/read round-trips
/// bitwise. Missing curve cells (empty or nan) are filled by linear
/// interpolation, nearest value at the ends.
CurveDataset read_csv_dataset(const std::string& path);
void write_csv_dataset(const CurveDataset& dataset, const std::string& path);
std::string dataset_to_csv(const CurveDataset& dataset);
CurveDataset dataset_from_csv(const std::string& text);

/// Content hash of grid, values and responses (transform excluded).
std::uint64_t dataset_content_hash(const CurveDataset& dataset);

}  // namespace funadd

#endif  // FUNADD_CURVES_HPP
