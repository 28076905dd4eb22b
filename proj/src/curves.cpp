#include "funadd/curves.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace funadd {

namespace {

Eigen::VectorXd trapezoid_weights(const std::vector<double>& t) {
  const std::size_t p = t.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i + 1 < p; ++i) {
    const double h = t[i + 1] - t[i];
    w[static_cast<Eigen::Index>(i)] += 0.5 * h;
    w[static_cast<Eigen::Index>(i + 1)] += 0.5 * h;
  }
  return w;
}

}  // namespace

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw input_error("TimeGrid: need at least 2 points");
  if (points_.front() < 0.0 || points_.back() > 1.0)
    throw input_error("TimeGrid: points must lie in [0,1]");
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    if (!(points_[i] < points_[i + 1]))
      throw input_error("TimeGrid: points must be strictly increasing (index " +
                        std::to_string(i + 1) + ")");
  }
  for (double v : points_)
    if (!std::isfinite(v)) throw input_error("TimeGrid: non-finite point");
  weights_ = trapezoid_weights(points_);
}

TimeGrid TimeGrid::uniform(std::size_t n_points, double lo, double hi) {
  if (n_points < 2) throw input_error("TimeGrid::uniform: need at least 2 points");
  std::vector<double> pts(n_points);
  for (std::size_t i = 0; i < n_points; ++i)
    pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
  pts.back() = hi;  // avoid rounding past the endpoint
  return TimeGrid(std::move(pts));
}

double quadrature_1d(std::span<const double> f_values, const TimeGrid& grid) {
  if (f_values.size() != grid.size())
    throw input_error("quadrature_1d: length mismatch (" + std::to_string(f_values.size()) +
                      " values vs " + std::to_string(grid.size()) + " grid points)");
  const Eigen::VectorXd& w = grid.quad_weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < f_values.size(); ++i)
    acc += w[static_cast<Eigen::Index>(i)] * f_values[i];
  return acc;
}

double quadrature_1d(const Eigen::VectorXd& f_values, const TimeGrid& grid) {
  if (static_cast<std::size_t>(f_values.size()) != grid.size())
    throw input_error("quadrature_1d: length mismatch");
  return grid.quad_weights().dot(f_values);
}

FunctionalCurve::FunctionalCurve(TimeGrid g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.size()) != grid.size())
    throw input_error("FunctionalCurve: values length does not match grid");
  if (!values.allFinite()) throw input_error("FunctionalCurve: non-finite value");
}

Eigen::VectorXd ValueTransform::apply_clipped(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = apply_clipped(v[i]);
  return out;
}

Eigen::MatrixXd ValueTransform::apply_clipped(const Eigen::MatrixXd& v) const {
  Eigen::MatrixXd out(v.rows(), v.cols());
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) out(i, j) = apply_clipped(v(i, j));
  return out;
}

CurveDataset::CurveDataset(TimeGrid grid, Eigen::MatrixXd values, Eigen::VectorXd responses,
                           ValueTransform transform)
    : grid_(std::move(grid)),
      values_(std::move(values)),
      responses_(std::move(responses)),
      transform_(transform) {
  if (static_cast<std::size_t>(values_.cols()) != grid_.size())
    throw input_error("CurveDataset: curve length does not match grid");
  if (responses_.size() != values_.rows())
    throw input_error("CurveDataset: responses length does not match curve count");
  if (!values_.allFinite()) throw input_error("CurveDataset: non-finite curve value");
  if (!responses_.allFinite()) throw input_error("CurveDataset: non-finite response");
  if (transform_.kind == ValueTransform::Kind::minmax && !(transform_.hi > transform_.lo))
    throw input_error("CurveDataset: minmax transform requires hi > lo");
}

FunctionalCurve CurveDataset::curve(Eigen::Index i) const {
  if (i < 0 || i >= n()) throw input_error("CurveDataset::curve: index out of range");
  return FunctionalCurve(grid_, values_.row(i).transpose());
}

ValueTransform make_minmax_transform(const Eigen::MatrixXd& raw_values) {
  if (raw_values.size() == 0) throw input_error("make_minmax_transform: empty input");
  const double lo = raw_values.minCoeff();
  const double hi = raw_values.maxCoeff();
  ValueTransform tf;
  tf.kind = ValueTransform::Kind::minmax;
  if (hi > lo) {
    tf.lo = lo;
    tf.hi = hi;
  } else {
    // Degenerate dataset: map everything to 0.5.
    tf.lo = lo - 0.5;
    tf.hi = lo + 0.5;
  }
  return tf;
}

std::pair<CurveDataset, ValueTransform> fit_transform(const CurveDataset& raw) {
  if (raw.n() == 0) throw input_error("fit_transform: empty dataset");
  ValueTransform tf = make_minmax_transform(raw.values());
  Eigen::MatrixXd scaled = tf.apply_clipped(raw.values());
  return {CurveDataset(raw.grid(), std::move(scaled), raw.responses(), tf), tf};
}

CurveDataset apply_transform(const CurveDataset& raw, const ValueTransform& tf) {
  return CurveDataset(raw.grid(), tf.apply_clipped(raw.values()), raw.responses(), tf);
}

FunctionalCurve interpolate_to_grid(const FunctionalCurve& curve, const TimeGrid& grid) {
  if (curve.grid == grid) return curve;
  const std::vector<double>& src = curve.grid.points();
  Eigen::VectorXd out(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    if (t <= src.front()) {
      out[static_cast<Eigen::Index>(i)] = curve.values[0];
    } else if (t >= src.back()) {
      out[static_cast<Eigen::Index>(i)] = curve.values[curve.values.size() - 1];
    } else {
      auto it = std::upper_bound(src.begin(), src.end(), t);
      const std::size_t hi = static_cast<std::size_t>(it - src.begin());
      const std::size_t lo = hi - 1;
      const double a = (t - src[lo]) / (src[hi] - src[lo]);
      out[static_cast<Eigen::Index>(i)] =
          (1.0 - a) * curve.values[static_cast<Eigen::Index>(lo)] +
          a * curve.values[static_cast<Eigen::Index>(hi)];
    }
  }
  return FunctionalCurve(grid, std::move(out));
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Parses one CSV cell; empty or "nan" becomes NaN (to be interpolated later).
double parse_cell(const std::string& cell, std::size_t row, std::size_t col, bool allow_missing) {
  std::string s = cell;
  // trim
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) s.clear();
  else s = s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  if (s.empty() || s == "nan" || s == "NaN" || s == "NA") {
    if (allow_missing) return std::numeric_limits<double>::quiet_NaN();
    throw input_error("csv parse error: missing value at row " + std::to_string(row + 1) +
                      ", column " + std::to_string(col + 1));
  }
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw input_error("csv parse error: non-numeric cell '" + s + "' at row " +
                      std::to_string(row + 1) + ", column " + std::to_string(col + 1));
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

// Fills NaN runs in a curve row by linear interpolation in t; leading and
// trailing gaps take the nearest observed value.
void fill_missing(Eigen::Ref<Eigen::RowVectorXd> row, const std::vector<double>& t,
                  std::size_t csv_row) {
  const Eigen::Index p = row.size();
  Eigen::Index first = -1, last = -1;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!std::isnan(row[j])) {
      if (first < 0) first = j;
      last = j;
    }
  }
  if (first < 0)
    throw input_error("csv parse error: row " + std::to_string(csv_row + 1) +
                      " has no observed values");
  for (Eigen::Index j = 0; j < first; ++j) row[j] = row[first];
  for (Eigen::Index j = last + 1; j < p; ++j) row[j] = row[last];
  Eigen::Index j = first;
  while (j <= last) {
    if (std::isnan(row[j])) {
      Eigen::Index k = j;
      while (std::isnan(row[k])) ++k;  // k <= last by construction
      const Eigen::Index a = j - 1;
      for (Eigen::Index q = j; q < k; ++q) {
        const double frac = (t[static_cast<std::size_t>(q)] - t[static_cast<std::size_t>(a)]) /
                            (t[static_cast<std::size_t>(k)] - t[static_cast<std::size_t>(a)]);
        row[q] = (1.0 - frac) * row[a] + frac * row[k];
      }
      j = k;
    } else {
      ++j;
    }
  }
}

}  // namespace

std::string dataset_to_csv(const CurveDataset& dataset) {
  std::ostringstream out;
  out << "t";
  for (double t : dataset.grid().points()) out << "," << format_double(t);
  out << "\n";
  for (Eigen::Index i = 0; i < dataset.n(); ++i) {
    out << format_double(dataset.responses()[i]);
    for (Eigen::Index j = 0; j < dataset.values().cols(); ++j)
      out << "," << format_double(dataset.values()(i, j));
    out << "\n";
  }
  return out.str();
}

CurveDataset dataset_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw input_error("csv parse error: empty file");
  std::vector<std::string> header = split_csv_line(line);
  if (header.empty() || header[0] != "t")
    throw input_error("csv parse error: header must start with literal 't'");
  if (header.size() < 3) throw input_error("csv parse error: need at least 2 grid points");

  std::vector<double> grid_pts;
  grid_pts.reserve(header.size() - 1);
  for (std::size_t j = 1; j < header.size(); ++j)
    grid_pts.push_back(parse_cell(header[j], 0, j, false));
  for (std::size_t j = 0; j + 1 < grid_pts.size(); ++j)
    if (!(grid_pts[j] < grid_pts[j + 1]))
      throw input_error("csv parse error: grid not increasing at header column " +
                        std::to_string(j + 2));
  TimeGrid grid(grid_pts);

  const std::size_t p = grid.size();
  std::vector<double> responses;
  std::vector<Eigen::RowVectorXd> rows;
  std::size_t row_idx = 1;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      ++row_idx;
      continue;
    }
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != p + 1)
      throw input_error("csv parse error: row " + std::to_string(row_idx + 1) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(p + 1));
    responses.push_back(parse_cell(cells[0], row_idx, 0, false));
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j)
      row[static_cast<Eigen::Index>(j)] = parse_cell(cells[j + 1], row_idx, j + 1, true);
    fill_missing(row, grid.points(), row_idx);
    rows.push_back(std::move(row));
    ++row_idx;
  }
  if (rows.empty()) throw input_error("csv parse error: no data rows");

  Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) values.row(static_cast<Eigen::Index>(i)) = rows[i];
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(responses.data(),
                                                  static_cast<Eigen::Index>(responses.size()));
  return CurveDataset(std::move(grid), std::move(values), std::move(y));
}

CurveDataset read_csv_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open dataset file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str());
}

void write_csv_dataset(const CurveDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw input_error("cannot open output file: " + path);
  out << dataset_to_csv(dataset);
}

std::uint64_t dataset_content_hash(const CurveDataset& dataset) {
  std::uint64_t h = fnv1a(dataset.grid().points().data(),
                          dataset.grid().points().size() * sizeof(double));
  h = fnv1a(dataset.values().data(),
            static_cast<std::size_t>(dataset.values().size()) * sizeof(double), h);
  h = fnv1a(dataset.responses().data(),
            static_cast<std::size_t>(dataset.responses().size()) * sizeof(double), h);
  return h;
}

}  // namespace funadd
