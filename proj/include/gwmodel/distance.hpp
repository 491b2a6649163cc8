#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <variant>

namespace gwmodel {

/// WGS84 equatorial radius in meters.
inline constexpr double kEarthRadiusMeters = 6378137.0;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct DistanceSpec {
  enum class Metric { Minkowski, GreatCircle };

  Metric metric = Metric::Minkowski;
  double power = 2.0;
  double radius = kEarthRadiusMeters;

  static DistanceSpec euclidean() { return {}; }
  static DistanceSpec minkowski(double p) { return {Metric::Minkowski, p, kEarthRadiusMeters}; }
  static DistanceSpec great_circle(double radius = kEarthRadiusMeters)
  {
    return {Metric::GreatCircle, 2.0, radius};
  }
  /// Euclidean for projected data, great-circle for geographic data.
  static DistanceSpec for_dataset(const SpatialDataset& ds)
  {
    return ds.geographic() ? great_circle() : euclidean();
  }
};

inline void check(const DistanceSpec& spec)
{
  if (spec.metric == DistanceSpec::Metric::Minkowski && !(spec.power >= 1.0)) {
    throw Error(ErrorCode::InvalidPower, "Minkowski power must be >= 1, got " + std::to_string(spec.power));
  }
  if (spec.metric == DistanceSpec::Metric::GreatCircle && !(spec.radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sphere radius must be positive");
  }
}

namespace detail {

// Haversine on a sphere; inputs are (lon, lat) in degrees.
inline double haversine(Point a, Point b, double radius)
{
  constexpr double rad = std::numbers::pi / 180.0;
  const double lat1 = a.y * rad;
  const double lat2 = b.y * rad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.x - a.x) * rad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = std::min(1.0, s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2);
  return 2.0 * radius * std::asin(std::sqrt(h));
}

inline double minkowski(Point a, Point b, double p)
{
  const double dx = std::abs(a.x - b.x);
  const double dy = std::abs(a.y - b.y);
  if (p == 2.0) {
    return std::sqrt(dx * dx + dy * dy);
  }
  if (p == 1.0) {
    return dx + dy;
  }
  if (std::isinf(p)) {
    return std::max(dx, dy);
  }
  return std::pow(std::pow(dx, p) + std::pow(dy, p), 1.0 / p);
}

inline double distance_unchecked(Point a, Point b, const DistanceSpec& spec)
{
  return spec.metric == DistanceSpec::Metric::GreatCircle ? haversine(a, b, spec.radius)
                                                          : minkowski(a, b, spec.power);
}

} // namespace detail

inline double distance(Point a, Point b, const DistanceSpec& spec)
{
  check(spec);
  return detail::distance_unchecked(a, b, spec);
}

/// Row i holds the distances from target point i to every data point.
struct DistanceMatrix {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
  bool symmetric = false;
};

inline Point point_at(const Coords& c, Index i) { return {c(i, 0), c(i, 1)}; }

inline DistanceMatrix dist_matrix(const Coords& dp, const Coords* rp, const DistanceSpec& spec)
{
  check(spec);
  if (dp.rows() == 0) {
    throw Error(ErrorCode::EmptyDataset, "no data points");
  }
  const Coords& targets = rp ? *rp : dp;
  DistanceMatrix out;
  out.symmetric = (rp == nullptr);
  out.values.resize(targets.rows(), dp.rows());
  parallel_for(targets.rows(), [&](std::ptrdiff_t i) {
    const Point t = point_at(targets, i);
    for (Index j = 0; j < dp.rows(); ++j) {
      out.values(i, j) = detail::distance_unchecked(t, point_at(dp, j), spec);
    }
  });
  return out;
}

inline DistanceMatrix dist_matrix(const Coords& dp, const DistanceSpec& spec) { return dist_matrix(dp, nullptr, spec); }

inline DistanceMatrix dist_matrix(const Coords& dp, const Coords& rp, const DistanceSpec& spec)
{
  return dist_matrix(dp, &rp, spec);
}

/// Row-wise access to target-to-data distances, either from a materialized
/// matrix or computed on demand from coordinates. Both give identical values.
class DistanceSource {
public:
  /// Targets are the data points themselves.
  static DistanceSource among(const Coords& data, const DistanceSpec& spec)
  {
    check(spec);
    DistanceSource s;
    s.impl_ = Streaming{std::make_shared<const Coords>(data), nullptr, spec};
    return s;
  }

  static DistanceSource between(const Coords& data, const Coords& targets, const DistanceSpec& spec)
  {
    check(spec);
    DistanceSource s;
    s.impl_ = Streaming{std::make_shared<const Coords>(data), std::make_shared<const Coords>(targets), spec};
    return s;
  }

  static DistanceSource from_matrix(DistanceMatrix m)
  {
    DistanceSource s;
    s.impl_ = std::make_shared<const DistanceMatrix>(std::move(m));
    return s;
  }

  Index targets() const
  {
    if (auto* m = std::get_if<Matrix>(&impl_)) {
      return (*m)->values.rows();
    }
    const auto& st = std::get<Streaming>(impl_);
    return st.targets ? st.targets->rows() : st.data->rows();
  }

  Index points() const
  {
    if (auto* m = std::get_if<Matrix>(&impl_)) {
      return (*m)->values.cols();
    }
    return std::get<Streaming>(impl_).data->rows();
  }

  /// True when target i is data point i.
  bool symmetric() const
  {
    if (auto* m = std::get_if<Matrix>(&impl_)) {
      return (*m)->symmetric;
    }
    return std::get<Streaming>(impl_).targets == nullptr;
  }

  void row(Index i, Eigen::VectorXd& out) const
  {
    out.resize(points());
    if (auto* m = std::get_if<Matrix>(&impl_)) {
      out = (*m)->values.row(i).transpose();
      return;
    }
    const auto& st = std::get<Streaming>(impl_);
    const Point t = point_at(st.targets ? *st.targets : *st.data, i);
    for (Index j = 0; j < st.data->rows(); ++j) {
      out(j) = detail::distance_unchecked(t, point_at(*st.data, j), st.spec);
    }
  }

  Eigen::VectorXd row(Index i) const
  {
    Eigen::VectorXd out;
    row(i, out);
    return out;
  }

  DistanceMatrix materialize() const
  {
    DistanceMatrix out;
    out.symmetric = symmetric();
    out.values.resize(targets(), points());
    parallel_for(targets(), [&](std::ptrdiff_t i) {
      Eigen::VectorXd r;
      row(i, r);
      out.values.row(i) = r.transpose();
    });
    return out;
  }

private:
  struct Streaming {
    std::shared_ptr<const Coords> data;
    std::shared_ptr<const Coords> targets;
    DistanceSpec spec;
  };
  using Matrix = std::shared_ptr<const DistanceMatrix>;

  std::variant<Streaming, Matrix> impl_;
};

// Binary cache: "GWDM", u32 rows, u32 cols, u8 symmetric, then rows*cols
// float64 values in row-major order; everything little-endian.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value)
{
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& is)
{
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw Error(ErrorCode::ParseError, "truncated distance cache");
  }
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

} // namespace detail

inline void write_distance_cache(std::ostream& os, const DistanceMatrix& m)
{
  if (m.values.rows() > std::numeric_limits<std::uint32_t>::max()
      || m.values.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::InvalidArgument, "distance matrix too large for cache format");
  }
  os.write("GWDM", 4);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.values.rows()));
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(m.values.cols()));
  detail::write_le<std::uint8_t>(os, m.symmetric ? 1 : 0);
  for (Index i = 0; i < m.values.rows(); ++i) {
    for (Index j = 0; j < m.values.cols(); ++j) {
      detail::write_le<double>(os, m.values(i, j));
    }
  }
  if (!os) {
    throw Error(ErrorCode::IoError, "failed to write distance cache");
  }
}

inline DistanceMatrix read_distance_cache(std::istream& is)
{
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, "GWDM", 4) != 0) {
    throw Error(ErrorCode::ParseError, "not a GWDM distance cache");
  }
  const auto rows = detail::read_le<std::uint32_t>(is);
  const auto cols = detail::read_le<std::uint32_t>(is);
  const auto sym = detail::read_le<std::uint8_t>(is);
  DistanceMatrix m;
  m.symmetric = sym != 0;
  m.values.resize(rows, cols);
  for (Index i = 0; i < m.values.rows(); ++i) {
    for (Index j = 0; j < m.values.cols(); ++j) {
      const double v = detail::read_le<double>(is);
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::ParseError, "distance cache holds an invalid distance");
      }
      m.values(i, j) = v;
    }
  }
  return m;
}

inline void write_distance_cache(const std::string& path, const DistanceMatrix& m)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  }
  write_distance_cache(os, m);
}

inline DistanceMatrix read_distance_cache(const std::string& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  }
  return read_distance_cache(is);
}

} // namespace gwmodel
