#pragma once

#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gwmodel {

enum class KernelFamily { Global, Gaussian, Exponential, Boxcar, Bisquare, Tricube };

inline constexpr std::string_view to_string(KernelFamily f) noexcept
{
  switch (f) {
  case KernelFamily::Global: return "global";
  case KernelFamily::Gaussian: return "gaussian";
  case KernelFamily::Exponential: return "exponential";
  case KernelFamily::Boxcar: return "boxcar";
  case KernelFamily::Bisquare: return "bisquare";
  case KernelFamily::Tricube: return "tricube";
  }
  return "unknown";
}

inline KernelFamily parse_kernel(std::string_view name)
{
  for (auto f : {KernelFamily::Global, KernelFamily::Gaussian, KernelFamily::Exponential, KernelFamily::Boxcar,
                 KernelFamily::Bisquare, KernelFamily::Tricube}) {
    if (to_string(f) == name) {
      return f;
    }
  }
  throw Error(ErrorCode::InvalidKernel, "unknown kernel '" + std::string(name) + "'");
}

/// Kernels that give zero weight at and beyond the bandwidth.
inline constexpr bool is_discontinuous(KernelFamily f) noexcept
{
  return f == KernelFamily::Boxcar || f == KernelFamily::Bisquare || f == KernelFamily::Tricube;
}

/// Kernel family plus bandwidth. An adaptive bandwidth is a neighbour count N.
struct KernelSpec {
  KernelFamily family = KernelFamily::Bisquare;
  double bandwidth = 1.0;
  bool adaptive = false;

  KernelSpec with_bandwidth(double b) const { return {family, b, adaptive}; }
  static KernelSpec global() { return {KernelFamily::Global, 1.0, false}; }
};

inline void check(const KernelSpec& spec, Index n)
{
  if (spec.family == KernelFamily::Global) {
    return;
  }
  if (!(spec.bandwidth > 0.0) || !std::isfinite(spec.bandwidth)) {
    throw Error(ErrorCode::InvalidKernel, "bandwidth must be positive and finite");
  }
  if (spec.adaptive) {
    if (spec.bandwidth != std::round(spec.bandwidth)) {
      throw Error(ErrorCode::InvalidKernel, "adaptive bandwidth must be an integer neighbour count");
    }
    if (spec.bandwidth > static_cast<double>(n)) {
      throw Error(ErrorCode::AdaptiveCountExceedsN, "adaptive bandwidth " + std::to_string(spec.bandwidth)
                                                        + " exceeds the " + std::to_string(n) + " data points");
    }
  }
}

/// Weight for distance d under bandwidth b (strict d < b for the truncated kernels).
inline double kernel_weight(double d, double b, KernelFamily family) noexcept
{
  switch (family) {
  case KernelFamily::Global:
    return 1.0;
  case KernelFamily::Gaussian: {
    const double r = d / b;
    return std::exp(-0.5 * r * r);
  }
  case KernelFamily::Exponential:
    return std::exp(-std::abs(d) / b);
  case KernelFamily::Boxcar:
    return std::abs(d) < b ? 1.0 : 0.0;
  case KernelFamily::Bisquare: {
    if (!(std::abs(d) < b)) {
      return 0.0;
    }
    const double r = d / b;
    const double t = 1.0 - r * r;
    return t * t;
  }
  case KernelFamily::Tricube: {
    if (!(std::abs(d) < b)) {
      return 0.0;
    }
    const double r = std::abs(d) / b;
    const double t = 1.0 - r * r * r;
    return t * t * t;
  }
  }
  return 0.0;
}

/// Diagonal of W for one target location.
struct WeightVector {
  Eigen::VectorXd w;
  std::optional<Index> target;
  double effective_bandwidth = 0.0;
};

/// Inflation applied to the N-th neighbour distance so that the N-th point
/// itself survives the strict d < b rule.
inline constexpr double kAdaptiveInflation = 1e-12;

/// Distance to the N-th nearest point (1-based), inflated by kAdaptiveInflation.
inline double adaptive_bandwidth(const Eigen::VectorXd& distances, Index count)
{
  std::vector<double> sorted(distances.data(), distances.data() + distances.size());
  auto nth = sorted.begin() + (count - 1);
  std::nth_element(sorted.begin(), nth, sorted.end());
  const double b = *nth * (1.0 + kAdaptiveInflation);
  return b > 0.0 ? b : std::numeric_limits<double>::min();
}

inline WeightVector weights_for(const Eigen::VectorXd& distances, const KernelSpec& spec,
                                std::optional<Index> target = std::nullopt)
{
  const Index n = distances.size();
  check(spec, n);
  WeightVector out;
  out.target = target;
  if (spec.family == KernelFamily::Global) {
    out.w = Eigen::VectorXd::Ones(n);
    out.effective_bandwidth = std::numeric_limits<double>::infinity();
    return out;
  }
  const double b = spec.adaptive ? adaptive_bandwidth(distances, static_cast<Index>(spec.bandwidth)) : spec.bandwidth;
  out.effective_bandwidth = b;
  out.w.resize(n);
  for (Index j = 0; j < n; ++j) {
    out.w(j) = kernel_weight(distances(j), b, spec.family);
  }
  return out;
}

/// Weights for target i of a distance source.
inline WeightVector local_weights(const DistanceSource& source, Index i, const KernelSpec& spec)
{
  std::optional<Index> target;
  if (source.symmetric()) {
    target = i;
  }
  return weights_for(source.row(i), spec, target);
}

struct BandwidthResult {
  double value = 0.0;
  double score = 0.0;
  std::vector<std::pair<double, double>> trace;
};

struct BandwidthSearchOptions {
  /// Evaluate every integer (adaptive) or a uniform grid (fixed) instead of golden-section.
  bool exhaustive = false;
  int grid_points = 100;
  double relative_tolerance = 1e-3;
};

namespace detail {

inline double score_or_inf(double s) { return std::isfinite(s) ? s : std::numeric_limits<double>::infinity(); }

inline BandwidthResult best_of(std::vector<std::pair<double, double>> trace)
{
  BandwidthResult out;
  bool found = false;
  for (const auto& [b, s] : trace) {
    if (!std::isfinite(s)) {
      continue;
    }
    if (!found || s < out.score || (s == out.score && b < out.value)) {
      out.value = b;
      out.score = s;
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorCode::AllScoresNonFinite, "no bandwidth in the search range gave a finite score");
  }
  out.trace = std::move(trace);
  return out;
}

} // namespace detail

/// Minimises objective(b) over [lo, hi]. Adaptive searches run over integers.
inline BandwidthResult optimize_bandwidth(const std::function<double(double)>& objective, bool adaptive, double lo,
                                          double hi, const BandwidthSearchOptions& options = {})
{
  if (adaptive) {
    lo = std::ceil(lo);
    hi = std::floor(hi);
  }
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::InvalidArgument, "bandwidth search bounds must satisfy lo <= hi");
  }

  std::vector<std::pair<double, double>> trace;
  std::map<double, double> memo;
  auto eval = [&](double b) {
    if (auto it = memo.find(b); it != memo.end()) {
      return it->second;
    }
    double s = std::numeric_limits<double>::infinity();
    try {
      s = detail::score_or_inf(objective(b));
    } catch (const Error& e) {
      // numerical failures at a candidate bandwidth count as infinitely bad
      if (is_validation_error(e.code())) {
        throw;
      }
    }
    memo.emplace(b, s);
    trace.emplace_back(b, s);
    return s;
  };

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;

  if (options.exhaustive) {
    if (adaptive) {
      for (double b = lo; b <= hi; b += 1.0) {
        eval(b);
      }
    } else {
      const int k = std::max(2, options.grid_points);
      for (int i = 0; i < k; ++i) {
        eval(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
      }
    }
    return detail::best_of(std::move(trace));
  }

  eval(lo);
  eval(hi);

  if (adaptive) {
    double a = lo;
    double b = hi;
    while (b - a > 3.0) {
      double c = a + std::round((b - a) * (1.0 - inv_phi));
      double d = a + std::round((b - a) * inv_phi);
      if (d <= c) {
        d = c + 1.0;
      }
      const double fc = eval(c);
      const double fd = eval(d);
      if (std::isinf(fc) && std::isinf(fd)) {
        a = c;
      } else if (fc <= fd) {
        b = d;
      } else {
        a = c;
      }
    }
    for (double k = a; k <= b; k += 1.0) {
      eval(k);
    }
    return detail::best_of(std::move(trace));
  }

  double a = lo;
  double b = hi;
  double c = b - (b - a) * inv_phi;
  double d = a + (b - a) * inv_phi;
  double fc = eval(c);
  double fd = eval(d);
  for (int iter = 0; iter < 200; ++iter) {
    const double scale = std::max(std::abs(a) + std::abs(b), std::numeric_limits<double>::min()) / 2.0;
    if (b - a <= options.relative_tolerance * scale) {
      break;
    }
    const bool go_left = (std::isinf(fc) && std::isinf(fd)) ? false : fc <= fd;
    if (go_left) {
      b = d;
      d = c;
      fd = fc;
      c = b - (b - a) * inv_phi;
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + (b - a) * inv_phi;
      fd = eval(d);
    }
  }
  eval((a + b) / 2.0);
  return detail::best_of(std::move(trace));
}

/// Default search bounds: [max(10, m+2), n] neighbours for adaptive kernels,
/// [min positive distance, max distance] for fixed ones.
inline std::pair<double, double> default_bandwidth_bounds(const DistanceSource& source, bool adaptive,
                                                          Index parameters)
{
  const double n = static_cast<double>(source.points());
  if (adaptive) {
    const double lo = std::min(n, std::max(10.0, static_cast<double>(parameters) + 2.0));
    return {lo, n};
  }
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  Eigen::VectorXd r;
  for (Index i = 0; i < source.targets(); ++i) {
    source.row(i, r);
    for (Index j = 0; j < r.size(); ++j) {
      if (r(j) > 0.0) {
        dmin = std::min(dmin, r(j));
      }
      dmax = std::max(dmax, r(j));
    }
  }
  if (!std::isfinite(dmin)) {
    throw Error(ErrorCode::InvalidArgument, "all points coincide; no fixed bandwidth range exists");
  }
  return {dmin, dmax};
}

} // namespace gwmodel
