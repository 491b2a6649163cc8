#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/parallel.hpp"
#include "gwmodel/weighting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace gwmodel {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

namespace detail {

inline double weight_sum(const VectorRef& w)
{
  const double s = w.sum();
  if (!(s > 0.0)) {
    throw Error(ErrorCode::ZeroWeightSum, "local weights sum to zero");
  }
  return s;
}

} // namespace detail

inline double gw_mean(const VectorRef& z, const VectorRef& w)
{
  const double sw = detail::weight_sum(w);
  return w.dot(z) / sw;
}

inline double gw_variance(const VectorRef& z, const VectorRef& w)
{
  const double sw = detail::weight_sum(w);
  const double m = w.dot(z) / sw;
  return (w.array() * (z.array() - m).square()).sum() / sw;
}

inline double gw_sd(const VectorRef& z, const VectorRef& w) { return std::sqrt(gw_variance(z, w)); }

inline double gw_covariance(const VectorRef& z, const VectorRef& y, const VectorRef& w)
{
  const double sw = detail::weight_sum(w);
  const double mz = w.dot(z) / sw;
  const double my = w.dot(y) / sw;
  return (w.array() * (z.array() - mz) * (y.array() - my)).sum() / sw;
}

/// Cube root of the third weighted central moment over the GW standard deviation.
inline double gw_skew(const VectorRef& z, const VectorRef& w)
{
  const double sw = detail::weight_sum(w);
  const double m = w.dot(z) / sw;
  const double s = std::sqrt((w.array() * (z.array() - m).square()).sum() / sw);
  if (!(s > 0.0)) {
    throw Error(ErrorCode::DegenerateLocalDistribution, "skew undefined for zero local spread");
  }
  const double m3 = (w.array() * (z.array() - m).cube()).sum() / sw;
  return std::cbrt(m3) / s;
}

/// Coefficient of variation s / m.
inline double gw_cv(const VectorRef& z, const VectorRef& w)
{
  const double m = gw_mean(z, w);
  if (m == 0.0) {
    throw Error(ErrorCode::ZeroMean, "coefficient of variation undefined for zero local mean");
  }
  return gw_sd(z, w) / m;
}

inline double gw_pearson(const VectorRef& z, const VectorRef& y, const VectorRef& w)
{
  const double sz = gw_sd(z, w);
  const double sy = gw_sd(y, w);
  if (!(sz > 0.0) || !(sy > 0.0)) {
    throw Error(ErrorCode::DegenerateLocalDistribution, "correlation undefined for zero local spread");
  }
  return gw_covariance(z, y, w) / (sz * sy);
}

/// Weighted quantiles by interpolating between midpoint cumulative weights.
inline std::vector<double> gw_quantiles(const VectorRef& z, const VectorRef& w, const std::vector<double>& probs)
{
  std::vector<Index> idx;
  for (Index j = 0; j < z.size(); ++j) {
    if (w(j) > 0.0) {
      idx.push_back(j);
    }
  }
  if (idx.empty()) {
    throw Error(ErrorCode::InsufficientLocalData, "no positively weighted data for quantiles");
  }
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return z(a) < z(b); });

  const std::size_t k = idx.size();
  std::vector<double> p(k);
  std::vector<double> v(k);
  double total = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    total += w(idx[t]);
  }
  double cum = 0.0;
  for (std::size_t t = 0; t < k; ++t) {
    const double wt = w(idx[t]);
    cum += wt;
    p[t] = (cum - wt / 2.0) / total;
    v[t] = z(idx[t]);
  }

  std::vector<double> out;
  out.reserve(probs.size());
  for (double q : probs) {
    if (!(q > 0.0 && q < 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "quantile probabilities must lie in (0,1)");
    }
    if (q <= p.front()) {
      out.push_back(v.front());
    } else if (q >= p.back()) {
      out.push_back(v.back());
    } else {
      const auto hi = static_cast<std::size_t>(std::upper_bound(p.begin(), p.end(), q) - p.begin());
      const std::size_t lo = hi - 1;
      const double t = (q - p[lo]) / (p[hi] - p[lo]);
      out.push_back(v[lo] + t * (v[hi] - v[lo]));
    }
  }
  return out;
}

inline double gw_median(const VectorRef& z, const VectorRef& w) { return gw_quantiles(z, w, {0.5})[0]; }

inline double gw_iqr(const VectorRef& z, const VectorRef& w)
{
  const auto q = gw_quantiles(z, w, {0.25, 0.75});
  return q[1] - q[0];
}

/// Quantile imbalance (2*Q2 - Q1 - Q3) / (Q3 - Q1): -1 when the median sits on
/// the first quartile, +1 on the third, 0 when it bisects them.
inline double gw_qi(const VectorRef& z, const VectorRef& w)
{
  const auto q = gw_quantiles(z, w, {0.25, 0.5, 0.75});
  const double iqr = q[2] - q[0];
  if (!(iqr > 0.0)) {
    throw Error(ErrorCode::DegenerateLocalDistribution, "quantile imbalance undefined for zero IQR");
  }
  return (2.0 * q[1] - q[0] - q[2]) / iqr;
}

/// Local weighted mid-ranks in [0,1]; zero-weight points get rank 0.
inline Eigen::VectorXd gw_ranks(const VectorRef& z, const VectorRef& w)
{
  const double total = detail::weight_sum(w);
  std::vector<Index> idx;
  for (Index j = 0; j < z.size(); ++j) {
    if (w(j) > 0.0) {
      idx.push_back(j);
    }
  }
  std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) { return z(a) < z(b); });
  Eigen::VectorXd rank = Eigen::VectorXd::Zero(z.size());
  double below = 0.0;
  std::size_t t = 0;
  while (t < idx.size()) {
    std::size_t u = t;
    double tied = 0.0;
    while (u < idx.size() && z(idx[u]) == z(idx[t])) {
      tied += w(idx[u]);
      ++u;
    }
    const double r = (below + 0.5 * tied) / total;
    for (std::size_t s = t; s < u; ++s) {
      rank(idx[s]) = r;
    }
    below += tied;
    t = u;
  }
  return rank;
}

inline double gw_spearman(const VectorRef& z, const VectorRef& y, const VectorRef& w)
{
  return gw_pearson(gw_ranks(z, w), gw_ranks(y, w), w);
}

struct GwssVariable {
  std::string name;
  Eigen::VectorXd mean, sd, variance, skew, cv;
  // filled when quantiles are requested
  Eigen::VectorXd median, iqr, qi;
};

struct GwssPair {
  std::string first, second;
  Eigen::VectorXd covariance, pearson, spearman;
};

/// Per-location summary statistics. Statistics that are undefined at a
/// location (zero local spread, zero local mean) are stored as NaN.
struct GwssResult {
  std::vector<GwssVariable> variables;
  std::vector<GwssPair> pairs;
  bool quantiles = false;
  KernelSpec kernel;
};

namespace detail {

template <typename Fn>
double or_nan(Fn&& fn)
{
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateLocalDistribution || e.code() == ErrorCode::ZeroMean) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    throw;
  }
}

} // namespace detail

inline GwssResult gwss(const SpatialDataset& ds, const std::vector<std::string>& vars, const KernelSpec& kernel,
                       const DistanceSource& source, bool include_quantiles)
{
  validate(ds);
  if (vars.empty()) {
    throw Error(ErrorCode::InvalidSelection, "no variables selected");
  }
  validate(ds, VariableSelection{std::nullopt, vars});
  if (source.points() != ds.size()) {
    throw Error(ErrorCode::InvalidArgument, "distance source does not match the dataset");
  }
  check(kernel, ds.size());

  const Eigen::MatrixXd X = ds.columns(vars);
  const Index r = source.targets();
  const auto m = static_cast<Index>(vars.size());

  GwssResult out;
  out.quantiles = include_quantiles;
  out.kernel = kernel;
  for (const auto& v : vars) {
    GwssVariable g;
    g.name = v;
    for (auto* vec : {&g.mean, &g.sd, &g.variance, &g.skew, &g.cv}) {
      vec->resize(r);
    }
    if (include_quantiles) {
      for (auto* vec : {&g.median, &g.iqr, &g.qi}) {
        vec->resize(r);
      }
    }
    out.variables.push_back(std::move(g));
  }
  for (Index a = 0; a < m; ++a) {
    for (Index b = a + 1; b < m; ++b) {
      GwssPair p;
      p.first = vars[static_cast<std::size_t>(a)];
      p.second = vars[static_cast<std::size_t>(b)];
      p.covariance.resize(r);
      p.pearson.resize(r);
      p.spearman.resize(r);
      out.pairs.push_back(std::move(p));
    }
  }

  parallel_for(r, [&](std::ptrdiff_t i) {
    const WeightVector wv = local_weights(source, i, kernel);
    const auto& w = wv.w;
    for (Index j = 0; j < m; ++j) {
      auto& g = out.variables[static_cast<std::size_t>(j)];
      const auto z = X.col(j);
      g.mean(i) = gw_mean(z, w);
      g.variance(i) = gw_variance(z, w);
      g.sd(i) = std::sqrt(g.variance(i));
      g.skew(i) = detail::or_nan([&] { return gw_skew(z, w); });
      g.cv(i) = detail::or_nan([&] { return gw_cv(z, w); });
      if (include_quantiles) {
        const auto q = gw_quantiles(z, w, {0.25, 0.5, 0.75});
        g.median(i) = q[1];
        g.iqr(i) = q[2] - q[0];
        g.qi(i) = q[2] > q[0] ? (2.0 * q[1] - q[0] - q[2]) / (q[2] - q[0]) : std::numeric_limits<double>::quiet_NaN();
      }
    }
    std::size_t k = 0;
    for (Index a = 0; a < m; ++a) {
      for (Index b = a + 1; b < m; ++b, ++k) {
        auto& p = out.pairs[k];
        p.covariance(i) = gw_covariance(X.col(a), X.col(b), w);
        p.pearson(i) = detail::or_nan([&] { return gw_pearson(X.col(a), X.col(b), w); });
        p.spearman(i) = detail::or_nan([&] { return gw_spearman(X.col(a), X.col(b), w); });
      }
    }
  });
  return out;
}

} // namespace gwmodel
