#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

namespace gwmodel {

enum class McdMethod {
  Automatic,  ///< exhaustive up to the cutoff, FAST-MCD above it
  Exhaustive,
  Fast,
};

struct McdOptions {
  double alpha = 0.75;
  std::uint64_t seed = 42;
  int starts = 500;
  McdMethod method = McdMethod::Automatic;
  Index exhaustive_cutoff = 12;
  int max_csteps = 100;
};

/// Minimum covariance determinant estimate. cov uses the 1/h normalisation.
struct McdEstimate {
  Eigen::VectorXd center;
  Eigen::MatrixXd cov;
  std::vector<Index> subset;
  double determinant = 0.0;
};

inline Index mcd_subset_size(Index rows, double alpha)
{
  return static_cast<Index>(std::ceil(alpha * static_cast<double>(rows) - 1e-9));
}

/// Mixes a seed with a stream index (splitmix64 finaliser).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

struct SubsetStats {
  Eigen::VectorXd center;
  Eigen::MatrixXd cov;
  double det = 0.0;
  bool regular = false;
};

inline SubsetStats subset_stats(const Eigen::MatrixXd& X, const std::vector<Index>& rows)
{
  SubsetStats s;
  const auto h = static_cast<double>(rows.size());
  s.center = Eigen::VectorXd::Zero(X.cols());
  for (Index r : rows) {
    s.center += X.row(r).transpose();
  }
  s.center /= h;
  s.cov = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  for (Index r : rows) {
    const Eigen::VectorXd d = X.row(r).transpose() - s.center;
    s.cov.noalias() += d * d.transpose();
  }
  s.cov /= h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.cov, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double emax = ev(ev.size() - 1);
  s.regular = emax > 0.0 && ev(0) > 1e-12 * emax;
  s.det = s.regular ? ev.prod() : 0.0;
  return s;
}

inline std::vector<Index> closest_subset(const Eigen::MatrixXd& X, const SubsetStats& s, Index h)
{
  const Eigen::LLT<Eigen::MatrixXd> llt(s.cov);
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd d = X.row(i).transpose() - s.center;
    dist[static_cast<std::size_t>(i)] = {d.dot(llt.solve(d)), i};
  }
  std::stable_sort(dist.begin(), dist.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(h));
  for (Index k = 0; k < h; ++k) {
    out.push_back(dist[static_cast<std::size_t>(k)].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline McdEstimate to_estimate(const SubsetStats& s, std::vector<Index> subset)
{
  return McdEstimate{s.center, s.cov, std::move(subset), s.det};
}

inline McdEstimate mcd_exhaustive(const Eigen::MatrixXd& X, Index h)
{
  const Index n = X.rows();
  std::vector<bool> mask(static_cast<std::size_t>(n), false);
  std::fill(mask.begin(), mask.begin() + h, true);
  bool found = false;
  McdEstimate best;
  std::vector<Index> rows;
  do {
    rows.clear();
    for (Index i = 0; i < n; ++i) {
      if (mask[static_cast<std::size_t>(i)]) {
        rows.push_back(i);
      }
    }
    const SubsetStats s = subset_stats(X, rows);
    if (s.regular && (!found || s.det < best.determinant)) {
      best = to_estimate(s, rows);
      found = true;
    }
  } while (std::prev_permutation(mask.begin(), mask.end()));
  if (!found) {
    throw Error(ErrorCode::DegenerateSubset, "every h-subset has a singular covariance");
  }
  return best;
}

// C-steps from an initial estimate until the determinant stops decreasing.
inline std::pair<SubsetStats, std::vector<Index>> concentrate(const Eigen::MatrixXd& X, SubsetStats s, Index h,
                                                             int max_steps)
{
  std::vector<Index> subset;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Index> next = closest_subset(X, s, h);
    if (next == subset) {
      break;
    }
    SubsetStats ns = subset_stats(X, next);
    if (!ns.regular) {
      break;
    }
    const bool improved = subset.empty() || ns.det < s.det;
    if (!improved) {
      break;
    }
    s = std::move(ns);
    subset = std::move(next);
  }
  return {s, subset};
}

inline McdEstimate mcd_fast(const Eigen::MatrixXd& X, Index h, const McdOptions& options)
{
  const Index n = X.rows();
  const Index p = X.cols();
  std::mt19937_64 rng(mix_seed(options.seed, 0));
  auto draw = [&](std::uint64_t bound) { return static_cast<Index>(rng() % bound); };

  bool found = false;
  McdEstimate best;
  auto consider = [&](const SubsetStats& start) {
    auto [s, subset] = concentrate(X, start, h, options.max_csteps);
    if (s.regular && !subset.empty() && (!found || s.det < best.determinant)) {
      best = to_estimate(s, std::move(subset));
      found = true;
    }
  };

  std::vector<Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Index{0});
  if (const SubsetStats full = subset_stats(X, all); full.regular) {
    consider(full);
  }

  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (int start = 0; start < options.starts; ++start) {
    std::iota(perm.begin(), perm.end(), Index{0});
    // grow a random subset from p+1 points until its covariance is regular
    Index size = 0;
    SubsetStats s;
    for (Index k = 0; k < n; ++k) {
      const Index pick = k + draw(static_cast<std::uint64_t>(n - k));
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pick)]);
      size = k + 1;
      if (size < p + 1) {
        continue;
      }
      std::vector<Index> rows(perm.begin(), perm.begin() + size);
      s = subset_stats(X, rows);
      if (s.regular || size >= h) {
        break;
      }
    }
    if (s.regular) {
      consider(s);
    }
  }
  if (!found) {
    throw Error(ErrorCode::DegenerateSubset, "no regular h-subset found");
  }
  return best;
}

} // namespace detail

inline McdEstimate mcd(const Eigen::MatrixXd& X, const McdOptions& options = {})
{
  const Index n = X.rows();
  const Index p = X.cols();
  if (!(options.alpha > 0.5 && options.alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "MCD alpha must lie in (0.5, 1]");
  }
  const Index h = mcd_subset_size(n, options.alpha);
  if (n < p + 1 || h <= p) {
    throw Error(ErrorCode::InsufficientLocalData, "MCD needs h = ceil(alpha*n) > number of variables");
  }
  if (h == n) {
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    const auto s = detail::subset_stats(X, all);
    if (!s.regular) {
      throw Error(ErrorCode::DegenerateSubset, "covariance of all rows is singular");
    }
    return detail::to_estimate(s, std::move(all));
  }
  const bool exhaustive = options.method == McdMethod::Exhaustive
                          || (options.method == McdMethod::Automatic && n <= options.exhaustive_cutoff);
  return exhaustive ? detail::mcd_exhaustive(X, h) : detail::mcd_fast(X, h, options);
}

} // namespace gwmodel
