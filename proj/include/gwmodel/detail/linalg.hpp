#pragma once

#include "gwmodel/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace gwmodel::detail {

/// Reciprocal-condition cutoff below which a local system is treated as singular.
inline constexpr double kRcondCutoff = 1e-12;

/// Inverse of the weighted cross-product X'WX, computed on the
/// diagonally-scaled matrix so that the conditioning test is unit-free.
struct CrossProductInverse {
  Eigen::MatrixXd inverse;
  double rcond = 0.0;
  bool ok = false;

  /// Condition number of the column-scaled sqrt(W)X (square root of the
  /// scaled cross-product condition).
  double condition_number() const
  {
    return rcond > 0.0 ? std::sqrt(1.0 / rcond) : std::numeric_limits<double>::infinity();
  }
};

inline Eigen::MatrixXd weighted_cross_product(const Eigen::MatrixXd& X, const Eigen::VectorXd& w)
{
  return X.transpose() * w.asDiagonal() * X;
}

inline CrossProductInverse invert_cross_product(const Eigen::MatrixXd& A)
{
  CrossProductInverse out;
  const Eigen::Index p = A.rows();
  Eigen::VectorXd d = A.diagonal();
  if ((d.array() <= 0.0).any() || !d.allFinite()) {
    return out;
  }
  d = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = d.asDiagonal() * A * d.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  if (eig.info() != Eigen::Success) {
    return out;
  }
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double emax = ev(p - 1);
  const double emin = ev(0);
  out.rcond = emax > 0.0 ? std::max(0.0, emin) / emax : 0.0;
  if (!(out.rcond >= kRcondCutoff)) {
    return out;
  }
  const Eigen::MatrixXd& V = eig.eigenvectors();
  const Eigen::MatrixXd scaled_inv = V * ev.cwiseInverse().asDiagonal() * V.transpose();
  out.inverse = d.asDiagonal() * scaled_inv * d.asDiagonal();
  out.ok = true;
  return out;
}

/// R-style (type 7) unweighted quantile of a sample.
inline double sample_quantile(std::vector<double> v, double q)
{
  if (v.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline FiveNumber five_number(const Eigen::VectorXd& x)
{
  std::vector<double> v;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::isfinite(x(i))) {
      v.push_back(x(i));
    }
  }
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan, nan, nan};
  }
  return {*std::min_element(v.begin(), v.end()), sample_quantile(v, 0.25), sample_quantile(v, 0.5),
          sample_quantile(v, 0.75), *std::max_element(v.begin(), v.end())};
}

/// Design matrix with a leading column of ones.
inline Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X)
{
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

} // namespace gwmodel::detail
