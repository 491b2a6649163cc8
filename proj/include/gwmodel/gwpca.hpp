#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/gwss.hpp"
#include "gwmodel/mcd.hpp"
#include "gwmodel/parallel.hpp"
#include "gwmodel/weighting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gwmodel {

/// Weighted covariance about the GW means: sum_j w_j (x_j - m)(x_j - m)' / sum w.
inline Eigen::MatrixXd local_covariance(const Eigen::MatrixXd& X, const VectorRef& w, Eigen::VectorXd* center = nullptr)
{
  const double sw = detail::weight_sum(w);
  const Eigen::VectorXd mean = (X.transpose() * w) / sw;
  const Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * w.asDiagonal() * centered / sw;
  cov = 0.5 * (cov + cov.transpose()).eval();
  if (center) {
    *center = mean;
  }
  return cov;
}

struct GwpcaOptions {
  /// Components used for reporting and cross-validation; 0 means all.
  Index k = 0;
  bool robust = false;
  double alpha = 0.75;
  std::uint64_t seed = 42;
};

struct GwpcaResult {
  std::vector<std::string> variables;
  /// Row i: local eigenvalues in descending order.
  Eigen::MatrixXd eigenvalues;
  /// Entry i: local eigenvectors as columns, matching eigenvalues row i.
  std::vector<Eigen::MatrixXd> loadings;
  /// Row i: local centre (GW mean, or MCD centre when robust).
  Eigen::MatrixXd centers;
  /// Column k-1 holds PTV(k), the percentage of variance in the first k components.
  Eigen::MatrixXd ptv;
  KernelSpec kernel;
  bool robust = false;
  Index k = 0;

  bool has_scores() const { return scores_.has_value(); }

  /// Component scores; only available at observed locations.
  const Eigen::MatrixXd& scores() const
  {
    if (!scores_) {
      throw Error(ErrorCode::ScoresUnavailable, "component scores cannot be computed at unobserved locations");
    }
    return *scores_;
  }

  std::optional<Eigen::MatrixXd> scores_;
};

namespace detail {

struct LocalPca {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  Eigen::VectorXd center;
};

// Flip each eigenvector so that its largest-magnitude element is positive.
inline void fix_signs(Eigen::MatrixXd& V)
{
  for (Index c = 0; c < V.cols(); ++c) {
    Index arg = 0;
    for (Index r = 1; r < V.rows(); ++r) {
      if (std::abs(V(r, c)) > std::abs(V(arg, c))) {
        arg = r;
      }
    }
    if (V(arg, c) < 0.0) {
      V.col(c) = -V.col(c);
    }
  }
}

inline LocalPca decompose(const Eigen::MatrixXd& cov, Eigen::VectorXd center)
{
  if (!(cov.trace() > 0.0)) {
    throw Error(ErrorCode::SingularLocalCovariance, "local covariance has zero total variance");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularLocalCovariance, "local eigendecomposition failed");
  }
  LocalPca out;
  out.values = eig.eigenvalues().reverse();
  out.vectors = eig.eigenvectors().rowwise().reverse();
  fix_signs(out.vectors);
  out.center = std::move(center);
  return out;
}

// Rows that make up the local window for the robust estimator.
inline std::vector<Index> robust_window(const Eigen::VectorXd& distances, const Eigen::VectorXd& w,
                                        const KernelSpec& kernel, std::optional<Index> exclude)
{
  std::vector<Index> rows;
  const Index n = w.size();
  auto excluded = [&](Index j) { return exclude && *exclude == j; };
  if (is_discontinuous(kernel.family)) {
    for (Index j = 0; j < n; ++j) {
      if (w(j) > 0.0 && !excluded(j)) {
        rows.push_back(j);
      }
    }
  } else if (kernel.family == KernelFamily::Global) {
    for (Index j = 0; j < n; ++j) {
      if (!excluded(j)) {
        rows.push_back(j);
      }
    }
  } else if (kernel.adaptive) {
    std::vector<Index> order;
    for (Index j = 0; j < n; ++j) {
      if (!excluded(j)) {
        order.push_back(j);
      }
    }
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return distances(a) < distances(b); });
    const auto count = std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::ceil(kernel.bandwidth)));
    rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(rows.begin(), rows.end());
  } else {
    double wmax = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (!excluded(j)) {
        wmax = std::max(wmax, w(j));
      }
    }
    for (Index j = 0; j < n; ++j) {
      if (!excluded(j) && w(j) > 1e-6 * wmax) {
        rows.push_back(j);
      }
    }
  }
  return rows;
}

inline LocalPca local_pca(const Eigen::MatrixXd& X, const Eigen::VectorXd& distances, const Eigen::VectorXd& w,
                          const KernelSpec& kernel, const GwpcaOptions& options, Index location,
                          std::optional<Index> exclude)
{
  if (!options.robust) {
    Eigen::VectorXd center;
    const Eigen::MatrixXd cov = local_covariance(X, w, &center);
    return decompose(cov, std::move(center));
  }
  const std::vector<Index> rows = robust_window(distances, w, kernel, exclude);
  const auto local_n = static_cast<Index>(rows.size());
  if (mcd_subset_size(local_n, options.alpha) <= X.cols()) {
    throw Error(ErrorCode::InsufficientLocalData, "local window too small for the robust estimator at location "
                                                      + std::to_string(location));
  }
  Eigen::MatrixXd sub(local_n, X.cols());
  for (Index r = 0; r < local_n; ++r) {
    sub.row(r) = X.row(rows[static_cast<std::size_t>(r)]);
  }
  McdOptions mo;
  mo.alpha = options.alpha;
  mo.seed = mix_seed(options.seed, static_cast<std::uint64_t>(location));
  const McdEstimate est = mcd(sub, mo);
  return decompose(est.cov, est.center);
}

inline Eigen::MatrixXd pca_inputs(const SpatialDataset& ds, const std::vector<std::string>& vars)
{
  validate(ds);
  if (vars.empty()) {
    throw Error(ErrorCode::InvalidSelection, "no variables selected");
  }
  validate(ds, VariableSelection{std::nullopt, vars});
  if (ds.size() <= static_cast<Index>(vars.size())) {
    throw Error(ErrorCode::InsufficientLocalData, "GW PCA needs more locations than variables");
  }
  return ds.columns(vars);
}

} // namespace detail

/// Local PCA at every target of the distance source. Scores are produced only
/// when the targets are the data points.
inline GwpcaResult gwpca(const SpatialDataset& ds, const std::vector<std::string>& vars, const KernelSpec& kernel,
                         const DistanceSource& source, const GwpcaOptions& options = {})
{
  const Eigen::MatrixXd X = detail::pca_inputs(ds, vars);
  const Index m = X.cols();
  const Index k = options.k == 0 ? m : options.k;
  if (k < 1 || k > m) {
    throw Error(ErrorCode::InvalidArgument, "k must lie in [1, number of variables]");
  }
  if (source.points() != ds.size()) {
    throw Error(ErrorCode::InvalidArgument, "distance source does not match the dataset");
  }
  check(kernel, ds.size());

  const Index r = source.targets();
  GwpcaResult out;
  out.variables = vars;
  out.kernel = kernel;
  out.robust = options.robust;
  out.k = k;
  out.eigenvalues.resize(r, m);
  out.centers.resize(r, m);
  out.ptv.resize(r, m);
  out.loadings.resize(static_cast<std::size_t>(r));
  const bool observed = source.symmetric();
  if (observed) {
    out.scores_ = Eigen::MatrixXd(r, m);
  }

  parallel_for(r, [&](std::ptrdiff_t i) {
    const Eigen::VectorXd d = source.row(i);
    const WeightVector wv = weights_for(d, kernel);
    const detail::LocalPca pca = detail::local_pca(X, d, wv.w, kernel, options, i, std::nullopt);
    out.eigenvalues.row(i) = pca.values.transpose();
    out.centers.row(i) = pca.center.transpose();
    out.loadings[static_cast<std::size_t>(i)] = pca.vectors;
    const Eigen::VectorXd clipped = pca.values.cwiseMax(0.0);
    const double total = clipped.sum();
    double cum = 0.0;
    for (Index c = 0; c < m; ++c) {
      cum += clipped(c);
      out.ptv(i, c) = 100.0 * cum / total;
    }
    out.ptv(i, m - 1) = 100.0;
    if (observed) {
      out.scores_->row(i) = (X.row(i) - pca.center.transpose()) * pca.vectors;
    }
  });
  return out;
}

/// Leave-one-out reconstruction error using the first k local components.
inline double gwpca_cv_score(const SpatialDataset& ds, const std::vector<std::string>& vars, const KernelSpec& kernel,
                             const DistanceSource& source, Index k, const GwpcaOptions& options = {})
{
  const Eigen::MatrixXd X = detail::pca_inputs(ds, vars);
  const Index m = X.cols();
  if (k < 1) {
    throw Error(ErrorCode::InvalidArgument, "k must be at least 1");
  }
  if (k >= m) {
    throw Error(ErrorCode::KEqualsM, "cross-validation needs k < number of variables");
  }
  if (!source.symmetric() || source.points() != ds.size()) {
    throw Error(ErrorCode::InvalidArgument, "cross-validation needs distances among the data points");
  }
  check(kernel, ds.size());

  const Index n = ds.size();
  Eigen::VectorXd contrib(n);
  parallel_for(n, [&](std::ptrdiff_t i) {
    const Eigen::VectorXd d = source.row(i);
    Eigen::VectorXd w = weights_for(d, kernel).w;
    w(i) = 0.0;
    const detail::LocalPca pca = detail::local_pca(X, d, w, kernel, options, i, Index{i});
    const Eigen::MatrixXd Vk = pca.vectors.leftCols(k);
    const Eigen::VectorXd c = X.row(i).transpose() - pca.center;
    const Eigen::VectorXd resid = c - Vk * (Vk.transpose() * c);
    contrib(i) = resid.squaredNorm();
  });
  return contrib.sum();
}

/// Bandwidth minimising the leave-one-out score for k components.
inline BandwidthResult gwpca_bandwidth(const SpatialDataset& ds, const std::vector<std::string>& vars, Index k,
                                       KernelFamily family, bool adaptive, const DistanceSource& source,
                                       const GwpcaOptions& options = {},
                                       std::optional<std::pair<double, double>> bounds = std::nullopt,
                                       const BandwidthSearchOptions& search = {})
{
  const auto m = static_cast<Index>(vars.size());
  if (k >= m) {
    throw Error(ErrorCode::KEqualsM, "no optimal bandwidth exists when all components are retained");
  }
  const auto [lo, hi] = bounds ? *bounds : default_bandwidth_bounds(source, adaptive, m);
  const KernelSpec base{family, 1.0, adaptive};
  return optimize_bandwidth(
      [&](double b) { return gwpca_cv_score(ds, vars, base.with_bandwidth(b), source, k, options); }, adaptive, lo,
      hi, search);
}

/// Index of the variable with the largest absolute loading on the given
/// component (0-based) at each location; ties go to the lower index.
inline std::vector<Index> winning_variable(const GwpcaResult& result, Index component)
{
  std::vector<Index> out;
  out.reserve(result.loadings.size());
  for (const auto& L : result.loadings) {
    if (component < 0 || component >= L.cols()) {
      throw Error(ErrorCode::InvalidArgument, "component index out of range");
    }
    Index arg = 0;
    for (Index v = 1; v < L.rows(); ++v) {
      if (std::abs(L(v, component)) > std::abs(L(arg, component))) {
        arg = v;
      }
    }
    out.push_back(arg);
  }
  return out;
}

inline std::vector<std::string> winning_variable_names(const GwpcaResult& result, Index component)
{
  std::vector<std::string> names;
  for (Index v : winning_variable(result, component)) {
    names.push_back(result.variables[static_cast<std::size_t>(v)]);
  }
  return names;
}

} // namespace gwmodel
