#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/detail/linalg.hpp"
#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/gwr.hpp"
#include "gwmodel/gwss.hpp"
#include "gwmodel/parallel.hpp"
#include "gwmodel/weighting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace gwmodel {

/// Ratio of extreme singular values after scaling every column to unit length.
inline double bkw_condition_number(const Eigen::MatrixXd& M)
{
  const Eigen::VectorXd norms = M.colwise().norm().transpose();
  if ((norms.array() <= 0.0).any()) {
    throw Error(ErrorCode::ZeroColumn, "design matrix has a zero column");
  }
  const Eigen::MatrixXd scaled = M * norms.cwiseInverse().asDiagonal();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

/// Ridge term that brings the eigenvalue ratio eps1/epsp down to kappa.
inline double ridge_for_target_cn(double eps1, double epsp, double kappa)
{
  return std::max(0.0, (eps1 - epsp) / (kappa - 1.0) - epsp);
}

inline double ridge_for_target_cn(const Eigen::VectorXd& eigs_descending, double kappa)
{
  return ridge_for_target_cn(eigs_descending(0), eigs_descending(eigs_descending.size() - 1), kappa);
}

namespace detail {

// Spectrum of the column-scaled local cross-product D X'WX D with D = diag(1/||sqrt(W) x_j||).
struct ScaledSpectrum {
  Eigen::VectorXd scale;        // D
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd eigenvectors; // columns match eigenvalues
  double condition_number = 0.0;
};

inline ScaledSpectrum scaled_spectrum(const Eigen::MatrixXd& A, Index location)
{
  ScaledSpectrum s;
  const Eigen::VectorXd d = A.diagonal();
  if (!(d.array() > 0.0).all()) {
    throw LocalFitError(ErrorCode::ZeroColumn, location, std::numeric_limits<double>::infinity(),
                        "weighted design matrix has a zero column");
  }
  s.scale = d.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = s.scale.asDiagonal() * A * s.scale.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled);
  const Index p = A.rows();
  s.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  s.eigenvectors = eig.eigenvectors().rowwise().reverse();
  const double emin = s.eigenvalues(p - 1);
  s.condition_number = emin > 0.0 ? std::sqrt(s.eigenvalues(0) / emin) : std::numeric_limits<double>::infinity();
  return s;
}

struct RidgeSolve {
  Eigen::VectorXd beta;
  double condition_number = 0.0;
  double lambda = 0.0;
};

// Ridge solve in scaled coordinates, coefficients returned in original units.
inline RidgeSolve lcr_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            bool adjust, double kappa, Index location)
{
  const Eigen::MatrixXd A = weighted_cross_product(X, w);
  const ScaledSpectrum s = scaled_spectrum(A, location);
  RidgeSolve out;
  out.condition_number = s.condition_number;
  if (adjust && s.condition_number > kappa) {
    out.lambda = ridge_for_target_cn(s.eigenvalues, kappa * kappa);
  }
  const Eigen::VectorXd shifted = s.eigenvalues.array() + out.lambda;
  const double emax = shifted(0);
  const double emin = shifted(shifted.size() - 1);
  if (!(emax > 0.0) || !(emin / emax >= kRcondCutoff)) {
    throw LocalFitError(ErrorCode::SingularLocalFit, location, s.condition_number,
                        "local ridge system is singular");
  }
  const Eigen::VectorXd rhs = s.scale.cwiseProduct(X.transpose() * w.cwiseProduct(y));
  const Eigen::VectorXd gamma = s.eigenvectors * (s.eigenvectors.transpose() * rhs).cwiseQuotient(shifted);
  out.beta = s.scale.cwiseProduct(gamma);
  return out;
}

} // namespace detail

struct LcrFit {
  std::vector<std::string> names;
  Eigen::MatrixXd coefficients;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  /// Condition numbers before adjustment.
  Eigen::VectorXd local_cn;
  Eigen::VectorXd local_lambda;
  double kappa = 30.0;
  bool adjust = false;
  KernelSpec kernel;
};

/// Locally compensated ridge GW regression. With adjust set, a ridge term is
/// added wherever the local condition number exceeds kappa, sized so that
/// the adjusted condition number equals kappa.
inline LcrFit gwr_lcr(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                      const DistanceSource& source, bool adjust, double kappa)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  if (adjust && !(kappa > 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "condition-number threshold must exceed 1");
  }
  const Index n = p.X.rows();
  LcrFit fit;
  fit.names = p.names;
  fit.kappa = kappa;
  fit.adjust = adjust;
  fit.kernel = kernel;
  fit.coefficients.resize(n, p.X.cols());
  fit.fitted.resize(n);
  fit.local_cn.resize(n);
  fit.local_lambda.resize(n);
  parallel_for(n, [&](std::ptrdiff_t i) {
    const Eigen::VectorXd w = local_weights(source, i, kernel).w;
    const auto r = detail::lcr_solve(p.X, p.y, w, adjust, kappa, i);
    fit.coefficients.row(i) = r.beta.transpose();
    fit.fitted(i) = p.X.row(i).dot(r.beta);
    fit.local_cn(i) = r.condition_number;
    fit.local_lambda(i) = r.lambda;
  });
  fit.residuals = p.y - fit.fitted;
  return fit;
}

/// Leave-one-out prediction CV of the LCR model, ridge terms recomputed from
/// the leave-one-out weights; +inf when a local system is singular.
inline double lcr_cv_score(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                           const DistanceSource& source, bool adjust, double kappa)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  const Index n = p.X.rows();
  Eigen::VectorXd sq(n);
  parallel_for(n, [&](std::ptrdiff_t i) {
    Eigen::VectorXd w = local_weights(source, i, kernel).w;
    w(i) = 0.0;
    try {
      const auto r = detail::lcr_solve(p.X, p.y, w, adjust, kappa, i);
      const double e = p.y(i) - p.X.row(i).dot(r.beta);
      sq(i) = e * e;
    } catch (const LocalFitError&) {
      sq(i) = std::numeric_limits<double>::infinity();
    }
  });
  return sq.sum();
}

inline BandwidthResult lcr_bandwidth(const SpatialDataset& ds, const VariableSelection& sel, KernelFamily family,
                                     bool adaptive, const DistanceSource& source, bool adjust, double kappa,
                                     std::optional<std::pair<double, double>> bounds = std::nullopt,
                                     const BandwidthSearchOptions& search = {})
{
  const auto parameters = static_cast<Index>(sel.independents.size()) + 1;
  const auto [lo, hi] = bounds ? *bounds : default_bandwidth_bounds(source, adaptive, parameters);
  const KernelSpec base{family, 1.0, adaptive};
  return optimize_bandwidth(
      [&](double b) { return lcr_cv_score(ds, sel, base.with_bandwidth(b), source, adjust, kappa); }, adaptive, lo,
      hi, search);
}

struct CollinFlags {
  bool correlation = false;
  bool vif = false;
  bool vdp = false;
  bool condition = false;
};

struct CollinDiagnostics {
  std::vector<std::string> names;      ///< Intercept + predictors
  std::vector<std::string> pair_names; ///< "a.b" for each predictor pair
  Eigen::MatrixXd correlations;        ///< n x pairs
  Eigen::MatrixXd vifs;                ///< n x m
  /// Per location, rows index singular values (largest first) and columns
  /// index coefficients; each column sums to 1.
  std::vector<Eigen::MatrixXd> vdps;
  Eigen::VectorXd local_cn;
  std::vector<CollinFlags> flags;
  KernelSpec kernel;
};

inline constexpr double kCorrelationThreshold = 0.8;
inline constexpr double kVifThreshold = 10.0;
inline constexpr double kVdpThreshold = 0.5;
inline constexpr double kConditionThreshold = 30.0;

/// Local correlations, VIFs, variance-decomposition proportions and
/// condition numbers at the scale of each local regression.
inline CollinDiagnostics collin_diagnostics(const SpatialDataset& ds, const VariableSelection& sel,
                                            const KernelSpec& kernel, const DistanceSource& source)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  const Index n = p.X.rows();
  const Index k = p.X.cols();
  const Index m = k - 1;
  const Eigen::MatrixXd Z = p.X.rightCols(m);

  CollinDiagnostics out;
  out.names = p.names;
  out.kernel = kernel;
  for (Index a = 0; a < m; ++a) {
    for (Index b = a + 1; b < m; ++b) {
      out.pair_names.push_back(sel.independents[static_cast<std::size_t>(a)] + "."
                               + sel.independents[static_cast<std::size_t>(b)]);
    }
  }
  out.correlations.resize(n, static_cast<Index>(out.pair_names.size()));
  out.vifs.resize(n, m);
  out.vdps.resize(static_cast<std::size_t>(n));
  out.local_cn.resize(n);
  out.flags.resize(static_cast<std::size_t>(n));

  parallel_for(n, [&](std::ptrdiff_t i) {
    const Eigen::VectorXd w = local_weights(source, i, kernel).w;
    CollinFlags f;

    Eigen::MatrixXd R = Eigen::MatrixXd::Identity(m, m);
    Index c = 0;
    for (Index a = 0; a < m; ++a) {
      for (Index b = a + 1; b < m; ++b, ++c) {
        const double r = gw_pearson(Z.col(a), Z.col(b), w);
        R(a, b) = R(b, a) = r;
        out.correlations(i, c) = r;
        f.correlation = f.correlation || std::abs(r) > kCorrelationThreshold;
      }
    }
    if (m > 0) {
      const auto inv = detail::invert_cross_product(R);
      if (!inv.ok) {
        throw LocalFitError(ErrorCode::SingularCorrelationMatrix, i, inv.condition_number(),
                            "local correlation matrix of predictors is singular");
      }
      out.vifs.row(i) = inv.inverse.diagonal().transpose();
      f.vif = (inv.inverse.diagonal().array() > kVifThreshold).any();
    }

    const auto s = detail::scaled_spectrum(detail::weighted_cross_product(p.X, w), i);
    if (!(s.eigenvalues(k - 1) > 0.0)) {
      throw LocalFitError(ErrorCode::SingularLocalFit, i, s.condition_number,
                          "variance decomposition undefined for a singular local design");
    }
    // phi(j, t) = v_tj^2 / mu_j^2 with mu_j^2 the scaled cross-product eigenvalues
    Eigen::MatrixXd phi(k, k);
    for (Index j = 0; j < k; ++j) {
      for (Index t = 0; t < k; ++t) {
        const double v = s.eigenvectors(t, j);
        phi(j, t) = v * v / s.eigenvalues(j);
      }
    }
    const Eigen::RowVectorXd totals = phi.colwise().sum();
    const Eigen::MatrixXd vdp = phi * totals.cwiseInverse().asDiagonal();
    out.vdps[static_cast<std::size_t>(i)] = vdp;
    out.local_cn(i) = s.condition_number;
    f.condition = s.condition_number > kConditionThreshold;
    f.vdp = (vdp.row(k - 1).array() > kVdpThreshold).count() >= 2;
    out.flags[static_cast<std::size_t>(i)] = f;
  });
  return out;
}

struct CnExploreModel {
  std::vector<std::string> variables;
  std::optional<double> bandwidth;
  Eigen::VectorXd local_cn;
  detail::FiveNumber summary;
  std::optional<std::string> error;
};

/// For each candidate model: select the unadjusted LCR bandwidth by CV, then
/// record the local condition numbers at that bandwidth.
inline std::vector<CnExploreModel> cn_explore(const SpatialDataset& ds, const std::string& dependent,
                                              const std::vector<std::vector<std::string>>& models,
                                              KernelFamily family, bool adaptive, const DistanceSource& source)
{
  std::vector<CnExploreModel> out;
  for (const auto& vars : models) {
    CnExploreModel rec;
    rec.variables = vars;
    try {
      if (vars.empty()) {
        throw Error(ErrorCode::InvalidSelection, "model has no predictors");
      }
      const VariableSelection sel{dependent, vars};
      const auto bw = lcr_bandwidth(ds, sel, family, adaptive, source, false, 30.0);
      rec.bandwidth = bw.value;
      const auto fit = gwr_lcr(ds, sel, KernelSpec{family, bw.value, adaptive}, source, false, 30.0);
      rec.local_cn = fit.local_cn;
      rec.summary = detail::five_number(fit.local_cn);
    } catch (const Error& e) {
      rec.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

} // namespace gwmodel
