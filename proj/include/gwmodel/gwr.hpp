#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/detail/linalg.hpp"
#include "gwmodel/distance.hpp"
#include "gwmodel/errors.hpp"
#include "gwmodel/parallel.hpp"
#include "gwmodel/weighting.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gwmodel {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Coefficients and hat-matrix row of one weighted least-squares fit.
struct LocalFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd hat_row;
  double condition_number = 0.0;
};

/// Solves (X'WX) beta = X'Wy. X must already carry the intercept column;
/// x_target is the design row of the location being fitted.
inline LocalFit gwr_fit_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                           const Eigen::VectorXd& x_target, Index location = -1)
{
  const auto inv = detail::invert_cross_product(detail::weighted_cross_product(X, w));
  if (!inv.ok) {
    throw LocalFitError(ErrorCode::SingularLocalFit, location, inv.condition_number(),
                        "local cross-product matrix is singular");
  }
  LocalFit out;
  out.beta = inv.inverse * (X.transpose() * w.cwiseProduct(y));
  out.hat_row = (X * (inv.inverse * x_target)).cwiseProduct(w);
  out.condition_number = inv.condition_number();
  return out;
}

inline LocalFit gwr_fit_at(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const WeightVector& wv)
{
  if (!wv.target) {
    throw Error(ErrorCode::InvalidArgument, "weight vector has no target data point");
  }
  return gwr_fit_at(X, y, wv.w, X.row(*wv.target).transpose(), *wv.target);
}

struct GwrFit {
  /// "Intercept" followed by the independent variable names.
  std::vector<std::string> names;
  Eigen::MatrixXd coefficients;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  Eigen::VectorXd hat_diag;
  /// Squared norm of each hat-matrix row.
  Eigen::VectorXd hat_row_norm2;
  Eigen::VectorXd local_cn;
  double trace_s = 0.0;
  double trace_sts = 0.0;
  double enp = 0.0;
  double rss = 0.0;
  double sigma2 = 0.0;
  double aicc = 0.0;
  std::optional<double> cv_score;
  /// Non-geographic data weights (robust fits only).
  std::optional<Eigen::VectorXd> data_weights;
  /// Externally studentised residuals of the initial fit (filtered fits only).
  std::optional<Eigen::VectorXd> studentised;
  bool converged = true;
  int iterations = 0;
  std::vector<std::string> warnings;
  KernelSpec kernel;

  Eigen::VectorXd y() const { return fitted + residuals; }
};

namespace detail {

struct RegressionProblem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
};

inline RegressionProblem regression_problem(const SpatialDataset& ds, const VariableSelection& sel)
{
  validate(ds);
  if (!sel.dependent) {
    throw Error(ErrorCode::InvalidSelection, "regression needs a dependent variable");
  }
  validate(ds, sel);
  RegressionProblem p;
  p.y = ds.column(*sel.dependent);
  p.X = with_intercept(ds.columns(sel.independents));
  p.names.push_back("Intercept");
  p.names.insert(p.names.end(), sel.independents.begin(), sel.independents.end());
  return p;
}

inline void check_calibration(const RegressionProblem& p, const DistanceSource& source, const KernelSpec& kernel)
{
  const Index n = p.X.rows();
  if (source.points() != n) {
    throw Error(ErrorCode::InvalidArgument, "distance source does not match the dataset");
  }
  if (n <= p.X.cols() + 1) {
    throw Error(ErrorCode::InsufficientLocalData, "regression needs more than m+2 observations");
  }
  check(kernel, n);
}

inline double aicc_value(double rss, double n, double trace_s)
{
  const double denom = n - 2.0 - trace_s;
  if (!(denom > 0.0)) {
    return kNaN;
  }
  return n * std::log(rss / n) + n * std::log(2.0 * std::numbers::pi) + n * (n + trace_s) / denom;
}

// Fits at every data location. With full_rows=false only the hat diagonal is
// computed (enough for AICc).
inline GwrFit fit_all(const RegressionProblem& p, const KernelSpec& kernel, const DistanceSource& source,
                      const Eigen::VectorXd* data_weights, bool full_rows = true)
{
  const Index n = p.X.rows();
  const Index k = p.X.cols();
  GwrFit fit;
  fit.names = p.names;
  fit.kernel = kernel;
  fit.coefficients.resize(n, k);
  fit.fitted.resize(n);
  fit.hat_diag.resize(n);
  fit.hat_row_norm2.resize(n);
  fit.local_cn.resize(n);

  parallel_for(n, [&](std::ptrdiff_t i) {
    Eigen::VectorXd w = local_weights(source, i, kernel).w;
    if (data_weights) {
      w = w.cwiseProduct(*data_weights);
    }
    const auto inv = invert_cross_product(weighted_cross_product(p.X, w));
    if (!inv.ok) {
      throw LocalFitError(ErrorCode::SingularLocalFit, i, inv.condition_number(),
                          "local cross-product matrix is singular");
    }
    const Eigen::VectorXd beta = inv.inverse * (p.X.transpose() * w.cwiseProduct(p.y));
    const Eigen::VectorXd xi = p.X.row(i).transpose();
    const Eigen::VectorXd c = inv.inverse * xi;
    fit.coefficients.row(i) = beta.transpose();
    fit.fitted(i) = xi.dot(beta);
    fit.local_cn(i) = inv.condition_number();
    if (full_rows) {
      const Eigen::VectorXd row = (p.X * c).cwiseProduct(w);
      fit.hat_diag(i) = row(i);
      fit.hat_row_norm2(i) = row.squaredNorm();
    } else {
      fit.hat_diag(i) = w(i) * xi.dot(c);
      fit.hat_row_norm2(i) = kNaN;
    }
  });

  const double nd = static_cast<double>(n);
  fit.residuals = p.y - fit.fitted;
  fit.rss = fit.residuals.squaredNorm();
  fit.trace_s = fit.hat_diag.sum();
  fit.trace_sts = full_rows ? fit.hat_row_norm2.sum() : kNaN;
  fit.enp = full_rows ? 2.0 * fit.trace_s - fit.trace_sts : kNaN;
  fit.sigma2 = full_rows && nd - fit.enp > 0.0 ? fit.rss / (nd - fit.enp) : kNaN;
  fit.aicc = aicc_value(fit.rss, nd, fit.trace_s);
  if (data_weights) {
    fit.data_weights = *data_weights;
  }
  return fit;
}

} // namespace detail

/// Basic GW regression calibrated at every data location.
inline GwrFit gwr_basic(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                        const DistanceSource& source)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  GwrFit fit = detail::fit_all(p, kernel, source, nullptr);
  if (!std::isfinite(fit.aicc) && !(static_cast<double>(ds.size()) - 2.0 - fit.trace_s > 0.0)) {
    throw Error(ErrorCode::AiccUndefined, "n - 2 - tr(S) <= 0; the bandwidth is too small");
  }
  return fit;
}

/// Leave-one-out CV score; +inf when any leave-one-out fit is singular.
inline double gwr_cv_score(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                           const DistanceSource& source)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  if (!source.symmetric()) {
    throw Error(ErrorCode::InvalidArgument, "cross-validation needs distances among the data points");
  }
  const Index n = p.X.rows();
  Eigen::VectorXd sq(n);
  parallel_for(n, [&](std::ptrdiff_t i) {
    Eigen::VectorXd w = local_weights(source, i, kernel).w;
    w(i) = 0.0;
    const auto inv = detail::invert_cross_product(detail::weighted_cross_product(p.X, w));
    if (!inv.ok) {
      sq(i) = std::numeric_limits<double>::infinity();
      return;
    }
    const Eigen::VectorXd beta = inv.inverse * (p.X.transpose() * w.cwiseProduct(p.y));
    const double e = p.y(i) - p.X.row(i).dot(beta);
    sq(i) = e * e;
  });
  return sq.sum();
}

/// AICc of the basic fit; +inf when a local fit is singular or AICc is undefined.
inline double gwr_aicc_score(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                             const DistanceSource& source)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  try {
    const GwrFit fit = detail::fit_all(p, kernel, source, nullptr, false);
    return std::isfinite(fit.aicc) ? fit.aicc : std::numeric_limits<double>::infinity();
  } catch (const LocalFitError&) {
    return std::numeric_limits<double>::infinity();
  }
}

enum class BandwidthCriterion { CV, AICc };

inline BandwidthResult gwr_bandwidth(const SpatialDataset& ds, const VariableSelection& sel, KernelFamily family,
                                     bool adaptive, const DistanceSource& source, BandwidthCriterion criterion,
                                     std::optional<std::pair<double, double>> bounds = std::nullopt,
                                     const BandwidthSearchOptions& search = {})
{
  const auto parameters = static_cast<Index>(sel.independents.size()) + 1;
  const auto [lo, hi] = bounds ? *bounds : default_bandwidth_bounds(source, adaptive, parameters);
  const KernelSpec base{family, 1.0, adaptive};
  return optimize_bandwidth(
      [&](double b) {
        const KernelSpec k = base.with_bandwidth(b);
        return criterion == BandwidthCriterion::CV ? gwr_cv_score(ds, sel, k, source)
                                                   : gwr_aicc_score(ds, sel, k, source);
      },
      adaptive, lo, hi, search);
}

/// Externally studentised residuals e_i / (sigma_{-i} sqrt(q_ii)), where q_ii
/// is the diagonal of (I-S)(I-S)' and sigma_{-i}^2 = (RSS - e_i^2/(1-S_ii)) / (n - ENP - 1).
inline Eigen::VectorXd studentised_residuals(const GwrFit& fit)
{
  const Index n = fit.residuals.size();
  const double nd = static_cast<double>(n);
  Eigen::VectorXd r(n);
  for (Index i = 0; i < n; ++i) {
    const double e = fit.residuals(i);
    const double sii = fit.hat_diag(i);
    const double q = 1.0 - 2.0 * sii + fit.hat_row_norm2(i);
    const double s2 = (fit.rss - e * e / (1.0 - sii)) / (nd - fit.enp - 1.0);
    if (e == 0.0) {
      r(i) = 0.0;
    } else if (!(s2 > 0.0) || !(q > 0.0) || !(1.0 - sii > 0.0)) {
      r(i) = std::copysign(std::numeric_limits<double>::infinity(), e);
    } else {
      r(i) = e / (std::sqrt(s2) * std::sqrt(q));
    }
  }
  return r;
}

/// Refits after dropping observations whose studentised residual exceeds 3 in magnitude.
inline GwrFit gwr_robust_filtered(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                                  const DistanceSource& source)
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  const GwrFit initial = detail::fit_all(p, kernel, source, nullptr);
  const Eigen::VectorXd r = studentised_residuals(initial);
  Eigen::VectorXd keep = (r.array().abs() > 3.0).select(Eigen::VectorXd::Zero(r.size()), 1.0);
  const auto kept = static_cast<Index>(keep.sum());
  if (kept == r.size()) {
    GwrFit fit = initial;
    fit.data_weights = keep;
    fit.studentised = r;
    return fit;
  }
  if (kept < p.X.cols() + 1) {
    throw Error(ErrorCode::TooFewAfterFilter, std::to_string(kept) + " observations left after filtering");
  }
  GwrFit fit = detail::fit_all(p, kernel, source, &keep);
  fit.studentised = r;
  return fit;
}

/// Residual downweighting on u = e / sigma: 1 up to 2, [1 - (|u|-2)^2]^2 up to 3, 0 beyond.
inline double robust_downweight(double u)
{
  const double a = std::abs(u);
  if (a <= 2.0) {
    return 1.0;
  }
  if (a < 3.0) {
    const double t = 1.0 - (a - 2.0) * (a - 2.0);
    return t * t;
  }
  return 0.0;
}

struct RobustIterationOptions {
  double tolerance = 1e-5;
  int max_iterations = 20;
};

/// Iteratively reweighted GW regression. Stops when no data weight changes by
/// more than the tolerance; otherwise reports non-convergence as a warning.
inline GwrFit gwr_robust_iterative(const SpatialDataset& ds, const VariableSelection& sel, const KernelSpec& kernel,
                                   const DistanceSource& source, const RobustIterationOptions& options = {})
{
  const auto p = detail::regression_problem(ds, sel);
  detail::check_calibration(p, source, kernel);
  const Index n = p.X.rows();
  Eigen::VectorXd weights = Eigen::VectorXd::Ones(n);
  GwrFit fit;
  bool converged = false;
  int iter = 0;
  while (iter < options.max_iterations) {
    ++iter;
    fit = detail::fit_all(p, kernel, source, &weights);
    const double sigma = std::sqrt(fit.sigma2);
    Eigen::VectorXd next(n);
    for (Index i = 0; i < n; ++i) {
      const double e = fit.residuals(i);
      next(i) = (sigma > 0.0 && std::isfinite(sigma)) ? robust_downweight(e / sigma) : 1.0;
    }
    const double change = (next - weights).cwiseAbs().maxCoeff();
    weights = next;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }
  fit.data_weights = weights;
  fit.converged = converged;
  fit.iterations = iter;
  if (!converged) {
    fit.warnings.push_back("NonConvergence: robust weights still changing after " + std::to_string(iter)
                           + " iterations");
  }
  return fit;
}

struct StepwiseModel {
  std::vector<std::string> variables;
  double aicc = kNaN;
  int round = 0;
};

struct StepwiseReport {
  /// Every fitted model in evaluation order.
  std::vector<StepwiseModel> models;
  std::vector<std::string> inclusion_order;
  /// Indices into models: rounds in order, each round by descending AICc.
  std::vector<std::size_t> sorted;
};

/// Forward selection at a fixed bandwidth: each round adds the candidate with
/// the lowest AICc. m candidates produce m(m+1)/2 fits.
inline StepwiseReport stepwise_select(const SpatialDataset& ds, const std::string& dependent,
                                      const std::vector<std::string>& candidates, const KernelSpec& kernel,
                                      const DistanceSource& source)
{
  if (candidates.empty()) {
    throw Error(ErrorCode::InvalidSelection, "stepwise selection needs at least one candidate");
  }
  validate(ds, VariableSelection{dependent, candidates});
  StepwiseReport report;
  std::vector<std::string> included;
  std::vector<std::string> remaining = candidates;
  int round = 0;
  while (!remaining.empty()) {
    ++round;
    const std::size_t first = report.models.size();
    std::optional<std::size_t> best;
    for (std::size_t c = 0; c < remaining.size(); ++c) {
      StepwiseModel model;
      model.variables = included;
      model.variables.push_back(remaining[c]);
      model.round = round;
      try {
        const auto p = detail::regression_problem(ds, VariableSelection{dependent, model.variables});
        detail::check_calibration(p, source, kernel);
        model.aicc = detail::fit_all(p, kernel, source, nullptr, false).aicc;
      } catch (const Error& e) {
        if (is_validation_error(e.code())) {
          throw;
        }
        model.aicc = kNaN;
      }
      if (std::isfinite(model.aicc) && (!best || model.aicc < report.models[first + *best].aicc)) {
        best = c;
      }
      report.models.push_back(std::move(model));
    }
    const std::size_t chosen = best.value_or(0);
    included.push_back(remaining[chosen]);
    report.inclusion_order.push_back(remaining[chosen]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));

    std::vector<std::size_t> order(report.models.size() - first);
    for (std::size_t t = 0; t < order.size(); ++t) {
      order[t] = first + t;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double fa = report.models[a].aicc;
      const double fb = report.models[b].aicc;
      if (std::isfinite(fa) != std::isfinite(fb)) {
        return !std::isfinite(fa);
      }
      return fa > fb;
    });
    report.sorted.insert(report.sorted.end(), order.begin(), order.end());
  }
  return report;
}

struct GwrPrediction {
  Eigen::VectorXd prediction;
  Eigen::VectorXd prediction_var;
  Eigen::MatrixXd coefficients;
  std::vector<std::string> names;
  /// Targets whose local system was singular; their outputs are NaN.
  std::vector<Index> failed;
  double sigma2 = 0.0;
  double enp = 0.0;
};

/// Predictions x(s)'beta(s) and variances sigma^2 [1 + S(s)] at target
/// locations. sigma^2 = RSS / (n - ENP) from the calibration fit.
inline GwrPrediction gwr_predict(const SpatialDataset& calib, const VariableSelection& sel, const KernelSpec& kernel,
                                 const DistanceSource& calib_source, const SpatialDataset& targets,
                                 const DistanceSource& target_source)
{
  const auto p = detail::regression_problem(calib, sel);
  detail::check_calibration(p, calib_source, kernel);
  if (target_source.targets() != targets.size() || target_source.points() != calib.size()) {
    throw Error(ErrorCode::InvalidArgument, "target distances do not match the datasets");
  }
  for (Index i = 0; i < targets.size(); ++i) {
    if (!std::isfinite(targets.coords()(i, 0)) || !std::isfinite(targets.coords()(i, 1))) {
      throw Error(ErrorCode::NonFiniteValue, "target coordinate row " + std::to_string(i));
    }
  }
  const Eigen::MatrixXd Xt = detail::with_intercept(targets.columns(sel.independents));
  if (!Xt.allFinite()) {
    throw Error(ErrorCode::NonFiniteValue, "target independent variables must be finite");
  }

  const GwrFit fit = detail::fit_all(p, kernel, calib_source, nullptr);

  const Index r = targets.size();
  GwrPrediction out;
  out.names = p.names;
  out.sigma2 = fit.sigma2;
  out.enp = fit.enp;
  out.prediction.resize(r);
  out.prediction_var.resize(r);
  out.coefficients.resize(r, p.X.cols());
  std::vector<char> failed(static_cast<std::size_t>(r), 0);

  parallel_for(r, [&](std::ptrdiff_t i) {
    const Eigen::VectorXd w = weights_for(target_source.row(i), kernel).w;
    const auto inv = detail::invert_cross_product(detail::weighted_cross_product(p.X, w));
    if (!inv.ok) {
      failed[static_cast<std::size_t>(i)] = 1;
      out.prediction(i) = kNaN;
      out.prediction_var(i) = kNaN;
      out.coefficients.row(i).setConstant(kNaN);
      return;
    }
    const Eigen::VectorXd beta = inv.inverse * (p.X.transpose() * w.cwiseProduct(p.y));
    const Eigen::VectorXd xs = Xt.row(i).transpose();
    // S(s) = x' A^-1 X'W^2X A^-1 x = || W X A^-1 x ||^2
    const Eigen::VectorXd v = (p.X * (inv.inverse * xs)).cwiseProduct(w);
    out.coefficients.row(i) = beta.transpose();
    out.prediction(i) = xs.dot(beta);
    out.prediction_var(i) = fit.sigma2 * (1.0 + v.squaredNorm());
  });
  for (Index i = 0; i < r; ++i) {
    if (failed[static_cast<std::size_t>(i)]) {
      out.failed.push_back(i);
    }
  }
  return out;
}

struct PredictionMetrics {
  double rmspe = 0.0;
  double mape = 0.0;
  double mean_zs = 0.0;
  double sd_zs = 0.0;
};

/// Accuracy (RMSPE, MAPE) and z-score calibration of predictions. The z-score
/// SD uses the n-1 denominator. Non-finite predictions are skipped.
inline PredictionMetrics prediction_metrics(const Eigen::VectorXd& observed, const Eigen::VectorXd& prediction,
                                            const Eigen::VectorXd& variance)
{
  std::vector<double> err;
  std::vector<double> z;
  for (Index i = 0; i < observed.size(); ++i) {
    if (!std::isfinite(prediction(i)) || !std::isfinite(variance(i))) {
      continue;
    }
    const double e = observed(i) - prediction(i);
    err.push_back(e);
    z.push_back(e / std::sqrt(variance(i)));
  }
  PredictionMetrics m;
  if (err.empty()) {
    return {kNaN, kNaN, kNaN, kNaN};
  }
  const auto k = static_cast<double>(err.size());
  double sq = 0.0;
  double ab = 0.0;
  double zs = 0.0;
  for (std::size_t t = 0; t < err.size(); ++t) {
    sq += err[t] * err[t];
    ab += std::abs(err[t]);
    zs += z[t];
  }
  m.rmspe = std::sqrt(sq / k);
  m.mape = ab / k;
  m.mean_zs = zs / k;
  double v = 0.0;
  for (double zt : z) {
    v += (zt - m.mean_zs) * (zt - m.mean_zs);
  }
  m.sd_zs = err.size() > 1 ? std::sqrt(v / (k - 1.0)) : kNaN;
  return m;
}

struct CoefficientSummary {
  std::string name;
  detail::FiveNumber summary;
};

struct GwrReport {
  std::vector<CoefficientSummary> coefficients;
  double trace_s = 0.0;
  double enp = 0.0;
  double sigma2 = 0.0;
  double aicc = 0.0;
  double rss = 0.0;
  double r2 = 0.0;
};

inline GwrReport gwr_report(const GwrFit& fit)
{
  GwrReport rep;
  for (std::size_t j = 0; j < fit.names.size(); ++j) {
    rep.coefficients.push_back({fit.names[j], detail::five_number(fit.coefficients.col(static_cast<Index>(j)))});
  }
  const Eigen::VectorXd y = fit.y();
  const double tss = (y.array() - y.mean()).square().sum();
  rep.trace_s = fit.trace_s;
  rep.enp = fit.enp;
  rep.sigma2 = fit.sigma2;
  rep.aicc = fit.aicc;
  rep.rss = fit.rss;
  rep.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : kNaN;
  return rep;
}

inline std::string format_report(const GwrReport& rep)
{
  std::ostringstream os;
  os << std::setprecision(6);
  os << "Summary of GW regression coefficient estimates\n";
  os << std::left << std::setw(16) << "" << std::right;
  for (const char* h : {"Min.", "1st Qu.", "Median", "3rd Qu.", "Max."}) {
    os << std::setw(14) << h;
  }
  os << '\n';
  for (const auto& c : rep.coefficients) {
    os << std::left << std::setw(16) << c.name << std::right;
    for (double v : {c.summary.min, c.summary.q1, c.summary.median, c.summary.q3, c.summary.max}) {
      os << std::setw(14) << v;
    }
    os << '\n';
  }
  os << "Trace of hat matrix tr(S): " << rep.trace_s << '\n';
  os << "Effective number of parameters (2trS - trS'S): " << rep.enp << '\n';
  os << "Residual variance RSS/(n-ENP): " << rep.sigma2 << '\n';
  os << "Residual sum of squares: " << rep.rss << '\n';
  os << "AICc: " << rep.aicc << '\n';
  os << "R-square: " << rep.r2 << '\n';
  return os.str();
}

} // namespace gwmodel
