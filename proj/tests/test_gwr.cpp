#include "oracles.hpp"
#include "support.hpp"

#include <gwmodel/gwr.hpp>
#include <gwmodel/gwss.hpp>

#include <catch_amalgamated.hpp>

using namespace gwmodel;
using Catch::Approx;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::InvalidArgument;
}

std::function<Eigen::VectorXd(Index)> weights_of(const DistanceSource& src, const KernelSpec& k)
{
  return [&src, k](Index i) { return local_weights(src, i, k).w; };
}

Eigen::MatrixXd design(const gwtest::RegressionData& d)
{
  return oracle::add_intercept(d.ds.columns(d.sel.independents));
}

// Dataset with y exactly linear in x.
gwtest::RegressionData noiseless(gwtest::Gen& g, Index n, Index m)
{
  return gwtest::regression_dataset(g, n, m, 0.0, false);
}

} // namespace

TEST_CASE("local fit with unit weights is OLS")
{
  gwtest::Gen g(1);
  const Eigen::MatrixXd X = oracle::add_intercept(g.normal_matrix(30, 3));
  const Eigen::VectorXd y = g.normals(30);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(30);
  const auto fit = gwr_fit_at(X, y, ones, X.row(4).transpose(), 4);
  const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
  CHECK(gwtest::max_abs_diff(fit.beta, ols) < 1e-10);
  CHECK(fit.hat_row.dot(y) == Approx(X.row(4).dot(fit.beta)).epsilon(1e-12));
}

TEST_CASE("local fit on m+1 indicator points interpolates")
{
  gwtest::Gen g(2);
  const Eigen::MatrixXd X = oracle::add_intercept(g.normal_matrix(20, 2));
  const Eigen::VectorXd y = g.normals(20);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(20);
  w(3) = w(7) = w(11) = 1.0;
  const auto fit = gwr_fit_at(X, y, w, X.row(3).transpose(), 3);
  for (Index i : {3, 7, 11}) {
    CHECK(X.row(i).dot(fit.beta) == Approx(y(i)).epsilon(1e-9).margin(1e-9));
  }
}

TEST_CASE("duplicated column gives a singular local fit")
{
  gwtest::Gen g(3);
  Eigen::MatrixXd X = oracle::add_intercept(g.normal_matrix(15, 2));
  X.col(2) = X.col(1);
  const Eigen::VectorXd y = g.normals(15);
  try {
    gwr_fit_at(X, y, Eigen::VectorXd::Ones(15), X.row(0).transpose(), 0);
    FAIL("expected SingularLocalFit");
  } catch (const LocalFitError& e) {
    CHECK(e.code() == ErrorCode::SingularLocalFit);
    CHECK(e.location() == 0);
  }
}

TEST_CASE("noiseless linear data gives zero residuals")
{
  gwtest::Gen g(4);
  const auto d = noiseless(g, 40, 3);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  for (const KernelSpec& k : {KernelSpec{KernelFamily::Bisquare, 15, true}, KernelSpec{KernelFamily::Gaussian, 20, false},
                              KernelSpec::global()}) {
    const auto fit = gwr_basic(d.ds, d.sel, k, src);
    CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-9);
    CHECK(gwtest::max_abs_diff(fit.fitted + fit.residuals, d.ds.column("y")) == 0.0);
  }
}

TEST_CASE("gwr matches a per-location dense oracle")
{
  gwtest::Gen g(5);
  const auto d = gwtest::regression_dataset(g, 50, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 20, true};
  const auto fit = gwr_basic(d.ds, d.sel, k, src);
  const auto dense = oracle::gwr(design(d), d.ds.column("y"), weights_of(src, k));
  CHECK(gwtest::max_abs_diff(fit.coefficients, dense.beta) < 1e-9);
  CHECK(gwtest::max_abs_diff(fit.hat_diag, dense.S.diagonal()) < 1e-10);
  CHECK(fit.trace_s == Approx(dense.S.trace()).epsilon(1e-10));
  CHECK(fit.trace_sts == Approx((dense.S.transpose() * dense.S).trace()).epsilon(1e-10));
  CHECK(fit.enp == Approx(2 * dense.S.trace() - (dense.S.transpose() * dense.S).trace()).epsilon(1e-10));
  const double rss = dense.resid.squaredNorm();
  CHECK(fit.rss == Approx(rss).epsilon(1e-10));
  CHECK(fit.sigma2 == Approx(rss / (50 - fit.enp)).epsilon(1e-10));
  CHECK(fit.aicc == Approx(oracle::aicc(rss, 50, dense.S.trace())).epsilon(1e-10));
  CHECK(fit.enp > 0);
  CHECK(fit.enp < 50);
  CHECK(fit.names == std::vector<std::string>{"Intercept", "x1", "x2"});
}

TEST_CASE("gwr under the global kernel is OLS")
{
  gwtest::Gen g(6);
  for (int t = 0; t < 5; ++t) {
    const auto d = gwtest::regression_dataset(g, 40, 3);
    const auto fit = gwr_basic(d.ds, d.sel, KernelSpec::global(), DistanceSource::among(d.ds.coords(), {}));
    const Eigen::MatrixXd X = design(d);
    const Eigen::VectorXd y = d.ds.column("y");
    const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
    const Eigen::MatrixXd H = X * (X.transpose() * X).inverse() * X.transpose();
    for (Index i = 0; i < 40; ++i) {
      CHECK(gwtest::max_abs_diff(fit.coefficients.row(i).transpose(), ols) < 1e-8);
    }
    CHECK(gwtest::max_abs_diff(fit.fitted, X * ols) < 1e-8);
    CHECK(gwtest::max_abs_diff(fit.hat_diag, H.diagonal()) < 1e-8);
    CHECK(fit.trace_s == Approx(4.0).epsilon(1e-10));
    const double rss = (y - X * ols).squaredNorm();
    CHECK(fit.aicc == Approx(oracle::aicc(rss, 40, 4.0)).epsilon(1e-8));
  }
}

TEST_CASE("fitted values equal hat rows times y")
{
  gwtest::Gen g(7);
  for (int t = 0; t < 10; ++t) {
    const auto d = gwtest::regression_dataset(g, 30, 2);
    const auto src = DistanceSource::among(d.ds.coords(), {});
    const KernelSpec k{KernelFamily::Tricube, static_cast<double>(g.integer(8, 30)), true};
    const auto fit = gwr_basic(d.ds, d.sel, k, src);
    const Eigen::MatrixXd X = design(d);
    const Eigen::VectorXd y = d.ds.column("y");
    for (Index i = 0; i < 30; ++i) {
      const auto w = local_weights(src, i, k);
      const auto lf = gwr_fit_at(X, y, w);
      CHECK(lf.hat_row.dot(y) == Approx(fit.fitted(i)).epsilon(1e-10).margin(1e-10));
      CHECK(lf.hat_row(i) == Approx(fit.hat_diag(i)).epsilon(1e-10).margin(1e-12));
      CHECK(lf.hat_row.squaredNorm() == Approx(fit.hat_row_norm2(i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("local coefficients are invariant to scaling the weights")
{
  gwtest::Gen g(8);
  const auto d = gwtest::regression_dataset(g, 25, 2);
  const Eigen::MatrixXd X = design(d);
  const Eigen::VectorXd y = d.ds.column("y");
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd w = g.uniforms(25, 0.01, 1);
    const double c = std::pow(10.0, g.uniform(-4, 4));
    const Index i = g.integer(0, 24);
    const auto a = gwr_fit_at(X, y, w, X.row(i).transpose(), i);
    const auto b = gwr_fit_at(X, y, c * w, X.row(i).transpose(), i);
    CHECK(gwtest::max_abs_diff(a.beta, b.beta) < 1e-9);
    CHECK(gwtest::max_abs_diff(a.hat_row, b.hat_row) < 1e-12);
  }
}

TEST_CASE("cross-validation matches a literal leave-one-out loop")
{
  gwtest::Gen g(9);
  for (int t = 0; t < 10; ++t) {
    const auto d = gwtest::regression_dataset(g, 8 + t % 5, 1);
    const auto src = DistanceSource::among(d.ds.coords(), {});
    const Index n = d.ds.size();
    const KernelSpec k = t % 2 ? KernelSpec{KernelFamily::Gaussian, g.uniform(20, 80), false}
                               : KernelSpec{KernelFamily::Bisquare, static_cast<double>(n), true};
    const double cv = gwr_cv_score(d.ds, d.sel, k, src);
    CHECK(gwtest::rel_diff(cv, oracle::gwr_cv(design(d), d.ds.column("y"), weights_of(src, k))) < 1e-8);
  }
}

TEST_CASE("cross-validation edge cases")
{
  gwtest::Gen g(10);
  const auto d = noiseless(g, 30, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  CHECK(gwr_cv_score(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, 30, true}, src) < 1e-18);
  const double small = gwr_cv_score(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, 3, true}, src);
  CHECK(std::isinf(small));
  CHECK(std::isinf(gwr_aicc_score(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, 2, true}, src)));
}

TEST_CASE("calibration preconditions")
{
  gwtest::Gen g(11);
  const auto d = gwtest::regression_dataset(g, 4, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  CHECK(code_of([&] { gwr_basic(d.ds, d.sel, KernelSpec::global(), src); }) == ErrorCode::InsufficientLocalData);
  const auto big = gwtest::regression_dataset(g, 20, 2);
  VariableSelection bad = big.sel;
  bad.independents.push_back("nope");
  CHECK(code_of([&] { gwr_basic(big.ds, bad, KernelSpec::global(), DistanceSource::among(big.ds.coords(), {})); })
        == ErrorCode::UnknownColumn);
}

TEST_CASE("AICc is undefined for tiny bandwidths")
{
  gwtest::Gen g(12);
  int undefined = 0;
  for (int t = 0; t < 20; ++t) {
    const auto d = gwtest::regression_dataset(g, 6, 1);
    const auto src = DistanceSource::among(d.ds.coords(), {});
    try {
      const auto fit = gwr_basic(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, 3, true}, src);
      CHECK(fit.trace_s < 4.0);
    } catch (const LocalFitError&) {
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AiccUndefined);
      ++undefined;
    }
  }
  CHECK(undefined > 0);
}

TEST_CASE("AICc rises without bound as tr(S) approaches n - 2")
{
  gwtest::Gen g(13);
  const auto d = gwtest::regression_dataset(g, 40, 1);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  std::vector<std::pair<double, double>> sweep;
  for (double b = 40.0; b > 0.5; b *= 0.97) {
    try {
      const auto fit = gwr_basic(d.ds, d.sel, KernelSpec{KernelFamily::Gaussian, b, false}, src);
      sweep.emplace_back(fit.trace_s, fit.aicc);
    } catch (const Error&) {
      break;
    }
  }
  REQUIRE(sweep.size() > 5);
  std::sort(sweep.begin(), sweep.end());
  CHECK(sweep.back().first > 30.0);
  std::size_t tail = 0;
  while (tail < sweep.size() && sweep[tail].first < 36.0) {
    ++tail;
  }
  REQUIRE(tail + 2 < sweep.size());
  for (std::size_t t = tail + 1; t < sweep.size(); ++t) {
    CHECK(sweep[t].second > sweep[t - 1].second);
  }
  CHECK(sweep.back().second > sweep.front().second);
}

TEST_CASE("stationary data favour the widest bandwidth")
{
  gwtest::Gen g(14);
  const auto d = gwtest::regression_dataset(g, 60, 2, 1.0, false);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const auto r = gwr_bandwidth(d.ds, d.sel, KernelFamily::Gaussian, false, src, BandwidthCriterion::AICc,
                               std::make_pair(20.0, 2000.0));
  CHECK(r.value > 0.95 * 2000.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double b : {50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0}) {
    const double s = gwr_aicc_score(d.ds, d.sel, KernelSpec{KernelFamily::Gaussian, b, false}, src);
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("bandwidth search returns the minimum of its trace")
{
  gwtest::Gen g(15);
  const auto d = gwtest::regression_dataset(g, 50, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  for (auto c : {BandwidthCriterion::CV, BandwidthCriterion::AICc}) {
    const auto r = gwr_bandwidth(d.ds, d.sel, KernelFamily::Bisquare, true, src, c);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [b, s] : r.trace) {
      best = std::min(best, s);
    }
    CHECK(r.score == best);
    CHECK(r.value == std::round(r.value));
  }
}

TEST_CASE("studentised residuals match the dense oracle")
{
  gwtest::Gen g(16);
  for (int t = 0; t < 10; ++t) {
    const auto d = gwtest::regression_dataset(g, 12, 1);
    const auto src = DistanceSource::among(d.ds.coords(), {});
    const KernelSpec k{KernelFamily::Gaussian, g.uniform(40, 120), false};
    const auto fit = gwr_basic(d.ds, d.sel, k, src);
    const auto dense = oracle::gwr(design(d), d.ds.column("y"), weights_of(src, k));
    const Eigen::VectorXd r = studentised_residuals(fit);
    const Eigen::VectorXd o = oracle::studentised(dense);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(12, 12);
    const Eigen::MatrixXd Q = (I - dense.S) * (I - dense.S).transpose();
    for (Index i = 0; i < 12; ++i) {
      CHECK(gwtest::rel_diff(r(i), o(i)) < 1e-8);
      CHECK(1 - 2 * fit.hat_diag(i) + fit.hat_row_norm2(i) == Approx(Q(i, i)).epsilon(1e-10));
    }
  }
}

TEST_CASE("studentised residuals under the global kernel match literal refits")
{
  gwtest::Gen g(17);
  const auto d = gwtest::regression_dataset(g, 12, 2);
  const auto fit = gwr_basic(d.ds, d.sel, KernelSpec::global(), DistanceSource::among(d.ds.coords(), {}));
  const Eigen::VectorXd r = studentised_residuals(fit);
  const Eigen::MatrixXd X = design(d);
  const Eigen::VectorXd y = d.ds.column("y");
  const Eigen::MatrixXd H = X * (X.transpose() * X).inverse() * X.transpose();
  for (Index i = 0; i < 12; ++i) {
    Eigen::VectorXd w = Eigen::VectorXd::Ones(12);
    w(i) = 0.0;
    const Eigen::VectorXd b = oracle::wls(X, y, w);
    double rss = 0.0;
    for (Index j = 0; j < 12; ++j) {
      if (j != i) {
        rss += std::pow(y(j) - X.row(j).dot(b), 2);
      }
    }
    const double s = std::sqrt(rss / (12.0 - 1.0 - 3.0));
    const double e = fit.residuals(i);
    CHECK(gwtest::rel_diff(r(i), e / (s * std::sqrt(1.0 - H(i, i)))) < 1e-8);
  }
}

TEST_CASE("filtered robust gwr drops a gross outlier")
{
  gwtest::Gen g(18);
  auto d = gwtest::regression_dataset(g, 60, 2, 0.3, false);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 40, true};

  const auto clean = gwr_robust_filtered(d.ds, d.sel, k, src);
  const auto basic = gwr_basic(d.ds, d.sel, k, src);
  if ((clean.studentised->array().abs() <= 3.0).all()) {
    CHECK(clean.coefficients == basic.coefficients);
  }

  Eigen::MatrixXd attrs = d.ds.attrs();
  attrs(17, 2) += 25.0;
  const auto dirty = d.ds.with_attrs(attrs);
  const auto before = gwr_basic(dirty, d.sel, k, src);
  const auto after = gwr_robust_filtered(dirty, d.sel, k, src);
  REQUIRE(after.data_weights.has_value());
  CHECK((*after.data_weights)(17) == 0.0);
  const Eigen::RowVector3d truth(1.0, 1.0, 2.0);
  const double err_before = (before.coefficients.rowwise() - truth).cwiseAbs().mean();
  const double err_after = (after.coefficients.rowwise() - truth).cwiseAbs().mean();
  CHECK(err_after < err_before);
  CHECK(after.fitted.size() == 60);
}

TEST_CASE("robust downweighting function")
{
  CHECK(robust_downweight(0.0) == 1.0);
  CHECK(robust_downweight(2.0) == 1.0);
  CHECK(robust_downweight(-2.5) == Approx(0.5625));
  CHECK(robust_downweight(2.5) == Approx(0.5625));
  CHECK(robust_downweight(3.0) == 0.0);
  CHECK(robust_downweight(7.0) == 0.0);
}

TEST_CASE("iterative robust gwr on clean data reproduces the basic fit")
{
  gwtest::Gen g(19);
  const auto d = noiseless(g, 30, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 20, true};
  Eigen::MatrixXd attrs = d.ds.attrs();
  for (Index i = 0; i < 30; ++i) {
    attrs(i, 2) += 0.01 * ((i % 3) - 1.0);
  }
  const auto ds = d.ds.with_attrs(attrs);
  const auto basic = gwr_basic(ds, d.sel, k, src);
  const double sigma = std::sqrt(basic.sigma2);
  if ((basic.residuals.array().abs() <= 2.0 * sigma).all()) {
    const auto rob = gwr_robust_iterative(ds, d.sel, k, src);
    CHECK(rob.converged);
    CHECK((rob.data_weights->array() == 1.0).all());
    CHECK(rob.coefficients == basic.coefficients);
  }
}

TEST_CASE("iterative robust gwr zeroes a persistent outlier")
{
  gwtest::Gen g(20);
  const auto d = gwtest::regression_dataset(g, 50, 1, 0.2, false);
  Eigen::MatrixXd attrs = d.ds.attrs();
  attrs(5, 1) += 30.0;
  const auto ds = d.ds.with_attrs(attrs);
  const auto rob = gwr_robust_iterative(ds, d.sel, KernelSpec{KernelFamily::Bisquare, 30, true},
                                        DistanceSource::among(ds.coords(), {}));
  REQUIRE(rob.data_weights.has_value());
  CHECK((*rob.data_weights)(5) == 0.0);
  CHECK(rob.iterations >= 1);
  CHECK(rob.iterations <= 20);
  CHECK(rob.converged == rob.warnings.empty());
}

TEST_CASE("stepwise selection model counts and ordering")
{
  gwtest::Gen g(21);
  const auto d1 = gwtest::regression_dataset(g, 40, 1);
  const auto src1 = DistanceSource::among(d1.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 30, true};
  CHECK(stepwise_select(d1.ds, "y", {"x1"}, k, src1).models.size() == 1);

  const auto d8 = gwtest::regression_dataset(g, 60, 8);
  const auto rep = stepwise_select(d8.ds, "y", d8.sel.independents, k, DistanceSource::among(d8.ds.coords(), {}));
  CHECK(rep.models.size() == 36);
  CHECK(rep.sorted.size() == 36);
  CHECK(rep.inclusion_order.size() == 8);
  std::size_t at = 0;
  for (int round = 1; round <= 8; ++round) {
    double best = std::numeric_limits<double>::infinity();
    std::string chosen;
    for (const auto& m : rep.models) {
      if (m.round == round && m.aicc < best) {
        best = m.aicc;
        chosen = m.variables.back();
      }
    }
    CHECK(chosen == rep.inclusion_order[static_cast<std::size_t>(round - 1)]);
    const std::size_t count = static_cast<std::size_t>(9 - round);
    for (std::size_t t = at + 1; t < at + count; ++t) {
      CHECK(rep.models[rep.sorted[t]].round == round);
      CHECK(rep.models[rep.sorted[t]].aicc <= rep.models[rep.sorted[t - 1]].aicc);
    }
    at += count;
  }
  // largest slope enters first
  CHECK(rep.inclusion_order.front() == "x8");
}

TEST_CASE("stepwise picks the generating variable first")
{
  gwtest::Gen g(22);
  const Coords c = g.coords(40);
  Eigen::MatrixXd attrs = g.normal_matrix(40, 3);
  attrs.col(2) = (3.0 * attrs.col(0)).array() + 2.0;
  const auto ds = gwtest::make_dataset(c, attrs, {"x1", "x2", "y"});
  const auto src = DistanceSource::among(c, {});
  const KernelSpec k{KernelFamily::Bisquare, 25, true};
  const auto rep = stepwise_select(ds, "y", {"x2", "x1"}, k, src);
  CHECK(rep.inclusion_order.front() == "x1");
  const double a1 = gwr_aicc_score(ds, VariableSelection{"y", {"x1"}}, k, src);
  const double a2 = gwr_aicc_score(ds, VariableSelection{"y", {"x2"}}, k, src);
  CHECK(a1 < a2);
}

TEST_CASE("global-kernel prediction is OLS prediction")
{
  gwtest::Gen g(23);
  const auto d = gwtest::regression_dataset(g, 40, 2);
  auto tg = gwtest::regression_dataset(g, 10, 2);
  const auto pred = gwr_predict(d.ds, d.sel, KernelSpec::global(), DistanceSource::among(d.ds.coords(), {}), tg.ds,
                                DistanceSource::between(d.ds.coords(), tg.ds.coords(), {}));
  const Eigen::MatrixXd X = design(d);
  const Eigen::VectorXd y = d.ds.column("y");
  const Eigen::VectorXd ols = X.colPivHouseholderQr().solve(y);
  const double s2 = (y - X * ols).squaredNorm() / (40.0 - 3.0);
  const Eigen::MatrixXd XtXi = (X.transpose() * X).inverse();
  const Eigen::MatrixXd Xt = design(tg);
  CHECK(pred.sigma2 == Approx(s2).epsilon(1e-10));
  CHECK(pred.failed.empty());
  for (Index i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = Xt.row(i).transpose();
    CHECK(pred.prediction(i) == Approx(x.dot(ols)).epsilon(1e-9));
    CHECK(pred.prediction_var(i) == Approx(s2 * (1.0 + x.dot(XtXi * x))).epsilon(1e-9));
  }
}

TEST_CASE("prediction variance exceeds sigma squared")
{
  gwtest::Gen g(24);
  for (int t = 0; t < 5; ++t) {
    const auto d = gwtest::regression_dataset(g, 50, 2);
    const auto tg = gwtest::regression_dataset(g, 20, 2);
    const KernelSpec k{KernelFamily::Bisquare, 30, true};
    const auto pred = gwr_predict(d.ds, d.sel, k, DistanceSource::among(d.ds.coords(), {}), tg.ds,
                                  DistanceSource::between(d.ds.coords(), tg.ds.coords(), {}));
    for (Index i = 0; i < 20; ++i) {
      CHECK(pred.prediction_var(i) > pred.sigma2);
      CHECK(std::isfinite(pred.prediction(i)));
    }
  }
}

TEST_CASE("prediction at a calibration point recovers noiseless y")
{
  gwtest::Gen g(25);
  const auto d = noiseless(g, 30, 2);
  const Index n = d.ds.size();
  const auto tg = d.ds;
  const auto pred = gwr_predict(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, static_cast<double>(n), true},
                                DistanceSource::among(d.ds.coords(), {}), tg,
                                DistanceSource::between(d.ds.coords(), tg.coords(), {}));
  CHECK(gwtest::max_abs_diff(pred.prediction, d.ds.column("y")) < 1e-9);
}

TEST_CASE("singular prediction targets are reported, not fatal")
{
  gwtest::Gen g(26);
  auto d = gwtest::regression_dataset(g, 30, 1);
  Coords far(2, 2);
  far << 50, 50, 1e6, 1e6;
  const auto tg = gwtest::make_dataset(far, Eigen::MatrixXd::Ones(2, 2), {"x1", "y"});
  const auto pred = gwr_predict(d.ds, d.sel, KernelSpec{KernelFamily::Bisquare, 40, false},
                                DistanceSource::among(d.ds.coords(), {}), tg,
                                DistanceSource::between(d.ds.coords(), far, {}));
  CHECK(pred.failed == std::vector<Index>{1});
  CHECK(std::isnan(pred.prediction(1)));
  CHECK(std::isfinite(pred.prediction(0)));
}

TEST_CASE("prediction metrics")
{
  Eigen::VectorXd obs(3), pred(3), var(3);
  obs << 1, 2, 3;
  pred << 1, 3, 1;
  var << 1, 4, 1;
  const auto m = prediction_metrics(obs, pred, var);
  CHECK(m.rmspe == Approx(std::sqrt(5.0 / 3.0)));
  CHECK(m.mape == Approx(1.0));
  CHECK(m.mean_zs == Approx((0.0 - 0.5 + 2.0) / 3.0));
  const double mz = 0.5;
  CHECK(m.sd_zs == Approx(std::sqrt((mz * mz + 1.0 + 1.5 * 1.5) / 2.0)));
}

TEST_CASE("diagnostics report")
{
  gwtest::Gen g(27);
  const auto d = noiseless(g, 30, 2);
  const auto fit = gwr_basic(d.ds, d.sel, KernelSpec{KernelFamily::Bisquare, 20, true},
                             DistanceSource::among(d.ds.coords(), {}));
  const auto rep = gwr_report(fit);
  CHECK(rep.r2 == Approx(1.0).margin(1e-9));
  CHECK(rep.coefficients.size() == 3);
  const auto text = format_report(rep);
  CHECK(text.find("AICc") != std::string::npos);
  CHECK(text.find("x2") != std::string::npos);
}

TEST_CASE("intercept-only gwr recovers the local means")
{
  gwtest::Gen g(28);
  const auto d = gwtest::regression_dataset(g, 30, 1);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 12, true};
  const auto fit = gwr_basic(d.ds, VariableSelection{"y", {}}, k, src);
  const Eigen::VectorXd y = d.ds.column("y");
  for (Index i = 0; i < 30; ++i) {
    CHECK(fit.coefficients(i, 0) == Approx(gw_mean(y, local_weights(src, i, k).w)).epsilon(1e-12));
  }
  CHECK(gwr_report(fit).coefficients.size() == 1);
}
