#include "oracles.hpp"
#include "support.hpp"

#include <gwmodel/collin.hpp>
#include <gwmodel/gwr.hpp>

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

// Regression data whose x2 is x1 plus a little noise.
gwtest::RegressionData near_duplicate(gwtest::Gen& g, Index n, double jitter)
{
  const Coords c = g.coords(n);
  Eigen::MatrixXd attrs(n, 4);
  attrs.col(0) = g.normals(n);
  attrs.col(1) = attrs.col(0) + jitter * g.normals(n);
  attrs.col(2) = g.normals(n);
  attrs.col(3) = attrs.col(0) + attrs.col(2) + 0.3 * g.normals(n);
  gwtest::RegressionData d{gwtest::make_dataset(c, attrs, {"x1", "x2", "x3", "y"}), {}};
  d.sel.dependent = "y";
  d.sel.independents = {"x1", "x2", "x3"};
  return d;
}

// Columns of the sqrt(W)-weighted design scaled to unit length.
Eigen::MatrixXd scaled_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& w)
{
  Eigen::MatrixXd S = w.cwiseSqrt().asDiagonal() * X;
  for (Index j = 0; j < S.cols(); ++j) {
    S.col(j) /= S.col(j).norm();
  }
  return S;
}

} // namespace

TEST_CASE("BKW condition number of orthonormal columns is one")
{
  gwtest::Gen g(1);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(g.normal_matrix(20, 4));
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(20, 4);
  CHECK(bkw_condition_number(Q) == Approx(1.0).epsilon(1e-12));
  CHECK(bkw_condition_number(Q * Eigen::Vector4d(1, 5, 0.1, 3).asDiagonal()) == Approx(1.0).epsilon(1e-12));
  Eigen::MatrixXd Z = Q;
  Z.col(2).setZero();
  CHECK(code_of([&] { bkw_condition_number(Z); }) == ErrorCode::ZeroColumn);
}

TEST_CASE("BKW condition number matches an SVD oracle")
{
  gwtest::Gen g(2);
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd M = oracle::add_intercept(g.normal_matrix(30, 3));
    M.col(2) += g.uniform(0, 3) * M.col(1);
    CHECK(bkw_condition_number(M) == Approx(oracle::bkw(M)).epsilon(1e-10));
  }
}

TEST_CASE("ridge for a target condition number")
{
  CHECK(ridge_for_target_cn(4.0, 1.0, 3.0) == Approx(0.5));
  CHECK((4.0 + 0.5) / (1.0 + 0.5) == Approx(3.0));
  CHECK(ridge_for_target_cn(4.0, 2.0, 3.0) == 0.0);
  CHECK(ridge_for_target_cn(5.0, 5.0, 3.0) == 0.0);

  gwtest::Gen g(3);
  for (int t = 0; t < 1000; ++t) {
    const Index p = g.integer(2, 8);
    const Eigen::MatrixXd B = g.normal_matrix(p + g.integer(0, 5), p);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B.transpose() * B);
    const Eigen::VectorXd eps = eig.eigenvalues().reverse().cwiseMax(0.0);
    const double kappa = g.uniform(1.5, 100.0);
    const double lambda = ridge_for_target_cn(eps, kappa);
    CHECK(lambda >= 0.0);
    if (lambda > 0.0) {
      CHECK((eps(0) + lambda) / (eps(p - 1) + lambda) == Approx(kappa).epsilon(1e-12));
    } else {
      CHECK(eps(0) <= kappa * eps(p - 1) * (1 + 1e-12));
    }
  }
}

TEST_CASE("unadjusted LCR equals basic GWR")
{
  gwtest::Gen g(4);
  for (int t = 0; t < 4; ++t) {
    const auto d = t % 2 ? near_duplicate(g, 50, 0.05) : gwtest::regression_dataset(g, 50, 3);
    const auto src = DistanceSource::among(d.ds.coords(), {});
    const KernelSpec k{KernelFamily::Bisquare, 30, true};
    const auto lcr = gwr_lcr(d.ds, d.sel, k, src, false, 30);
    const auto basic = gwr_basic(d.ds, d.sel, k, src);
    CHECK(gwtest::max_abs_diff(lcr.coefficients, basic.coefficients) < 1e-10 * (1 + basic.coefficients.cwiseAbs().maxCoeff()));
    CHECK((lcr.local_lambda.array() == 0.0).all());
    CHECK(lcr.names == basic.names);
  }
}

TEST_CASE("adjusted LCR caps the local condition number")
{
  gwtest::Gen g(5);
  const auto d = near_duplicate(g, 60, 0.05);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 25, true};
  const double kappa = 10.0;
  const auto fit = gwr_lcr(d.ds, d.sel, k, src, true, kappa);
  const Eigen::MatrixXd X = oracle::add_intercept(d.ds.columns(d.sel.independents));
  const Eigen::VectorXd y = d.ds.column("y");
  Index adjusted = 0;
  for (Index i = 0; i < 60; ++i) {
    const Eigen::VectorXd w = local_weights(src, i, k).w;
    const Eigen::MatrixXd S = scaled_design(X, w);
    CHECK(fit.local_cn(i) == Approx(oracle::bkw(w.cwiseSqrt().asDiagonal() * X)).epsilon(1e-8));
    CHECK(fit.local_cn(i) >= 1.0);
    const double lambda = fit.local_lambda(i);
    if (fit.local_cn(i) <= kappa) {
      CHECK(lambda == 0.0);
    } else {
      CHECK(lambda > 0.0);
      ++adjusted;
    }
    const Eigen::MatrixXd B = S.transpose() * S + lambda * Eigen::MatrixXd::Identity(4, 4);
    const auto [vals, vecs] = oracle::jacobi_eigen(B);
    CHECK(std::sqrt(vals(0) / vals(3)) <= kappa * (1 + 1e-9));

    // direct ridge solve in scaled coordinates, back-transformed
    Eigen::VectorXd dinv(4);
    for (Index j = 0; j < 4; ++j) {
      dinv(j) = 1.0 / (w.cwiseSqrt().asDiagonal() * X).col(j).norm();
    }
    const Eigen::VectorXd rhs = dinv.asDiagonal() * (X.transpose() * w.cwiseProduct(y));
    const Eigen::VectorXd beta = dinv.asDiagonal() * B.fullPivLu().solve(rhs);
    CHECK(gwtest::max_abs_diff(fit.coefficients.row(i).transpose(), beta) < 1e-8 * (1 + beta.cwiseAbs().maxCoeff()));
  }
  CHECK(adjusted > 0);
}

TEST_CASE("full boxcar bandwidth reproduces the global condition number")
{
  gwtest::Gen g(6);
  const auto d = near_duplicate(g, 40, 0.2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const auto fit = gwr_lcr(d.ds, d.sel, KernelSpec{KernelFamily::Boxcar, 40, true}, src, false, 30);
  const double global = bkw_condition_number(oracle::add_intercept(d.ds.columns(d.sel.independents)));
  CHECK((fit.local_cn.array() - global).abs().maxCoeff() < 1e-8 * global);
}

TEST_CASE("VIFs are one for orthogonal predictors under the global kernel")
{
  gwtest::Gen g(7);
  const Index n = 32;
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(
      (Eigen::MatrixXd(n, 3) << Eigen::VectorXd::Ones(n), g.normal_matrix(n, 2)).finished());
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 3);
  Eigen::MatrixXd attrs(n, 3);
  attrs.col(0) = Q.col(1);
  attrs.col(1) = Q.col(2);
  attrs.col(2) = g.normals(n);
  const auto ds = gwtest::make_dataset(g.coords(n), attrs, {"a", "b", "y"});
  const auto diag = collin_diagnostics(ds, VariableSelection{"y", {"a", "b"}}, KernelSpec::global(),
                                       DistanceSource::among(ds.coords(), {}));
  CHECK((diag.vifs.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(diag.correlations.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(diag.pair_names == std::vector<std::string>{"a.b"});
}

TEST_CASE("duplicated predictor gives a singular correlation matrix")
{
  gwtest::Gen g(8);
  Eigen::MatrixXd attrs = g.normal_matrix(30, 3);
  attrs.col(1) = attrs.col(0);
  const auto ds = gwtest::make_dataset(g.coords(30), attrs, {"a", "b", "y"});
  CHECK(code_of([&] {
          collin_diagnostics(ds, VariableSelection{"y", {"a", "b"}}, KernelSpec{KernelFamily::Bisquare, 20, true},
                             DistanceSource::among(ds.coords(), {}));
        })
        == ErrorCode::SingularCorrelationMatrix);
}

TEST_CASE("collinearity diagnostics match independent oracles")
{
  gwtest::Gen g(9);
  const auto d = near_duplicate(g, 40, 0.1);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 20, true};
  const auto diag = collin_diagnostics(d.ds, d.sel, k, src);
  const Eigen::MatrixXd Z = d.ds.columns(d.sel.independents);
  const Eigen::MatrixXd X = oracle::add_intercept(Z);
  REQUIRE(diag.correlations.cols() == 3);
  for (Index i = 0; i < 40; ++i) {
    const Eigen::VectorXd w = local_weights(src, i, k).w;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    R(0, 1) = R(1, 0) = oracle::wcorr(Z.col(0), Z.col(1), w);
    R(0, 2) = R(2, 0) = oracle::wcorr(Z.col(0), Z.col(2), w);
    R(1, 2) = R(2, 1) = oracle::wcorr(Z.col(1), Z.col(2), w);
    CHECK(diag.correlations(i, 0) == Approx(R(0, 1)).epsilon(1e-10));
    CHECK(diag.correlations(i, 2) == Approx(R(1, 2)).epsilon(1e-10).margin(1e-12));
    const Eigen::Vector3d vif = R.inverse().diagonal();
    CHECK(gwtest::max_abs_diff(diag.vifs.row(i).transpose(), vif) < 1e-8 * vif.maxCoeff());
    CHECK(diag.vifs.row(i).minCoeff() >= 1.0 - 1e-9);

    const Eigen::MatrixXd WX = w.cwiseSqrt().asDiagonal() * X;
    const Eigen::MatrixXd& V = diag.vdps[static_cast<std::size_t>(i)];
    CHECK(gwtest::max_abs_diff(V, oracle::vdp(WX)) < 1e-8);
    for (Index c = 0; c < 4; ++c) {
      CHECK(V.col(c).sum() == Approx(1.0).epsilon(1e-9));
    }
    CHECK(diag.local_cn(i) == Approx(oracle::bkw(WX)).epsilon(1e-8));
    const auto& f = diag.flags[static_cast<std::size_t>(i)];
    CHECK(f.correlation == (diag.correlations.row(i).cwiseAbs().maxCoeff() > 0.8));
    CHECK(f.vif == (diag.vifs.row(i).maxCoeff() > 10.0));
    CHECK(f.condition == (diag.local_cn(i) > 30.0));
    CHECK(f.vdp == ((V.row(3).array() > 0.5).count() >= 2));
  }
}

TEST_CASE("well-conditioned data give the same adjusted and unadjusted bandwidth")
{
  gwtest::Gen g(10);
  const auto d = gwtest::regression_dataset(g, 40, 2);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const auto plain = lcr_bandwidth(d.ds, d.sel, KernelFamily::Bisquare, true, src, false, 30);
  const auto adj = lcr_bandwidth(d.ds, d.sel, KernelFamily::Bisquare, true, src, true, 30);
  CHECK(plain.value == adj.value);
  const auto fit = gwr_lcr(d.ds, d.sel, KernelSpec{KernelFamily::Bisquare, adj.value, true}, src, true, 30);
  CHECK((fit.local_lambda.array() == 0.0).all());
  const double cv = gwr_cv_score(d.ds, d.sel, KernelSpec{KernelFamily::Bisquare, plain.value, true}, src);
  CHECK(plain.score == Approx(cv).epsilon(1e-10));
}

TEST_CASE("LCR cross-validation recomputes the ridge from leave-one-out weights")
{
  gwtest::Gen g(11);
  const auto d = near_duplicate(g, 30, 0.05);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const KernelSpec k{KernelFamily::Bisquare, 20, true};
  const Eigen::MatrixXd X = oracle::add_intercept(d.ds.columns(d.sel.independents));
  const Eigen::VectorXd y = d.ds.column("y");
  double s = 0.0;
  for (Index i = 0; i < 30; ++i) {
    Eigen::VectorXd w = local_weights(src, i, k).w;
    w(i) = 0.0;
    const Eigen::MatrixXd S = scaled_design(X, w);
    const auto [vals, vecs] = oracle::jacobi_eigen(S.transpose() * S);
    const double cn = std::sqrt(vals(0) / vals(3));
    const double lambda = cn > 10.0 ? std::max(0.0, (vals(0) - vals(3)) / (100.0 - 1.0) - vals(3)) : 0.0;
    Eigen::VectorXd dinv(4);
    for (Index j = 0; j < 4; ++j) {
      dinv(j) = 1.0 / (w.cwiseSqrt().asDiagonal() * X).col(j).norm();
    }
    const Eigen::MatrixXd B = S.transpose() * S + lambda * Eigen::MatrixXd::Identity(4, 4);
    const Eigen::VectorXd beta = dinv.asDiagonal() * B.fullPivLu().solve(dinv.asDiagonal() * (X.transpose() * w.cwiseProduct(y)));
    s += std::pow(y(i) - X.row(i).dot(beta), 2);
  }
  CHECK(gwtest::rel_diff(lcr_cv_score(d.ds, d.sel, k, src, true, 10.0), s) < 1e-8);
}

TEST_CASE("removing a near-duplicate predictor lowers the condition numbers")
{
  gwtest::Gen g(12);
  const auto d = near_duplicate(g, 50, 0.02);
  const auto src = DistanceSource::among(d.ds.coords(), {});
  const auto res = cn_explore(d.ds, "y", {{"x1", "x2", "x3"}, {"x1", "x3"}, {}, {"x3"}}, KernelFamily::Bisquare,
                              true, src);
  REQUIRE(res.size() == 4);
  REQUIRE_FALSE(res[0].error.has_value());
  REQUIRE_FALSE(res[1].error.has_value());
  CHECK(res[1].local_cn.maxCoeff() < res[0].local_cn.maxCoeff());
  CHECK(res[0].summary.max == res[0].local_cn.maxCoeff());
  CHECK(res[2].error.has_value());
  REQUIRE_FALSE(res[3].error.has_value());
  CHECK(res[3].bandwidth.has_value());
}

TEST_CASE("single standardized predictor has condition number near one")
{
  gwtest::Gen g(13);
  const Index n = 40;
  Eigen::MatrixXd attrs(n, 2);
  attrs.col(0) = g.normals(n);
  attrs.col(1) = g.normals(n);
  const auto raw = gwtest::make_dataset(g.coords(n), attrs, {"x", "y"});
  const auto ds = standardize(raw, {"x", "y"});
  const auto fit = gwr_lcr(ds, VariableSelection{"y", {"x"}}, KernelSpec::global(),
                           DistanceSource::among(ds.coords(), {}), false, 30);
  CHECK((fit.local_cn.array() - 1.0).abs().maxCoeff() < 1e-8);
}
