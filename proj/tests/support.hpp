#pragma once

#include <gwmodel/dataset.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace gwtest {

using gwmodel::Index;

/// Small deterministic generator for property tests.
class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mu = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mu, sd)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin(double p = 0.5) { return uniform() < p; }

  Eigen::VectorXd normals(Index n, double sd = 1.0)
  {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) {
      v(i) = normal(0.0, sd);
    }
    return v;
  }

  Eigen::VectorXd uniforms(Index n, double lo = 0.0, double hi = 1.0)
  {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) {
      v(i) = uniform(lo, hi);
    }
    return v;
  }

  Eigen::MatrixXd normal_matrix(Index r, Index c)
  {
    Eigen::MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) {
        m(i, j) = normal();
      }
    }
    return m;
  }

  gwmodel::Coords coords(Index n, double extent = 100.0)
  {
    gwmodel::Coords c(n, 2);
    for (Index i = 0; i < n; ++i) {
      c(i, 0) = uniform(0.0, extent);
      c(i, 1) = uniform(0.0, extent);
    }
    return c;
  }

  std::mt19937_64& engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

inline std::vector<std::string> names(const std::string& prefix, Index m)
{
  std::vector<std::string> out;
  for (Index j = 0; j < m; ++j) {
    out.push_back(prefix + std::to_string(j + 1));
  }
  return out;
}

inline gwmodel::SpatialDataset make_dataset(const gwmodel::Coords& coords, const Eigen::MatrixXd& attrs,
                                            std::vector<std::string> cols)
{
  return gwmodel::SpatialDataset(coords, gwmodel::AttributeMatrix(attrs), std::move(cols));
}

/// Random dataset with columns x1..xm.
inline gwmodel::SpatialDataset random_dataset(Gen& g, Index n, Index m)
{
  return make_dataset(g.coords(n), g.normal_matrix(n, m), names("x", m));
}

/// Regression dataset: y = X beta + noise with spatially drifting slopes.
struct RegressionData {
  gwmodel::SpatialDataset ds;
  gwmodel::VariableSelection sel;
};

inline RegressionData regression_dataset(Gen& g, Index n, Index m, double noise = 0.5, bool drift = true)
{
  const gwmodel::Coords c = g.coords(n);
  const Eigen::MatrixXd X = g.normal_matrix(n, m);
  Eigen::MatrixXd attrs(n, m + 1);
  attrs.leftCols(m) = X;
  for (Index i = 0; i < n; ++i) {
    double y = 1.0;
    for (Index j = 0; j < m; ++j) {
      const double slope = 1.0 + static_cast<double>(j) + (drift ? c(i, 0) / 50.0 : 0.0);
      y += slope * X(i, j);
    }
    attrs(i, m) = y + g.normal(0.0, noise);
  }
  auto cols = names("x", m);
  cols.push_back("y");
  RegressionData out{make_dataset(c, attrs, cols), {}};
  out.sel.dependent = "y";
  out.sel.independents = names("x", m);
  return out;
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace gwtest
