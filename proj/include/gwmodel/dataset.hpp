#pragma once

#include "gwmodel/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gwmodel {

using Index = Eigen::Index;
using Coords = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using AttributeMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Point-referenced multivariate data: n locations, m named attribute columns.
/// Geographic datasets store (longitude, latitude) in degrees.
class SpatialDataset {
public:
  SpatialDataset() = default;

  SpatialDataset(Coords coords, AttributeMatrix attrs, std::vector<std::string> names, bool geographic = false)
    : coords_(std::move(coords)), attrs_(std::move(attrs)), names_(std::move(names)), geographic_(geographic)
  {
  }

  Index size() const noexcept { return coords_.rows(); }
  Index variables() const noexcept { return attrs_.cols(); }

  const Coords& coords() const noexcept { return coords_; }
  const AttributeMatrix& attrs() const noexcept { return attrs_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  bool geographic() const noexcept { return geographic_; }

  std::optional<Index> find(const std::string& name) const
  {
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == name) {
        return static_cast<Index>(j);
      }
    }
    return std::nullopt;
  }

  Index column_index(const std::string& name) const
  {
    if (auto j = find(name)) {
      return *j;
    }
    throw Error(ErrorCode::UnknownColumn, "no attribute named '" + name + "'");
  }

  Eigen::VectorXd column(const std::string& name) const { return attrs_.col(column_index(name)); }

  /// Columns in the given order, as a column-major n x k matrix.
  Eigen::MatrixXd columns(const std::vector<std::string>& names) const
  {
    Eigen::MatrixXd out(size(), static_cast<Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) {
      out.col(static_cast<Index>(j)) = attrs_.col(column_index(names[j]));
    }
    return out;
  }

  SpatialDataset with_attrs(AttributeMatrix attrs) const
  {
    return SpatialDataset(coords_, std::move(attrs), names_, geographic_);
  }

private:
  Coords coords_;
  AttributeMatrix attrs_;
  std::vector<std::string> names_;
  bool geographic_ = false;
};

struct VariableSelection {
  std::optional<std::string> dependent;
  std::vector<std::string> independents;
};

/// Throws unless every dataset invariant holds.
inline void validate(const SpatialDataset& ds)
{
  if (ds.size() < 1 || ds.variables() < 1) {
    throw Error(ErrorCode::EmptyDataset, "dataset needs at least one location and one attribute");
  }
  if (ds.attrs().rows() != ds.size()) {
    throw Error(ErrorCode::InvalidArgument, "attribute rows do not match coordinate rows");
  }
  if (static_cast<Index>(ds.names().size()) != ds.variables()) {
    throw Error(ErrorCode::InvalidArgument, "attribute names do not match attribute columns");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : ds.names()) {
    if (name.empty()) {
      throw Error(ErrorCode::DuplicateName, "attribute names must be nonempty");
    }
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateName, "duplicate attribute name '" + name + "'");
    }
  }
  for (Index i = 0; i < ds.size(); ++i) {
    for (Index c = 0; c < 2; ++c) {
      if (!std::isfinite(ds.coords()(i, c))) {
        throw Error(ErrorCode::NonFiniteValue,
                    "coordinate row " + std::to_string(i) + " column " + std::to_string(c));
      }
    }
    for (Index j = 0; j < ds.variables(); ++j) {
      if (!std::isfinite(ds.attrs()(i, j))) {
        throw Error(ErrorCode::NonFiniteValue, "attribute row " + std::to_string(i) + " column '"
                                                   + ds.names()[static_cast<std::size_t>(j)] + "'");
      }
    }
  }
  if (ds.geographic()) {
    for (Index i = 0; i < ds.size(); ++i) {
      const double lon = ds.coords()(i, 0);
      const double lat = ds.coords()(i, 1);
      if (lon < -180.0 || lon > 180.0 || lat < -90.0 || lat > 90.0) {
        throw Error(ErrorCode::GeographicRangeViolation,
                    "row " + std::to_string(i) + " has lon/lat outside [-180,180]x[-90,90]");
      }
    }
  }
}

inline void validate(const SpatialDataset& ds, const VariableSelection& sel)
{
  std::unordered_set<std::string> seen;
  auto check = [&](const std::string& name) {
    ds.column_index(name);
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::InvalidSelection, "variable '" + name + "' selected twice");
    }
  };
  if (sel.dependent) {
    check(*sel.dependent);
  }
  for (const auto& name : sel.independents) {
    check(name);
  }
}

/// Global z-scoring of the selected columns (sample standard deviation).
inline SpatialDataset standardize(const SpatialDataset& ds, const std::vector<std::string>& cols)
{
  AttributeMatrix attrs = ds.attrs();
  const double n = static_cast<double>(ds.size());
  for (const auto& name : cols) {
    const Index j = ds.column_index(name);
    auto col = attrs.col(j);
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    const double sd = ds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (!(sd > 0.0)) {
      throw Error(ErrorCode::ZeroVariance, "column '" + name + "' has zero variance");
    }
    col = (col.array() - mean) / sd;
  }
  return ds.with_attrs(std::move(attrs));
}

} // namespace gwmodel
