#pragma once

#include "gwmodel/dataset.hpp"
#include "gwmodel/errors.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace gwmodel {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 style reader: quoted fields, doubled quotes, CRLF, leading BOM.
inline CsvTable parse_csv(std::istream& is)
{
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) {
    pos = 3;
  }
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool any = false;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    const bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      records.push_back(std::move(record));
    }
    record.clear();
    any = false;
  };
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (quoted) {
      if (c == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::ParseError, "unterminated quoted field");
  }
  if (any || !field.empty() || !record.empty()) {
    end_record();
  }
  if (records.empty()) {
    throw Error(ErrorCode::EmptyFile, "CSV input is empty");
  }
  CsvTable t;
  t.header = std::move(records.front());
  records.erase(records.begin());
  t.rows = std::move(records);
  return t;
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

inline bool is_missing(std::string_view s)
{
  s = trim(s);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan";
}

inline std::optional<double> parse_number(std::string_view s)
{
  s = trim(s);
  if (!s.empty() && s.front() == '+') {
    s.remove_prefix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

} // namespace detail

struct CsvDataset {
  SpatialDataset data;
  /// Columns left out because none of their values is numeric.
  std::vector<std::string> dropped;
};

/// Builds a dataset from CSV text. The two coordinate columns are removed from
/// the attributes; "NA", "NaN" and empty fields read as NaN.
inline CsvDataset read_csv(std::istream& is, const std::string& x_col, const std::string& y_col,
                           bool geographic = false)
{
  const CsvTable t = parse_csv(is);
  if (t.rows.empty()) {
    throw Error(ErrorCode::EmptyFile, "CSV input has a header but no rows");
  }
  auto locate = [&](const std::string& name) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (detail::trim(t.header[c]) == name) {
        return c;
      }
    }
    throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in CSV header");
  };
  const std::size_t xc = locate(x_col);
  const std::size_t yc = locate(y_col);
  const std::size_t cols = t.header.size();
  const auto n = static_cast<Index>(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != cols) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + " has " + std::to_string(t.rows[r].size())
                                             + " fields; header has " + std::to_string(cols));
    }
  }

  auto parse_error = [&](std::size_t r, std::size_t c) {
    return Error(ErrorCode::ParseError, "row " + std::to_string(r + 1) + ", column '" + t.header[c]
                                            + "': cannot parse '" + t.rows[r][c] + "' as a number");
  };

  CsvDataset out;
  Coords coords(n, 2);
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> values;
  for (std::size_t c = 0; c < cols; ++c) {
    Eigen::VectorXd v(n);
    std::optional<std::size_t> bad;
    bool numeric = false;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const std::string& f = t.rows[r][c];
      if (detail::is_missing(f)) {
        v(static_cast<Index>(r)) = std::numeric_limits<double>::quiet_NaN();
      } else if (const auto d = detail::parse_number(f)) {
        v(static_cast<Index>(r)) = *d;
        numeric = true;
      } else if (!bad) {
        bad = r;
      }
    }
    const bool coordinate = c == xc || c == yc;
    if (bad && (numeric || coordinate)) {
      throw parse_error(*bad, c);
    }
    if (coordinate) {
      coords.col(c == xc ? 0 : 1) = v;
      continue;
    }
    if (bad) {
      out.dropped.emplace_back(detail::trim(t.header[c]));
      continue;
    }
    names.emplace_back(detail::trim(t.header[c]));
    values.push_back(std::move(v));
  }
  AttributeMatrix attrs(n, static_cast<Index>(values.size()));
  for (std::size_t j = 0; j < values.size(); ++j) {
    attrs.col(static_cast<Index>(j)) = values[j];
  }
  out.data = SpatialDataset(std::move(coords), std::move(attrs), std::move(names), geographic);
  return out;
}

inline CsvDataset read_csv(const std::string& path, const std::string& x_col, const std::string& y_col,
                           bool geographic = false)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  return read_csv(is, x_col, y_col, geographic);
}

/// Column-oriented result set; one row per location.
class ResultTable {
public:
  using Column = std::variant<Eigen::VectorXd, std::vector<std::string>>;

  ResultTable() = default;
  ResultTable(Coords coords, std::string x_name = "x", std::string y_name = "y")
      : coords_(std::move(coords)), x_name_(std::move(x_name)), y_name_(std::move(y_name))
  {
  }

  Index rows() const { return coords_.rows(); }
  const Coords& coords() const { return coords_; }
  const std::string& x_name() const { return x_name_; }
  const std::string& y_name() const { return y_name_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Column>& columns() const { return columns_; }

  void add(std::string name, Eigen::VectorXd v)
  {
    check_rows(v.size(), name);
    names_.push_back(std::move(name));
    columns_.emplace_back(std::move(v));
  }

  void add(std::string name, std::vector<std::string> v)
  {
    check_rows(static_cast<Index>(v.size()), name);
    names_.push_back(std::move(name));
    columns_.emplace_back(std::move(v));
  }

private:
  void check_rows(Index size, const std::string& name) const
  {
    if (size != rows()) {
      throw Error(ErrorCode::InvalidArgument, "result column '" + name + "' has the wrong length");
    }
  }

  Coords coords_;
  std::string x_name_ = "x";
  std::string y_name_ = "y";
  std::vector<std::string> names_;
  std::vector<Column> columns_;
};

/// 17 significant digits, so values read back exactly. NaN is written as NA.
inline std::string format_double(double v)
{
  if (std::isnan(v)) {
    return "NA";
  }
  if (std::isinf(v)) {
    return v > 0 ? "Inf" : "-Inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s)
{
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    return s;
  }
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + '"';
}

inline void write_csv(std::ostream& os, const ResultTable& t)
{
  os << csv_escape(t.x_name()) << ',' << csv_escape(t.y_name());
  for (const auto& n : t.names()) {
    os << ',' << csv_escape(n);
  }
  os << '\n';
  for (Index i = 0; i < t.rows(); ++i) {
    os << format_double(t.coords()(i, 0)) << ',' << format_double(t.coords()(i, 1));
    for (const auto& col : t.columns()) {
      os << ',';
      if (const auto* v = std::get_if<Eigen::VectorXd>(&col)) {
        os << format_double((*v)(i));
      } else {
        os << csv_escape(std::get<std::vector<std::string>>(col)[static_cast<std::size_t>(i)]);
      }
    }
    os << '\n';
  }
}

inline nlohmann::ordered_json to_geojson(const ResultTable& t)
{
  using Json = nlohmann::ordered_json;
  auto number = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json features = Json::array();
  for (Index i = 0; i < t.rows(); ++i) {
    Json props = Json::object();
    for (std::size_t c = 0; c < t.names().size(); ++c) {
      const auto& col = t.columns()[c];
      if (const auto* v = std::get_if<Eigen::VectorXd>(&col)) {
        props[t.names()[c]] = number((*v)(i));
      } else {
        props[t.names()[c]] = std::get<std::vector<std::string>>(col)[static_cast<std::size_t>(i)];
      }
    }
    features.push_back({{"type", "Feature"},
                        {"geometry",
                         {{"type", "Point"},
                          {"coordinates", Json::array({t.coords()(i, 0), t.coords()(i, 1)})}}},
                        {"properties", std::move(props)}});
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

inline void write_geojson(std::ostream& os, const ResultTable& t) { os << to_geojson(t).dump() << '\n'; }

enum class OutputFormat { Csv, GeoJson };

inline OutputFormat parse_format(std::string_view s)
{
  if (s == "csv") {
    return OutputFormat::Csv;
  }
  if (s == "geojson") {
    return OutputFormat::GeoJson;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown output format '" + std::string(s) + "'");
}

inline void write_text(const std::string& path, const std::string& text)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  }
  os << text;
  if (!os) {
    throw Error(ErrorCode::IoError, "write to " + path + " failed");
  }
}

inline void write_results(const ResultTable& t, OutputFormat format, const std::string& path)
{
  std::ostringstream os;
  if (format == OutputFormat::Csv) {
    write_csv(os, t);
  } else {
    write_geojson(os, t);
  }
  write_text(path, os.str());
}

} // namespace gwmodel
