#pragma once

// Dataset csv io.
//
// Files are comma separated with a mandatory header row, UTF-8, '.' as the
// decimal separator.  A schema names the sensitive, label and environment
// columns and how the sensitive values map onto {-1, +1}; every remaining
// column is a numeric feature.  Doubles are written with shortest
// round-trip formatting, so write_csv followed by load_csv reproduces the
// dataset bit-exactly.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairdolce/core.hpp"

namespace fairdolce {

struct CsvSchema {
  std::string sensitive_col = "z";
  std::string label_col = "y";
  std::string env_col = "e";
  // token -> {-1, +1}; the default accepts numeric encodings
  std::map<std::string, int> sensitive_map = {{"-1", -1}, {"1", 1}, {"+1", 1}};
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& tok, size_t row, const std::string& col) {
  const std::string t = trim(tok);
  double v = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw std::runtime_error("csv: row " + std::to_string(row) +
                             ": cannot parse '" + tok + "' in column " + col);
  return v;
}

inline long parse_int(const std::string& tok, size_t row, const std::string& col) {
  const std::string t = trim(tok);
  long v = 0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw std::runtime_error("csv: row " + std::to_string(row) +
                             ": cannot parse '" + tok + "' in column " + col);
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::logic_error("csv: double formatting failed");
  return std::string(buf, ptr);
}

}  // namespace detail

inline std::vector<DataPoint> load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("load_csv: " + path + " is empty (header required)");
  const std::vector<std::string> header = detail::split_csv_line(line);

  int z_idx = -1, y_idx = -1, e_idx = -1;
  std::vector<int> feature_idx;
  std::vector<std::string> feature_names;
  for (size_t i = 0; i < header.size(); ++i) {
    const std::string name = detail::trim(header[i]);
    if (name == schema.sensitive_col) {
      z_idx = static_cast<int>(i);
    } else if (name == schema.label_col) {
      y_idx = static_cast<int>(i);
    } else if (name == schema.env_col) {
      e_idx = static_cast<int>(i);
    } else {
      feature_idx.push_back(static_cast<int>(i));
      feature_names.push_back(name);
    }
  }
  if (z_idx < 0)
    throw std::runtime_error("load_csv: missing sensitive column '" + schema.sensitive_col + "'");
  if (y_idx < 0)
    throw std::runtime_error("load_csv: missing label column '" + schema.label_col + "'");
  if (e_idx < 0)
    throw std::runtime_error("load_csv: missing environment column '" + schema.env_col + "'");
  if (feature_idx.empty())
    throw std::runtime_error("load_csv: no feature columns");

  std::vector<DataPoint> points;
  size_t row = 1;  // header is row 1
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw std::runtime_error("load_csv: row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(header.size()));
    DataPoint p;
    const std::string ztok = detail::trim(cells[z_idx]);
    const auto zit = schema.sensitive_map.find(ztok);
    if (zit == schema.sensitive_map.end())
      throw std::runtime_error("load_csv: row " + std::to_string(row) +
                               ": sensitive value '" + ztok +
                               "' is not covered by the declared two-value mapping");
    p.sensitive = zit->second;

    const long y = detail::parse_int(cells[y_idx], row, schema.label_col);
    if (y != 0 && y != 1)
      throw std::runtime_error("load_csv: row " + std::to_string(row) +
                               ": label must be 0 or 1, got " + std::to_string(y));
    p.label = static_cast<int>(y);

    const long e = detail::parse_int(cells[e_idx], row, schema.env_col);
    if (e < 0)
      throw std::runtime_error("load_csv: row " + std::to_string(row) +
                               ": environment id must be non-negative");
    p.environment = static_cast<int>(e);

    p.features.reserve(feature_idx.size());
    for (size_t f = 0; f < feature_idx.size(); ++f)
      p.features.push_back(
          detail::parse_double(cells[feature_idx[f]], row, feature_names[f]));
    points.push_back(std::move(p));
  }
  if (points.empty())
    throw std::runtime_error("load_csv: " + path + " has no data rows");
  return points;
}

inline void write_csv(const std::string& path, const std::vector<DataPoint>& points) {
  if (points.empty()) throw std::invalid_argument("write_csv: no points");
  const size_t d = points[0].features.size();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t j = 0; j < d; ++j) os << "f" << j << ",";
  os << "z,y,e\n";
  for (const DataPoint& p : points) {
    if (p.features.size() != d)
      throw std::invalid_argument("write_csv: inconsistent feature dimensions");
    for (size_t j = 0; j < d; ++j) os << detail::format_double(p.features[j]) << ",";
    os << p.sensitive << "," << p.label << "," << p.environment << "\n";
  }
  if (!os) throw std::runtime_error("write_csv: write failed for " + path);
}

}  // namespace fairdolce
