#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nngp/dataset.hpp"
#include "nngp/errors.hpp"

namespace nngp::csv {

/// Failure to open or parse a CSV file.
class io_error : public error {
 public:
  using error::error;
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

/// Parses comma-separated numeric data. Empty fields and `NA` are missing.
inline Dataset parse(std::istream& in, bool has_header, const std::string& source = "<stream>") {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> observed;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (first && line_no == 1 && fields.size() == 1 && fields[0].rfind("\xEF\xBB\xBF", 0) == 0)
      fields[0] = fields[0].substr(3);
    if (first) {
      width = fields.size();
      first = false;
      if (has_header) {
        for (auto& f : fields) header.push_back(trim(f));
        continue;
      }
    }
    if (fields.size() != width)
      throw io_error(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                     " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(width);
    std::vector<bool> obs(width);
    for (std::size_t j = 0; j < width; ++j) {
      const std::string f = trim(fields[j]);
      if (f.empty() || f == "NA") {
        row[j] = kMissing;
        obs[j] = false;
        continue;
      }
      double v = 0.0;
      const char* begin = f.data();
      const char* end = begin + f.size();
      if (*begin == '+') ++begin;
      auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end)
        throw io_error(source + ":" + std::to_string(line_no) + ": cannot parse '" + f + "' as a number");
      row[j] = v;
      obs[j] = true;
    }
    rows.push_back(std::move(row));
    observed.push_back(std::move(obs));
  }
  Dataset d;
  const auto n = static_cast<Index>(rows.size());
  const auto p = static_cast<Index>(width);
  d.values.resize(n, p);
  d.mask.resize(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) {
      d.values(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      d.mask(i, j) = observed[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  d.column_kinds.assign(width, ColumnKind::Continuous);
  d.column_names = std::move(header);
  return d;
}

inline Dataset read(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");
  return parse(in, has_header, path);
}

/// Shortest-safe decimal form: 17 significant digits round-trip any double.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

/// Writes `values`; cells where `mask` is false (when given) are left empty.
inline void write(std::ostream& out, const Eigen::Ref<const Eigen::MatrixXd>& values,
                  const std::vector<std::string>& header = {}, const MaskMatrix* mask = nullptr) {
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << quote_if_needed(header[j]);
    out << '\n';
  }
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      if (mask && !(*mask)(i, j)) continue;
      out << format_number(values(i, j));
    }
    out << '\n';
  }
}

inline void write(const std::string& path, const Eigen::Ref<const Eigen::MatrixXd>& values,
                  const std::vector<std::string>& header = {}, const MaskMatrix* mask = nullptr) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  write(out, values, header, mask);
  if (!out) throw io_error("write to '" + path + "' failed");
}

}  // namespace nngp::csv
