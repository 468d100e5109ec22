#pragma once

// CSV ingestion into a Dataset, and the CSV layout written by `simulate`.
// Header row mandatory, comma separated, no quoting beyond optional double
// quotes around header names.

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace nbreg {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

inline bool parse_count(std::string_view s, Count& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace detail

struct CsvOptions {
  std::string response_column = "y";
  bool no_intercept = false;
  std::string intercept_name = "(Intercept)";
};

/// Parses CSV text. Row numbers in errors are file line numbers (header = 1);
/// columns are 1-based.
inline Dataset parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      for (auto h : detail::split_csv_line(line)) header.push_back(detail::unquote(h));
      break;
    }
  }
  if (header.empty()) throw InputError("csv: empty file (no header row)");

  std::size_t response_idx = header.size();
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == opt.response_column) {
      response_idx = k;
      break;
    }
  if (response_idx == header.size())
    throw InputError("csv: response column '" + opt.response_column + "' not found in header", 1, 0);

  std::vector<std::string> names;
  if (!opt.no_intercept) names.push_back(opt.intercept_name);
  for (std::size_t k = 0; k < header.size(); ++k)
    if (k != response_idx) names.push_back(header[k]);

  std::vector<Count> y;
  std::vector<double> cells;  // row-major regressors
  const std::size_t regressors = header.size() - 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw InputError("csv: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                           " fields, header has " + std::to_string(header.size()),
                       line_no, 0);
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k == response_idx) {
        Count v = 0;
        if (!detail::parse_count(fields[k], v) || v < 0)
          throw InputError("csv: response '" + std::string(fields[k]) + "' at line " + std::to_string(line_no) +
                               ", column " + std::to_string(k + 1) + " is not a non-negative integer",
                           line_no, k + 1);
        y.push_back(v);
      } else {
        double v = 0.0;
        if (!detail::parse_double(fields[k], v))
          throw InputError("csv: cell '" + std::string(fields[k]) + "' at line " + std::to_string(line_no) +
                               ", column " + std::to_string(k + 1) + " is not a finite number",
                           line_no, k + 1);
        cells.push_back(v);
      }
    }
  }
  if (y.empty()) throw InputError("csv: no data rows");

  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(names.size());
  Eigen::MatrixXd X(n, p);
  const Eigen::Index offset = opt.no_intercept ? 0 : 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!opt.no_intercept) X(i, 0) = 1.0;
    for (std::size_t k = 0; k < regressors; ++k)
      X(i, offset + static_cast<Eigen::Index>(k)) = cells[static_cast<std::size_t>(i) * regressors + k];
  }
  if (p == 0) throw InputError("csv: no regressors (file has only the response and --no-intercept is set)");
  try {
    return Dataset(std::move(y), std::move(X), std::move(names));
  } catch (const DomainError& e) {
    throw InputError(std::string("csv: ") + e.what());
  }
}

inline Dataset ingest_csv(const std::string& path, const std::string& response_column = "y",
                          bool no_intercept = false) {
  std::ifstream in(path);
  if (!in) throw InputError("csv: cannot open '" + path + "'");
  return parse_csv(in, CsvOptions{response_column, no_intercept});
}

/// Writes the response first, then every non-intercept column, with enough
/// digits to reproduce the doubles exactly.
inline void write_csv(std::ostream& out, const std::vector<Count>& y, const Eigen::MatrixXd& regressors,
                      const std::vector<std::string>& regressor_names, const std::string& response_name = "y") {
  out << response_name;
  for (const auto& nm : regressor_names) out << ',' << nm;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < regressors.rows(); ++i) {
    out << y[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < regressors.cols(); ++k) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, regressors(i, k));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace nbreg
