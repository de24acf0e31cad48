/*
 * Copyright 2026 The nafkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Plain numeric CSV and atomic file output. Doubles are written with 17
// significant digits so that they read back bit-identically.

#ifndef NAFKIT_CSV_HPP
#define NAFKIT_CSV_HPP

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nafkit/errors.hpp"
#include "nafkit/tensor.hpp"

namespace nafkit {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes to a temporary sibling and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CsvTable {
  std::vector<std::string> header;  // empty when the file had none
  Tensor rows;                      // (n, columns)
};

inline double parse_number(std::string_view field, std::size_t line) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw DataError("line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
  return v;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses numeric CSV text. Blank lines are skipped; every row must have the
/// same number of columns.
inline CsvTable parse_csv(const std::string& text, bool has_header) {
  CsvTable table;
  std::vector<double> values;
  std::size_t cols = 0, n = 0, line_no = 0;
  std::istringstream in(text);
  std::string line;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto fields = split_commas(line);
    if (header_pending) {
      for (auto f : fields) table.header.emplace_back(f);
      cols = fields.size();
      header_pending = false;
      continue;
    }
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols)
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(cols) + " columns, got " +
                      std::to_string(fields.size()));
    for (auto f : fields) values.push_back(parse_number(f, line_no));
    ++n;
  }
  if (n == 0) throw DataError("no rows");
  table.rows = Tensor(Shape{n, cols}, std::move(values));
  return table;
}

inline CsvTable read_csv(const std::filesystem::path& path, bool has_header) {
  try {
    return parse_csv(read_file(path), has_header);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// rows is (n, k); extra_col, when non-empty, is appended as a last column.
inline std::string format_csv(const Tensor& rows, const std::vector<std::string>& header,
                              const std::vector<double>& extra_col = {}) {
  std::string out;
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
    out += '\n';
  }
  const std::size_t n = rows.rank() == 2 ? rows.shape[0] : 0, k = rows.rank() == 2 ? rows.shape[1] : 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (j) out += ',';
      out += format_double(rows.at(i, j));
    }
    if (!extra_col.empty()) out += (k ? "," : "") + format_double(extra_col[i]);
    out += '\n';
  }
  return out;
}

}  // namespace nafkit

#endif  // NAFKIT_CSV_HPP
