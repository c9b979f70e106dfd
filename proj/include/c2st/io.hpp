#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "c2st/sample.hpp"

namespace c2st {

/// A file could not be opened, read or written.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data file was readable but its content is not a numeric table.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Comma-separated when the line holds a comma, else whitespace-separated.
inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  if (line.find(',') != std::string_view::npos) {
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      out.push_back(trim(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return out;
  }
  std::size_t pos = 0;
  while (pos < line.size()) {
    pos = line.find_first_not_of(" \t\r", pos);
    if (pos == std::string_view::npos) break;
    const auto end = line.find_first_of(" \t\r", pos);
    out.push_back(line.substr(pos, end - pos));
    pos = end == std::string_view::npos ? line.size() : end;
  }
  return out;
}

/// Parses the whole token as a double; false when it is not a number at all.
inline bool parse_number(std::string_view token, double& value) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return false;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  return ec == std::errc() && ptr == token.data() + token.size();
}

}  // namespace detail

/// Parses delimiter-separated numeric text: one example per row, the same
/// number of columns on every row. Blank lines and lines starting with '#'
/// are skipped. The first row is taken as a header when any of its fields is
/// not a number. NaN and infinite entries are rejected.
inline Sample parse_numeric_table(std::string_view text, const std::string& source = "<input>") {
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  bool first_row = true;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    const auto fields = detail::split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (!detail::parse_number(fields[j], row[j])) numeric = false;
    }
    if (!numeric) {
      if (first_row) {
        first_row = false;
        cols = fields.size();
        continue;
      }
      throw ParseError(source + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!std::isfinite(row[j])) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": field " +
                         std::to_string(j + 1) + " is not a finite number");
      }
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(cols) + " fields, found " + std::to_string(row.size()));
    }
    first_row = false;
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError(source + ": no data rows");
  return Sample(rows, cols, std::move(values));
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw FileError("error reading " + path.string());
  return buf.str();
}

inline Sample read_data_file(const std::filesystem::path& path) {
  return parse_numeric_table(read_text_file(path), path.string());
}

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FileError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw FileError("error writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw FileError("cannot rename into " + path.string());
  }
}

/// Comma-separated rows with round-trip precision.
inline std::string format_csv(const Sample& s, std::string_view header = {}) {
  std::string out;
  if (!header.empty()) {
    out += header;
    out += '\n';
  }
  char buf[32];
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", s(i, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace c2st
