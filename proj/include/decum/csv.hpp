#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "decum/error.hpp"

namespace decum::csv {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split(std::string_view line, char delim = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& token, const std::string& where) {
  if (token.empty()) throw DataError(where + ": empty numeric field");
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) throw DataError(where + ": not a number: '" + token + "'");
  return v;
}

// Column-addressed table read from a header-first CSV file.
class Table {
 public:
  static Table read(std::istream& in, const std::string& name) {
    Table t;
    t.name_ = name;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto fields = split(line);
      if (t.header_.empty()) {
        t.header_ = std::move(fields);
        continue;
      }
      if (fields.size() != t.header_.size()) {
        throw DataError(name + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header_.size()) + " fields, got " +
                        std::to_string(fields.size()));
      }
      t.rows_.push_back(std::move(fields));
      t.line_numbers_.push_back(line_no);
    }
    if (t.header_.empty()) throw DataError(name + ": missing header row");
    return t;
  }

  static Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return read(in, path);
  }

  std::size_t rows() const { return rows_.size(); }

  std::size_t column(const std::string& col) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == col) return i;
    throw DataError(name_ + ": missing column '" + col + "'");
  }

  double number(std::size_t row, std::size_t col) const {
    return parse_double(rows_[row][col], name_ + ":" + std::to_string(line_numbers_[row]) + " (" +
                                             header_[col] + ")");
  }

  std::size_t line_number(std::size_t row) const { return line_numbers_[row]; }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

// Shortest round-trip decimal representation.
inline std::string fmt(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace decum::csv
