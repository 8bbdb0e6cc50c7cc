#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "spdsig/errors.hpp"

namespace spdsig::csv {

/// Splits one CSV record. Supports double-quoted fields with embedded commas
/// and doubled quotes; embedded newlines are not (none of the schemas here
/// need them).
inline std::vector<std::string> parse_line(const std::string& line, int line_no = 0) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted)
    fail(errc::parse_error, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(cur);
  return fields;
}

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path) {
    if (!in_) fail(errc::parse_error, "cannot open '" + path + "'");
  }

  /// Reads the next non-empty record; returns false at end of file.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      bool blank = true;
      for (char c : line)
        if (c != ' ' && c != '\t' && c != '\r') blank = false;
      if (blank) continue;
      fields = parse_line(line, line_no_);
      return true;
    }
    return false;
  }

  int line() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

/// Fixed shortest-round-trip-ish formatting so reruns are byte-identical.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& os, std::span<const std::string> fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << quote_if_needed(fields[i]);
  }
  os << '\n';
}

inline double parse_double(const std::string& s, int line_no, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(errc::schema_error,
         "line " + std::to_string(line_no) + ": cannot parse " + what + " '" + s + "'");
  }
}

}  // namespace spdsig::csv
