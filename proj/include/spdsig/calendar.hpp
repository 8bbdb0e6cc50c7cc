#pragma once

#include <compare>
#include <cstdio>
#include <string>

#include "spdsig/errors.hpp"

namespace spdsig {

struct Date {
  int year = 0;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

/// Strict ISO "YYYY-MM-DD" parser.
inline Date parse_date(const std::string& s, const std::string& context = {}) {
  auto bad = [&]() -> Date {
    fail(errc::parse_error, "expected ISO date YYYY-MM-DD, got '" + s + "'" +
                                (context.empty() ? "" : " (" + context + ")"));
  };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return bad();
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (s[i] < '0' || s[i] > '9') return bad();
  Date d;
  d.year = std::stoi(s.substr(0, 4));
  d.month = std::stoi(s.substr(5, 2));
  d.day = std::stoi(s.substr(8, 2));
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) return bad();
  return d;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

/// Calendar quarter, stored as a single index so arithmetic and ordering are
/// trivial. Survey rounds and macro observations are keyed on this.
struct Quarter {
  int index = 0;  // year * 4 + (quarter - 1)

  Quarter() = default;
  Quarter(int year, int qnum) : index(year * 4 + (qnum - 1)) {}

  int year() const { return index >= 0 ? index / 4 : (index - 3) / 4; }
  int qnum() const { return index - year() * 4 + 1; }

  Quarter next(int n = 1) const {
    Quarter q;
    q.index = index + n;
    return q;
  }

  auto operator<=>(const Quarter&) const = default;
};

inline Quarter quarter_of(const Date& d) { return Quarter(d.year, (d.month - 1) / 3 + 1); }

inline std::string format_quarter(Quarter q) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04dQ%d", q.year(), q.qnum());
  return buf;
}

/// Accepts "2024Q2" or an ISO date (snapped to its containing quarter).
inline Quarter parse_quarter(const std::string& s, const std::string& context = {}) {
  if (s.size() == 6 && (s[4] == 'Q' || s[4] == 'q')) {
    bool digits = true;
    for (int i : {0, 1, 2, 3, 5}) digits = digits && s[i] >= '0' && s[i] <= '9';
    if (digits) {
      int q = s[5] - '0';
      if (q >= 1 && q <= 4) return Quarter(std::stoi(s.substr(0, 4)), q);
    }
    fail(errc::parse_error, "bad quarter '" + s + "'" +
                                (context.empty() ? "" : " (" + context + ")"));
  }
  return quarter_of(parse_date(s, context));
}

}  // namespace spdsig
