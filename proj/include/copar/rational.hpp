#pragma once

#include <boost/rational.hpp>

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>

namespace copar {

// Exact rational arithmetic for cost bounds and redistribution weights.
// All intermediate budget math stays rational; rounding happens exactly once.
using Rational = boost::rational<long long>;

inline long long floor_div(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// round-half-up: floor(x + 1/2). boost::rational keeps denominators positive.
inline long long round_half_up(const Rational& x) {
  return floor_div(2 * x.numerator() + x.denominator(), 2 * x.denominator());
}

// Parses a decimal literal ("1.16", "2", "-0.5") into an exact rational.
inline Rational parse_decimal(std::string_view s) {
  if (s.empty()) throw std::invalid_argument("empty decimal literal");
  std::size_t pos = 0;
  bool neg = false;
  if (s[pos] == '+' || s[pos] == '-') {
    neg = (s[pos] == '-');
    ++pos;
  }
  long long num = 0;
  long long den = 1;
  bool saw_digit = false;
  bool after_point = false;
  for (; pos < s.size(); ++pos) {
    char ch = s[pos];
    if (ch == '.') {
      if (after_point) throw std::invalid_argument("malformed decimal literal");
      after_point = true;
      continue;
    }
    if (ch < '0' || ch > '9') throw std::invalid_argument("malformed decimal literal");
    saw_digit = true;
    num = num * 10 + (ch - '0');
    if (after_point) den *= 10;
  }
  if (!saw_digit) throw std::invalid_argument("malformed decimal literal");
  return Rational(neg ? -num : num, den);
}

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace copar
