#pragma once

#include <cstdint>
#include <string>

#include <boost/rational.hpp>

namespace causalnet {

// Compare only against other Rationals: with C++20 rewritten comparisons, Boost 1.74's
// mixed rational/integer operator== recurses forever.
using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

// "3", "7/4"
inline std::string to_fraction_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace causalnet
