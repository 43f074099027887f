#ifndef CHDBC_POTENTIALS_HPP
#define CHDBC_POTENTIALS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "chdbc/errors.hpp"

namespace chdbc {

// A smooth scalar potential with its first two derivatives.
struct ScalarFunction {
  std::function<double(double)> value;
  std::function<double(double)> deriv1;
  std::function<double(double)> deriv2;
  std::string label;
};

inline ScalarFunction double_well() {
  return {[](double s) { const double q = s * s - 1.0; return 0.25 * q * q; },
          [](double s) { return s * (s * s - 1.0); },
          [](double s) { return 3.0 * s * s - 1.0; },
          "double_well"};
}

// Transmission function H together with a closed interval I = [lo, hi] on
// which it is injective. inverse maps range(H|_I) back into I; inverse_on_I
// adds the range check. A 1e-12 forgiveness absorbs roundoff when nodal data
// lands exactly on a range endpoint (e.g. sin(..)*cos(..) products).
struct Transmission {
  std::function<double(double)> value;
  std::function<double(double)> deriv1;
  std::function<double(double)> deriv2;
  std::function<double(double)> inverse;
  double lo = 0, hi = 0;              // interval I
  double range_lo = 0, range_hi = 0;  // H(I), as an interval
  std::string label;

  double inverse_on_I(double u) const {
    constexpr double forgive = 1e-12;
    if (u < range_lo - forgive || u > range_hi + forgive)
      throw InverseOutOfRangeError("inverse_on_I: " + std::to_string(u) +
                                   " outside the range of " + label);
    return inverse(std::clamp(u, range_lo, range_hi));
  }
};

inline Transmission affine_transmission(double alpha, double beta) {
  if (alpha == 0.0) throw std::invalid_argument("affine transmission requires alpha != 0");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Transmission t;
  t.value = [alpha, beta](double s) { return alpha * s + beta; };
  t.deriv1 = [alpha](double) { return alpha; };
  t.deriv2 = [](double) { return 0.0; };
  t.inverse = [alpha, beta](double u) { return (u - beta) / alpha; };
  t.lo = -inf;
  t.hi = inf;
  t.range_lo = -inf;
  t.range_hi = inf;
  t.label = "affine";
  return t;
}

inline Transmission sin_transmission() {
  Transmission t;
  t.value = [](double s) { return std::sin(s); };
  t.deriv1 = [](double s) { return std::cos(s); };
  t.deriv2 = [](double s) { return -std::sin(s); };
  t.inverse = [](double u) { return std::asin(u); };
  t.lo = -std::asin(1.0);  // -pi/2
  t.hi = std::asin(1.0);
  t.range_lo = -1.0;
  t.range_hi = 1.0;
  t.label = "sin";
  return t;
}

// H(s) = 3 cos(s) + 2, taken on the branch where it decreases from 1 to -1,
// i.e. I = [arccos(-1/3), pi]. H is a bijection of I onto [-1, 1].
inline Transmission cos3p2_transmission() {
  Transmission t;
  t.value = [](double s) { return 3.0 * std::cos(s) + 2.0; };
  t.deriv1 = [](double s) { return -3.0 * std::sin(s); };
  t.deriv2 = [](double s) { return -3.0 * std::cos(s); };
  t.inverse = [](double u) { return std::acos((u - 2.0) / 3.0); };
  t.lo = std::acos(-1.0 / 3.0);
  t.hi = std::acos(-1.0);  // pi
  t.range_lo = -1.0;
  t.range_hi = 1.0;
  t.label = "cos3p2";
  return t;
}

inline ScalarFunction potential_by_label(const std::string& label) {
  if (label == "double_well") return double_well();
  throw ConfigError("unknown potential: " + label);
}

inline Transmission transmission_by_label(const std::string& label, double alpha, double beta) {
  if (label == "affine") return affine_transmission(alpha, beta);
  if (label == "sin") return sin_transmission();
  if (label == "cos3p2") return cos3p2_transmission();
  throw ConfigError("unknown transmission: " + label);
}

}  // namespace chdbc

#endif
