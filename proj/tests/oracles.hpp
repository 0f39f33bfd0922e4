#pragma once

// Independent reference implementations used only to produce expected values
// in tests.  Deliberately naive: direct summation of the defining series in
// long double with a large fixed term count and no early exit or factoring,
// plus adaptive Gauss-Kronrod quadrature.  Nothing here shares code with the
// library.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

namespace oracle {

inline constexpr long double kPi = 3.14159265358979323846264338327950288L;

// w(t) = N/D summed directly from the c_k = (2k+1) beta definition.
inline long double weight_direct(long double beta, long double t,
                                 int terms = 10000) {
  long double n = 0.0L, d = 0.0L;
  for (int k = 0; k < terms; ++k) {
    const long double c = (2.0L * k + 1.0L) * beta;
    const long double e = std::exp(-c * c / (2.0L * t));
    n += (c * c / t - 1.0L) * e;
    d += (k % 2 == 0 ? c : -c) * e;
  }
  return n / d;
}

inline long double f0_small_direct(long double beta, long double t,
                                   int terms = 10000) {
  long double d = 0.0L;
  for (int k = 0; k < terms; ++k) {
    const long double c = (2.0L * k + 1.0L) * beta;
    d += (k % 2 == 0 ? c : -c) * std::exp(-c * c / (2.0L * t));
  }
  return std::sqrt(2.0L / kPi) * std::pow(t, -1.5L) * d;
}

inline long double f0_large_direct(long double beta, long double t,
                                   int terms = 10000) {
  long double s = 0.0L;
  for (int m = 0; m < terms; ++m) {
    const long double odd = 2.0L * m + 1.0L;
    s += (m % 2 == 0 ? odd : -odd) *
         std::exp(-odd * odd * kPi * kPi * t / (8.0L * beta * beta));
  }
  return kPi / (2.0L * beta * beta) * s;
}

inline long double q_small_direct(long double beta, long double t,
                                  int terms = 10000) {
  long double n = 0.0L;
  for (int k = 0; k < terms; ++k) {
    const long double c = (2.0L * k + 1.0L) * beta;
    n += (c * c / t - 1.0L) * std::exp(-c * c / (2.0L * t));
  }
  return std::sqrt(2.0L / kPi) * std::pow(t, -1.5L) * n;
}

inline long double q_large_direct(long double beta, long double t,
                                  int terms = 10000) {
  long double s = 0.0L;
  for (int m = 1; m <= terms; ++m) {
    const long double m2 = static_cast<long double>(m) * m;
    s += (m % 2 == 1 ? m2 : -m2) *
         std::exp(-m2 * kPi * kPi * t / (2.0L * beta * beta));
  }
  return kPi * kPi / (beta * beta * beta) * s;
}

template <class F>
double integrate(F f, double a, double b, double tol = 1e-12) {
  return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 12, tol);
}

}  // namespace oracle
