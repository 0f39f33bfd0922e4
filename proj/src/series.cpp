#include "rtpref/series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace rtpref {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTermCutoff = 1e-18;
const double kSqrt2OverPi = std::sqrt(2.0 / kPi);

void check_time(double t) {
  if (!(t > 0.0)) throw std::domain_error("time must be positive");
}

// Small-time numerator and denominator with exp(-beta^2/2t) factored out:
//   Ntilde = sum_k (c_k^2/t - 1) exp(-(c_k^2 - beta^2)/2t)
//   Dtilde = sum_k (-1)^k c_k exp(-(c_k^2 - beta^2)/2t)
// The k = 0 factors are exactly (beta^2/t - 1) and beta, so the ratio
// degrades gracefully to the (beta^2/t - 1)/beta asymptote as t -> 0.
struct TiltedSums {
  double ntilde;
  double dtilde;
};

TiltedSums small_time_sums(double beta, double t, int terms) {
  const double b2 = beta * beta;
  double n = b2 / t - 1.0;
  double d = beta;
  for (int k = 1; k < terms; ++k) {
    const double ck = (2.0 * k + 1.0) * beta;
    const double ck2 = ck * ck;
    const double e = std::exp(-(ck2 - b2) / (2.0 * t));
    if (e == 0.0) break;
    const double nterm = (ck2 / t - 1.0) * e;
    const double dterm = (k % 2 == 0 ? ck : -ck) * e;
    n += nterm;
    d += dterm;
    if (std::abs(nterm) <= kTermCutoff * std::abs(n) &&
        std::abs(dterm) <= kTermCutoff * std::abs(d))
      break;
  }
  return {n, d};
}

// Large-time alternating sum for f0 with the m = 0 exponential factored out.
double f0_large_factor(double beta, double t, int terms) {
  const double a = kPi * kPi * t / (8.0 * beta * beta);
  double s = 1.0;
  for (int m = 1; m < terms; ++m) {
    const double odd = 2.0 * m + 1.0;
    const double e = std::exp(-(odd * odd - 1.0) * a);
    if (e == 0.0) break;
    const double term = (m % 2 == 0 ? odd : -odd) * e;
    s += term;
    if (std::abs(term) <= kTermCutoff * std::abs(s)) break;
  }
  return s;
}

// Large-time alternating sum for q with the m = 1 exponential factored out.
double q_large_factor(double beta, double t, int terms) {
  const double a = kPi * kPi * t / (2.0 * beta * beta);
  double s = 1.0;
  for (int m = 2; m <= terms; ++m) {
    const double m2 = static_cast<double>(m) * m;
    const double e = std::exp(-(m2 - 1.0) * a);
    if (e == 0.0) break;
    const double term = (m % 2 == 1 ? m2 : -m2) * e;
    s += term;
    if (std::abs(term) <= kTermCutoff * std::abs(s)) break;
  }
  return s;
}

double weight_core(double beta, double t, int terms) {
  check_time(t);
  const double b2 = beta * beta;
  if (t <= b2) {
    const TiltedSums s = small_time_sums(beta, t, terms);
    return s.ntilde / s.dtilde;
  }
  // q / f0 with both leading exponentials explicit:
  //   (pi^2/beta^3) e^(-pi^2 t / 2 beta^2) Qtilde
  //   / [ (pi/2 beta^2) e^(-pi^2 t / 8 beta^2) Ftilde ]
  // = (2 pi / beta) e^(-3 pi^2 t / 8 beta^2) Qtilde / Ftilde.
  const double qf = q_large_factor(beta, t, terms);
  const double ff = f0_large_factor(beta, t, terms);
  return (2.0 * kPi / beta) * std::exp(-3.0 * kPi * kPi * t / (8.0 * b2)) *
         qf / ff;
}

double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

double weight_w(Boundary beta, double t, Truncation trunc) {
  return weight_core(beta.value, t, trunc.terms);
}

double WeightFn::operator()(double t) const {
  return weight_core(beta_, t, terms_);
}

double f0_density(Boundary beta, double t, Truncation trunc) {
  check_time(t);
  const double b = beta.value;
  const double b2 = b * b;
  if (t <= b2) {
    const TiltedSums s = small_time_sums(b, t, trunc.terms);
    return kSqrt2OverPi * std::pow(t, -1.5) * std::exp(-b2 / (2.0 * t)) *
           s.dtilde;
  }
  return (kPi / (2.0 * b2)) * std::exp(-kPi * kPi * t / (8.0 * b2)) *
         f0_large_factor(b, t, trunc.terms);
}

double q_density(Boundary beta, double t, Truncation trunc) {
  check_time(t);
  const double b = beta.value;
  const double b2 = b * b;
  if (t <= b2) {
    const TiltedSums s = small_time_sums(b, t, trunc.terms);
    return kSqrt2OverPi * std::pow(t, -1.5) * std::exp(-b2 / (2.0 * t)) *
           s.ntilde;
  }
  return (kPi * kPi / (b2 * b)) * std::exp(-kPi * kPi * t / (2.0 * b2)) *
         q_large_factor(b, t, trunc.terms);
}

double laplace_fixed_drift(double drift, Boundary beta, double lambda) {
  if (!(lambda >= 0.0))
    throw std::domain_error("laplace scale must be nonnegative");
  const double b = beta.value;
  const double root = std::sqrt(2.0 * lambda + drift * drift);
  return std::exp(log_cosh(b * drift) - log_cosh(b * root));
}

double choice_probability(double drift, Boundary beta) {
  const double x = 2.0 * beta.value * drift;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double expected_choice(double drift, Boundary beta) {
  return std::tanh(beta.value * drift);
}

double conditional_mean_weight(double drift, Boundary beta) {
  if (drift == 0.0) return 1.0 / beta.value;
  return drift / std::tanh(beta.value * drift);
}

WeightEnvelope::WeightEnvelope(EnvelopeInterval interval, Truncation trunc) {
  const double lo = interval.lower;
  const double hi = interval.upper;
  tau0_ = 0.05 * lo * lo;
  tau1_ = 4.0 * hi * hi;
  rate_ = 3.0 * kPi * kPi / (8.0 * hi * hi);

  // Maximize |w| against each piece's shape over a dense grid, then pad.
  const int n_beta = 65;
  std::vector<double> betas(n_beta);
  for (int i = 0; i < n_beta; ++i)
    betas[i] = lo + (hi - lo) * i / (n_beta - 1.0);

  auto log_spaced = [](double a, double b, int n, std::vector<double>* out) {
    const double la = std::log(a), lb = std::log(b);
    for (int i = 0; i < n; ++i)
      out->push_back(std::exp(la + (lb - la) * i / (n - 1.0)));
  };
  std::vector<double> head, mid, tail;
  log_spaced(1e-4 * lo * lo, tau0_, 60, &head);
  log_spaced(tau0_, tau1_, 160, &mid);
  log_spaced(tau1_, 4.0 * tau1_ + 40.0, 100, &tail);

  double worst = 0.0;
  for (double b : betas) {
    for (double t : head)
      worst = std::max(worst, std::abs(weight_core(b, t, trunc.terms)) /
                                  (1.0 + 1.0 / t));
    for (double t : mid)
      worst = std::max(worst, std::abs(weight_core(b, t, trunc.terms)));
    for (double t : tail)
      worst = std::max(worst, std::abs(weight_core(b, t, trunc.terms)) *
                                  std::exp(rate_ * t));
  }
  c_ = 1.5 * worst;
}

double WeightEnvelope::bound(double t) const {
  check_time(t);
  if (t <= tau0_) return c_ * (1.0 + 1.0 / t);
  if (t <= tau1_) return c_;
  return c_ * std::exp(-rate_ * t);
}

}  // namespace rtpref
