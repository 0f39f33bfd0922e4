#pragma once

#include <cmath>
#include <stdexcept>

namespace rtpref {

// First-passage machinery for symmetric two-sided barrier crossing of a
// drifting Brownian motion started at the midpoint.  With barriers at +-beta
// and odd-reflection coefficients c_k = (2k+1) beta, the zero-drift crossing
// time density has two classical series representations:
//
//   small t:  f0(t) = sqrt(2/pi) t^(-3/2) sum_k (-1)^k c_k exp(-c_k^2 / 2t)
//   large t:  f0(t) = (pi / 2 beta^2) sum_{m>=0} (-1)^m (2m+1)
//                       exp(-(2m+1)^2 pi^2 t / 8 beta^2)
//
// The drift-identifying weight attached to a crossing at time t is
//
//   w(t) = N(t) / D(t),
//   N(t) = sum_k (c_k^2/t - 1) exp(-c_k^2 / 2t),
//   D(t) = sum_k (-1)^k c_k exp(-c_k^2 / 2t),
//
// and q(t) = f0(t) w(t) = sqrt(2/pi) t^(-3/2) N(t) has the large-time form
//
//   q(t) = (pi^2 / beta^3) sum_{m>=1} (-1)^(m+1) m^2
//            exp(-m^2 pi^2 t / 2 beta^2).
//
// All evaluations factor the leading exponential out of each series before
// summing, switch representation at t = beta^2, and stop adding terms once a
// term falls below 1e-18 of the running partial sum.

// Barrier half-width.  Strictly positive and finite.
struct Boundary {
  explicit Boundary(double v) : value(v) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::domain_error("boundary must be positive and finite");
  }
  double value;
};

// Number of series terms to sum before unconditionally stopping.
struct Truncation {
  explicit Truncation(int k = 100) : terms(k) {
    if (k < 1)
      throw std::domain_error("truncation must allow at least one term");
  }
  int terms;
};

// Identifying weight w(t).  Unbounded as t -> 0+, decays exponentially as
// t -> infinity, changes sign once in between.
double weight_w(Boundary beta, double t, Truncation trunc = Truncation{});

// Zero-drift crossing time density at t.
double f0_density(Boundary beta, double t, Truncation trunc = Truncation{});

// q(t) = f0(t) * w(t).  Integrates to 1/beta over (0, infinity).
double q_density(Boundary beta, double t, Truncation trunc = Truncation{});

// E[exp(-lambda T)] for crossing time T under drift v:
// cosh(beta v) / cosh(beta sqrt(2 lambda + v^2)), evaluated in log space so
// large arguments cannot overflow.
double laplace_fixed_drift(double drift, Boundary beta, double lambda);

// Probability that the +beta barrier is hit first: sigma(2 beta v).
double choice_probability(double drift, Boundary beta);

// Mean of the +-1 exit side: tanh(beta v).
double expected_choice(double drift, Boundary beta);

// E[w(T) | drift v] = v / tanh(beta v), extended continuously to 1/beta at
// v = 0 (the raw ratio is 0/0 there).
double conditional_mean_weight(double drift, Boundary beta);

// Reusable evaluator for tight loops: validates once, then evaluates w(t)
// with no per-call checks beyond the t > 0 domain test.
class WeightFn {
 public:
  WeightFn(Boundary beta, Truncation trunc = Truncation{})
      : beta_(beta.value), terms_(trunc.terms) {}
  double operator()(double t) const;
  double boundary() const { return beta_; }

 private:
  double beta_;
  int terms_;
};

// Closed beta-interval over which a single weight envelope must hold.
struct EnvelopeInterval {
  EnvelopeInterval(double lo, double hi) : lower(lo), upper(hi) {
    if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi))
      throw std::domain_error("envelope interval needs 0 < lower <= upper");
  }
  double lower;
  double upper;
};

// Piecewise dominating function H(t) >= |w_beta(t)| for all beta in the
// interval:
//
//   H(t) = C (1 + 1/t)        on (0, tau0]
//   H(t) = C                  on (tau0, tau1]
//   H(t) = C exp(-c t)        on [tau1, inf),  c = 3 pi^2 / (8 upper^2)
//
// with tau0 = 0.05 lower^2 and tau1 = 4 upper^2.  The constant C is
// calibrated at construction by maximizing |w| against the piece shapes over
// a dense (beta, t) grid and applying a 1.5x safety factor.
class WeightEnvelope {
 public:
  explicit WeightEnvelope(EnvelopeInterval interval,
                          Truncation trunc = Truncation{200});
  double bound(double t) const;
  double constant() const { return c_; }
  double decay_rate() const { return rate_; }
  double tau0() const { return tau0_; }
  double tau1() const { return tau1_; }

 private:
  double tau0_;
  double tau1_;
  double rate_;
  double c_;
};

}  // namespace rtpref
