#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtpref/kernels.hpp"

namespace rtpref {

// Barrier recovery from response times alone.  The empirical Laplace
// transform L(lambda) = (1/n) sum exp(-lambda t_i) behaves like
// 2 C0 exp(-b sqrt(2 lambda)) for large lambda, so -log L(lambda) divided by
// sqrt(2 lambda) estimates the barrier b up to an O(lambda^-1/2) bias from
// the constant.  Differencing log L across the scales lambda, 4 lambda
// cancels that constant; adding the 9 lambda scale further separates an
// additive non-decision shift of the clock.

// Growth rule for the transform scale: lambda_n = max(floor, (ln n)^exponent).
// Exponents in (0, 2) keep sqrt(lambda_n) growing but strictly slower than
// log n, which is what the bias/variance tradeoff of the estimators needs.
struct LambdaSchedule {
  double exponent = 1.5;
  double floor = 1.0;
};

// lambda_n for a sample of size n.  Throws ConfigError on a schedule outside
// its domain and std::invalid_argument when n < 2.
double lambda_schedule_value(std::size_t n, const LambdaSchedule& schedule);

// Trimming threshold epsilon_n = (ln n)^(-exponent) used by the shifted-time
// drift estimator downstream.  Decays to zero slowly enough that the
// non-decision-time estimate settles inside the margin first.
double trimming_epsilon(std::size_t n, double exponent = 1.0);

enum class BoundaryMethod { OneScale, Richardson, ThreeScaleNdt };

const char* boundary_method_name(BoundaryMethod m);

struct BoundaryEstimate {
  double boundary = 0.0;
  std::optional<double> ndt;  // set by the three-scale estimator only
  double lambda_used = 0.0;
  std::size_t n = 0;
  BoundaryMethod method = BoundaryMethod::OneScale;
  std::vector<std::string> warnings;
};

// (1/n) sum_i exp(-lambda t_i).  Compensated chunked summation, so the value
// is permutation-stable and identical under serial and parallel execution.
// Requires nonempty times, every entry positive and finite, lambda >= 0.
double empirical_laplace(std::span<const double> times, double lambda,
                         kernels::Exec exec = kernels::Exec::Parallel);

// -log L(lambda_n) / sqrt(2 lambda_n).  Biased upward by
// log(2 C0)/sqrt(2 lambda_n); consistent as n grows.
BoundaryEstimate one_scale_boundary(std::span<const double> times,
                                    const LambdaSchedule& schedule = {},
                                    kernels::Exec exec = kernels::Exec::Parallel);

// (log L(lambda_n) - log L(4 lambda_n)) / sqrt(2 lambda_n).  The two-scale
// difference cancels the constant, leaving O(1/lambda) bias.
BoundaryEstimate richardson_boundary(std::span<const double> times,
                                     const LambdaSchedule& schedule = {},
                                     kernels::Exec exec = kernels::Exec::Parallel);

// Three-scale joint recovery for times observed with an additive shift
// S = T + a:
//
//   b = (5/2 F(lambda) - 4 F(4 lambda) + 3/2 F(9 lambda)) / sqrt(2 lambda)
//   a = ( -1/2 F(lambda) + F(4 lambda) - 1/2 F(9 lambda)) / lambda
//
// with F = log L.  The coefficient rows are chosen to zero out, per row, two
// of the three leading terms {a lambda, b sqrt(2 lambda), log 2 C0}.  The
// shift estimate may come out slightly negative in finite samples and is
// reported as computed.
BoundaryEstimate three_scale_ndt(std::span<const double> times,
                                 const LambdaSchedule& schedule = {},
                                 kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace rtpref
