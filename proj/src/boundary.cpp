#include "rtpref/boundary.hpp"

#include <cmath>
#include <stdexcept>

#include "rtpref/errors.hpp"

namespace rtpref {

namespace {

void check_schedule(const LambdaSchedule& s) {
  if (!(s.exponent > 0.0) || !(s.exponent < 2.0))
    throw ConfigError("lambda schedule exponent must lie in (0, 2)");
  if (!(s.floor > 0.0) || !std::isfinite(s.floor))
    throw ConfigError("lambda schedule floor must be positive");
}

void check_times(std::span<const double> times) {
  if (times.empty())
    throw std::invalid_argument("need at least one response time");
  for (double t : times) {
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::invalid_argument("response times must be positive and finite");
  }
}

// log L(lambda), throwing once the transform is too small to take a log of.
double log_laplace(std::span<const double> times, double lambda,
                   kernels::Exec exec) {
  const double value = empirical_laplace(times, lambda, exec);
  if (value <= 0.0)
    throw LaplaceUnderflowError(
        "empirical Laplace transform underflowed to zero at lambda=" +
        std::to_string(lambda) +
        "; pick a smaller schedule exponent or rescale the times");
  return std::log(value);
}

void add_small_sample_warning(BoundaryEstimate& est) {
  if (est.n < 100)
    est.warnings.push_back(
        "fewer than 100 response times; the scale schedule is asymptotic and "
        "the estimate is unreliable at this size");
}

}  // namespace

double lambda_schedule_value(std::size_t n, const LambdaSchedule& schedule) {
  check_schedule(schedule);
  if (n < 2) throw std::invalid_argument("sample size must be at least 2");
  return std::max(schedule.floor,
                  std::pow(std::log(static_cast<double>(n)), schedule.exponent));
}

double trimming_epsilon(std::size_t n, double exponent) {
  if (n < 2) throw std::invalid_argument("sample size must be at least 2");
  if (!(exponent > 0.0))
    throw std::invalid_argument("trimming exponent must be positive");
  return std::pow(std::log(static_cast<double>(n)), -exponent);
}

const char* boundary_method_name(BoundaryMethod m) {
  switch (m) {
    case BoundaryMethod::OneScale: return "one_scale";
    case BoundaryMethod::Richardson: return "richardson";
    case BoundaryMethod::ThreeScaleNdt: return "three_scale_ndt";
  }
  return "unknown";
}

double empirical_laplace(std::span<const double> times, double lambda,
                         kernels::Exec exec) {
  check_times(times);
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be nonnegative and finite");
  const double* t = times.data();
  const double sum = kernels::chunked_sum(
      times.size(), exec,
      [t, lambda](std::size_t i) { return std::exp(-lambda * t[i]); });
  return sum / static_cast<double>(times.size());
}

BoundaryEstimate one_scale_boundary(std::span<const double> times,
                                    const LambdaSchedule& schedule,
                                    kernels::Exec exec) {
  const double lambda = lambda_schedule_value(times.size(), schedule);
  BoundaryEstimate est;
  est.boundary = -log_laplace(times, lambda, exec) / std::sqrt(2.0 * lambda);
  est.lambda_used = lambda;
  est.n = times.size();
  est.method = BoundaryMethod::OneScale;
  add_small_sample_warning(est);
  return est;
}

BoundaryEstimate richardson_boundary(std::span<const double> times,
                                     const LambdaSchedule& schedule,
                                     kernels::Exec exec) {
  const double lambda = lambda_schedule_value(times.size(), schedule);
  const double f1 = log_laplace(times, lambda, exec);
  const double f4 = log_laplace(times, 4.0 * lambda, exec);
  BoundaryEstimate est;
  est.boundary = (f1 - f4) / std::sqrt(2.0 * lambda);
  est.lambda_used = lambda;
  est.n = times.size();
  est.method = BoundaryMethod::Richardson;
  add_small_sample_warning(est);
  return est;
}

BoundaryEstimate three_scale_ndt(std::span<const double> times,
                                 const LambdaSchedule& schedule,
                                 kernels::Exec exec) {
  const double lambda = lambda_schedule_value(times.size(), schedule);
  const double f1 = log_laplace(times, lambda, exec);
  const double f4 = log_laplace(times, 4.0 * lambda, exec);
  const double f9 = log_laplace(times, 9.0 * lambda, exec);
  BoundaryEstimate est;
  est.boundary =
      (2.5 * f1 - 4.0 * f4 + 1.5 * f9) / std::sqrt(2.0 * lambda);
  est.ndt = (-0.5 * f1 + f4 - 0.5 * f9) / lambda;
  est.lambda_used = lambda;
  est.n = times.size();
  est.method = BoundaryMethod::ThreeScaleNdt;
  add_small_sample_warning(est);
  return est;
}

}  // namespace rtpref
