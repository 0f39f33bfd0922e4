#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rtpref/boundary.hpp"
#include "rtpref/dataset.hpp"
#include "rtpref/kernels.hpp"
#include "rtpref/series.hpp"

namespace rtpref {

// Population-average preference estimators.  The response-time estimators
// weight each +-1 choice by w_b(t), which makes z * w_b(t) an unbiased
// drift estimate per observation; averaging recovers the mean preference
// even when every observation comes from a different labeler.  The
// Bradley-Terry estimators use choices only and serve as the baseline they
// are compared against: when preferences vary across labelers they
// converge to a biased limit.

// A single estimator run.  `estimate` has length 1 for scalar targets and
// feature dimension d for vector targets.
struct EstimationReport {
  std::vector<double> estimate;
  double boundary_used = 0.0;
  std::optional<double> ndt_used;
  std::size_t n_used = 0;
  std::size_t n_trimmed = 0;
  std::string method;
  std::vector<std::string> warnings;

  // The sole entry of a scalar estimate.
  double scalar() const;
};

// (1/n) sum_i z_i w_b(t_i), the plug-in mean-drift estimator.  `boundary`
// is either the oracle value or an upstream boundary estimate.
EstimationReport plugin_mu(const Dataset& data, double boundary,
                           Truncation trunc = Truncation{},
                           kernels::Exec exec = kernels::Exec::Parallel);
EstimationReport plugin_mu(const Dataset& data,
                           const BoundaryEstimate& boundary,
                           Truncation trunc = Truncation{},
                           kernels::Exec exec = kernels::Exec::Parallel);

// Shift-corrected variant for times observed as S = T + a: averages
// z_i w_b(t_i - ndt) over the observations with t_i - ndt >= epsilon,
// keeping n as the divisor (trimmed terms contribute zero, matching the
// estimator's definition).  A negative ndt is clamped to zero with a
// warning.  epsilon must be strictly positive; trimming_epsilon supplies
// the schedule used by the harness.
EstimationReport plugin_mu_ndt(const Dataset& data, double boundary,
                               double ndt, double epsilon,
                               Truncation trunc = Truncation{},
                               kernels::Exec exec = kernels::Exec::Parallel);
EstimationReport plugin_mu_ndt(const Dataset& data,
                               const BoundaryEstimate& boundary,
                               double epsilon,
                               Truncation trunc = Truncation{},
                               kernels::Exec exec = kernels::Exec::Parallel);

// Least-squares recovery of the mean preference vector: solves
// (Q + ridge I) theta = m with Q = (1/n) sum psi_i psi_i^T and
// m = (1/n) sum z_i w_b(t_i) psi_i.  ridge defaults to 0, the plain
// estimator; a singular Q then raises SingularMatrixError naming the pivot
// at which definiteness was lost.
EstimationReport ols_theta(const Dataset& data, double boundary,
                           Truncation trunc = Truncation{},
                           double ridge = 0.0,
                           kernels::Exec exec = kernels::Exec::Parallel);
EstimationReport ols_theta(const Dataset& data,
                           const BoundaryEstimate& boundary,
                           Truncation trunc = Truncation{},
                           double ridge = 0.0,
                           kernels::Exec exec = kernels::Exec::Parallel);

// Choice-only baseline for the tabular setting:
// arctanh(mean z) / calibration_boundary.  Throws SeparationError when all
// choices agree (arctanh diverges).
EstimationReport bt_tabular(const Dataset& data, double calibration_boundary);

// Choice-only baseline for the feature setting: the minimizer of
//
//   (1/n) sum_i log(1 + exp(-2 b z_i psi_i . theta)) + (l2/2) |theta|^2
//
// by damped Newton from a zero start, to gradient norm <= 1e-8 within 500
// iterations.  Unpenalized fits on separable data raise SeparationError;
// hitting the iteration cap raises ConvergenceError carrying the final
// gradient norm.
EstimationReport bt_logistic(const Dataset& data, double calibration_boundary,
                             double l2_penalty = 0.0,
                             kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace rtpref
