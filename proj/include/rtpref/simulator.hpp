#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rtpref/dataset.hpp"
#include "rtpref/kernels.hpp"
#include "rtpref/rng.hpp"
#include "rtpref/series.hpp"

namespace rtpref {

// Synthetic choice/response-time generation.  Response times are drawn by
// inverse-CDF lookup from a precomputed table of the drift-conditional
// crossing density
//
//   f(t | v, b) = f0(t; b) exp(-v^2 t / 2) cosh(b v),
//
// tabulated on a drift grid x time grid, cumulated by the trapezoidal rule,
// and renormalized so each row's CDF ends at exactly 1.  Choices are +1 with
// probability sigmoid(2 b v), independent of the crossing time given v.

// Latent-preference distributions.  Each family is parameterized by its mean
// and by sigma, the standard deviation of the *untruncated* base law; draws
// are mean + sigma * xi with xi a standardized (zero-mean, unit-variance)
// variable:
//
//   uniform:             xi ~ Uniform[-sqrt(3), sqrt(3)]
//   beta_shifted:        xi = (Beta(2,5) - 2/7) / sd(Beta(2,5))
//   gaussian_truncated:  xi ~ Normal(0,1) conditioned on |xi| <= 6
//   laplace_truncated:   xi ~ Laplace(0, 1/sqrt(2)) conditioned on |xi| <= 6
//   point_mass:          xi = 0
enum class PriorFamily {
  Uniform,
  BetaShifted,
  GaussianTruncated,
  LaplaceTruncated,
  PointMass,
};

// sd of a raw Beta(2,5) variable; with sigma set to this, a beta_shifted
// draw is exactly mean - 2/7 + Beta(2,5).
inline const double kBeta25Sd = 0.15971913873015683;  // sqrt(5)/14

struct PriorSpec {
  PriorFamily family = PriorFamily::Uniform;
  double mean = 0.0;
  double sigma = 0.5;
};

PriorFamily prior_family_from_name(const std::string& name);
const char* prior_family_name(PriorFamily f);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Smallest closed interval containing all possible draws.
Interval prior_support(const PriorSpec& prior);

// One draw.  Consumes a prior-dependent number of variates from the stream.
double sample_prior(const PriorSpec& prior, RngStream& rng);

// Precomputed inverse-CDF table.  drift_grid is uniform over [lo, hi] with
// n_v points; cdf is row-major n_v x time_grid.size(), each row nondecreasing
// from 0 to exactly 1.
struct FptGridCache {
  double boundary = 0.0;
  std::vector<double> drift_grid;
  std::vector<double> time_grid;
  std::vector<double> cdf;
  double v_max = 0.0;  // max |drift_grid endpoint|
  double t_max = 0.0;

  std::size_t n_v() const { return drift_grid.size(); }
  std::size_t n_t() const { return time_grid.size(); }
  const double* row(std::size_t i) const { return cdf.data() + i * n_t(); }
};

// The 998-point layout: 199 points at spacing 5e-5 on [1e-4, 1e-2], 571
// geometrically growing steps reaching spacing ~6.5e-2, then 228 equal steps
// ending exactly at t_max.  Requires t_max comfortably past the ramp (>= 6).
std::vector<double> standard_time_grid(double t_max = 20.0);

// Builds the table on the standard grid.  Throws ConfigError when the mass
// beyond t_max, bounded through the one-term large-time asymptote of f0 with
// the drift tilt, exceeds 1e-6 anywhere on the drift grid (raise t_max).
FptGridCache build_cache(Boundary boundary, Interval v_range, std::size_t n_v,
                         double t_max = 20.0, Truncation trunc = Truncation{},
                         kernels::Exec exec = kernels::Exec::Parallel);

// Same, over a caller-supplied strictly increasing positive time grid.
FptGridCache build_cache(Boundary boundary, Interval v_range, std::size_t n_v,
                         std::vector<double> time_grid,
                         Truncation trunc = Truncation{},
                         kernels::Exec exec = kernels::Exec::Parallel);

// Inverse-CDF draw at the grid row nearest to v (ties snap toward zero
// drift), linearly interpolated between bracketing time points.
double sample_fpt(const FptGridCache& cache, double v, RngStream& rng);

// +1 with probability sigmoid(2 b v), else -1.
int sample_choice(double v, Boundary boundary, RngStream& rng);

// n tabular observations: v_i ~ prior, z_i, t_i = FPT + ndt.  Every
// observation derives its own RNG stream from (seed, index), so output is
// identical for any execution mode and thread count.
Dataset sample_tabular_dataset(const FptGridCache& cache,
                               const PriorSpec& prior, std::size_t n,
                               double ndt, std::uint64_t seed,
                               kernels::Exec exec = kernels::Exec::Parallel);

// Convenience form that builds a 500-row cache over the prior support.
Dataset sample_tabular_dataset(const PriorSpec& prior, Boundary boundary,
                               std::size_t n, double ndt, std::uint64_t seed,
                               kernels::Exec exec = kernels::Exec::Parallel);

// Contextual generation: psi_i ~ Uniform[-1,1]^d, theta_i drawn
// per-coordinate from `prior_family` centered at theta_star with scale
// sigma_theta, v_i = psi_i . theta_i.
struct LinearScenario {
  std::vector<double> theta_star;
  double sigma_theta = 0.5;
  PriorFamily prior_family = PriorFamily::GaussianTruncated;
  double boundary = 1.25;
  double ndt = 0.0;

  // sum_k max(|theta*_k - 6 sigma|, |theta*_k + 6 sigma|): a bound on |v|
  // under the +-6 sigma truncation convention, used as the cache half-range.
  double v_max() const;
};

// Samples n observations with features.  The cache passed in must share the
// scenario's boundary; when a realized drift lands outside it, the cache is
// rebuilt over the widened half-range max(1.5 v_max, 1.1 max|v_i|) before
// any response time is drawn, so the rebuild sequence is a deterministic
// function of (scenario, n, seed).
Dataset sample_linear_dataset(const LinearScenario& scenario, std::size_t n,
                              std::uint64_t seed, FptGridCache& cache,
                              kernels::Exec exec = kernels::Exec::Parallel);

// Self-contained form: builds an 801-row cache over [-v_max, v_max].
Dataset sample_linear_dataset(const LinearScenario& scenario, std::size_t n,
                              std::uint64_t seed,
                              kernels::Exec exec = kernels::Exec::Parallel);

// Flat little-endian binary snapshot of a cache (header, then grids, then
// the row-major table).  load_cache validates the header and sizes.
void save_cache(const FptGridCache& cache, const std::string& path);
FptGridCache load_cache(const std::string& path);

}  // namespace rtpref
