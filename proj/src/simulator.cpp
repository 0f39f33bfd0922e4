#include "rtpref/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "rtpref/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "cache files are little-endian; add byte swapping first");

namespace rtpref {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt3 = std::sqrt(3.0);
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

void check_prior(const PriorSpec& p) {
  if (!std::isfinite(p.mean)) throw ConfigError("prior mean must be finite");
  if (p.family != PriorFamily::PointMass &&
      (!(p.sigma > 0.0) || !std::isfinite(p.sigma)))
    throw ConfigError("prior sigma must be positive and finite");
}

double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// Upper bound on the mass of f(. | v, b) beyond t_max, from the one-term
// tail f0(t) <= (pi / 2 b^2) exp(-pi^2 t / 8 b^2) and the drift tilt:
// integrating cosh(bv) (pi / 2 b^2) exp(-kappa t) from t_max gives
// cosh(bv) (pi / 2 b^2) exp(-kappa t_max) / kappa.
double tail_mass_bound(double b, double v, double t_max) {
  const double kappa = kPi * kPi / (8.0 * b * b) + 0.5 * v * v;
  return std::exp(log_cosh(b * v) - kappa * t_max +
                  std::log(kPi / (2.0 * b * b * kappa)));
}

std::size_t snap_index(const FptGridCache& cache, double v) {
  const std::vector<double>& g = cache.drift_grid;
  const std::size_t last = g.size() - 1;
  if (v <= g.front()) return 0;
  if (v >= g.back()) return last;
  const double dv = (g.back() - g.front()) / static_cast<double>(last);
  std::size_t k = static_cast<std::size_t>((v - g[0]) / dv);
  if (k >= last) k = last - 1;
  while (k > 0 && g[k] > v) --k;
  while (k + 1 < last && g[k + 1] <= v) ++k;
  const double below = v - g[k];
  const double above = g[k + 1] - v;
  if (below < above) return k;
  if (above < below) return k + 1;
  return std::abs(g[k]) <= std::abs(g[k + 1]) ? k : k + 1;
}

void check_scenario(const LinearScenario& s) {
  if (s.theta_star.empty())
    throw ConfigError("linear scenario needs at least one coordinate");
  for (double th : s.theta_star)
    if (!std::isfinite(th)) throw ConfigError("theta_star must be finite");
  if (!(s.sigma_theta > 0.0) || !std::isfinite(s.sigma_theta))
    throw ConfigError("sigma_theta must be positive and finite");
  if (!(s.boundary > 0.0) || !std::isfinite(s.boundary))
    throw ConfigError("scenario boundary must be positive and finite");
  if (!(s.ndt >= 0.0) || !std::isfinite(s.ndt))
    throw ConfigError("ndt must be nonnegative and finite");
}

void write_block(std::FILE* f, const void* data, std::size_t bytes,
                 const std::string& path) {
  if (std::fwrite(data, 1, bytes, f) != bytes)
    throw ParseError("short write to " + path);
}

void read_block(std::FILE* f, void* data, std::size_t bytes,
                const std::string& path) {
  if (std::fread(data, 1, bytes, f) != bytes)
    throw ParseError("unexpected end of cache file " + path);
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

PriorFamily prior_family_from_name(const std::string& name) {
  if (name == "uniform") return PriorFamily::Uniform;
  if (name == "beta" || name == "beta_shifted") return PriorFamily::BetaShifted;
  if (name == "gaussian" || name == "gaussian_truncated")
    return PriorFamily::GaussianTruncated;
  if (name == "laplace" || name == "laplace_truncated")
    return PriorFamily::LaplaceTruncated;
  if (name == "point_mass") return PriorFamily::PointMass;
  throw ConfigError("unknown prior family: " + name);
}

const char* prior_family_name(PriorFamily f) {
  switch (f) {
    case PriorFamily::Uniform: return "uniform";
    case PriorFamily::BetaShifted: return "beta";
    case PriorFamily::GaussianTruncated: return "gaussian";
    case PriorFamily::LaplaceTruncated: return "laplace";
    case PriorFamily::PointMass: return "point_mass";
  }
  return "unknown";
}

Interval prior_support(const PriorSpec& prior) {
  check_prior(prior);
  switch (prior.family) {
    case PriorFamily::Uniform:
      return {prior.mean - kSqrt3 * prior.sigma,
              prior.mean + kSqrt3 * prior.sigma};
    case PriorFamily::BetaShifted:
      return {prior.mean - prior.sigma * (2.0 / 7.0) / kBeta25Sd,
              prior.mean + prior.sigma * (5.0 / 7.0) / kBeta25Sd};
    case PriorFamily::GaussianTruncated:
    case PriorFamily::LaplaceTruncated:
      return {prior.mean - 6.0 * prior.sigma, prior.mean + 6.0 * prior.sigma};
    case PriorFamily::PointMass:
      return {prior.mean, prior.mean};
  }
  throw ConfigError("unknown prior family");
}

double sample_prior(const PriorSpec& prior, RngStream& rng) {
  switch (prior.family) {
    case PriorFamily::Uniform:
      return prior.mean + kSqrt3 * prior.sigma * (2.0 * rng.uniform01() - 1.0);
    case PriorFamily::BetaShifted: {
      // The second smallest of six uniforms is Beta(2,5)-distributed.
      double u[6];
      for (double& x : u) x = rng.uniform01();
      std::nth_element(u, u + 1, u + 6);
      return prior.mean + prior.sigma * (u[1] - 2.0 / 7.0) / kBeta25Sd;
    }
    case PriorFamily::GaussianTruncated: {
      double g;
      do {
        g = rng.gaussian();
      } while (std::abs(g) > 6.0);
      return prior.mean + prior.sigma * g;
    }
    case PriorFamily::LaplaceTruncated: {
      double x;
      do {
        const double u = rng.uniform01() - 0.5;
        x = -kInvSqrt2 * std::copysign(std::log1p(-2.0 * std::abs(u)), u);
      } while (!(std::abs(x) <= 6.0));
      return prior.mean + prior.sigma * x;
    }
    case PriorFamily::PointMass:
      return prior.mean;
  }
  throw ConfigError("unknown prior family");
}

std::vector<double> standard_time_grid(double t_max) {
  if (!(t_max >= 6.0) || !std::isfinite(t_max))
    throw ConfigError("t_max must be at least 6 for the standard time grid");
  constexpr int kUniformPts = 199;  // [1e-4, 1e-2] at spacing 5e-5
  constexpr int kRampSteps = 571;   // spacing grows geometrically to 6.5e-2
  constexpr int kTailSteps = 228;   // near-equal steps out to t_max

  std::vector<double> grid;
  grid.reserve(kUniformPts + kRampSteps + kTailSteps);
  for (int j = 0; j < kUniformPts; ++j) grid.push_back(1e-4 + 5e-5 * j);

  const double ratio = std::pow(6.5e-2 / 5e-5, 1.0 / kRampSteps);
  double step = 5e-5;
  double t = grid.back();
  for (int j = 0; j < kRampSteps; ++j) {
    step *= ratio;
    t += step;
    grid.push_back(t);
  }

  const double tail_step = (t_max - t) / kTailSteps;
  for (int j = 1; j <= kTailSteps; ++j) grid.push_back(t + tail_step * j);
  grid.back() = t_max;
  return grid;
}

FptGridCache build_cache(Boundary boundary, Interval v_range, std::size_t n_v,
                         double t_max, Truncation trunc, kernels::Exec exec) {
  return build_cache(boundary, v_range, n_v, standard_time_grid(t_max), trunc,
                     exec);
}

FptGridCache build_cache(Boundary boundary, Interval v_range, std::size_t n_v,
                         std::vector<double> time_grid, Truncation trunc,
                         kernels::Exec exec) {
  if (n_v < 2) throw ConfigError("drift grid needs at least 2 points");
  if (!(v_range.lo <= v_range.hi) || !std::isfinite(v_range.lo) ||
      !std::isfinite(v_range.hi))
    throw ConfigError("invalid drift range");
  if (time_grid.size() < 2) throw ConfigError("time grid needs >= 2 points");
  if (!(time_grid.front() > 0.0))
    throw ConfigError("time grid must start above zero");
  for (std::size_t j = 1; j < time_grid.size(); ++j)
    if (!(time_grid[j] > time_grid[j - 1]))
      throw ConfigError("time grid must be strictly increasing");

  FptGridCache cache;
  cache.boundary = boundary.value;
  cache.time_grid = std::move(time_grid);
  cache.t_max = cache.time_grid.back();
  cache.drift_grid.resize(n_v);
  for (std::size_t i = 0; i < n_v; ++i)
    cache.drift_grid[i] =
        v_range.lo + (v_range.hi - v_range.lo) * static_cast<double>(i) /
                         static_cast<double>(n_v - 1);
  cache.v_max =
      std::max(std::abs(cache.drift_grid.front()), std::abs(cache.drift_grid.back()));

  const double b = boundary.value;
  double worst = 0.0;
  for (double v : cache.drift_grid)
    worst = std::max(worst, tail_mass_bound(b, v, cache.t_max));
  if (worst > 1e-6) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "truncated tail mass bound %.3e exceeds 1e-6 at t_max=%g; "
                  "increase t_max",
                  worst, cache.t_max);
    throw ConfigError(msg);
  }

  const std::size_t n_t = cache.time_grid.size();
  std::vector<double> f0(n_t);
  kernels::parallel_for(n_t, exec, [&](std::size_t j) {
    f0[j] = std::max(f0_density(boundary, cache.time_grid[j], trunc), 0.0);
  });

  cache.cdf.assign(n_v * n_t, 0.0);
  std::vector<char> empty_row(n_v, 0);
  kernels::parallel_for(n_v, exec, [&](std::size_t i) {
    const double v = cache.drift_grid[i];
    const double tilt = std::cosh(b * v);
    double* row = cache.cdf.data() + i * n_t;
    double prev = f0[0] * std::exp(-0.5 * v * v * cache.time_grid[0]) * tilt;
    row[0] = 0.0;
    for (std::size_t j = 1; j < n_t; ++j) {
      const double cur =
          f0[j] * std::exp(-0.5 * v * v * cache.time_grid[j]) * tilt;
      row[j] = row[j - 1] + 0.5 * (prev + cur) *
                                (cache.time_grid[j] - cache.time_grid[j - 1]);
      prev = cur;
    }
    const double total = row[n_t - 1];
    if (total > 0.0) {
      for (std::size_t j = 0; j < n_t; ++j) row[j] /= total;
    } else {
      empty_row[i] = 1;
    }
  });
  for (std::size_t i = 0; i < n_v; ++i)
    if (empty_row[i])
      throw ConfigError("conditional density vanished on the whole grid at v=" +
                        std::to_string(cache.drift_grid[i]));
  return cache;
}

double sample_fpt(const FptGridCache& cache, double v, RngStream& rng) {
  const double* c = cache.row(snap_index(cache, v));
  const std::size_t n_t = cache.n_t();
  const double u = rng.uniform01();
  const double* it = std::upper_bound(c, c + n_t, u);
  if (it == c) return cache.time_grid.front();
  if (it == c + n_t) return cache.time_grid.back();
  const std::size_t k = static_cast<std::size_t>(it - c);
  const double c0 = c[k - 1];
  const double c1 = c[k];
  const double t0 = cache.time_grid[k - 1];
  const double t1 = cache.time_grid[k];
  if (!(c1 > c0)) return t0;
  return t0 + (u - c0) / (c1 - c0) * (t1 - t0);
}

int sample_choice(double v, Boundary boundary, RngStream& rng) {
  const double p = 1.0 / (1.0 + std::exp(-2.0 * boundary.value * v));
  return rng.uniform01() < p ? 1 : -1;
}

Dataset sample_tabular_dataset(const FptGridCache& cache,
                               const PriorSpec& prior, std::size_t n,
                               double ndt, std::uint64_t seed,
                               kernels::Exec exec) {
  check_prior(prior);
  if (n == 0) throw std::invalid_argument("need at least one observation");
  if (!(ndt >= 0.0) || !std::isfinite(ndt))
    throw ConfigError("ndt must be nonnegative and finite");
  const Interval support = prior_support(prior);
  if (support.lo < cache.drift_grid.front() - 1e-12 ||
      support.hi > cache.drift_grid.back() + 1e-12)
    throw ConfigError("prior support exceeds the cache drift range; rebuild "
                      "the cache over the prior support");

  Dataset ds;
  ds.choice.resize(n);
  ds.time.resize(n);
  ds.drift.resize(n);
  const Boundary b{cache.boundary};
  kernels::parallel_for(n, exec, [&](std::size_t i) {
    RngStream rng(derive_key(seed, {1, i}));
    const double v = sample_prior(prior, rng);
    ds.drift[i] = v;
    ds.choice[i] = static_cast<std::int8_t>(sample_choice(v, b, rng));
    ds.time[i] = sample_fpt(cache, v, rng) + ndt;
  });
  return ds;
}

Dataset sample_tabular_dataset(const PriorSpec& prior, Boundary boundary,
                               std::size_t n, double ndt, std::uint64_t seed,
                               kernels::Exec exec) {
  Interval support = prior_support(prior);
  if (support.hi <= support.lo) {  // point mass: give the grid some width
    support.lo -= 0.5;
    support.hi += 0.5;
  }
  const FptGridCache cache =
      build_cache(boundary, support, 500, 20.0, Truncation{}, exec);
  return sample_tabular_dataset(cache, prior, n, ndt, seed, exec);
}

double LinearScenario::v_max() const {
  double s = 0.0;
  for (double th : theta_star)
    s += std::max(std::abs(th - 6.0 * sigma_theta),
                  std::abs(th + 6.0 * sigma_theta));
  return s;
}

Dataset sample_linear_dataset(const LinearScenario& scenario, std::size_t n,
                              std::uint64_t seed, FptGridCache& cache,
                              kernels::Exec exec) {
  check_scenario(scenario);
  if (n == 0) throw std::invalid_argument("need at least one observation");
  if (cache.boundary != scenario.boundary)
    throw ConfigError("cache was built for a different boundary");

  const std::size_t d = scenario.theta_star.size();
  Dataset ds;
  ds.dim = d;
  ds.choice.resize(n);
  ds.time.resize(n);
  ds.drift.resize(n);
  ds.features.resize(n * d);

  kernels::parallel_for(n, exec, [&](std::size_t i) {
    RngStream rng(derive_key(seed, {2, i}));
    double* psi = ds.features.data() + i * d;
    for (std::size_t k = 0; k < d; ++k) psi[k] = rng.uniform(-1.0, 1.0);
    PriorSpec coord{scenario.prior_family, 0.0, scenario.sigma_theta};
    double v = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      coord.mean = scenario.theta_star[k];
      v += psi[k] * sample_prior(coord, rng);
    }
    ds.drift[i] = v;
  });

  double max_abs = 0.0;
  for (double v : ds.drift) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs > cache.v_max) {
    const double widened = std::max(1.5 * cache.v_max, 1.1 * max_abs);
    cache = build_cache(Boundary{scenario.boundary}, {-widened, widened},
                        cache.n_v(), cache.t_max, Truncation{}, exec);
  }

  const Boundary b{scenario.boundary};
  kernels::parallel_for(n, exec, [&](std::size_t i) {
    RngStream rng(derive_key(seed, {3, i}));
    ds.choice[i] =
        static_cast<std::int8_t>(sample_choice(ds.drift[i], b, rng));
    ds.time[i] = sample_fpt(cache, ds.drift[i], rng) + scenario.ndt;
  });
  return ds;
}

Dataset sample_linear_dataset(const LinearScenario& scenario, std::size_t n,
                              std::uint64_t seed, kernels::Exec exec) {
  check_scenario(scenario);
  const double vm = scenario.v_max();
  FptGridCache cache = build_cache(Boundary{scenario.boundary}, {-vm, vm}, 801,
                                   20.0, Truncation{}, exec);
  return sample_linear_dataset(scenario, n, seed, cache, exec);
}

void save_cache(const FptGridCache& cache, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "wb"));
  if (!f) throw ParseError("cannot open " + path + " for writing");
  const std::uint64_t n_v = cache.n_v();
  const std::uint64_t n_t = cache.n_t();
  write_block(f.get(), &cache.boundary, sizeof(double), path);
  write_block(f.get(), &n_v, sizeof n_v, path);
  write_block(f.get(), &n_t, sizeof n_t, path);
  write_block(f.get(), &cache.v_max, sizeof(double), path);
  write_block(f.get(), &cache.t_max, sizeof(double), path);
  write_block(f.get(), cache.drift_grid.data(), n_v * sizeof(double), path);
  write_block(f.get(), cache.time_grid.data(), n_t * sizeof(double), path);
  write_block(f.get(), cache.cdf.data(), n_v * n_t * sizeof(double), path);
}

FptGridCache load_cache(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "rb"));
  if (!f) throw ParseError("cannot open cache file " + path);
  FptGridCache cache;
  std::uint64_t n_v = 0;
  std::uint64_t n_t = 0;
  read_block(f.get(), &cache.boundary, sizeof(double), path);
  read_block(f.get(), &n_v, sizeof n_v, path);
  read_block(f.get(), &n_t, sizeof n_t, path);
  read_block(f.get(), &cache.v_max, sizeof(double), path);
  read_block(f.get(), &cache.t_max, sizeof(double), path);
  if (!(cache.boundary > 0.0) || n_v < 2 || n_t < 2 || n_v > (1u << 24) ||
      n_t > (1u << 24))
    throw ParseError("implausible cache header in " + path);
  cache.drift_grid.resize(n_v);
  cache.time_grid.resize(n_t);
  cache.cdf.resize(n_v * n_t);
  read_block(f.get(), cache.drift_grid.data(), n_v * sizeof(double), path);
  read_block(f.get(), cache.time_grid.data(), n_t * sizeof(double), path);
  read_block(f.get(), cache.cdf.data(), n_v * n_t * sizeof(double), path);
  for (std::size_t i = 0; i < n_v; ++i)
    if (std::abs(cache.row(i)[n_t - 1] - 1.0) > 1e-9)
      throw ParseError("cache row does not end at 1 in " + path);
  return cache;
}

}  // namespace rtpref
