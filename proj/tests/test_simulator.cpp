#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "rtpref/boundary.hpp"
#include "rtpref/errors.hpp"
#include "rtpref/simulator.hpp"

using namespace rtpref;
using kernels::Exec;

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
  double se() const { return sd / std::sqrt(static_cast<double>(n)); }
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  m.n = x.size();
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(m.n);
  double ss = 0.0;
  for (double v : x) ss += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(m.n - 1));
  return m;
}

std::vector<double> draw_fpts(const FptGridCache& cache, double v,
                              std::size_t n, std::uint64_t seed) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(derive_key(seed, {i}));
    out[i] = sample_fpt(cache, v, rng);
  }
  return out;
}

}  // namespace

TEST_CASE("standard time grid layout") {
  const std::vector<double> grid = standard_time_grid(20.0);
  REQUIRE(grid.size() == 998);
  CHECK(grid.front() == 1e-4);
  CHECK(grid.back() == 20.0);
  for (std::size_t j = 1; j < grid.size(); ++j) CHECK(grid[j] > grid[j - 1]);
  // Uniform head at spacing 5e-5 up to 1e-2.
  CHECK(grid[198] == doctest::Approx(1e-2).epsilon(1e-12));
  for (std::size_t j = 1; j < 199; ++j)
    CHECK(grid[j] - grid[j - 1] == doctest::Approx(5e-5).epsilon(1e-9));
  // Tail spacing settles near 6.5e-2.
  CHECK(grid[997] - grid[996] == doctest::Approx(6.5e-2).epsilon(0.02));

  CHECK_THROWS_AS(standard_time_grid(2.0), ConfigError);
}

TEST_CASE("cache construction and structure") {
  const FptGridCache cache =
      build_cache(Boundary{1.25}, {-1.0, 1.0}, 101, 20.0);
  CHECK(cache.n_v() == 101);
  CHECK(cache.n_t() == 998);
  CHECK(cache.v_max == 1.0);
  CHECK(cache.drift_grid.front() == -1.0);
  CHECK(cache.drift_grid.back() == 1.0);
  for (std::size_t i = 0; i < cache.n_v(); ++i) {
    const double* row = cache.row(i);
    CHECK(row[0] == 0.0);
    CHECK(row[cache.n_t() - 1] == 1.0);
    for (std::size_t j = 1; j < cache.n_t(); ++j) CHECK(row[j] >= row[j - 1]);
  }

  // Identical parameters rebuild to identical bits.
  const FptGridCache again =
      build_cache(Boundary{1.25}, {-1.0, 1.0}, 101, 20.0);
  CHECK(again.cdf == cache.cdf);
  CHECK(again.drift_grid == cache.drift_grid);
  CHECK(again.time_grid == cache.time_grid);

  kernels::set_threads(4);
  const FptGridCache par =
      build_cache(Boundary{1.25}, {-1.0, 1.0}, 101, 20.0, Truncation{},
                  Exec::Parallel);
  CHECK(par.cdf == cache.cdf);
  kernels::set_threads(kernels::max_threads());
}

TEST_CASE("raw trapezoid mass is close to 1 before renormalization") {
  // The trapezoidal rule overshoots on the convex ramp and tail cells by
  // about 2e-5 on this grid; renormalization absorbs it.
  const std::vector<double> grid = standard_time_grid(20.0);
  const Boundary b{1.25};
  double mass = 0.0;
  double prev = f0_density(b, grid[0]);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double cur = f0_density(b, grid[j]);
    mass += 0.5 * (prev + cur) * (grid[j] - grid[j - 1]);
    prev = cur;
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(5e-5));
}

TEST_CASE("tail mass guard rejects undersized t_max") {
  // At boundary 1.5 the mass beyond t=20 is ~2e-5; the build must refuse.
  CHECK_THROWS_AS(build_cache(Boundary{1.5}, {-1.0, 1.0}, 51, 20.0),
                  ConfigError);
  try {
    build_cache(Boundary{1.5}, {-1.0, 1.0}, 51, 20.0);
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tail mass") != std::string::npos);
  }
  CHECK_NOTHROW(build_cache(Boundary{1.5}, {-1.0, 1.0}, 51, 40.0));
}

TEST_CASE("first passage moments match closed forms") {
  const FptGridCache cache =
      build_cache(Boundary{1.25}, {-1.5, 1.5}, 301, 20.0);

  const std::vector<double> zero = draw_fpts(cache, 0.0, 200000, 11);
  const Moments m0 = moments(zero);
  CHECK(std::abs(m0.mean - 1.5625) < 4.0 * m0.se());  // E[T] = b^2 at v = 0

  const std::vector<double> one = draw_fpts(cache, 1.0, 200000, 12);
  const Moments m1 = moments(one);
  const double expected = 1.25 * std::tanh(1.25);  // (b/v) tanh(b v)
  CHECK(std::abs(m1.mean - expected) < 4.0 * m1.se());

  // Quantile draws are monotone in u and live on the grid range.
  for (double t : zero) {
    CHECK(t >= cache.time_grid.front());
    CHECK(t <= cache.time_grid.back());
  }
}

TEST_CASE("sampled times reproduce the fixed-drift Laplace transform") {
  const FptGridCache cache =
      build_cache(Boundary{1.25}, {-1.0, 1.0}, 201, 20.0);
  for (double v : {0.0, 0.5}) {
    const std::vector<double> times = draw_fpts(cache, v, 200000, 21);
    for (double lam : {0.5, 1.0, 2.0, 5.0}) {
      const double target = laplace_fixed_drift(v, Boundary{1.25}, lam);
      std::vector<double> vals(times.size());
      for (std::size_t i = 0; i < times.size(); ++i)
        vals[i] = std::exp(-lam * times[i]);
      const Moments m = moments(vals);
      CHECK(std::abs(m.mean - target) < 4.0 * m.se());
    }
  }
}

TEST_CASE("interpolation bias shrinks under grid refinement") {
  // Insert midpoints everywhere: the two resolutions must agree on the mean
  // to well under the stated tolerance.
  const std::vector<double> coarse = standard_time_grid(20.0);
  std::vector<double> fine;
  fine.reserve(coarse.size() * 2 - 1);
  for (std::size_t j = 0; j + 1 < coarse.size(); ++j) {
    fine.push_back(coarse[j]);
    fine.push_back(0.5 * (coarse[j] + coarse[j + 1]));
  }
  fine.push_back(coarse.back());

  const FptGridCache c1 = build_cache(Boundary{1.25}, {-1.0, 1.0}, 51, coarse);
  const FptGridCache c2 = build_cache(Boundary{1.25}, {-1.0, 1.0}, 51, fine);
  const Moments m1 = moments(draw_fpts(c1, 0.25, 100000, 31));
  const Moments m2 = moments(draw_fpts(c2, 0.25, 100000, 31));
  CHECK(std::abs(m1.mean - m2.mean) < 1e-3);
}

TEST_CASE("choice sampling matches the logistic law") {
  const Boundary b{1.25};
  std::vector<double> z(100000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    RngStream rng(derive_key(41, {i}));
    z[i] = sample_choice(0.5, b, rng);
  }
  const Moments m = moments(z);
  CHECK(std::abs(m.mean - std::tanh(1.25 * 0.5)) < 4.0 * m.se());

  std::vector<double> z0(100000);
  for (std::size_t i = 0; i < z0.size(); ++i) {
    RngStream rng(derive_key(42, {i}));
    z0[i] = sample_choice(0.0, b, rng);
  }
  const Moments m0 = moments(z0);
  CHECK(std::abs(m0.mean) < 4.0 * m0.se());
}

TEST_CASE("choice and time are uncorrelated given the drift") {
  const FptGridCache cache =
      build_cache(Boundary{1.25}, {-1.0, 1.0}, 201, 20.0);
  const std::size_t n = 100000;
  std::vector<double> z(n), t(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream rng(derive_key(51, {i}));
    z[i] = sample_choice(0.5, Boundary{1.25}, rng);
    t[i] = sample_fpt(cache, 0.5, rng);
  }
  const Moments mz = moments(z);
  const Moments mt = moments(t);
  double cov = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    cov += (z[i] - mz.mean) * (t[i] - mt.mean);
  const double corr = cov / static_cast<double>(n - 1) / (mz.sd * mt.sd);
  CHECK(std::abs(corr) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("prior families have the right moments and supports") {
  const double target_mean = 0.25;
  const std::size_t n = 200000;
  for (PriorFamily fam :
       {PriorFamily::Uniform, PriorFamily::BetaShifted,
        PriorFamily::GaussianTruncated, PriorFamily::LaplaceTruncated}) {
    const PriorSpec spec{fam, target_mean, 0.5};
    const Interval support = prior_support(spec);
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream rng(derive_key(61, {static_cast<std::uint64_t>(fam), i}));
      x[i] = sample_prior(spec, rng);
      CHECK(x[i] >= support.lo);
      CHECK(x[i] <= support.hi);
    }
    const Moments m = moments(x);
    INFO("family ", prior_family_name(fam));
    CHECK(std::abs(m.mean - target_mean) < 4.0 * m.se());
    // Variance within 4 SE of sigma^2 = 0.25 (the +-6 sigma truncation
    // shifts the Laplace variance by ~0.9%, well inside the band).
    const double var = m.sd * m.sd;
    double quad = 0.0;
    for (double v : x) quad += std::pow((v - m.mean) * (v - m.mean) - var, 2);
    const double var_se = std::sqrt(quad / static_cast<double>(n)) /
                          std::sqrt(static_cast<double>(n));
    CHECK(std::abs(var - 0.25) < 4.0 * var_se);
  }

  // Tabular uniform default: width-1 interval around the mean.
  const PriorSpec tab_uniform{PriorFamily::Uniform, 0.25,
                              0.5 / std::sqrt(3.0)};
  const Interval su = prior_support(tab_uniform);
  CHECK(su.lo == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(su.hi == doctest::Approx(0.75).epsilon(1e-12));

  // Tabular beta: mean - 2/7 + Beta(2,5).
  const PriorSpec tab_beta{PriorFamily::BetaShifted, 0.25, kBeta25Sd};
  const Interval sb = prior_support(tab_beta);
  CHECK(sb.lo == doctest::Approx(0.25 - 2.0 / 7.0).epsilon(1e-12));
  CHECK(sb.hi == doctest::Approx(0.25 + 5.0 / 7.0).epsilon(1e-12));

  const PriorSpec pm{PriorFamily::PointMass, 0.3, 0.0};
  RngStream rng(derive_key(62, {0}));
  CHECK(sample_prior(pm, rng) == 0.3);
}

TEST_CASE("tabular datasets are reproducible and well formed") {
  const PriorSpec prior{PriorFamily::Uniform, 0.25, 0.5 / std::sqrt(3.0)};
  const Dataset a = sample_tabular_dataset(prior, Boundary{1.25}, 50000, 0.0, 7);
  a.check();
  CHECK(a.size() == 50000);
  CHECK(!a.has_features());

  const Dataset b = sample_tabular_dataset(prior, Boundary{1.25}, 50000, 0.0, 7);
  CHECK(a.time == b.time);
  CHECK(a.choice == b.choice);
  CHECK(a.drift == b.drift);

  const Dataset c = sample_tabular_dataset(prior, Boundary{1.25}, 50000, 0.0, 8);
  CHECK(a.time != c.time);

  const Moments m = moments(a.drift);
  CHECK(std::abs(m.mean - 0.25) < 4.0 * m.se());

  // The non-decision shift adds exactly, observation by observation.
  const Dataset shifted =
      sample_tabular_dataset(prior, Boundary{1.25}, 50000, 0.3, 7);
  for (std::size_t i = 0; i < 1000; ++i)
    CHECK(shifted.time[i] == a.time[i] + 0.3);

  // Serial and parallel sampling agree bitwise.
  const FptGridCache cache =
      build_cache(Boundary{1.25}, prior_support(prior), 500, 20.0);
  const Dataset ser =
      sample_tabular_dataset(cache, prior, 20000, 0.0, 9, Exec::Serial);
  kernels::set_threads(4);
  const Dataset par =
      sample_tabular_dataset(cache, prior, 20000, 0.0, 9, Exec::Parallel);
  kernels::set_threads(kernels::max_threads());
  CHECK(ser.time == par.time);
  CHECK(ser.choice == par.choice);
}

TEST_CASE("point-mass tabular data have balanced choices at zero drift") {
  const PriorSpec prior{PriorFamily::PointMass, 0.0, 0.0};
  const Dataset ds = sample_tabular_dataset(prior, Boundary{1.25}, 100000, 0.0, 3);
  std::vector<double> z(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) z[i] = ds.choice[i];
  const Moments m = moments(z);
  CHECK(std::abs(m.mean) < 4.0 * m.se());
}

TEST_CASE("linear scenario geometry") {
  LinearScenario scn;
  scn.theta_star = {0.25, -0.15, 0.10, -0.30};
  scn.sigma_theta = 0.5;
  CHECK(scn.v_max() == doctest::Approx(12.80).epsilon(1e-12));
}

TEST_CASE("linear datasets: point mass drifts are exact dot products") {
  LinearScenario scn;
  scn.theta_star = {0.25, -0.15, 0.10, -0.30};
  scn.prior_family = PriorFamily::PointMass;
  const Dataset ds = sample_linear_dataset(scn, 5000, 17);
  ds.check();
  REQUIRE(ds.dim == 4);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < 4; ++k) v += ds.psi(i)[k] * scn.theta_star[k];
    CHECK(ds.drift[i] == v);
    CHECK(std::abs(ds.drift[i]) <= scn.v_max());
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(ds.psi(i)[k] >= -1.0);
      CHECK(ds.psi(i)[k] <= 1.0);
    }
}

TEST_CASE("linear datasets: moment identities under the gaussian prior") {
  LinearScenario scn;
  scn.theta_star = {0.25, -0.15, 0.10, -0.30};
  scn.prior_family = PriorFamily::GaussianTruncated;
  const std::size_t n = 200000;
  const Dataset ds = sample_linear_dataset(scn, n, 23);

  // E[v psi_k] = theta*_k / 3 under psi ~ Uniform[-1,1]^4.
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = ds.drift[i] * ds.psi(i)[k];
    const Moments m = moments(prod);
    CHECK(std::abs(m.mean - scn.theta_star[k] / 3.0) < 4.0 * m.se());
  }

  // E[v^2] = (|theta*|^2 + d sigma^2) / 3.
  double norm2 = 0.0;
  for (double th : scn.theta_star) norm2 += th * th;
  std::vector<double> v2(n);
  for (std::size_t i = 0; i < n; ++i) v2[i] = ds.drift[i] * ds.drift[i];
  const Moments mv = moments(v2);
  CHECK(std::abs(mv.mean - (norm2 + 4.0 * 0.25) / 3.0) < 4.0 * mv.se());
}

TEST_CASE("rebuild protocol widens the drift range deterministically") {
  LinearScenario scn;
  scn.theta_star = {0.25, -0.15, 0.10, -0.30};
  scn.prior_family = PriorFamily::GaussianTruncated;

  FptGridCache small = build_cache(Boundary{1.25}, {-0.5, 0.5}, 101, 20.0);
  const Dataset a = sample_linear_dataset(scn, 2000, 5, small);
  CHECK(small.v_max > 0.5);  // must have widened

  FptGridCache small2 = build_cache(Boundary{1.25}, {-0.5, 0.5}, 101, 20.0);
  const Dataset b = sample_linear_dataset(scn, 2000, 5, small2);
  CHECK(small2.v_max == small.v_max);
  CHECK(a.time == b.time);
  CHECK(a.choice == b.choice);

  double max_abs = 0.0;
  for (double v : a.drift) max_abs = std::max(max_abs, std::abs(v));
  CHECK(small.v_max == std::max(1.5 * 0.5, 1.1 * max_abs));
}

TEST_CASE("cache round-trips through its binary file") {
  const FptGridCache cache = build_cache(Boundary{1.25}, {-1.0, 1.0}, 31, 20.0);
  const std::string path = "/tmp/rtpref_cache_test.bin";
  save_cache(cache, path);
  const FptGridCache back = load_cache(path);
  CHECK(back.boundary == cache.boundary);
  CHECK(back.v_max == cache.v_max);
  CHECK(back.t_max == cache.t_max);
  CHECK(back.drift_grid == cache.drift_grid);
  CHECK(back.time_grid == cache.time_grid);
  CHECK(back.cdf == cache.cdf);

  // Truncated file must not parse.
  std::FILE* f = std::fopen(path.c_str(), "wb");
  const double half = 1.25;
  std::fwrite(&half, sizeof half, 1, f);
  std::fclose(f);
  CHECK_THROWS_AS(load_cache(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("prior family names round trip") {
  for (PriorFamily f :
       {PriorFamily::Uniform, PriorFamily::BetaShifted,
        PriorFamily::GaussianTruncated, PriorFamily::LaplaceTruncated,
        PriorFamily::PointMass}) {
    CHECK(prior_family_from_name(prior_family_name(f)) == f);
  }
  CHECK(prior_family_from_name("beta_shifted") == PriorFamily::BetaShifted);
  CHECK_THROWS_AS(prior_family_from_name("cauchy"), ConfigError);
}
