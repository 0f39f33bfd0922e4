#include "rtpref/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rtpref/drift.hpp"
#include "rtpref/errors.hpp"
#include "rtpref/rng.hpp"

namespace rtpref {
namespace {

using nlohmann::json;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// First identifier of every stream key derived from the config seed, one
// namespace per consumer so no two cells of any experiment share a stream.
constexpr std::uint64_t kSeedTabular = 21;
constexpr std::uint64_t kSeedLinear = 22;
constexpr std::uint64_t kSeedAblation = 23;
constexpr std::uint64_t kSeedReal = 24;
constexpr std::uint64_t kSeedTrials = 30;

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double sq(double x) { return x * x; }

class Timer {
 public:
  explicit Timer(bool enabled) : enabled_(enabled) {
    if (enabled_) start_ = std::chrono::steady_clock::now();
  }
  double stop() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_{};
};

// Work pool over independent replication cells.  Each cell writes only its
// own row slots and seeds its own streams, so the schedule cannot affect the
// output.
void pool_for(std::size_t n, kernels::Exec exec,
              const std::function<void(std::size_t)>& body) {
  if (exec == kernels::Exec::Parallel && n > 1) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i)
      body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += sq(x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Linear interpolation between order statistics (the numpy default).
double quantile_sorted(const std::vector<double>& x, double p) {
  if (x.empty()) return kNaN;
  const double h = p * static_cast<double>(x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - lo) * (x[lo + 1] - x[lo]);
}

// Sampling table with enough time horizon for the barrier at hand: the
// default suffices through b ~ 1.3; beyond that the tail-mass check inside
// build_cache rejects, and the horizon is widened geometrically.
FptGridCache cache_with_room(Boundary boundary, Interval range,
                             std::size_t n_v, Truncation trunc,
                             kernels::Exec exec) {
  double t_max = 20.0;
  for (int attempt = 0;; ++attempt) {
    try {
      return build_cache(boundary, range, n_v, t_max, trunc, exec);
    } catch (const ConfigError&) {
      if (attempt == 4) throw;
      t_max *= 1.5;
    }
  }
}

// Mirrors the one-argument sampler overload: a point mass gets a grid of
// nonzero width around it.
FptGridCache tabular_cache(const PriorSpec& prior, double boundary,
                           Truncation trunc, kernels::Exec exec) {
  Interval support = prior_support(prior);
  if (support.hi <= support.lo) {
    support.lo -= 0.5;
    support.hi += 0.5;
  }
  return cache_with_room(Boundary{boundary}, support, 500, trunc, exec);
}

// Family display names, suffixed on repetition so row tags stay unique.
std::vector<std::string> prior_tags(const std::vector<PriorSpec>& priors) {
  std::vector<std::string> tags;
  std::map<std::string, int> seen;
  for (const PriorSpec& spec : priors) {
    std::string base = prior_family_name(spec.family);
    const int k = ++seen[base];
    tags.push_back(k == 1 ? base : base + "_" + std::to_string(k));
  }
  return tags;
}

ResultRow make_row(const char* experiment, const std::string& estimator,
                   const std::string& prior, std::size_t n, std::size_t rep,
                   std::size_t d) {
  ResultRow row;
  row.experiment = experiment;
  row.estimator = estimator;
  row.prior = prior;
  row.n = n;
  row.rep = rep;
  row.estimate.assign(d, kNaN);
  row.sq_error = row.cossim = row.boundary_hat = row.ndt_hat = kNaN;
  return row;
}

enum class Score { SqScalar, SqVector, Cosine };

// Runs one estimator into its row.  A throw becomes a recorded error; the
// sweep continues.
template <class Call>
void run_arm(ResultRow& row, bool timings, Score score,
             const std::vector<double>& target, Call&& call) {
  const Timer timer(timings);
  try {
    const EstimationReport report = call();
    row.estimate = report.estimate;
    row.boundary_hat = report.boundary_used;
    row.ndt_hat = report.ndt_used.value_or(kNaN);
    switch (score) {
      case Score::SqScalar:
        row.sq_error = sq(report.scalar() - target[0]);
        break;
      case Score::SqVector: {
        double s = 0.0;
        for (std::size_t k = 0; k < target.size(); ++k)
          s += sq(report.estimate[k] - target[k]);
        row.sq_error = s;
        break;
      }
      case Score::Cosine:
        row.cossim = cosine_similarity(report.estimate, target);
        break;
    }
  } catch (const std::exception& ex) {
    row.error = ex.what();
  }
  row.seconds = timer.stop();
}

void mark_cell_failed(ResultRow* rows, std::size_t n_est,
                      const std::string& what) {
  for (std::size_t e = 0; e < n_est; ++e) rows[e].error = what;
}

void append_mean_row(ExperimentResult& res, const std::string& estimator,
                     const std::string& prior, std::size_t n,
                     const std::string& metric,
                     const std::vector<double>& vals) {
  AggregateRow a;
  a.experiment = experiment_kind_name(res.config.kind);
  a.estimator = estimator;
  a.prior = prior;
  a.n = n;
  a.reps = vals.size();
  a.metric = metric;
  a.statistic = "mean";
  a.value = a.spread = a.ci_lo = a.ci_hi = kNaN;
  if (!vals.empty()) {
    a.value = mean_of(vals);
    if (vals.size() >= 2) {
      a.spread = sd_of(vals, a.value);
      const double half =
          1.96 * a.spread / std::sqrt(static_cast<double>(vals.size()));
      a.ci_lo = a.value - half;
      a.ci_hi = a.value + half;
    }
  }
  res.aggregates.push_back(std::move(a));
}

void append_median_row(ExperimentResult& res, const std::string& estimator,
                       const std::string& prior, std::size_t n,
                       const std::string& metric, std::vector<double> vals) {
  AggregateRow a;
  a.experiment = experiment_kind_name(res.config.kind);
  a.estimator = estimator;
  a.prior = prior;
  a.n = n;
  a.reps = vals.size();
  a.metric = metric;
  a.statistic = "median";
  a.value = a.spread = a.ci_lo = a.ci_hi = kNaN;
  if (!vals.empty()) {
    std::sort(vals.begin(), vals.end());
    a.value = quantile_sorted(vals, 0.5);
    a.ci_lo = quantile_sorted(vals, 0.25);
    a.ci_hi = quantile_sorted(vals, 0.75);
    a.spread = a.ci_hi - a.ci_lo;
  }
  res.aggregates.push_back(std::move(a));
}

// Mean cosine similarity with a percentile band from 1000 bootstrap
// resamples of the replication values.
void append_bootstrap_row(ExperimentResult& res, const std::string& estimator,
                          std::size_t n, const std::vector<double>& vals,
                          RngStream& rng) {
  AggregateRow a;
  a.experiment = experiment_kind_name(res.config.kind);
  a.estimator = estimator;
  a.prior = "none";
  a.n = n;
  a.reps = vals.size();
  a.metric = "cossim";
  a.statistic = "mean";
  a.value = a.spread = a.ci_lo = a.ci_hi = kNaN;
  if (!vals.empty()) {
    a.value = mean_of(vals);
    if (vals.size() >= 2) {
      a.spread = sd_of(vals, a.value);
      const std::size_t m = vals.size();
      std::vector<double> means(1000);
      for (double& b : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
          s += vals[static_cast<std::size_t>(rng.uniform01() *
                                             static_cast<double>(m))];
        b = s / static_cast<double>(m);
      }
      std::sort(means.begin(), means.end());
      a.ci_lo = quantile_sorted(means, 0.025);
      a.ci_hi = quantile_sorted(means, 0.975);
    }
  }
  res.aggregates.push_back(std::move(a));
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += fmt_g(v[i]);
  }
  return s;
}

std::string describe_priors(const std::vector<PriorSpec>& priors,
                            bool families_only) {
  std::string s;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (i) s += ',';
    s += prior_family_name(priors[i].family);
    if (!families_only)
      s += "(mean=" + fmt_g(priors[i].mean) +
           ",sigma=" + fmt_g(priors[i].sigma) + ")";
  }
  return s;
}

using Meta = std::vector<std::pair<std::string, std::string>>;

Meta base_meta(const ExperimentConfig& c) {
  Meta m;
  m.emplace_back("experiment", experiment_kind_name(c.kind));
  m.emplace_back("seed", std::to_string(c.seed));
  m.emplace_back("reps", std::to_string(c.reps));
  m.emplace_back("n_grid", join_sizes(c.n_grid));
  m.emplace_back("lambda_exponent", fmt_g(c.lambda_exponent));
  m.emplace_back("lambda_floor", fmt_g(c.lambda_floor));
  m.emplace_back("truncation_terms", std::to_string(c.truncation_terms));
  return m;
}

void require_kind(const ExperimentConfig& c, ExperimentKind kind,
                  const char* entry) {
  if (c.kind != kind)
    throw ConfigError(std::string(entry) + " was given a " +
                      experiment_kind_name(c.kind) + " config");
}

// ---- config parsing --------------------------------------------------------

bool key_applies(ExperimentKind kind, const std::string& key) {
  static const char* common[] = {"experiment",     "n_grid",
                                 "reps",           "seed",
                                 "lambda_exponent", "lambda_floor",
                                 "truncation_terms", "out",
                                 "timings"};
  for (const char* k : common)
    if (key == k) return true;
  switch (kind) {
    case ExperimentKind::Tabular:
      return key == "priors" || key == "boundary" || key == "ndt" ||
             key == "trim_exponent";
    case ExperimentKind::Linear:
      return key == "priors" || key == "boundary" || key == "theta_star" ||
             key == "sigma_theta" || key == "ridge" || key == "l2_penalty";
    case ExperimentKind::Ablation:
      return key == "priors" || key == "boundary" || key == "ndt";
    case ExperimentKind::Real:
      return key == "ridge" || key == "l2_penalty" || key == "dataset_path";
  }
  return false;
}

bool known_key(const std::string& key) {
  static const char* all[] = {
      "experiment", "priors",          "theta_star",   "sigma_theta",
      "boundary",   "ndt",             "n_grid",       "reps",
      "seed",       "lambda_exponent", "lambda_floor", "truncation_terms",
      "ridge",      "l2_penalty",      "trim_exponent", "dataset_path",
      "out",        "timings"};
  for (const char* k : all)
    if (key == k) return true;
  return false;
}

double want_number(const json& v, const std::string& key) {
  if (!v.is_number())
    throw ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t want_count(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError("config key '" + key +
                    "' must be a nonnegative integer");
}

std::string want_string(const json& v, const std::string& key) {
  if (!v.is_string())
    throw ConfigError("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<PriorSpec> parse_priors(const json& v, ExperimentKind kind) {
  if (!v.is_array() || v.empty())
    throw ConfigError("'priors' must be a nonempty array of objects");
  std::vector<PriorSpec> out;
  for (const json& pj : v) {
    if (!pj.is_object())
      throw ConfigError("'priors' must be a nonempty array of objects");
    PriorSpec spec;
    bool saw_family = false, saw_mean = false, saw_sigma = false;
    for (const auto& item : pj.items()) {
      const std::string& key = item.key();
      if (key == "family") {
        spec.family = prior_family_from_name(want_string(item.value(), key));
        saw_family = true;
      } else if (key == "mean" || key == "sigma") {
        if (kind == ExperimentKind::Linear)
          throw ConfigError(
              "linear priors take a family only; location and scale come "
              "from theta_star and sigma_theta");
        (key == "mean" ? spec.mean : spec.sigma) =
            want_number(item.value(), key);
        (key == "mean" ? saw_mean : saw_sigma) = true;
      } else {
        throw ConfigError("unknown prior key '" + key + "'");
      }
    }
    if (!saw_family) throw ConfigError("each prior needs a 'family'");
    if (kind != ExperimentKind::Linear) {
      if (!saw_mean) throw ConfigError("each prior needs a 'mean'");
      if (!saw_sigma) {
        if (spec.family != PriorFamily::PointMass)
          throw ConfigError("each prior needs a 'sigma'");
        spec.sigma = 0.0;
      }
    }
    out.push_back(spec);
  }
  return out;
}

std::vector<double> parse_double_array(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty())
    throw ConfigError("config key '" + key + "' must be a nonempty array");
  std::vector<double> out;
  for (const json& x : v) out.push_back(want_number(x, key));
  return out;
}

std::vector<std::size_t> parse_size_array(const json& v,
                                          const std::string& key) {
  if (!v.is_array() || v.empty())
    throw ConfigError("config key '" + key + "' must be a nonempty array");
  std::vector<std::size_t> out;
  for (const json& x : v) {
    const std::uint64_t n = want_count(x, key);
    if (n == 0) throw ConfigError("sample sizes must be positive");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

ExperimentKind experiment_kind_from_name(const std::string& name) {
  if (name == "tabular") return ExperimentKind::Tabular;
  if (name == "linear") return ExperimentKind::Linear;
  if (name == "ablation") return ExperimentKind::Ablation;
  if (name == "real") return ExperimentKind::Real;
  throw ConfigError("unknown experiment kind: " + name);
}

const char* experiment_kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Tabular: return "tabular";
    case ExperimentKind::Linear: return "linear";
    case ExperimentKind::Ablation: return "ablation";
    case ExperimentKind::Real: return "real";
  }
  return "unknown";
}

LambdaSchedule ExperimentConfig::lambda_schedule() const {
  return LambdaSchedule{lambda_exponent, lambda_floor};
}

Truncation ExperimentConfig::truncation() const {
  return Truncation{truncation_terms};
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  const PriorSpec uniform{PriorFamily::Uniform, 0.25, 0.5 / std::sqrt(3.0)};
  const PriorSpec beta{PriorFamily::BetaShifted, 0.25, kBeta25Sd};
  switch (kind) {
    case ExperimentKind::Tabular:
      c.priors = {uniform, beta};
      c.n_grid = {1000, 10000, 100000};
      break;
    case ExperimentKind::Linear:
      c.priors = {{PriorFamily::GaussianTruncated, 0.0, 1.0},
                  {PriorFamily::Uniform, 0.0, 1.0},
                  {PriorFamily::BetaShifted, 0.0, 1.0},
                  {PriorFamily::LaplaceTruncated, 0.0, 1.0}};
      c.theta_star = {0.25, -0.15, 0.10, -0.30};
      c.n_grid = {1000, 10000, 100000};
      break;
    case ExperimentKind::Ablation:
      c.priors = {uniform, beta};
      c.n_grid = {1000, 10000, 100000, 1000000};
      break;
    case ExperimentKind::Real:
      c.n_grid = {100, 250, 500, 1000, 2000, 5000};
      c.l2_penalty = 0.1;
      break;
  }
  return c;
}

void apply_json_overrides(ExperimentConfig& config,
                          const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    const json& v = item.value();
    if (!known_key(key)) throw ConfigError("unknown config key '" + key + "'");
    if (!key_applies(config.kind, key))
      throw ConfigError("config key '" + key + "' does not apply to the " +
                        experiment_kind_name(config.kind) + " experiment");
    if (key == "experiment") {
      const std::string name = want_string(v, key);
      if (experiment_kind_from_name(name) != config.kind)
        throw ConfigError("config file targets the " + name +
                          " experiment, not " +
                          experiment_kind_name(config.kind));
    } else if (key == "priors") {
      config.priors = parse_priors(v, config.kind);
    } else if (key == "theta_star") {
      config.theta_star = parse_double_array(v, key);
    } else if (key == "n_grid") {
      config.n_grid = parse_size_array(v, key);
    } else if (key == "reps") {
      config.reps = static_cast<std::size_t>(want_count(v, key));
    } else if (key == "seed") {
      config.seed = want_count(v, key);
    } else if (key == "boundary") {
      config.boundary = want_number(v, key);
    } else if (key == "ndt") {
      config.ndt = want_number(v, key);
    } else if (key == "sigma_theta") {
      config.sigma_theta = want_number(v, key);
    } else if (key == "lambda_exponent") {
      config.lambda_exponent = want_number(v, key);
    } else if (key == "lambda_floor") {
      config.lambda_floor = want_number(v, key);
    } else if (key == "truncation_terms") {
      config.truncation_terms = static_cast<int>(want_count(v, key));
    } else if (key == "ridge") {
      config.ridge = want_number(v, key);
    } else if (key == "l2_penalty") {
      config.l2_penalty = want_number(v, key);
    } else if (key == "trim_exponent") {
      config.trim_exponent = want_number(v, key);
    } else if (key == "dataset_path") {
      config.dataset_path = want_string(v, key);
    } else if (key == "out") {
      config.out = want_string(v, key);
    } else if (key == "timings") {
      if (!v.is_boolean())
        throw ConfigError("config key 'timings' must be a boolean");
      config.timings = v.get<bool>();
    }
  }
}

void validate_config(const ExperimentConfig& c) {
  if (c.reps < 2) throw ConfigError("need at least two replications");
  if (c.n_grid.empty()) throw ConfigError("sample-size grid is empty");
  for (std::size_t i = 0; i < c.n_grid.size(); ++i) {
    if (c.n_grid[i] < 2) throw ConfigError("sample sizes must be at least 2");
    if (i > 0 && c.n_grid[i] <= c.n_grid[i - 1])
      throw ConfigError("sample-size grid must be strictly increasing");
  }
  if (c.truncation_terms < 1)
    throw ConfigError("truncation must allow at least one term");
  // surfaces schedule-domain problems before any sampling happens
  lambda_schedule_value(c.n_grid.front(), c.lambda_schedule());

  const bool simulated = c.kind != ExperimentKind::Real;
  if (simulated) {
    if (c.priors.empty()) throw ConfigError("need at least one prior");
    if (!(c.boundary > 0.0) || !std::isfinite(c.boundary))
      throw ConfigError("boundary must be positive and finite");
    if (!(c.ndt >= 0.0) || !std::isfinite(c.ndt))
      throw ConfigError("ndt must be nonnegative and finite");
  }
  switch (c.kind) {
    case ExperimentKind::Tabular:
    case ExperimentKind::Ablation:
      for (const PriorSpec& p : c.priors) {
        if (!std::isfinite(p.mean))
          throw ConfigError("prior mean must be finite");
        if (p.family != PriorFamily::PointMass &&
            (!(p.sigma > 0.0) || !std::isfinite(p.sigma)))
          throw ConfigError("prior sigma must be positive and finite");
      }
      if (c.kind == ExperimentKind::Tabular &&
          (!(c.trim_exponent > 0.0) || !std::isfinite(c.trim_exponent)))
        throw ConfigError("trim exponent must be positive and finite");
      break;
    case ExperimentKind::Linear:
      if (c.theta_star.empty())
        throw ConfigError("the linear experiment needs a theta_star");
      for (double th : c.theta_star)
        if (!std::isfinite(th))
          throw ConfigError("theta_star entries must be finite");
      if (!(c.sigma_theta > 0.0) || !std::isfinite(c.sigma_theta))
        throw ConfigError("sigma_theta must be positive and finite");
      if (c.ndt != 0.0)
        throw ConfigError(
            "the linear experiment does not support a non-decision shift");
      if (!(c.ridge >= 0.0) || !std::isfinite(c.ridge))
        throw ConfigError("ridge must be nonnegative and finite");
      if (!(c.l2_penalty >= 0.0) || !std::isfinite(c.l2_penalty))
        throw ConfigError("l2 penalty must be nonnegative and finite");
      break;
    case ExperimentKind::Real:
      if (!c.priors.empty())
        throw ConfigError("the real experiment takes no priors");
      if (!(c.ridge >= 0.0) || !std::isfinite(c.ridge))
        throw ConfigError("ridge must be nonnegative and finite");
      if (!(c.l2_penalty >= 0.0) || !std::isfinite(c.l2_penalty))
        throw ConfigError("l2 penalty must be nonnegative and finite");
      break;
  }
}

ExperimentResult run_tabular(const ExperimentConfig& c, kernels::Exec exec) {
  require_kind(c, ExperimentKind::Tabular, "run_tabular");
  validate_config(c);
  const Truncation trunc = c.truncation();
  const LambdaSchedule sched = c.lambda_schedule();
  const bool shifted = c.ndt > 0.0;
  const std::vector<std::string> tags = {
      "bt_tabular", "plugin_mu_oracle",
      shifted ? "plugin_mu_three_scale" : "plugin_mu_richardson"};
  const std::vector<std::string> ptags = prior_tags(c.priors);

  // immutable per-prior sampling tables, shared by every replication
  std::vector<FptGridCache> caches;
  caches.reserve(c.priors.size());
  for (const PriorSpec& p : c.priors)
    caches.push_back(tabular_cache(p, c.boundary, trunc, exec));

  const std::size_t P = c.priors.size(), N = c.n_grid.size(), R = c.reps;
  const std::size_t E = tags.size();
  ExperimentResult res;
  res.config = c;
  res.dim = 1;
  res.rows.resize(P * N * R * E);

  pool_for(P * N * R, exec, [&](std::size_t cell) {
    const std::size_t r = cell % R;
    const std::size_t ni = (cell / R) % N;
    const std::size_t p = cell / (R * N);
    const std::size_t n = c.n_grid[ni];
    ResultRow* out = res.rows.data() + cell * E;
    for (std::size_t e = 0; e < E; ++e)
      out[e] = make_row("tabular", tags[e], ptags[p], n, r, 1);
    const std::uint64_t cell_seed =
        derive_key(c.seed, {kSeedTabular, 0, p, ni, r});
    Dataset ds;
    try {
      ds = sample_tabular_dataset(caches[p], c.priors[p], n, c.ndt, cell_seed,
                                  exec);
    } catch (const std::exception& ex) {
      mark_cell_failed(out, E, ex.what());
      return;
    }
    const std::vector<double> target = {c.priors[p].mean};
    run_arm(out[0], c.timings, Score::SqScalar, target,
            [&] { return bt_tabular(ds, c.boundary); });
    if (!shifted) {
      run_arm(out[1], c.timings, Score::SqScalar, target,
              [&] { return plugin_mu(ds, c.boundary, trunc, exec); });
      run_arm(out[2], c.timings, Score::SqScalar, target, [&] {
        return plugin_mu(ds, richardson_boundary(ds.time, sched, exec), trunc,
                         exec);
      });
    } else {
      const double eps = trimming_epsilon(n, c.trim_exponent);
      run_arm(out[1], c.timings, Score::SqScalar, target, [&] {
        return plugin_mu_ndt(ds, c.boundary, c.ndt, eps, trunc, exec);
      });
      run_arm(out[2], c.timings, Score::SqScalar, target, [&] {
        return plugin_mu_ndt(ds, three_scale_ndt(ds.time, sched, exec), eps,
                             trunc, exec);
      });
    }
  });

  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t ni = 0; ni < N; ++ni)
      for (std::size_t e = 0; e < E; ++e) {
        std::vector<double> est, sqe;
        for (std::size_t r = 0; r < R; ++r) {
          const ResultRow& row = res.rows[((p * N + ni) * R + r) * E + e];
          if (!row.error.empty()) continue;
          est.push_back(row.estimate[0]);
          sqe.push_back(row.sq_error);
        }
        append_mean_row(res, tags[e], ptags[p], c.n_grid[ni], "estimate_0",
                        est);
        append_mean_row(res, tags[e], ptags[p], c.n_grid[ni], "sq_error", sqe);
      }

  res.metadata = base_meta(c);
  res.metadata.emplace_back("boundary_star", fmt_g(c.boundary));
  res.metadata.emplace_back("ndt", fmt_g(c.ndt));
  res.metadata.emplace_back("trim_exponent", fmt_g(c.trim_exponent));
  res.metadata.emplace_back("priors", describe_priors(c.priors, false));
  return res;
}

ExperimentResult run_linear(const ExperimentConfig& c, kernels::Exec exec) {
  require_kind(c, ExperimentKind::Linear, "run_linear");
  validate_config(c);
  const Truncation trunc = c.truncation();
  const LambdaSchedule sched = c.lambda_schedule();
  const std::vector<std::string> tags = {"bt_logistic", "ols_theta_oracle",
                                         "ols_theta_richardson"};
  const std::vector<std::string> ptags = prior_tags(c.priors);
  const std::size_t d = c.theta_star.size();

  LinearScenario base;
  base.theta_star = c.theta_star;
  base.sigma_theta = c.sigma_theta;
  base.boundary = c.boundary;
  base.ndt = 0.0;

  // One table serves every family: the drift range covers the whole +-6
  // sigma support, so the rebuild path inside the sampler is unreachable and
  // sharing the (nominally mutable) cache across cells is safe.
  const double vm = base.v_max();
  FptGridCache cache = cache_with_room(Boundary{c.boundary}, {-vm, vm}, 801,
                                       trunc, exec);

  const std::size_t P = c.priors.size(), N = c.n_grid.size(), R = c.reps;
  const std::size_t E = tags.size();
  ExperimentResult res;
  res.config = c;
  res.dim = d;
  res.rows.resize(P * N * R * E);

  pool_for(P * N * R, exec, [&](std::size_t cell) {
    const std::size_t r = cell % R;
    const std::size_t ni = (cell / R) % N;
    const std::size_t p = cell / (R * N);
    const std::size_t n = c.n_grid[ni];
    ResultRow* out = res.rows.data() + cell * E;
    for (std::size_t e = 0; e < E; ++e)
      out[e] = make_row("linear", tags[e], ptags[p], n, r, d);
    LinearScenario scenario = base;
    scenario.prior_family = c.priors[p].family;
    const std::uint64_t cell_seed =
        derive_key(c.seed, {kSeedLinear, 0, p, ni, r});
    Dataset ds;
    try {
      ds = sample_linear_dataset(scenario, n, cell_seed, cache, exec);
    } catch (const std::exception& ex) {
      mark_cell_failed(out, E, ex.what());
      return;
    }
    run_arm(out[0], c.timings, Score::SqVector, c.theta_star,
            [&] { return bt_logistic(ds, c.boundary, c.l2_penalty, exec); });
    run_arm(out[1], c.timings, Score::SqVector, c.theta_star, [&] {
      return ols_theta(ds, c.boundary, trunc, c.ridge, exec);
    });
    run_arm(out[2], c.timings, Score::SqVector, c.theta_star, [&] {
      return ols_theta(ds, richardson_boundary(ds.time, sched, exec), trunc,
                       c.ridge, exec);
    });
  });

  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t ni = 0; ni < N; ++ni)
      for (std::size_t e = 0; e < E; ++e) {
        std::vector<std::vector<double>> cols(d);
        std::vector<double> sqe;
        for (std::size_t r = 0; r < R; ++r) {
          const ResultRow& row = res.rows[((p * N + ni) * R + r) * E + e];
          if (!row.error.empty()) continue;
          for (std::size_t k = 0; k < d; ++k)
            cols[k].push_back(row.estimate[k]);
          sqe.push_back(row.sq_error);
        }
        for (std::size_t k = 0; k < d; ++k)
          append_mean_row(res, tags[e], ptags[p], c.n_grid[ni],
                          "estimate_" + std::to_string(k), cols[k]);
        append_mean_row(res, tags[e], ptags[p], c.n_grid[ni], "sq_error", sqe);
      }

  res.metadata = base_meta(c);
  res.metadata.emplace_back("boundary_star", fmt_g(c.boundary));
  res.metadata.emplace_back("theta_star", join_doubles(c.theta_star));
  res.metadata.emplace_back("sigma_theta", fmt_g(c.sigma_theta));
  res.metadata.emplace_back("ridge", fmt_g(c.ridge));
  res.metadata.emplace_back("l2_penalty", fmt_g(c.l2_penalty));
  res.metadata.emplace_back("priors", describe_priors(c.priors, true));
  return res;
}

ExperimentResult run_boundary_ablation(const ExperimentConfig& c,
                                       kernels::Exec exec) {
  require_kind(c, ExperimentKind::Ablation, "run_boundary_ablation");
  validate_config(c);
  const Truncation trunc = c.truncation();
  const LambdaSchedule sched = c.lambda_schedule();
  const std::vector<std::string> tags = {"one_scale_boundary",
                                         "richardson_boundary"};
  const std::vector<std::string> ptags = prior_tags(c.priors);

  std::vector<FptGridCache> caches;
  caches.reserve(c.priors.size());
  for (const PriorSpec& p : c.priors)
    caches.push_back(tabular_cache(p, c.boundary, trunc, exec));

  const std::size_t P = c.priors.size(), N = c.n_grid.size(), R = c.reps;
  const std::size_t E = tags.size();
  ExperimentResult res;
  res.config = c;
  res.dim = 1;
  res.rows.resize(P * N * R * E);

  pool_for(P * N * R, exec, [&](std::size_t cell) {
    const std::size_t r = cell % R;
    const std::size_t ni = (cell / R) % N;
    const std::size_t p = cell / (R * N);
    const std::size_t n = c.n_grid[ni];
    ResultRow* out = res.rows.data() + cell * E;
    for (std::size_t e = 0; e < E; ++e)
      out[e] = make_row("ablation", tags[e], ptags[p], n, r, 1);
    const std::uint64_t cell_seed =
        derive_key(c.seed, {kSeedAblation, 0, p, ni, r});
    Dataset ds;
    try {
      ds = sample_tabular_dataset(caches[p], c.priors[p], n, c.ndt, cell_seed,
                                  exec);
    } catch (const std::exception& ex) {
      mark_cell_failed(out, E, ex.what());
      return;
    }
    for (std::size_t e = 0; e < E; ++e) {
      const Timer timer(c.timings);
      try {
        const BoundaryEstimate be =
            e == 0 ? one_scale_boundary(ds.time, sched, exec)
                   : richardson_boundary(ds.time, sched, exec);
        out[e].estimate[0] = be.boundary;
        out[e].sq_error = sq(be.boundary - c.boundary);
        out[e].boundary_hat = be.boundary;
        out[e].ndt_hat = be.ndt.value_or(kNaN);
      } catch (const std::exception& ex) {
        out[e].error = ex.what();
      }
      out[e].seconds = timer.stop();
    }
  });

  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t ni = 0; ni < N; ++ni) {
      std::vector<double> abs_err[2];
      for (std::size_t e = 0; e < E; ++e) {
        std::vector<double> est;
        for (std::size_t r = 0; r < R; ++r) {
          const ResultRow& row = res.rows[((p * N + ni) * R + r) * E + e];
          if (!row.error.empty()) continue;
          est.push_back(row.estimate[0]);
          abs_err[e].push_back(std::abs(row.estimate[0] - c.boundary));
        }
        append_median_row(res, tags[e], ptags[p], c.n_grid[ni], "boundary",
                          est);
        append_median_row(res, tags[e], ptags[p], c.n_grid[ni], "abs_error",
                          abs_err[e]);
      }
      // headline of the ablation: does two-scale differencing beat the raw
      // log-slope at this sample size?
      AggregateRow flag;
      flag.experiment = "ablation";
      flag.estimator = "richardson_boundary";
      flag.prior = ptags[p];
      flag.n = c.n_grid[ni];
      flag.reps = abs_err[1].size();
      flag.metric = "richardson_dominates";
      flag.statistic = "indicator";
      if (abs_err[0].empty() || abs_err[1].empty()) {
        flag.value = flag.spread = flag.ci_lo = flag.ci_hi = kNaN;
      } else {
        std::sort(abs_err[0].begin(), abs_err[0].end());
        std::sort(abs_err[1].begin(), abs_err[1].end());
        flag.value = quantile_sorted(abs_err[1], 0.5) <
                             quantile_sorted(abs_err[0], 0.5)
                         ? 1.0
                         : 0.0;
        flag.spread = 0.0;
        flag.ci_lo = flag.ci_hi = flag.value;
      }
      res.aggregates.push_back(std::move(flag));
    }

  res.metadata = base_meta(c);
  res.metadata.emplace_back("boundary_star", fmt_g(c.boundary));
  res.metadata.emplace_back("ndt", fmt_g(c.ndt));
  res.metadata.emplace_back("priors", describe_priors(c.priors, false));
  return res;
}

ExperimentResult run_real(const ExperimentConfig& c,
                          const std::string& csv_path, kernels::Exec exec) {
  require_kind(c, ExperimentKind::Real, "run_real");
  validate_config(c);
  if (csv_path.empty())
    throw ConfigError("the real experiment needs a dataset file");
  std::ifstream file(csv_path);
  if (!file)
    throw ConfigError("cannot open dataset file '" + csv_path + "'");
  const ParseReport parsed = parse_trials(file);
  if (parsed.records.empty())
    throw ParseError("dataset contains no usable rows");

  const SubjectTarget target = subject_target(parsed.records, c.l2_penalty,
                                              exec);
  const Dataset full = trials_to_dataset(parsed.records);
  const Truncation trunc = c.truncation();
  const LambdaSchedule sched = c.lambda_schedule();
  const std::vector<std::string> tags = {"bt_logistic", "ols_theta"};

  const std::size_t N = c.n_grid.size(), R = c.reps, E = tags.size();
  ExperimentResult res;
  res.config = c;
  res.dim = target.theta_star.size();
  res.rows.resize(N * R * E);

  pool_for(N * R, exec, [&](std::size_t cell) {
    const std::size_t r = cell % R;
    const std::size_t ni = cell / R;
    const std::size_t n = c.n_grid[ni];
    ResultRow* out = res.rows.data() + cell * E;
    for (std::size_t e = 0; e < E; ++e)
      out[e] = make_row("real", tags[e], "none", n, r, res.dim);
    const std::uint64_t cell_seed =
        derive_key(c.seed, {kSeedReal, 0, 0, ni, r});
    Dataset sub;
    try {
      sub = subsample(full, n, cell_seed);
    } catch (const std::exception& ex) {
      mark_cell_failed(out, E, ex.what());
      return;
    }
    // the choice-only baseline has no boundary of its own; it is calibrated
    // at 1 exactly as the per-subject target fits are
    run_arm(out[0], c.timings, Score::Cosine, target.theta_star,
            [&] { return bt_logistic(sub, 1.0, c.l2_penalty, exec); });
    run_arm(out[1], c.timings, Score::Cosine, target.theta_star, [&] {
      return ols_theta(sub, richardson_boundary(sub.time, sched, exec), trunc,
                       c.ridge, exec);
    });
  });

  for (std::size_t ni = 0; ni < N; ++ni)
    for (std::size_t e = 0; e < E; ++e) {
      std::vector<double> vals;
      for (std::size_t r = 0; r < R; ++r) {
        const ResultRow& row = res.rows[(ni * R + r) * E + e];
        if (row.error.empty()) vals.push_back(row.cossim);
      }
      RngStream rng(derive_key(c.seed, {kSeedReal, 1, e, ni}));
      append_bootstrap_row(res, tags[e], c.n_grid[ni], vals, rng);
    }

  res.metadata = base_meta(c);
  res.metadata.emplace_back("ridge", fmt_g(c.ridge));
  res.metadata.emplace_back("l2_penalty", fmt_g(c.l2_penalty));
  res.metadata.emplace_back("rows_used",
                            std::to_string(parsed.records.size()));
  res.metadata.emplace_back("rows_dropped_missing",
                            std::to_string(parsed.rows_dropped_missing));
  res.metadata.emplace_back("rows_errored",
                            std::to_string(parsed.rows_errored));
  res.metadata.emplace_back("subjects_used",
                            std::to_string(target.subjects_used));
  res.metadata.emplace_back("subjects_dropped",
                            std::to_string(target.subjects_dropped));
  res.metadata.emplace_back("target", join_doubles(target.theta_star));
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                kernels::Exec exec) {
  switch (config.kind) {
    case ExperimentKind::Tabular: return run_tabular(config, exec);
    case ExperimentKind::Linear: return run_linear(config, exec);
    case ExperimentKind::Ablation: return run_boundary_ablation(config, exec);
    case ExperimentKind::Real:
      return run_real(config, config.dataset_path, exec);
  }
  throw ConfigError("unknown experiment kind");
}

void write_long_csv(std::ostream& out, const ExperimentResult& result) {
  out << "experiment,estimator,prior,n,rep";
  for (std::size_t k = 0; k < result.dim; ++k) out << ",estimate_" << k;
  out << ",sq_error,cossim,boundary_hat,ndt_hat,seconds\n";
  for (const ResultRow& row : result.rows) {
    out << row.experiment << ',' << row.estimator << ',' << row.prior << ','
        << row.n << ',' << row.rep;
    for (double e : row.estimate) out << ',' << fmt_g(e);
    out << ',' << fmt_g(row.sq_error) << ',' << fmt_g(row.cossim) << ','
        << fmt_g(row.boundary_hat) << ',' << fmt_g(row.ndt_hat) << ','
        << fmt_g(row.seconds) << '\n';
  }
}

void write_aggregate_csv(std::ostream& out, const ExperimentResult& result) {
  for (const auto& [key, value] : result.metadata)
    out << "# " << key << ": " << value << '\n';
  out << "experiment,estimator,prior,n,reps,metric,statistic,value,spread,"
         "ci_lo,ci_hi\n";
  for (const AggregateRow& a : result.aggregates) {
    out << a.experiment << ',' << a.estimator << ',' << a.prior << ',' << a.n
        << ',' << a.reps << ',' << a.metric << ',' << a.statistic << ','
        << fmt_g(a.value) << ',' << fmt_g(a.spread) << ',' << fmt_g(a.ci_lo)
        << ',' << fmt_g(a.ci_hi) << '\n';
  }
}

std::string aggregate_path_for(const std::string& out_path) {
  const std::size_t slash = out_path.find_last_of('/');
  const std::size_t dot = out_path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out_path + "_summary";
  return out_path.substr(0, dot) + "_summary" + out_path.substr(dot);
}

void write_result_files(const ExperimentResult& result,
                        const std::string& out_path) {
  if (out_path.empty()) throw ConfigError("output path is empty");
  std::ofstream long_file(out_path, std::ios::binary);
  if (!long_file)
    throw ConfigError("cannot write result file '" + out_path + "'");
  write_long_csv(long_file, result);
  const std::string agg_path = aggregate_path_for(out_path);
  std::ofstream agg_file(agg_path, std::ios::binary);
  if (!agg_file)
    throw ConfigError("cannot write result file '" + agg_path + "'");
  write_aggregate_csv(agg_file, result);
}

std::vector<TrialRecord> simulate_trials(const LinearScenario& scenario,
                                         std::size_t subjects,
                                         std::size_t trials_per_subject,
                                         std::uint64_t seed,
                                         kernels::Exec exec) {
  if (scenario.theta_star.size() != 2)
    throw ConfigError(
        "the trial schema carries two features; theta_star must have "
        "length 2");
  if (subjects == 0 || trials_per_subject == 0)
    throw std::invalid_argument(
        "need at least one subject and one trial per subject");
  for (double th : scenario.theta_star)
    if (!std::isfinite(th))
      throw ConfigError("theta_star entries must be finite");
  if (!(scenario.sigma_theta > 0.0) || !std::isfinite(scenario.sigma_theta))
    throw ConfigError("sigma_theta must be positive and finite");
  if (!(scenario.ndt >= 0.0) || !std::isfinite(scenario.ndt))
    throw ConfigError("ndt must be nonnegative and finite");

  // both features stay inside [-1, 1], so the scenario's own drift bound
  // covers every subject/trial combination
  const double vm = scenario.v_max();
  const Boundary b{scenario.boundary};
  const FptGridCache cache =
      cache_with_room(b, {-vm, vm}, 801, Truncation{}, exec);

  static const double kDelays[7] = {1, 7, 15, 30, 90, 180, 365};
  std::vector<TrialRecord> records;
  records.reserve(subjects * trials_per_subject);
  for (std::size_t s = 0; s < subjects; ++s) {
    RngStream prng(derive_key(seed, {kSeedTrials, 0, s}));
    PriorSpec coord{scenario.prior_family, 0.0, scenario.sigma_theta};
    coord.mean = scenario.theta_star[0];
    const double th0 = sample_prior(coord, prng);
    coord.mean = scenario.theta_star[1];
    const double th1 = sample_prior(coord, prng);
    char sid[32];
    std::snprintf(sid, sizeof sid, "s%04zu", s);
    for (std::size_t j = 0; j < trials_per_subject; ++j) {
      RngStream rng(derive_key(seed, {kSeedTrials, 1, s, j}));
      TrialRecord rec;
      rec.subject_id = sid;
      rec.smaller_sooner =
          0.5 + 0.5 * static_cast<double>(
                          static_cast<std::size_t>(rng.uniform01() * 19.0));
      rec.larger_later = 10.0;
      rec.delay_days =
          kDelays[static_cast<std::size_t>(rng.uniform01() * 7.0)];
      const std::array<double, 2> psi = encode_features(rec);
      const double v = psi[0] * th0 + psi[1] * th1;
      rec.choice = sample_choice(v, b, rng);
      rec.response_time = sample_fpt(cache, v, rng) + scenario.ndt;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

}  // namespace rtpref
