#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rtpref/errors.hpp"
#include "rtpref/harness.hpp"

using namespace rtpref;
using kernels::Exec;

namespace {

std::string long_csv(const ExperimentResult& res) {
  std::ostringstream out;
  write_long_csv(out, res);
  return out.str();
}

std::string agg_csv(const ExperimentResult& res) {
  std::ostringstream out;
  write_aggregate_csv(out, res);
  return out.str();
}

std::size_t count_fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) +
         1;
}

// Lines of a CSV body, metadata comments skipped.
std::vector<std::string> body_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') lines.push_back(line);
  return lines;
}

const AggregateRow& find_agg(const ExperimentResult& res,
                             const std::string& estimator,
                             const std::string& prior, std::size_t n,
                             const std::string& metric) {
  for (const AggregateRow& a : res.aggregates)
    if (a.estimator == estimator && a.prior == prior && a.n == n &&
        a.metric == metric)
      return a;
  throw std::runtime_error("aggregate row not found: " + estimator + "/" +
                           prior + "/" + metric);
}

ExperimentConfig small_tabular() {
  ExperimentConfig c = default_config(ExperimentKind::Tabular);
  c.n_grid = {200, 400};
  c.reps = 2;
  c.seed = 7;
  return c;
}

std::string temp_path(const char* name) {
  return std::string("/tmp/rtpref_harness_") + name;
}

}  // namespace

TEST_CASE("experiment kind names round-trip") {
  for (ExperimentKind k :
       {ExperimentKind::Tabular, ExperimentKind::Linear,
        ExperimentKind::Ablation, ExperimentKind::Real})
    CHECK(experiment_kind_from_name(experiment_kind_name(k)) == k);
  CHECK_THROWS_AS(experiment_kind_from_name("spatial"), ConfigError);
}

TEST_CASE("per-kind defaults") {
  const ExperimentConfig t = default_config(ExperimentKind::Tabular);
  CHECK(t.priors.size() == 2);
  CHECK(t.priors[0].family == PriorFamily::Uniform);
  CHECK(t.priors[1].family == PriorFamily::BetaShifted);
  CHECK(t.priors[0].mean == 0.25);
  CHECK(t.reps == 20);
  CHECK(t.boundary == 1.25);
  CHECK(t.lambda_exponent == doctest::Approx(0.9));

  const ExperimentConfig l = default_config(ExperimentKind::Linear);
  CHECK(l.priors.size() == 4);
  CHECK(l.theta_star == std::vector<double>{0.25, -0.15, 0.10, -0.30});

  const ExperimentConfig r = default_config(ExperimentKind::Real);
  CHECK(r.n_grid == std::vector<std::size_t>{100, 250, 500, 1000, 2000, 5000});
  CHECK(r.l2_penalty == 0.1);
  CHECK(r.priors.empty());

  for (ExperimentKind k :
       {ExperimentKind::Tabular, ExperimentKind::Linear,
        ExperimentKind::Ablation})
    CHECK_NOTHROW(validate_config(default_config(k)));
  CHECK_NOTHROW(validate_config(r));
}

TEST_CASE("json overrides") {
  ExperimentConfig c = default_config(ExperimentKind::Tabular);

  SUBCASE("accepted keys land in the struct") {
    apply_json_overrides(c, R"({
      "experiment": "tabular",
      "priors": [{"family": "uniform", "mean": 0.1, "sigma": 0.2}],
      "boundary": 1.5,
      "ndt": 0.3,
      "n_grid": [100, 1000],
      "reps": 5,
      "seed": 99,
      "lambda_exponent": 1.1,
      "lambda_floor": 2.0,
      "truncation_terms": 64,
      "trim_exponent": 0.5,
      "out": "r.csv",
      "timings": true
    })");
    CHECK(c.priors.size() == 1);
    CHECK(c.priors[0].mean == 0.1);
    CHECK(c.boundary == 1.5);
    CHECK(c.ndt == 0.3);
    CHECK(c.n_grid == std::vector<std::size_t>{100, 1000});
    CHECK(c.reps == 5);
    CHECK(c.seed == 99);
    CHECK(c.lambda_exponent == 1.1);
    CHECK(c.truncation_terms == 64);
    CHECK(c.trim_exponent == 0.5);
    CHECK(c.out == "r.csv");
    CHECK(c.timings);
    CHECK_NOTHROW(validate_config(c));
  }

  SUBCASE("unknown keys are rejected by name") {
    CHECK_THROWS_WITH_AS(apply_json_overrides(c, R"({"repz": 3})"),
                         doctest::Contains("repz"), ConfigError);
  }
  SUBCASE("keys from another experiment kind are rejected") {
    CHECK_THROWS_WITH_AS(apply_json_overrides(c, R"({"theta_star": [1.0]})"),
                         doctest::Contains("does not apply"), ConfigError);
    CHECK_THROWS_WITH_AS(apply_json_overrides(c, R"({"ridge": 0.1})"),
                         doctest::Contains("tabular"), ConfigError);
  }
  SUBCASE("experiment entry must match the requested kind") {
    CHECK_THROWS_WITH_AS(apply_json_overrides(c, R"({"experiment": "linear"})"),
                         doctest::Contains("linear"), ConfigError);
    CHECK_NOTHROW(apply_json_overrides(c, R"({"experiment": "tabular"})"));
  }
  SUBCASE("malformed documents") {
    CHECK_THROWS_AS(apply_json_overrides(c, "{"), ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, "[1,2]"), ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, R"({"reps": "many"})"),
                    ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, R"({"reps": -3})"), ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, R"({"timings": 1})"), ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, R"({"n_grid": []})"), ConfigError);
    CHECK_THROWS_AS(apply_json_overrides(c, R"({"n_grid": [100, 0]})"),
                    ConfigError);
  }
  SUBCASE("prior objects are validated") {
    CHECK_THROWS_WITH_AS(
        apply_json_overrides(c, R"({"priors": [{"mean": 0.1, "sigma": 1}]})"),
        doctest::Contains("family"), ConfigError);
    CHECK_THROWS_WITH_AS(
        apply_json_overrides(c, R"({"priors": [{"family": "uniform"}]})"),
        doctest::Contains("mean"), ConfigError);
    CHECK_THROWS_WITH_AS(
        apply_json_overrides(
            c, R"({"priors": [{"family": "uniform", "mean": 0, "skew": 1}]})"),
        doctest::Contains("skew"), ConfigError);
    CHECK_THROWS_WITH_AS(
        apply_json_overrides(
            c, R"({"priors": [{"family": "cauchy", "mean": 0, "sigma": 1}]})"),
        doctest::Contains("cauchy"), ConfigError);
    // a point mass needs no scale
    CHECK_NOTHROW(apply_json_overrides(
        c, R"({"priors": [{"family": "point_mass", "mean": 0.25}]})"));
    CHECK(c.priors.size() == 1);
    CHECK(c.priors[0].family == PriorFamily::PointMass);
  }
  SUBCASE("linear priors carry a family only") {
    ExperimentConfig lin = default_config(ExperimentKind::Linear);
    CHECK_NOTHROW(
        apply_json_overrides(lin, R"({"priors": [{"family": "uniform"}]})"));
    CHECK_THROWS_WITH_AS(
        apply_json_overrides(
            lin, R"({"priors": [{"family": "uniform", "mean": 0.3}]})"),
        doctest::Contains("theta_star"), ConfigError);
  }
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_tabular();
  c.reps = 1;
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  c = small_tabular();
  c.n_grid = {400, 400};
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.n_grid = {400, 200};
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.n_grid = {1};
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  c = small_tabular();
  c.lambda_exponent = 2.5;  // sqrt(lambda) would outgrow log n
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  c = small_tabular();
  c.boundary = -1.0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  ExperimentConfig lin = default_config(ExperimentKind::Linear);
  lin.ndt = 0.2;
  CHECK_THROWS_AS(validate_config(lin), ConfigError);
  lin = default_config(ExperimentKind::Linear);
  lin.theta_star.clear();
  CHECK_THROWS_AS(validate_config(lin), ConfigError);

  ExperimentConfig re = default_config(ExperimentKind::Real);
  re.priors.push_back(PriorSpec{});
  CHECK_THROWS_AS(validate_config(re), ConfigError);

  // kind dispatch is checked at the entry points
  CHECK_THROWS_WITH_AS(run_linear(small_tabular()),
                       doctest::Contains("tabular"), ConfigError);
}

TEST_CASE("tabular smoke run") {
  const ExperimentConfig c = small_tabular();
  const ExperimentResult res = run_tabular(c);

  // one row per (prior, n, rep, estimator)
  REQUIRE(res.rows.size() == 2 * 2 * 2 * 3);
  REQUIRE(res.dim == 1);
  for (const ResultRow& row : res.rows) {
    CAPTURE(row.estimator);
    CHECK(row.error.empty());
    CHECK(std::isfinite(row.estimate[0]));
    CHECK(row.sq_error ==
          (row.estimate[0] - 0.25) * (row.estimate[0] - 0.25));
    CHECK(std::isfinite(row.boundary_hat));
    CHECK(row.seconds == 0.0);
    if (row.estimator == "plugin_mu_oracle" || row.estimator == "bt_tabular")
      CHECK(row.boundary_hat == 1.25);
    if (row.estimator == "plugin_mu_richardson")
      CHECK(row.boundary_hat != 1.25);
  }
  // cell-major layout: the three estimators of one replication are adjacent
  CHECK(res.rows[0].estimator == "bt_tabular");
  CHECK(res.rows[1].estimator == "plugin_mu_oracle");
  CHECK(res.rows[2].estimator == "plugin_mu_richardson");
  CHECK(res.rows[0].prior == "uniform");
  CHECK(res.rows.back().prior == "beta");

  // estimate_0 and sq_error summaries for every estimator group
  CHECK(res.aggregates.size() == 2 * 2 * 3 * 2);
  const AggregateRow& mse =
      find_agg(res, "plugin_mu_oracle", "uniform", 400, "sq_error");
  CHECK(mse.reps == 2);
  CHECK(mse.statistic == "mean");
  CHECK(std::isfinite(mse.value));
  CHECK(mse.ci_lo <= mse.value);
  CHECK(mse.ci_hi >= mse.value);

  const std::string text = long_csv(res);
  const std::vector<std::string> lines = body_lines(text);
  REQUIRE(lines.size() == res.rows.size() + 1);
  CHECK(lines[0] ==
        "experiment,estimator,prior,n,rep,estimate_0,sq_error,cossim,"
        "boundary_hat,ndt_hat,seconds");
  for (const std::string& line : lines) CHECK(count_fields(line) == 11);

  const std::string agg = agg_csv(res);
  CHECK(agg.find("# experiment: tabular") != std::string::npos);
  CHECK(agg.find("# boundary_star: 1.25") != std::string::npos);
  CHECK(body_lines(agg).size() == res.aggregates.size() + 1);
}

TEST_CASE("tabular runs are deterministic across modes and thread counts") {
  const ExperimentConfig c = small_tabular();
  const std::string parallel = long_csv(run_tabular(c, Exec::Parallel));
  const std::string serial = long_csv(run_tabular(c, Exec::Serial));
  CHECK(parallel == serial);

  const int before = kernels::max_threads();
  kernels::set_threads(3);
  const ExperimentResult rerun = run_tabular(c, Exec::Parallel);
  kernels::set_threads(before);
  CHECK(long_csv(rerun) == parallel);
  CHECK(agg_csv(rerun) == agg_csv(run_tabular(c)));

  // different seed, different draws
  ExperimentConfig other = c;
  other.seed = 8;
  CHECK(long_csv(run_tabular(other)) != parallel);
}

TEST_CASE("linear smoke run") {
  ExperimentConfig c = default_config(ExperimentKind::Linear);
  c.priors = {{PriorFamily::GaussianTruncated, 0.0, 1.0}};
  c.n_grid = {300};
  c.reps = 2;
  c.seed = 11;
  const ExperimentResult res = run_linear(c);

  REQUIRE(res.dim == 4);
  REQUIRE(res.rows.size() == 1 * 1 * 2 * 3);
  for (const ResultRow& row : res.rows) {
    CAPTURE(row.estimator);
    CHECK(row.error.empty());
    CHECK(row.prior == "gaussian");
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::isfinite(row.estimate[k]));
      s += (row.estimate[k] - c.theta_star[k]) *
           (row.estimate[k] - c.theta_star[k]);
    }
    CHECK(row.sq_error == s);
  }
  CHECK(res.rows[0].estimator == "bt_logistic");
  CHECK(res.rows[1].estimator == "ols_theta_oracle");
  CHECK(res.rows[2].estimator == "ols_theta_richardson");

  const std::vector<std::string> lines = body_lines(long_csv(res));
  CHECK(lines[0] ==
        "experiment,estimator,prior,n,rep,estimate_0,estimate_1,estimate_2,"
        "estimate_3,sq_error,cossim,boundary_hat,ndt_hat,seconds");
  // estimate_0..3 plus sq_error per estimator group
  CHECK(res.aggregates.size() == 1 * 1 * 3 * 5);
  CHECK(long_csv(run_linear(c, Exec::Serial)) == long_csv(res));
}

TEST_CASE("ablation smoke run") {
  ExperimentConfig c = default_config(ExperimentKind::Ablation);
  c.n_grid = {500, 900};
  c.reps = 3;
  c.seed = 3;
  const ExperimentResult res = run_boundary_ablation(c);

  REQUIRE(res.rows.size() == 2 * 2 * 3 * 2);
  for (const ResultRow& row : res.rows) {
    CHECK(row.error.empty());
    CHECK(std::isfinite(row.estimate[0]));
    CHECK(row.boundary_hat == row.estimate[0]);
    CHECK(row.sq_error == (row.estimate[0] - 1.25) * (row.estimate[0] - 1.25));
  }

  // per (prior, n): boundary and abs_error medians for both estimators plus
  // the dominance flag
  CHECK(res.aggregates.size() == 2 * 2 * 5);
  const AggregateRow& med =
      find_agg(res, "one_scale_boundary", "uniform", 500, "boundary");
  CHECK(med.statistic == "median");
  CHECK(med.ci_lo <= med.value);
  CHECK(med.value <= med.ci_hi);
  CHECK(med.spread == med.ci_hi - med.ci_lo);
  const AggregateRow& flag =
      find_agg(res, "richardson_boundary", "uniform", 500,
               "richardson_dominates");
  CHECK((flag.value == 0.0 || flag.value == 1.0));
  const std::string agg = agg_csv(res);
  CHECK(agg.find("# boundary_star: 1.25") != std::string::npos);
}

TEST_CASE("tabular run with a non-decision shift uses the three-scale arm") {
  ExperimentConfig c = default_config(ExperimentKind::Tabular);
  c.priors = {{PriorFamily::Uniform, 0.25, 0.5 / std::sqrt(3.0)}};
  c.n_grid = {3000};
  c.reps = 2;
  c.ndt = 0.25;
  c.seed = 21;
  const ExperimentResult res = run_tabular(c);

  REQUIRE(res.rows.size() == 6);
  bool saw_three_scale = false;
  for (const ResultRow& row : res.rows) {
    CHECK(row.error.empty());
    if (row.estimator == "plugin_mu_three_scale") {
      saw_three_scale = true;
      CHECK(std::isfinite(row.ndt_hat));
      CHECK(row.ndt_hat != 0.25);  // estimated, not copied
    }
    if (row.estimator == "plugin_mu_oracle") CHECK(row.ndt_hat == 0.25);
    if (row.estimator == "bt_tabular") CHECK(std::isnan(row.ndt_hat));
  }
  CHECK(saw_three_scale);
}

TEST_CASE("estimator failures are recorded per row, not fatal") {
  ExperimentConfig c = default_config(ExperimentKind::Tabular);
  // a huge homogeneous drift makes every choice +1, so the choice-only
  // estimator diverges while the weighted estimators keep working
  c.priors = {{PriorFamily::PointMass, 10.0, 0.0}};
  c.n_grid = {50};
  c.reps = 2;
  c.seed = 5;
  const ExperimentResult res = run_tabular(c);

  REQUIRE(res.rows.size() == 6);
  for (const ResultRow& row : res.rows) {
    if (row.estimator == "bt_tabular") {
      CHECK_FALSE(row.error.empty());
      CHECK(std::isnan(row.estimate[0]));
      CHECK(std::isnan(row.sq_error));
    } else {
      CHECK(row.error.empty());
      CHECK(std::isfinite(row.estimate[0]));
    }
  }
  const AggregateRow& bt =
      find_agg(res, "bt_tabular", "point_mass", 50, "sq_error");
  CHECK(bt.reps == 0);
  CHECK(std::isnan(bt.value));
  // nan fields serialize; the table shape is unchanged
  for (const std::string& line : body_lines(long_csv(res)))
    CHECK(count_fields(line) == 11);
}

TEST_CASE("reported confidence bands cover a well-specified mean") {
  // homogeneous scenario: every labeler shares v = 0.25, so the oracle
  // plug-in mean is unbiased and the band should cover 0.25 about 95% of
  // the time
  int covered = 0;
  const int meta_runs = 30;
  for (int m = 0; m < meta_runs; ++m) {
    ExperimentConfig c = default_config(ExperimentKind::Tabular);
    c.priors = {{PriorFamily::PointMass, 0.25, 0.0}};
    c.n_grid = {2000};
    c.reps = 10;
    c.seed = 1000 + static_cast<std::uint64_t>(m);
    const ExperimentResult res = run_tabular(c);
    const AggregateRow& est =
        find_agg(res, "plugin_mu_oracle", "point_mass", 2000, "estimate_0");
    if (est.ci_lo <= 0.25 && 0.25 <= est.ci_hi) ++covered;
  }
  CHECK(covered >= 27);
}

TEST_CASE("real pathway on simulated trials") {
  LinearScenario scenario;
  scenario.theta_star = {1.0, 0.6};
  scenario.sigma_theta = 0.3;
  scenario.prior_family = PriorFamily::GaussianTruncated;
  scenario.boundary = 1.25;
  const std::vector<TrialRecord> trials = simulate_trials(scenario, 10, 60, 42);
  REQUIRE(trials.size() == 600);
  const std::string path = temp_path("real_fixture.csv");
  {
    std::ofstream out(path);
    write_trials(out, trials);
  }

  ExperimentConfig c = default_config(ExperimentKind::Real);
  c.n_grid = {100, 200};
  c.reps = 2;
  c.seed = 9;
  const ExperimentResult res = run_real(c, path);

  REQUIRE(res.dim == 2);
  REQUIRE(res.rows.size() == 2 * 2 * 2);
  for (const ResultRow& row : res.rows) {
    CAPTURE(row.estimator);
    CHECK(row.error.empty());
    CHECK(row.cossim >= -1.0);
    CHECK(row.cossim <= 1.0);
    CHECK(std::isnan(row.sq_error));
    if (row.estimator == "bt_logistic") CHECK(row.boundary_hat == 1.0);
  }
  // both estimators point roughly at the subject target even at n = 100
  for (const AggregateRow& a : res.aggregates) {
    CHECK(a.metric == "cossim");
    CHECK(a.reps == 2);
    CHECK(a.value > 0.5);
    CHECK(a.ci_lo <= a.value);
    CHECK(a.value <= a.ci_hi);
  }
  CHECK(res.aggregates.size() == 2 * 2);

  bool saw_subjects = false;
  for (const auto& [key, value] : res.metadata)
    if (key == "subjects_used") {
      saw_subjects = true;
      CHECK(value == "10");
    }
  CHECK(saw_subjects);

  CHECK(long_csv(run_real(c, path)) == long_csv(res));
  CHECK(long_csv(run_real(c, path, Exec::Serial)) == long_csv(res));

  CHECK_THROWS_WITH_AS(run_real(c, temp_path("missing.csv")),
                       doctest::Contains("cannot open"), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("trial simulation validates its scenario") {
  LinearScenario scenario;
  scenario.theta_star = {1.0, 0.6, 0.2};
  CHECK_THROWS_AS(simulate_trials(scenario, 4, 4, 1), ConfigError);
  scenario.theta_star = {1.0, 0.6};
  CHECK_THROWS_AS(simulate_trials(scenario, 0, 4, 1), std::invalid_argument);

  // trials stay on the reward/delay grid and match the written schema
  const std::vector<TrialRecord> trials = simulate_trials(scenario, 3, 25, 17);
  for (const TrialRecord& t : trials) {
    CHECK(t.smaller_sooner >= 0.5);
    CHECK(t.smaller_sooner <= 9.5);
    CHECK(t.larger_later == 10.0);
    CHECK((t.choice == 1 || t.choice == -1));
    CHECK(t.response_time > 0.0);
  }
  CHECK(simulate_trials(scenario, 3, 25, 17)[10].response_time ==
        trials[10].response_time);
}

TEST_CASE("run_experiment dispatches on kind") {
  const ExperimentConfig c = small_tabular();
  CHECK(long_csv(run_experiment(c)) == long_csv(run_tabular(c)));
  ExperimentConfig re = default_config(ExperimentKind::Real);
  re.dataset_path = temp_path("nope.csv");
  CHECK_THROWS_AS(run_experiment(re), ConfigError);
}

TEST_CASE("result files land next to each other") {
  CHECK(aggregate_path_for("results.csv") == "results_summary.csv");
  CHECK(aggregate_path_for("a/b.c/run") == "a/b.c/run_summary");
  CHECK(aggregate_path_for("/x/tab.long.csv") == "/x/tab.long_summary.csv");

  const ExperimentConfig c = small_tabular();
  const ExperimentResult res = run_tabular(c);
  const std::string path = temp_path("out.csv");
  write_result_files(res, path);

  std::ifstream lf(path), af(temp_path("out_summary.csv"));
  REQUIRE(lf.good());
  REQUIRE(af.good());
  std::stringstream lbuf, abuf;
  lbuf << lf.rdbuf();
  abuf << af.rdbuf();
  CHECK(lbuf.str() == long_csv(res));
  CHECK(abuf.str() == agg_csv(res));
  CHECK_THROWS_AS(write_result_files(res, ""), ConfigError);
  std::remove(path.c_str());
  std::remove(temp_path("out_summary.csv").c_str());
}

TEST_CASE("timing column only fills on request") {
  ExperimentConfig c = small_tabular();
  c.n_grid = {5000};
  c.timings = true;
  const ExperimentResult res = run_tabular(c);
  bool any_positive = false;
  for (const ResultRow& row : res.rows) {
    CHECK(row.seconds >= 0.0);
    if (row.seconds > 0.0) any_positive = true;
  }
  CHECK(any_positive);
}
