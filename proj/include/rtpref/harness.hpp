#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "rtpref/boundary.hpp"
#include "rtpref/data.hpp"
#include "rtpref/kernels.hpp"
#include "rtpref/series.hpp"
#include "rtpref/simulator.hpp"

namespace rtpref {

// Replicated Monte-Carlo experiments tying the simulator, the boundary
// estimators, and the preference estimators together.  Four experiment kinds
// are supported:
//
//   tabular   scalar mean-preference recovery: bt_tabular against plugin_mu
//             with the oracle and with the estimated boundary
//   linear    mean preference vector recovery: bt_logistic against ols_theta
//             with the oracle and with the estimated boundary
//   ablation  one-scale versus Richardson boundary recovery (median + IQR)
//   real      cosine similarity of both estimators to a per-subject target
//             on an ingested trial file, over subsample sizes
//
// Each (prior, n, replication) cell simulates one dataset and runs every
// estimator on it.  Replications are independent tasks in a work pool; every
// cell derives its random streams from (seed, experiment, prior, n, rep), so
// results are byte-identical for any thread count and execution mode.

enum class ExperimentKind { Tabular, Linear, Ablation, Real };

ExperimentKind experiment_kind_from_name(const std::string& name);
const char* experiment_kind_name(ExperimentKind kind);

// Full description of one experiment.  `priors` carries the latent-value
// distributions for tabular/ablation runs; for linear runs only the family
// member is used (coordinate k of a labeler's preference is drawn from that
// family centered at theta_star[k] with scale sigma_theta).  The real
// experiment takes no priors; its target comes from the dataset itself.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Tabular;
  std::vector<PriorSpec> priors;
  std::vector<double> theta_star;
  double sigma_theta = 0.5;
  double boundary = 1.25;
  double ndt = 0.0;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 20;
  std::uint64_t seed = 1;
  double lambda_exponent = 0.9;
  double lambda_floor = 1.0;
  int truncation_terms = 100;
  double ridge = 0.0;
  double l2_penalty = 0.0;
  double trim_exponent = 1.0;
  std::string dataset_path;
  std::string out;
  bool timings = false;

  LambdaSchedule lambda_schedule() const;
  Truncation truncation() const;
};

// Per-kind defaults: two value priors (uniform, shifted beta) around 0.25
// for tabular/ablation, four prior families around a fixed 4-vector for
// linear, the {100..5000} subsample grid for real.
ExperimentConfig default_config(ExperimentKind kind);

// Applies a JSON object onto an existing config.  Keys mirror the struct
// fields; unknown keys, keys that do not apply to the config's experiment
// kind, type mismatches, and an `experiment` entry naming a different kind
// are all ConfigError.
void apply_json_overrides(ExperimentConfig& config, const std::string& json_text);

// Semantic checks (R >= 2, strictly increasing n grid, valid priors, schedule
// parameters inside their domains, ...).  Called by every run_* entry point.
void validate_config(const ExperimentConfig& config);

// One estimator on one simulated (or subsampled) dataset.  When the
// estimator throws, `error` carries the message and the numeric fields are
// NaN; the row still occupies its slot so the row-count contract holds.
// `boundary_hat` is the boundary the estimator plugged in (the estimate when
// one was used, the oracle or calibration value otherwise).
struct ResultRow {
  std::string experiment;
  std::string estimator;
  std::string prior;
  std::size_t n = 0;
  std::size_t rep = 0;
  std::vector<double> estimate;
  double sq_error = 0.0;
  double cossim = 0.0;
  double boundary_hat = 0.0;
  double ndt_hat = 0.0;
  double seconds = 0.0;
  std::string error;
};

// One summary statistic over the replications of an (estimator, prior, n)
// group.  `statistic` is "mean" (spread = sample std, CI = value +-
// 1.96 spread / sqrt(reps)), "median" (spread = IQR, CI = the quartiles),
// or "indicator" (0/1 flag, no spread).  The real experiment's cossim rows
// carry a bootstrap percentile band instead of the normal-theory CI.
struct AggregateRow {
  std::string experiment;
  std::string estimator;
  std::string prior;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::string metric;
  std::string statistic;
  double value = 0.0;
  double spread = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::size_t dim = 1;  // width of the estimate columns
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
};

ExperimentResult run_tabular(const ExperimentConfig& config,
                             kernels::Exec exec = kernels::Exec::Parallel);
ExperimentResult run_linear(const ExperimentConfig& config,
                            kernels::Exec exec = kernels::Exec::Parallel);
ExperimentResult run_boundary_ablation(const ExperimentConfig& config,
                                       kernels::Exec exec = kernels::Exec::Parallel);
ExperimentResult run_real(const ExperimentConfig& config,
                          const std::string& csv_path,
                          kernels::Exec exec = kernels::Exec::Parallel);

// Dispatch on config.kind; the real experiment reads config.dataset_path.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                kernels::Exec exec = kernels::Exec::Parallel);

// Long form: one row per (estimator, prior, n, replication), columns
//   experiment,estimator,prior,n,rep,estimate_0..estimate_{d-1},
//   sq_error,cossim,boundary_hat,ndt_hat,seconds
// Inapplicable numeric fields are written as nan; seconds is 0 unless the
// config enables timings (wall clock would break byte-for-byte reruns).
void write_long_csv(std::ostream& out, const ExperimentResult& result);

// Aggregate form: '#'-prefixed metadata lines, then columns
//   experiment,estimator,prior,n,reps,metric,statistic,value,spread,ci_lo,ci_hi
void write_aggregate_csv(std::ostream& out, const ExperimentResult& result);

// "dir/name.csv" -> "dir/name_summary.csv" (no extension: appends "_summary").
std::string aggregate_path_for(const std::string& out_path);

// Writes the long CSV to `out_path` and the aggregate CSV next to it.
void write_result_files(const ExperimentResult& result,
                        const std::string& out_path);

// Synthetic trial file in the ingestion schema: `subjects` labelers with
// preferences drawn around scenario.theta_star (which must have length 2),
// each answering `trials_per_subject` choices on the standard reward/delay
// grid, with DDM choices and response times.  Feeding the written file back
// through run_real exercises the full real-data pathway against a known
// ground truth.
std::vector<TrialRecord> simulate_trials(const LinearScenario& scenario,
                                         std::size_t subjects,
                                         std::size_t trials_per_subject,
                                         std::uint64_t seed,
                                         kernels::Exec exec = kernels::Exec::Parallel);

}  // namespace rtpref
