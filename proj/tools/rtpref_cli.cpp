// Command-line front end for the library: synthetic dataset generation,
// boundary and preference estimation on CSV files, the replication suites,
// trial ingestion, and sampling-cache management.
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rtpref/boundary.hpp"
#include "rtpref/data.hpp"
#include "rtpref/dataset.hpp"
#include "rtpref/drift.hpp"
#include "rtpref/errors.hpp"
#include "rtpref/harness.hpp"
#include "rtpref/kernels.hpp"
#include "rtpref/series.hpp"
#include "rtpref/simulator.hpp"

using namespace rtpref;

namespace {

std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void print_kv(const char* key, double value) {
  std::printf("%s %s\n", key, fmt_g(value).c_str());
}

// Thread-count precedence: --threads flag, then RTPREF_THREADS, then the
// OpenMP default.  Results are byte-identical either way; this only sizes
// the pool.
void apply_threads(int flag_value) {
  int n = flag_value;
  if (n <= 0) {
    if (const char* env = std::getenv("RTPREF_THREADS")) {
      char* end = nullptr;
      long v = std::strtol(env, &end, 10);
      if (end == env || *end != '\0' || v <= 0)
        throw ConfigError("RTPREF_THREADS must be a positive integer");
      n = static_cast<int>(v);
    }
  }
  if (n > 0) kernels::set_threads(n);
}

bool parse_field(const std::string& field, double& out) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    std::string field = line.substr(
        start, comma == std::string::npos ? comma : comma - start);
    const std::size_t lo = field.find_first_not_of(" \t\r");
    if (lo == std::string::npos) {
      field.clear();
    } else {
      const std::size_t hi = field.find_last_not_of(" \t\r");
      field = field.substr(lo, hi - lo + 1);
    }
    fields.push_back(field);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

// A plain numeric CSV, with or without a header row (the first row is a
// header exactly when some field of it fails to parse as a number).
struct NumericTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  bool has_header() const { return !header.empty(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return j;
    return std::nullopt;
  }
};

NumericTable read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file '" + path + "'");
  NumericTable table;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_line(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t j = 0; j < fields.size(); ++j)
      if (!parse_field(fields[j], row[j])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      if (table.header.empty() && table.rows.empty()) {
        table.header = fields;
        width = fields.size();
        continue;
      }
      throw ParseError("line " + std::to_string(line_no) +
                       ": non-numeric field in '" + path + "'");
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields, got " +
                       std::to_string(fields.size()));
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty())
    throw ParseError("'" + path + "' contains no data rows");
  return table;
}

std::vector<double> times_from(const NumericTable& table,
                               const std::string& path) {
  std::size_t col = 0;
  if (table.has_header()) {
    const std::optional<std::size_t> j = table.find("time");
    if (!j)
      throw ParseError("'" + path + "' has a header but no 'time' column");
    col = *j;
  }
  std::vector<double> times;
  times.reserve(table.rows.size());
  for (const std::vector<double>& row : table.rows) times.push_back(row[col]);
  return times;
}

// Choice/time (and optionally psi_*) columns.  Headerless files are read
// positionally: choice, time, then features.
Dataset dataset_from(const NumericTable& table, const std::string& path,
                     bool need_features) {
  std::size_t choice_col = 0, time_col = 1;
  std::vector<std::size_t> psi_cols;
  if (table.has_header()) {
    const std::optional<std::size_t> zc = table.find("choice");
    const std::optional<std::size_t> tc = table.find("time");
    if (!zc || !tc)
      throw ParseError("'" + path + "' needs 'choice' and 'time' columns");
    choice_col = *zc;
    time_col = *tc;
    for (std::size_t d = 0;; ++d) {
      const std::optional<std::size_t> j =
          table.find("psi_" + std::to_string(d));
      if (!j) break;
      psi_cols.push_back(*j);
    }
  } else {
    if (table.rows[0].size() < 2)
      throw ParseError("'" + path + "' needs at least choice and time columns");
    for (std::size_t j = 2; j < table.rows[0].size(); ++j) psi_cols.push_back(j);
  }
  if (need_features && psi_cols.empty())
    throw ParseError("'" + path + "' has no feature columns (psi_0, psi_1, ...)");

  Dataset data;
  data.dim = psi_cols.size();
  data.choice.reserve(table.rows.size());
  data.time.reserve(table.rows.size());
  data.features.reserve(table.rows.size() * data.dim);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::vector<double>& row = table.rows[i];
    const double z = row[choice_col];
    if (z != 1.0 && z != -1.0)
      throw ParseError("row " + std::to_string(i + 1) +
                       ": choice must be +1 or -1");
    data.choice.push_back(static_cast<std::int8_t>(z));
    data.time.push_back(row[time_col]);
    for (std::size_t j : psi_cols) data.features.push_back(row[j]);
  }
  data.check();
  return data;
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "choice,time,drift";
  for (std::size_t k = 0; k < data.dim; ++k) out << ",psi_" << k;
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << int(data.choice[i]) << ',' << fmt_g(data.time[i]) << ','
        << fmt_g(data.drift[i]);
    for (double x : data.psi(i)) out << ',' << fmt_g(x);
    out << "\n";
  }
}

// The harness convention: scales grow as (ln n)^0.9, never below 1.
constexpr double kLambdaExponent = 0.9;

struct ScheduleOpts {
  double exponent = kLambdaExponent;
  double floor = 1.0;

  LambdaSchedule schedule() const { return {exponent, floor}; }
};

void add_schedule_options(CLI::App* sub, ScheduleOpts& opts) {
  sub->add_option("--lambda-exponent", opts.exponent,
                  "growth exponent of the transform scale (ln n)^e");
  sub->add_option("--lambda-floor", opts.floor, "minimum transform scale");
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string prior;
  double mean = 0.25;
  double sigma = 0.5 / std::sqrt(3.0);
  double boundary = 1.25;
  double ndt = 0.0;
  std::size_t n = 10000;
  std::uint64_t seed = 1;
  std::string out;
  bool linear = false;
  std::vector<double> theta = {0.25, -0.15, 0.10, -0.30};
  double sigma_theta = 0.5;
  int threads = 0;
};

void run_simulate(const SimulateOpts& o) {
  apply_threads(o.threads);
  Dataset data;
  if (o.linear) {
    LinearScenario scenario;
    scenario.theta_star = o.theta;
    scenario.sigma_theta = o.sigma_theta;
    if (!o.prior.empty())
      scenario.prior_family = prior_family_from_name(o.prior);
    scenario.boundary = o.boundary;
    scenario.ndt = o.ndt;
    data = sample_linear_dataset(scenario, o.n, o.seed);
  } else {
    const PriorSpec prior{
        o.prior.empty() ? PriorFamily::Uniform : prior_family_from_name(o.prior),
        o.mean, o.sigma};
    data = sample_tabular_dataset(prior, Boundary(o.boundary), o.n, o.ndt,
                                  o.seed);
  }
  if (o.out.empty()) {
    write_dataset_csv(std::cout, data);
  } else {
    std::ofstream out(o.out);
    if (!out) throw ConfigError("cannot open output file '" + o.out + "'");
    write_dataset_csv(out, data);
    std::printf("wrote %s (%zu rows)\n", o.out.c_str(), data.size());
  }
}

// ---------------------------------------------------- boundary estimation

struct EstBoundaryOpts {
  std::string in;
  std::string method = "richardson";
  ScheduleOpts schedule;
  int threads = 0;
};

void run_estimate_boundary(const EstBoundaryOpts& o) {
  apply_threads(o.threads);
  const std::vector<double> times = times_from(read_numeric_csv(o.in), o.in);
  BoundaryEstimate est;
  if (o.method == "one_scale")
    est = one_scale_boundary(times, o.schedule.schedule());
  else if (o.method == "richardson")
    est = richardson_boundary(times, o.schedule.schedule());
  else
    est = three_scale_ndt(times, o.schedule.schedule());
  print_kv("boundary", est.boundary);
  if (est.ndt) print_kv("ndt", *est.ndt);
  print_kv("lambda", est.lambda_used);
  std::printf("n %zu\n", est.n);
  for (const std::string& w : est.warnings)
    std::fprintf(stderr, "rtpref: %s\n", w.c_str());
}

// ------------------------------------------------------- drift estimation

struct EstDriftOpts {
  std::string in;
  std::optional<double> boundary;
  bool three_scale = false;
  int terms = 100;
  double trim_exponent = 1.0;
  ScheduleOpts schedule;
  int threads = 0;
};

void run_estimate_drift(const EstDriftOpts& o) {
  apply_threads(o.threads);
  const Dataset data = dataset_from(read_numeric_csv(o.in), o.in, false);
  const Truncation trunc(o.terms);
  EstimationReport report;
  if (o.three_scale) {
    const BoundaryEstimate b = three_scale_ndt(data.time, o.schedule.schedule());
    const double eps = trimming_epsilon(data.size(), o.trim_exponent);
    report = plugin_mu_ndt(data, b, eps, trunc);
  } else if (o.boundary) {
    report = plugin_mu(data, *o.boundary, trunc);
  } else {
    report = plugin_mu(data, richardson_boundary(data.time, o.schedule.schedule()),
                       trunc);
  }
  print_kv("mu", report.scalar());
  print_kv("boundary", report.boundary_used);
  if (report.ndt_used) print_kv("ndt", *report.ndt_used);
  std::printf("n %zu\n", report.n_used);
  if (report.n_trimmed > 0) std::printf("trimmed %zu\n", report.n_trimmed);
  for (const std::string& w : report.warnings)
    std::fprintf(stderr, "rtpref: %s\n", w.c_str());
}

// --------------------------------------------------- preference estimation

struct EstThetaOpts {
  std::string in;
  std::string estimator = "ols";
  std::optional<double> boundary;
  double ridge = 0.0;
  double calibration = 1.0;
  double l2 = 0.0;
  int terms = 100;
  ScheduleOpts schedule;
  int threads = 0;
};

void run_estimate_theta(const EstThetaOpts& o) {
  apply_threads(o.threads);
  const Dataset data = dataset_from(read_numeric_csv(o.in), o.in, true);
  const Truncation trunc(o.terms);
  EstimationReport report;
  if (o.estimator == "bt") {
    report = bt_logistic(data, o.calibration, o.l2);
  } else if (o.boundary) {
    report = ols_theta(data, *o.boundary, trunc, o.ridge);
  } else {
    report = ols_theta(data, richardson_boundary(data.time, o.schedule.schedule()),
                       trunc, o.ridge);
  }
  for (std::size_t k = 0; k < report.estimate.size(); ++k)
    print_kv(("theta_" + std::to_string(k)).c_str(), report.estimate[k]);
  print_kv("boundary", report.boundary_used);
  std::printf("n %zu\n", report.n_used);
  for (const std::string& w : report.warnings)
    std::fprintf(stderr, "rtpref: %s\n", w.c_str());
}

// -------------------------------------------------------------- experiment

struct ExperimentOpts {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::string out;
  std::vector<std::string> prior_filter;
  std::string data;
  bool timings = false;
  int threads = 0;
};

void run_experiment_cmd(ExperimentKind kind, const ExperimentOpts& o) {
  ExperimentConfig config = default_config(kind);
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError("cannot open config file '" + o.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    apply_json_overrides(config, buf.str());
  }
  if (o.seed) config.seed = *o.seed;
  if (o.reps) config.reps = *o.reps;
  if (!o.out.empty()) config.out = o.out;
  if (!o.data.empty()) config.dataset_path = o.data;
  if (o.timings) config.timings = true;
  if (!o.prior_filter.empty()) {
    std::vector<PriorSpec> kept;
    for (const std::string& name : o.prior_filter) {
      const PriorFamily family = prior_family_from_name(name);
      bool matched = false;
      for (const PriorSpec& p : config.priors)
        if (p.family == family) {
          kept.push_back(p);
          matched = true;
        }
      if (!matched)
        throw ConfigError("no configured prior with family '" + name +
                          "'; set priors in the config file");
    }
    config.priors = std::move(kept);
  }
  if (kind == ExperimentKind::Real && config.dataset_path.empty())
    throw ConfigError("the real experiment needs --data or a dataset_path entry");
  apply_threads(o.threads);
  validate_config(config);

  const ExperimentResult result = run_experiment(config);
  const std::string out_path =
      config.out.empty()
          ? std::string(experiment_kind_name(kind)) + "_results.csv"
          : config.out;
  write_result_files(result, out_path);
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), result.rows.size());
  std::printf("wrote %s (%zu rows)\n", aggregate_path_for(out_path).c_str(),
              result.aggregates.size());
}

// ------------------------------------------------------------------ ingest

struct IngestOpts {
  std::string in;
  std::string out;
  ColumnMap columns;
  std::string encoding = "signs";
  std::size_t max_errors = 20;
};

void run_ingest(const IngestOpts& o) {
  std::ifstream in(o.in);
  if (!in) throw ConfigError("cannot open input file '" + o.in + "'");
  ColumnMap columns = o.columns;
  columns.choice_encoding = o.encoding == "zero_one" ? ChoiceEncoding::ZeroOne
                                                     : ChoiceEncoding::Signs;
  const ParseReport report = parse_trials(in, columns, o.max_errors);
  std::printf("rows %zu\n", report.rows_total);
  std::printf("kept %zu\n", report.records.size());
  std::printf("dropped_missing %zu\n", report.rows_dropped_missing);
  std::printf("errored %zu\n", report.rows_errored);
  for (const std::string& msg : report.row_errors)
    std::fprintf(stderr, "rtpref: %s\n", msg.c_str());
  if (report.records.empty())
    throw ParseError("'" + o.in + "' has no usable rows");
  if (!o.out.empty()) {
    std::ofstream out(o.out);
    if (!out) throw ConfigError("cannot open output file '" + o.out + "'");
    write_trials(out, report.records);
    std::printf("wrote %s\n", o.out.c_str());
  }
}

// ------------------------------------------------------------------- cache

struct CacheBuildOpts {
  double boundary = 1.25;
  double v_lo = -1.5;
  double v_hi = 1.5;
  std::size_t rows = 500;
  double t_max = 20.0;
  int terms = 100;
  std::string out;
  int threads = 0;
};

void run_cache_build(const CacheBuildOpts& o) {
  apply_threads(o.threads);
  const FptGridCache cache = build_cache(Boundary(o.boundary),
                                         Interval{o.v_lo, o.v_hi}, o.rows,
                                         o.t_max, Truncation(o.terms));
  save_cache(cache, o.out);
  std::printf("wrote %s (%zu x %zu table)\n", o.out.c_str(), cache.n_v(),
              cache.n_t());
}

void run_cache_inspect(const std::string& path) {
  const FptGridCache cache = load_cache(path);
  print_kv("boundary", cache.boundary);
  print_kv("v_lo", cache.drift_grid.front());
  print_kv("v_hi", cache.drift_grid.back());
  std::printf("rows %zu\n", cache.n_v());
  std::printf("time_points %zu\n", cache.n_t());
  print_kv("t_max", cache.t_max);
}

void add_threads_option(CLI::App* sub, int& threads) {
  sub->add_option("--threads", threads,
                  "worker threads (default: RTPREF_THREADS, then all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"preference estimation from choices and response times"};
  app.require_subcommand(1);

  // simulate
  SimulateOpts sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a synthetic choice/response-time CSV");
  simulate->add_option("--prior", sim.prior,
                       "latent-value family (uniform, beta, gaussian, "
                       "laplace, point_mass)");
  simulate->add_option("--mean", sim.mean, "prior mean (tabular)");
  simulate->add_option("--sigma", sim.sigma, "prior scale (tabular)");
  simulate->add_option("--boundary", sim.boundary, "decision barrier")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--ndt", sim.ndt, "additive non-decision time")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--n", sim.n, "observations")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--out", sim.out, "output path (default: stdout)");
  simulate->add_flag("--linear", sim.linear,
                     "feature scenario: psi ~ U[-1,1]^d, v = psi . theta");
  simulate->add_option("--theta", sim.theta, "mean preference vector (linear)");
  simulate->add_option("--sigma-theta", sim.sigma_theta,
                       "per-coordinate preference spread (linear)")
      ->check(CLI::PositiveNumber);
  add_threads_option(simulate, sim.threads);
  simulate->callback([&] { run_simulate(sim); });

  // estimate-boundary
  EstBoundaryOpts est_b;
  CLI::App* estb = app.add_subcommand(
      "estimate-boundary", "recover the decision barrier from response times");
  estb->add_option("--in", est_b.in, "CSV of times (or with a 'time' column)")
      ->required();
  estb->add_option("--method", est_b.method, "one_scale, richardson, three_scale")
      ->check(CLI::IsMember({"one_scale", "richardson", "three_scale"}));
  add_schedule_options(estb, est_b.schedule);
  add_threads_option(estb, est_b.threads);
  estb->callback([&] { run_estimate_boundary(est_b); });

  // estimate-drift
  EstDriftOpts est_d;
  CLI::App* estd = app.add_subcommand(
      "estimate-drift", "estimate the mean preference of a tabular dataset");
  estd->add_option("--in", est_d.in, "CSV with choice and time columns")
      ->required();
  estd->add_option("--boundary", est_d.boundary,
                   "use this barrier instead of estimating one");
  estd->add_flag("--three-scale", est_d.three_scale,
                 "estimate barrier and non-decision shift jointly");
  estd->add_option("--terms", est_d.terms, "weight series truncation")
      ->check(CLI::PositiveNumber);
  estd->add_option("--trim-exponent", est_d.trim_exponent,
                   "shifted-time trimming decay (ln n)^-e");
  add_schedule_options(estd, est_d.schedule);
  add_threads_option(estd, est_d.threads);
  estd->callback([&] { run_estimate_drift(est_d); });

  // estimate-theta
  EstThetaOpts est_t;
  CLI::App* estt = app.add_subcommand(
      "estimate-theta", "estimate the mean preference vector from features");
  estt->add_option("--in", est_t.in,
                   "CSV with choice, time and psi_* columns")
      ->required();
  estt->add_option("--estimator", est_t.estimator,
                   "ols (response-time weighted) or bt (choice-only)")
      ->check(CLI::IsMember({"ols", "bt"}));
  estt->add_option("--boundary", est_t.boundary,
                   "use this barrier instead of estimating one");
  estt->add_option("--ridge", est_t.ridge, "ridge added to the Gram matrix")
      ->check(CLI::NonNegativeNumber);
  estt->add_option("--calibration", est_t.calibration,
                   "barrier the choice-only fit assumes")
      ->check(CLI::PositiveNumber);
  estt->add_option("--l2", est_t.l2, "choice-only fit penalty")
      ->check(CLI::NonNegativeNumber);
  estt->add_option("--terms", est_t.terms, "weight series truncation")
      ->check(CLI::PositiveNumber);
  add_schedule_options(estt, est_t.schedule);
  add_threads_option(estt, est_t.threads);
  estt->callback([&] { run_estimate_theta(est_t); });

  // experiment <kind>
  CLI::App* experiment = app.add_subcommand(
      "experiment", "run a replication suite and write result CSVs");
  experiment->require_subcommand(1);
  ExperimentOpts exp_opts[4];
  const std::pair<const char*, ExperimentKind> kinds[] = {
      {"tabular", ExperimentKind::Tabular},
      {"linear", ExperimentKind::Linear},
      {"ablation", ExperimentKind::Ablation},
      {"real", ExperimentKind::Real},
  };
  const char* kind_help[] = {
      "scalar preference recovery against the choice-only baseline",
      "preference vector recovery from features",
      "one-scale versus differenced barrier estimation",
      "subsample scaling on an ingested trial CSV",
  };
  for (int i = 0; i < 4; ++i) {
    ExperimentOpts& o = exp_opts[i];
    CLI::App* sub = experiment->add_subcommand(kinds[i].first, kind_help[i]);
    sub->add_option("--config", o.config_path,
                    "JSON config applied over the defaults")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--reps", o.reps, "replications per cell");
    sub->add_option("--out", o.out, "result CSV path");
    sub->add_option("--prior", o.prior_filter,
                    "keep only configured priors of this family (repeatable)");
    if (kinds[i].second == ExperimentKind::Real)
      sub->add_option("--data", o.data, "trial CSV to subsample");
    sub->add_flag("--timings", o.timings, "fill the per-row seconds column");
    add_threads_option(sub, o.threads);
    const ExperimentKind kind = kinds[i].second;
    sub->callback([&o, kind] { run_experiment_cmd(kind, o); });
  }

  // ingest
  IngestOpts ing;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "normalize an intertemporal-choice trial CSV");
  ingest->add_option("--in", ing.in, "raw trial CSV")->required();
  ingest->add_option("--out", ing.out, "normalized output path");
  ingest->add_option("--subject-col", ing.columns.subject, "subject id header");
  ingest->add_option("--ss-col", ing.columns.smaller_sooner,
                     "immediate reward header");
  ingest->add_option("--ll-col", ing.columns.larger_later,
                     "delayed reward header (optional column)");
  ingest->add_option("--delay-col", ing.columns.delay_days, "delay header");
  ingest->add_option("--choice-col", ing.columns.choice, "choice header");
  ingest->add_option("--rt-col", ing.columns.response_time,
                     "response-time header");
  ingest->add_option("--choice-encoding", ing.encoding,
                     "signs (+1/-1) or zero_one (1 = delayed)")
      ->check(CLI::IsMember({"signs", "zero_one"}));
  ingest->add_option("--ll-value", ing.columns.larger_later_value,
                     "delayed reward when the column is absent");
  ingest->add_option("--time-scale", ing.columns.time_scale,
                     "multiplier onto parsed response times")
      ->check(CLI::PositiveNumber);
  ingest->add_option("--max-errors", ing.max_errors,
                     "row error messages to keep");
  ingest->callback([&] { run_ingest(ing); });

  // cache build | inspect
  CLI::App* cache = app.add_subcommand(
      "cache", "build or inspect response-time sampling tables");
  cache->require_subcommand(1);
  CacheBuildOpts cb;
  CLI::App* cache_build = cache->add_subcommand(
      "build", "tabulate the crossing density and save it");
  cache_build->add_option("--boundary", cb.boundary, "decision barrier")
      ->required()
      ->check(CLI::PositiveNumber);
  cache_build->add_option("--v-lo", cb.v_lo, "drift grid lower end");
  cache_build->add_option("--v-hi", cb.v_hi, "drift grid upper end");
  cache_build->add_option("--rows", cb.rows, "drift grid points")
      ->check(CLI::PositiveNumber);
  cache_build->add_option("--t-max", cb.t_max, "time horizon")
      ->check(CLI::PositiveNumber);
  cache_build->add_option("--terms", cb.terms, "density series truncation")
      ->check(CLI::PositiveNumber);
  cache_build->add_option("--out", cb.out, "cache file path")->required();
  add_threads_option(cache_build, cb.threads);
  cache_build->callback([&] { run_cache_build(cb); });

  std::string cache_in;
  CLI::App* cache_inspect =
      cache->add_subcommand("inspect", "print a cache file's header");
  cache_inspect->add_option("--in", cache_in, "cache file path")->required();
  cache_inspect->callback([&] { run_cache_inspect(cache_in); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "rtpref: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rtpref: %s\n", e.what());
    return 1;
  }
  return 0;
}
