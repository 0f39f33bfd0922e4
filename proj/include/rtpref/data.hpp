#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rtpref/dataset.hpp"
#include "rtpref/kernels.hpp"

namespace rtpref {

// Ingestion of intertemporal-choice trials: each row offers a smaller
// reward now against a larger reward after a delay, and records which side
// was taken plus the response time.  The pipeline turns such rows into the
// two-dimensional comparison features used by the preference estimators and
// produces the subject-level target direction they are scored against.

// One choice trial.  `choice` is +1 when the delayed (larger-later) option
// was taken.  Response time is in seconds.
struct TrialRecord {
  std::string subject_id;
  double smaller_sooner = 0.0;
  double larger_later = 10.0;
  double delay_days = 0.0;
  int choice = 1;
  double response_time = 0.0;
};

// How the +-1 choice is written in the file: literal +1/-1, or 1 for
// larger-later and 0 for smaller-sooner.
enum class ChoiceEncoding { Signs, ZeroOne };

// Header names of the input columns plus per-file conventions.  The
// larger-later column is optional; files without it use `larger_later_value`
// (the source data pays a fixed 10 dollars).  `time_scale` multiplies the
// parsed response times, e.g. 1e-3 for a milliseconds dataset.
struct ColumnMap {
  std::string subject = "subject";
  std::string smaller_sooner = "smaller_sooner";
  std::string larger_later = "larger_later";
  std::string delay_days = "delay_days";
  std::string choice = "choice";
  std::string response_time = "response_time";
  ChoiceEncoding choice_encoding = ChoiceEncoding::Signs;
  double larger_later_value = 10.0;
  double time_scale = 1.0;
};

struct ParseReport {
  std::vector<TrialRecord> records;
  std::size_t rows_total = 0;            // data rows, excluding the header
  std::size_t rows_dropped_missing = 0;  // empty/NA choice or response time
  std::size_t rows_errored = 0;          // malformed rows, skipped
  std::vector<std::string> row_errors;   // messages for the first few
};

// Reads RFC 4180 CSV (quoted fields may contain commas, doubled quotes and
// line breaks).  Rows with a missing choice or response time are dropped
// and counted; rows that fail to parse are skipped and reported with their
// line number, keeping at most `max_row_errors` messages.  A header lacking
// a required column raises ParseError.
ParseReport parse_trials(std::istream& in, const ColumnMap& columns = {},
                         std::size_t max_row_errors = 20);

// Writes records in the schema parse_trials reads (signs encoding,
// seconds).  Together they round-trip exactly.
void write_trials(std::ostream& out, std::span<const TrialRecord> records);

// The normalized comparison features of a trial:
//
//   psi = ( (larger_later - smaller_sooner) / 9.5,  -delay_days / 365 )
//
// First coordinate: reward advantage of waiting, scaled by the widest
// reward gap in the source grid.  Second: delay cost, scaled by the longest
// delay.
std::array<double, 2> encode_features(const TrialRecord& record);

// Choice/time/feature columns for the estimators, in record order.
Dataset trials_to_dataset(std::span<const TrialRecord> records);

struct SubjectTarget {
  std::vector<double> theta_star;  // 2-vector, averaged over subjects
  std::size_t subjects_used = 0;
  std::size_t subjects_dropped = 0;
};

// Per-subject choice-only logistic fits (calibration boundary 1: only the
// direction of the target matters downstream), averaged across subjects.
// Subjects whose trials all share one choice are dropped and counted.
// Throws when every subject is dropped.
SubjectTarget subject_target(std::span<const TrialRecord> records,
                             double l2_penalty = 0.1,
                             kernels::Exec exec = kernels::Exec::Parallel);

// n rows drawn with replacement, seeded; preserves all columns.
Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed);

// a.b / (|a| |b|).  Both vectors must be nonzero and of equal length.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace rtpref
