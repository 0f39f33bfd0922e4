#include "rtpref/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "rtpref/drift.hpp"
#include "rtpref/errors.hpp"
#include "rtpref/rng.hpp"

namespace rtpref {

namespace {

// Reads one CSV record, honoring quoted fields (which may contain commas,
// doubled quotes and line breaks).  Returns false at end of input.
// `lines_consumed` counts the physical lines the record spanned.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                     std::size_t& lines_consumed) {
  fields.clear();
  lines_consumed = 0;
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  int c;
  while ((c = in.get()) != std::istream::traits_type::eof()) {
    saw_any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++lines_consumed;
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        break;
      case '\r':
        if (in.peek() == '\n') in.get();
        [[fallthrough]];
      case '\n':
        ++lines_consumed;
        fields.push_back(std::move(field));
        return true;
      default:
        field.push_back(static_cast<char>(c));
    }
  }
  if (!saw_any) return false;
  ++lines_consumed;  // final record without trailing newline
  fields.push_back(std::move(field));
  return true;
}

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool is_missing(const std::string& s) {
  if (s.empty()) return true;
  std::string low;
  for (char c : s) low.push_back(static_cast<char>(std::tolower(c)));
  return low == "na" || low == "nan" || low == "null";
}

// Parses a full decimal field (from_chars, plus the leading '+' it rejects).
bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (begin != end && *begin == '+') ++begin;
  const auto r = std::from_chars(begin, end, out);
  return r.ec == std::errc() && r.ptr == end && std::isfinite(out);
}

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name, bool required) {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (trimmed(header[j]) == name) return j;
  if (required)
    throw ParseError("header is missing the required column '" + name + "'");
  return static_cast<std::size_t>(-1);
}

// Quotes a field only when the dialect demands it.
void write_field(std::ostream& out, const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

}  // namespace

ParseReport parse_trials(std::istream& in, const ColumnMap& columns,
                         std::size_t max_row_errors) {
  std::vector<std::string> fields;
  std::size_t span = 0;
  if (!read_csv_record(in, fields, span))
    throw ParseError("input has no header row");

  const std::size_t c_subject = find_column(fields, columns.subject, true);
  const std::size_t c_ss = find_column(fields, columns.smaller_sooner, true);
  const std::size_t c_ll = find_column(fields, columns.larger_later, false);
  const std::size_t c_delay = find_column(fields, columns.delay_days, true);
  const std::size_t c_choice = find_column(fields, columns.choice, true);
  const std::size_t c_rt = find_column(fields, columns.response_time, true);
  const std::size_t width = fields.size();

  ParseReport report;
  std::size_t line = 1 + span;  // line on which the next record starts
  while (read_csv_record(in, fields, span)) {
    const std::size_t row_line = line;
    line += span;
    ++report.rows_total;

    const auto fail = [&](const std::string& why) {
      ++report.rows_errored;
      if (report.row_errors.size() < max_row_errors) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "line %zu: %s", row_line, why.c_str());
        report.row_errors.push_back(msg);
      }
    };

    if (fields.size() != width) {
      fail("expected " + std::to_string(width) + " fields, found " +
           std::to_string(fields.size()));
      continue;
    }
    for (auto& f : fields) f = trimmed(f);

    if (is_missing(fields[c_choice]) || is_missing(fields[c_rt])) {
      ++report.rows_dropped_missing;
      continue;
    }

    TrialRecord rec;
    rec.subject_id = fields[c_subject];
    if (rec.subject_id.empty()) {
      fail("empty subject id");
      continue;
    }
    if (!parse_number(fields[c_ss], rec.smaller_sooner)) {
      fail("unparseable smaller-sooner amount '" + fields[c_ss] + "'");
      continue;
    }
    if (c_ll == static_cast<std::size_t>(-1)) {
      rec.larger_later = columns.larger_later_value;
    } else if (!parse_number(fields[c_ll], rec.larger_later)) {
      fail("unparseable larger-later amount '" + fields[c_ll] + "'");
      continue;
    }
    if (!parse_number(fields[c_delay], rec.delay_days)) {
      fail("unparseable delay '" + fields[c_delay] + "'");
      continue;
    }

    double choice_value = 0.0;
    if (!parse_number(fields[c_choice], choice_value)) {
      fail("unparseable choice '" + fields[c_choice] + "'");
      continue;
    }
    if (columns.choice_encoding == ChoiceEncoding::Signs) {
      if (choice_value != 1.0 && choice_value != -1.0) {
        fail("choice must be +1 or -1, found '" + fields[c_choice] + "'");
        continue;
      }
      rec.choice = choice_value > 0 ? 1 : -1;
    } else {
      if (choice_value != 0.0 && choice_value != 1.0) {
        fail("choice must be 0 or 1, found '" + fields[c_choice] + "'");
        continue;
      }
      rec.choice = choice_value == 1.0 ? 1 : -1;
    }

    double rt = 0.0;
    if (!parse_number(fields[c_rt], rt)) {
      fail("unparseable response time '" + fields[c_rt] + "'");
      continue;
    }
    rt *= columns.time_scale;
    if (!(rt > 0.0)) {
      fail("response time must be positive, found '" + fields[c_rt] + "'");
      continue;
    }
    rec.response_time = rt;
    report.records.push_back(std::move(rec));
  }
  return report;
}

void write_trials(std::ostream& out, std::span<const TrialRecord> records) {
  out << "subject,smaller_sooner,larger_later,delay_days,choice,"
         "response_time\n";
  char buf[160];
  for (const TrialRecord& r : records) {
    write_field(out, r.subject_id);
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%d,%.17g",
                  r.smaller_sooner, r.larger_later, r.delay_days, r.choice,
                  r.response_time);
    out << buf << '\n';
  }
}

std::array<double, 2> encode_features(const TrialRecord& record) {
  return {(record.larger_later - record.smaller_sooner) / 9.5,
          -record.delay_days / 365.0};
}

Dataset trials_to_dataset(std::span<const TrialRecord> records) {
  Dataset ds;
  ds.dim = 2;
  ds.choice.reserve(records.size());
  ds.time.reserve(records.size());
  ds.features.reserve(2 * records.size());
  for (const TrialRecord& r : records) {
    ds.choice.push_back(static_cast<std::int8_t>(r.choice));
    ds.time.push_back(r.response_time);
    const auto psi = encode_features(r);
    ds.features.push_back(psi[0]);
    ds.features.push_back(psi[1]);
  }
  return ds;
}

SubjectTarget subject_target(std::span<const TrialRecord> records,
                             double l2_penalty, kernels::Exec exec) {
  if (records.empty())
    throw std::invalid_argument("subject_target needs at least one trial");

  std::map<std::string, std::vector<const TrialRecord*>> by_subject;
  for (const TrialRecord& r : records) by_subject[r.subject_id].push_back(&r);

  SubjectTarget target;
  target.theta_star.assign(2, 0.0);
  for (const auto& [subject, trials] : by_subject) {
    bool any_pos = false, any_neg = false;
    for (const TrialRecord* t : trials) (t->choice > 0 ? any_pos : any_neg) = true;
    if (!any_pos || !any_neg) {
      ++target.subjects_dropped;
      continue;
    }
    Dataset ds;
    ds.dim = 2;
    for (const TrialRecord* t : trials) {
      ds.choice.push_back(static_cast<std::int8_t>(t->choice));
      ds.time.push_back(t->response_time);
      const auto psi = encode_features(*t);
      ds.features.push_back(psi[0]);
      ds.features.push_back(psi[1]);
    }
    const EstimationReport fit = bt_logistic(ds, 1.0, l2_penalty, exec);
    target.theta_star[0] += fit.estimate[0];
    target.theta_star[1] += fit.estimate[1];
    ++target.subjects_used;
  }
  if (target.subjects_used == 0)
    throw std::runtime_error(
        "every subject has a single choice class; no target can be formed");
  target.theta_star[0] /= static_cast<double>(target.subjects_used);
  target.theta_star[1] /= static_cast<double>(target.subjects_used);
  return target;
}

Dataset subsample(const Dataset& data, std::size_t n, std::uint64_t seed) {
  data.check();
  if (data.size() == 0)
    throw std::invalid_argument("cannot subsample an empty dataset");
  if (n == 0) throw std::invalid_argument("subsample size must be positive");

  Dataset out;
  out.dim = data.dim;
  out.choice.reserve(n);
  out.time.reserve(n);
  if (!data.drift.empty()) out.drift.reserve(n);
  out.features.reserve(n * data.dim);
  RngStream rng(derive_key(seed, {4}));
  const double size = static_cast<double>(data.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(rng.uniform01() * size);
    out.choice.push_back(data.choice[i]);
    out.time.push_back(data.time[i]);
    if (!data.drift.empty()) out.drift.push_back(data.drift[i]);
    for (std::size_t k = 0; k < data.dim; ++k)
      out.features.push_back(data.features[i * data.dim + k]);
  }
  return out;
}

double cosine_similarity(std::span<const double> a,
                         std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument(
        "cosine similarity needs equal-length nonempty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::domain_error("cosine similarity is undefined for zero vectors");
  return dot / std::sqrt(na * nb);
}

}  // namespace rtpref
