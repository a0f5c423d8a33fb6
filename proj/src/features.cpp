#include "gridfail/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gridfail {

const std::vector<std::string>& descriptor_names() {
  static const std::vector<std::string> names = {
      "ts_overflow",   "n_lines_dis",   "n_sub_changed", "rho_max",
      "rho_mean",      "load_p_max",    "load_p_mean",   "gen_p_max",
      "gen_p_mean",    "line_ex_p_max", "line_ex_p_mean", "line_or_p_max",
      "line_or_p_mean"};
  return names;
}

std::vector<double> descriptor_values(const FailureFeatureRow& r) {
  return {r.ts_overflow, r.n_lines_dis, r.n_sub_changed, r.rho_max,
          r.rho_mean,    r.load_p_max,  r.load_p_mean,   r.gen_p_max,
          r.gen_p_mean,  r.line_ex_p_max, r.line_ex_p_mean, r.line_or_p_max,
          r.line_or_p_mean};
}

std::pair<double, double> relative_change_stats(const std::vector<double>& values_t0,
                                                const std::vector<double>& values_tn1) {
  if (values_t0.size() != values_tn1.size())
    throw std::invalid_argument("relative_change_stats: vectors differ in length");
  double max_ratio = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values_t0.size(); ++i) {
    if (values_t0[i] == 0.0) continue;  // zero-baseline elements are excluded
    const double ratio = values_tn1[i] / values_t0[i] - 1.0;
    max_ratio = std::max(max_ratio, ratio);
    sum += ratio;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("relative_change_stats: no valid elements");
  return {max_ratio, sum / static_cast<double>(n)};
}

FailureFeatureRow extract_failure_row(const Episode& e, const GridSchema& s,
                                      std::optional<int> tracked_line,
                                      std::optional<int> tracked_gen) {
  if (e.termination.outcome != TerminationInfo::Outcome::kFailed)
    throw std::invalid_argument("extract_failure_row: episode did not fail");
  if (e.observations.empty())
    throw std::invalid_argument("extract_failure_row: episode has no observations");
  const ValidationReport vr = validate_episode(e, s);
  if (!vr.ok())
    throw std::invalid_argument("extract_failure_row: schema mismatch: " +
                                vr.violations[0].message);

  const Observation& first = e.observations.front();
  const Observation& last = e.observations.back();
  FailureFeatureRow r;

  for (int l = 0; l < s.n_lines; ++l) r.ts_overflow += last.ts_overflow_line[l];
  for (int l = 0; l < s.n_lines; ++l)
    if (!last.line_status[l]) r.n_lines_dis += 1;
  for (int sub = 0; sub < s.n_substations; ++sub)
    if (last.sub_topology[sub] != first.sub_topology[sub]) r.n_sub_changed += 1;

  // Loading statistics cover connected lines only; a fully disconnected grid
  // reports zeros.
  double rho_sum = 0.0;
  int n_connected = 0;
  for (int l = 0; l < s.n_lines; ++l) {
    if (!last.line_status[l]) continue;
    r.rho_max = std::max(r.rho_max, last.rho[l]);
    rho_sum += last.rho[l];
    ++n_connected;
  }
  r.rho_mean = n_connected > 0 ? rho_sum / n_connected : 0.0;

  std::tie(r.load_p_max, r.load_p_mean) = relative_change_stats(first.load_p, last.load_p);
  std::tie(r.gen_p_max, r.gen_p_mean) = relative_change_stats(first.gen_p, last.gen_p);
  std::tie(r.line_ex_p_max, r.line_ex_p_mean) = relative_change_stats(first.p_ex, last.p_ex);
  std::tie(r.line_or_p_max, r.line_or_p_mean) = relative_change_stats(first.p_or, last.p_or);

  r.t_survived = static_cast<double>(*e.termination.failed_step);
  r.agent = e.agent;
  r.chronic_id = e.chronic_id;
  r.seed = e.seed;
  r.error_type = e.termination.error_type;
  if (tracked_line && *tracked_line >= 0 && *tracked_line < s.n_lines)
    r.flag_attack_line = last.line_status[*tracked_line] == 0;
  r.flag_stable_topology = r.n_sub_changed == 0 && r.n_lines_dis == 0;
  if (tracked_gen && *tracked_gen >= 0 && *tracked_gen < s.n_generators &&
      first.gen_p[*tracked_gen] != 0.0)
    r.tracked_gen_change = last.gen_p[*tracked_gen] / first.gen_p[*tracked_gen] - 1.0;
  return r;
}

Table failure_feature_table_header() {
  std::vector<std::string> cols = descriptor_names();
  for (const char* c : {"t_survived", "agent", "chronic_id", "seed", "error_type",
                        "flag_attack_line", "flag_stable_topology", "tracked_gen_change"})
    cols.push_back(c);
  return Table(cols);
}

Table::Row failure_feature_row_cells(const FailureFeatureRow& r) {
  Table::Row row;
  for (double v : descriptor_values(r)) row.push_back(v);
  row.push_back(r.t_survived);
  row.push_back(r.agent.name());
  row.push_back(r.chronic_id);
  row.push_back(static_cast<double>(r.seed));
  row.push_back(to_string(r.error_type));
  row.push_back(static_cast<double>(r.flag_attack_line ? 1 : 0));
  row.push_back(static_cast<double>(r.flag_stable_topology ? 1 : 0));
  if (r.tracked_gen_change)
    row.push_back(*r.tracked_gen_change);
  else
    row.push_back(std::string());
  return row;
}

Table to_table(const std::vector<FailureFeatureRow>& rows) {
  Table t = failure_feature_table_header();
  for (const FailureFeatureRow& r : rows) t.add_row(failure_feature_row_cells(r));
  return t;
}

std::vector<FailureFeatureRow> rows_from_table(const Table& t) {
  std::vector<FailureFeatureRow> out;
  const auto& names = descriptor_names();
  std::vector<int> idx;
  for (const std::string& n : names) {
    const int c = t.column_index(n);
    if (c < 0) throw std::invalid_argument("feature table missing column " + n);
    idx.push_back(c);
  }
  const int c_surv = t.column_index("t_survived");
  const int c_agent = t.column_index("agent");
  const int c_chronic = t.column_index("chronic_id");
  const int c_seed = t.column_index("seed");
  const int c_err = t.column_index("error_type");
  const int c_atk = t.column_index("flag_attack_line");
  const int c_stable = t.column_index("flag_stable_topology");
  const int c_gen = t.column_index("tracked_gen_change");
  for (std::size_t i = 0; i < t.n_rows(); ++i) {
    FailureFeatureRow r;
    std::vector<double> vals;
    for (int c : idx) vals.push_back(std::get<double>(t.at(i, c)));
    r.ts_overflow = vals[0];
    r.n_lines_dis = vals[1];
    r.n_sub_changed = vals[2];
    r.rho_max = vals[3];
    r.rho_mean = vals[4];
    r.load_p_max = vals[5];
    r.load_p_mean = vals[6];
    r.gen_p_max = vals[7];
    r.gen_p_mean = vals[8];
    r.line_ex_p_max = vals[9];
    r.line_ex_p_mean = vals[10];
    r.line_or_p_max = vals[11];
    r.line_or_p_mean = vals[12];
    if (c_surv >= 0) r.t_survived = std::get<double>(t.at(i, c_surv));
    if (c_agent >= 0) r.agent = AgentKind::parse(std::get<std::string>(t.at(i, c_agent)));
    if (c_chronic >= 0) {
      const Table::Cell& cell = t.at(i, c_chronic);
      if (const std::string* s = std::get_if<std::string>(&cell))
        r.chronic_id = *s;
      else
        r.chronic_id = format_double(std::get<double>(cell));
    }
    if (c_seed >= 0) r.seed = static_cast<std::int64_t>(std::get<double>(t.at(i, c_seed)));
    if (c_err >= 0) {
      const auto err = parse_error_type(std::get<std::string>(t.at(i, c_err)));
      r.error_type = err.value_or(ErrorType::kNone);
    }
    if (c_atk >= 0) r.flag_attack_line = std::get<double>(t.at(i, c_atk)) != 0;
    if (c_stable >= 0) r.flag_stable_topology = std::get<double>(t.at(i, c_stable)) != 0;
    if (c_gen >= 0) {
      const Table::Cell& cell = t.at(i, c_gen);
      if (const double* d = std::get_if<double>(&cell)) r.tracked_gen_change = *d;
    }
    out.push_back(std::move(r));
  }
  return out;
}

CorrelationMatrix correlation_matrix(const std::vector<FailureFeatureRow>& rows) {
  if (rows.size() < 3)
    throw std::invalid_argument("correlation_matrix: need at least 3 rows");
  const auto& names = descriptor_names();
  const std::size_t d = names.size();
  const std::size_t n = rows.size();
  std::vector<std::vector<double>> cols(d, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> v = descriptor_values(rows[i]);
    for (std::size_t j = 0; j < d; ++j) cols[j][i] = v[j];
  }
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (double v : cols[j]) mean[j] += v;
    mean[j] /= static_cast<double>(n);
    for (double v : cols[j]) sd[j] += (v - mean[j]) * (v - mean[j]);
    sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
  }
  CorrelationMatrix m;
  m.names = names;
  m.values.assign(d, std::vector<double>(d, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t j = 0; j < d; ++j)
    if (sd[j] == 0.0) m.undefined_columns.push_back(names[j]);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      if (sd[a] == 0.0 || sd[b] == 0.0) continue;  // flagged undefined
      double cov = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        cov += (cols[a][i] - mean[a]) * (cols[b][i] - mean[b]);
      cov /= static_cast<double>(n);
      m.values[a][b] = std::clamp(cov / (sd[a] * sd[b]), -1.0, 1.0);
    }
    if (sd[a] != 0.0) m.values[a][a] = 1.0;
  }
  return m;
}

Table correlation_table(const CorrelationMatrix& m) {
  std::vector<std::string> cols = {"descriptor"};
  for (const std::string& n : m.names) cols.push_back(n);
  Table t(cols);
  for (std::size_t a = 0; a < m.names.size(); ++a) {
    Table::Row row;
    row.push_back(m.names[a]);
    for (std::size_t b = 0; b < m.names.size(); ++b) {
      if (std::isnan(m.values[a][b]))
        row.push_back(std::string("undefined"));
      else
        row.push_back(m.values[a][b]);
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace gridfail
