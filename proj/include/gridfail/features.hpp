#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridfail/grid_model.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

// The 13 clustering descriptors plus descriptive companions, extracted from a
// failed episode's first and last observations.
struct FailureFeatureRow {
  double ts_overflow = 0;    // sum over lines of the overflow counters at n-1
  double n_lines_dis = 0;
  double n_sub_changed = 0;
  double rho_max = 0;
  double rho_mean = 0;
  double load_p_max = 0, load_p_mean = 0;
  double gen_p_max = 0, gen_p_mean = 0;
  double line_ex_p_max = 0, line_ex_p_mean = 0;
  double line_or_p_max = 0, line_or_p_mean = 0;
  double t_survived = 0;
  AgentKind agent;
  std::string chronic_id;
  std::int64_t seed = 0;
  ErrorType error_type = ErrorType::kNone;
  bool flag_attack_line = false;
  bool flag_stable_topology = false;
  std::optional<double> tracked_gen_change;
};

// Names of the 13 clustering descriptors, in canonical order.
const std::vector<std::string>& descriptor_names();
std::vector<double> descriptor_values(const FailureFeatureRow& row);

// (max, mean) of v1[i]/v0[i] - 1 over indices with v0[i] != 0.
// Throws std::invalid_argument when no element has a nonzero baseline.
std::pair<double, double> relative_change_stats(const std::vector<double>& values_t0,
                                                const std::vector<double>& values_tn1);

// Throws std::invalid_argument on survived episodes or schema mismatch.
FailureFeatureRow extract_failure_row(const Episode& e, const GridSchema& s,
                                      std::optional<int> tracked_line = std::nullopt,
                                      std::optional<int> tracked_gen = std::nullopt);

Table failure_feature_table_header();
Table::Row failure_feature_row_cells(const FailureFeatureRow& row);
Table to_table(const std::vector<FailureFeatureRow>& rows);
std::vector<FailureFeatureRow> rows_from_table(const Table& t);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // NaN where undefined
  std::vector<std::string> undefined_columns;  // constant descriptors
};

// Pearson correlations between the 13 descriptors. Throws on fewer than 3 rows.
CorrelationMatrix correlation_matrix(const std::vector<FailureFeatureRow>& rows);

Table correlation_table(const CorrelationMatrix& m);

}  // namespace gridfail
