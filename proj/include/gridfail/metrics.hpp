#pragma once

#include <string>
#include <vector>

#include "gridfail/dataset.hpp"
#include "gridfail/grid_model.hpp"
#include "gridfail/table.hpp"

namespace gridfail {

struct EvalReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double f1_micro = 0.0;
  double binary_accuracy = 0.0;
  std::vector<std::vector<double>> confusion;        // [truth][pred] counts
  std::vector<std::vector<double>> avg_probability;  // [truth][class]; NaN rows flagged
  std::vector<std::string> class_names;
  std::vector<std::string> undefined_rows;  // classes absent from y_true
  std::string split_tag;
};

// accuracy / balanced accuracy / micro-F1 / binary accuracy plus the
// confusion and average-probability matrices. survived_class feeds the binary
// collapse: that class vs everything else. Classes absent from y_true are
// excluded from the balanced-accuracy mean and flagged. Throws on length
// mismatch or malformed probability rows.
EvalReport evaluate(const std::vector<int>& y_true,
                    const std::vector<std::vector<double>>& y_proba,
                    std::vector<std::string> class_names, std::string split_tag = "test",
                    int survived_class = 0);

// Row c = mean probability vector over samples whose truth is c.
std::vector<std::vector<double>> avg_probability_matrix(
    const std::vector<int>& y_true, const std::vector<std::vector<double>>& y_proba,
    int n_classes);

Table eval_report_table(const EvalReport& report);
Table avg_probability_table(const EvalReport& report);
Table confusion_table(const EvalReport& report);

struct ElementImportance {
  // element_key, type, id, sub_or, sub_ex, mean_gain, n_features, rank_in_type
  Table elements;
  int top_k = 10;
};

// Mean gain per grid element (lines/generators/loads/substations) plus the
// pooled descriptive group, ranked within each type. Throws on a feature the
// schema cannot map.
ElementImportance aggregate_importance(const std::vector<double>& feature_gains,
                                       const FeatureSchema& fs, const GridSchema& grid,
                                       int top_k = 10);

// Rows of `elements` whose in-type rank is within top_k.
Table top_elements(const ElementImportance& imp);

}  // namespace gridfail
