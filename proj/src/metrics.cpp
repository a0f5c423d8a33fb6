#include "gridfail/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace gridfail {

namespace {

int argmax_lowest(const std::vector<double>& p) {
  int arg = 0;
  for (int k = 1; k < static_cast<int>(p.size()); ++k)
    if (p[k] > p[arg]) arg = k;
  return arg;
}

}  // namespace

std::vector<std::vector<double>> avg_probability_matrix(
    const std::vector<int>& y_true, const std::vector<std::vector<double>>& y_proba,
    int n_classes) {
  if (y_true.size() != y_proba.size())
    throw std::invalid_argument("avg_probability_matrix: length mismatch");
  std::vector<std::vector<double>> m(n_classes, std::vector<double>(n_classes, 0.0));
  std::vector<int> count(n_classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int c = y_true[i];
    for (int k = 0; k < n_classes; ++k) m[c][k] += y_proba[i][k];
    ++count[c];
  }
  for (int c = 0; c < n_classes; ++c) {
    if (count[c] == 0) {
      std::fill(m[c].begin(), m[c].end(), std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    for (double& v : m[c]) v /= count[c];
  }
  return m;
}

EvalReport evaluate(const std::vector<int>& y_true,
                    const std::vector<std::vector<double>>& y_proba,
                    std::vector<std::string> class_names, std::string split_tag,
                    int survived_class) {
  if (y_true.size() != y_proba.size())
    throw std::invalid_argument("evaluate: length mismatch");
  if (y_true.empty()) throw std::invalid_argument("evaluate: empty input");
  const int K = static_cast<int>(class_names.size());
  for (const auto& p : y_proba) {
    if (static_cast<int>(p.size()) != K)
      throw std::invalid_argument("evaluate: probability row has wrong width");
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
        throw std::invalid_argument("evaluate: probability outside [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("evaluate: probability row does not sum to 1");
  }

  EvalReport rep;
  rep.class_names = std::move(class_names);
  rep.split_tag = std::move(split_tag);
  rep.confusion.assign(K, std::vector<double>(K, 0.0));

  std::size_t correct = 0;
  std::size_t binary_correct = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int truth = y_true[i];
    if (truth < 0 || truth >= K)
      throw std::invalid_argument("evaluate: label outside class set");
    const int pred = argmax_lowest(y_proba[i]);
    rep.confusion[truth][pred] += 1.0;
    if (pred == truth) ++correct;
    const bool truth_fail = truth != survived_class;
    const bool pred_fail = pred != survived_class;
    if (truth_fail == pred_fail) ++binary_correct;
  }
  const double n = static_cast<double>(y_true.size());
  rep.accuracy = correct / n;
  rep.binary_accuracy = binary_correct / n;

  // Balanced accuracy: mean recall over classes present in y_true.
  double recall_sum = 0.0;
  int present = 0;
  for (int c = 0; c < K; ++c) {
    double truth_count = 0.0;
    for (int k = 0; k < K; ++k) truth_count += rep.confusion[c][k];
    if (truth_count == 0.0) {
      rep.undefined_rows.push_back(rep.class_names[c]);
      continue;
    }
    recall_sum += rep.confusion[c][c] / truth_count;
    ++present;
  }
  rep.balanced_accuracy = present > 0 ? recall_sum / present : 0.0;

  // Micro-averaged F1 from pooled TP/FP/FN.
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (int c = 0; c < K; ++c) {
    tp += rep.confusion[c][c];
    for (int k = 0; k < K; ++k) {
      if (k == c) continue;
      fp += rep.confusion[k][c];
      fn += rep.confusion[c][k];
    }
  }
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  rep.f1_micro =
      precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;

  rep.avg_probability = avg_probability_matrix(y_true, y_proba, K);
  return rep;
}

Table eval_report_table(const EvalReport& r) {
  Table t({"split", "metric", "value"});
  t.add_row({r.split_tag, std::string("accuracy"), r.accuracy});
  t.add_row({r.split_tag, std::string("balanced_accuracy"), r.balanced_accuracy});
  t.add_row({r.split_tag, std::string("f1_micro"), r.f1_micro});
  t.add_row({r.split_tag, std::string("binary_accuracy"), r.binary_accuracy});
  return t;
}

Table avg_probability_table(const EvalReport& r) {
  std::vector<std::string> cols = {"truth"};
  for (const std::string& c : r.class_names) cols.push_back("p_" + c);
  Table t(cols);
  for (std::size_t c = 0; c < r.avg_probability.size(); ++c) {
    Table::Row row = {r.class_names[c]};
    for (double v : r.avg_probability[c]) {
      if (std::isnan(v))
        row.push_back(std::string("undefined"));
      else
        row.push_back(v);
    }
    t.add_row(std::move(row));
  }
  return t;
}

Table confusion_table(const EvalReport& r) {
  std::vector<std::string> cols = {"truth"};
  for (const std::string& c : r.class_names) cols.push_back("pred_" + c);
  Table t(cols);
  for (std::size_t c = 0; c < r.confusion.size(); ++c) {
    Table::Row row = {r.class_names[c]};
    for (double v : r.confusion[c]) row.push_back(v);
    t.add_row(std::move(row));
  }
  return t;
}

ElementImportance aggregate_importance(const std::vector<double>& feature_gains,
                                       const FeatureSchema& fs, const GridSchema& grid,
                                       int top_k) {
  if (feature_gains.size() != fs.size())
    throw std::invalid_argument("aggregate_importance: gain/schema size mismatch");

  struct Acc {
    double total = 0.0;
    int n = 0;
  };
  std::map<std::pair<std::string, int>, Acc> acc;  // (type, id) -> gains
  for (std::size_t f = 0; f < fs.size(); ++f) {
    const std::string& type = fs.element_type[f];
    const int id = fs.element_id[f];
    if (type == "line") {
      if (id < 0 || id >= grid.n_lines)
        throw std::invalid_argument("aggregate_importance: unmapped feature " + fs.names[f]);
    } else if (type == "generator") {
      if (id < 0 || id >= grid.n_generators)
        throw std::invalid_argument("aggregate_importance: unmapped feature " + fs.names[f]);
    } else if (type == "load") {
      if (id < 0 || id >= grid.n_loads)
        throw std::invalid_argument("aggregate_importance: unmapped feature " + fs.names[f]);
    } else if (type == "substation") {
      if (id < 0 || id >= grid.n_substations)
        throw std::invalid_argument("aggregate_importance: unmapped feature " + fs.names[f]);
    } else if (type != "descriptive") {
      throw std::invalid_argument("aggregate_importance: unknown element type '" + type +
                                  "' for feature " + fs.names[f]);
    }
    Acc& a = acc[{type, type == "descriptive" ? -1 : id}];
    a.total += feature_gains[f];
    a.n += 1;
  }

  // Deterministic emission: by type, then mean gain descending, then id.
  struct Row {
    std::string type;
    int id;
    double mean;
    int n;
  };
  std::vector<Row> rows;
  for (const auto& [key, a] : acc)
    rows.push_back({key.first, key.second, a.total / a.n, a.n});
  const std::vector<std::string> type_order = {"line", "generator", "load",
                                               "substation", "descriptive"};
  auto type_rank = [&](const std::string& t) {
    for (std::size_t i = 0; i < type_order.size(); ++i)
      if (type_order[i] == t) return static_cast<int>(i);
    return static_cast<int>(type_order.size());
  };
  std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    const int ra = type_rank(a.type), rb = type_rank(b.type);
    if (ra != rb) return ra < rb;
    if (a.mean != b.mean) return a.mean > b.mean;
    return a.id < b.id;
  });

  ElementImportance imp;
  imp.top_k = top_k;
  imp.elements = Table({"element", "type", "id", "sub_or", "sub_ex", "mean_gain",
                        "n_features", "rank_in_type"});
  std::map<std::string, int> rank_counter;
  for (const Row& r : rows) {
    const int rank = ++rank_counter[r.type];
    double sub_or = -1, sub_ex = -1;
    if (r.type == "line") {
      sub_or = grid.line_endpoints[r.id].first;
      sub_ex = grid.line_endpoints[r.id].second;
    } else if (r.type == "generator") {
      sub_or = grid.gen_substation[r.id];
    } else if (r.type == "load") {
      sub_or = grid.load_substation[r.id];
    } else if (r.type == "substation") {
      sub_or = r.id;
    }
    const std::string key =
        r.type == "descriptive" ? "descriptive" : r.type + "_" + std::to_string(r.id);
    imp.elements.add_row({key, r.type, static_cast<double>(r.id), sub_or, sub_ex,
                          r.mean, static_cast<double>(r.n),
                          static_cast<double>(rank)});
  }
  return imp;
}

Table top_elements(const ElementImportance& imp) {
  Table t(imp.elements.columns());
  const int c_rank = imp.elements.column_index("rank_in_type");
  for (std::size_t i = 0; i < imp.elements.n_rows(); ++i)
    if (std::get<double>(imp.elements.at(i, c_rank)) <= imp.top_k)
      t.add_row(imp.elements.row(i));
  return t;
}

}  // namespace gridfail
