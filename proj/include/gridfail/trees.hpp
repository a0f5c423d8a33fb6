#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridfail/table.hpp"

namespace gridfail {

// Row-major training data; labels are dense class indices starting at 0.
struct TrainData {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
};

struct GbdtConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  enum class Growth { kLeafWise, kLevelWise } growth = Growth::kLeafWise;
  int max_leaves = 31;  // leaf-wise budget
  int max_depth = 6;    // level-wise budget
  int n_bins = 255;
  double l2_lambda = 1.0;
  double min_child_weight = 1e-3;
  double row_subsample = 1.0;
  double feature_subsample = 1.0;
  std::uint64_t seed = 0;
  int early_stopping_rounds = 0;  // 0 disables early stopping

  bool operator==(const GbdtConfig&) const = default;
};

std::string to_string(GbdtConfig::Growth g);
std::optional<GbdtConfig::Growth> parse_growth(const std::string& s);

struct RfConfig {
  int n_trees = 100;
  int max_depth = 12;
  double feature_subsample = 0.35;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;

  bool operator==(const RfConfig&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x <= threshold
  int bin = -1;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value (GBDT) or majority class (RF)
  double gain = 0.0;
  int count = 0;

  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  double predict(const std::vector<double>& x) const;

  bool operator==(const DecisionTree&) const = default;
};

struct TreeEnsembleModel {
  enum class Kind { kRandomForest, kGbdt };
  Kind kind = Kind::kGbdt;
  int n_classes = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::vector<double> base_score;              // GBDT log priors
  std::vector<DecisionTree> trees;             // GBDT: round-major, one per class
  std::vector<int> tree_class;                 // class of each tree; -1 for RF
  std::vector<std::vector<double>> bin_upper;  // per-feature quantile cut points
  std::vector<double> feature_gain;
  GbdtConfig gbdt_config;
  RfConfig rf_config;
  std::vector<double> train_loss_per_round;
  std::vector<double> valid_loss_per_round;
  int best_round = -1;  // rounds kept after early stopping

  bool operator==(const TreeEnsembleModel&) const = default;
};

// Softmax-objective histogram GBDT. Deterministic given config and
// independent of worker count. Throws on empty data or single-class labels.
TreeEnsembleModel fit_gbdt(const TrainData& train, const GbdtConfig& cfg, int n_classes,
                           const TrainData* validation = nullptr, int workers = 1);

// Bootstrap + Gini random forest over the same binned representation.
TreeEnsembleModel fit_random_forest(const TrainData& train, const RfConfig& cfg,
                                    int n_classes, int workers = 1);

// Per-sample class probabilities; rows sum to 1. Throws on feature-count
// mismatch.
std::vector<std::vector<double>> predict_proba(const TreeEnsembleModel& m,
                                               const std::vector<std::vector<double>>& rows);
// argmax with lowest-index tie-break.
std::vector<int> predict_label(const TreeEnsembleModel& m,
                               const std::vector<std::vector<double>>& rows);

// Ranked (feature, cumulative gain), descending; ties by feature index.
Table feature_importance(const TreeEnsembleModel& m, int top_k);

// Multi-class cross-entropy of predictions against labels.
double cross_entropy(const std::vector<int>& labels,
                     const std::vector<std::vector<double>>& proba);

// Softmax gradient/hessian pair used by the boosting objective; exposed for
// verification against finite differences.
void softmax_gradient(const std::vector<double>& scores, int label,
                      std::vector<double>& grad, std::vector<double>& hess);

// Versioned line-delimited model files; roundtrip preserves predictions
// bit-for-bit.
std::size_t save_model(const TreeEnsembleModel& m, const std::filesystem::path& dest);
TreeEnsembleModel load_model(const std::filesystem::path& source);

}  // namespace gridfail
