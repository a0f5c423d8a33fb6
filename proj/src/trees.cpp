#include "gridfail/trees.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "gridfail/parallel.hpp"
#include "gridfail/rng.hpp"

namespace gridfail {

std::string to_string(GbdtConfig::Growth g) {
  return g == GbdtConfig::Growth::kLeafWise ? "LEAF_WISE" : "LEVEL_WISE";
}

std::optional<GbdtConfig::Growth> parse_growth(const std::string& s) {
  if (s == "LEAF_WISE") return GbdtConfig::Growth::kLeafWise;
  if (s == "LEVEL_WISE") return GbdtConfig::Growth::kLevelWise;
  return std::nullopt;
}

double DecisionTree::predict(const std::vector<double>& x) const {
  int node = 0;
  while (nodes[node].feature >= 0) {
    const TreeNode& nd = nodes[node];
    node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return nodes[node].value;
}

namespace {

using BinnedColumn = std::vector<std::uint8_t>;

struct BinnedData {
  std::vector<std::vector<double>> cuts;  // per feature, ascending
  std::vector<BinnedColumn> columns;      // per feature, per row bin index
  std::size_t n_rows = 0;
  int max_bins = 0;
};

// Quantile cut points; bin(x) = count of cuts < x, so x <= cuts[b] <=> bin <= b.
BinnedData bin_features(const std::vector<std::vector<double>>& rows, int n_bins,
                        int workers) {
  const std::size_t n = rows.size();
  const std::size_t d = rows[0].size();
  BinnedData b;
  b.n_rows = n;
  b.cuts.resize(d);
  b.columns.resize(d);
  parallel_for(d, workers, [&](std::size_t f) {
    std::vector<double> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = rows[i][f];
    std::sort(sorted.begin(), sorted.end());
    std::vector<double>& cuts = b.cuts[f];
    for (int q = 1; q < n_bins; ++q) {
      const double v = sorted[std::min(n - 1, q * n / n_bins)];
      if (cuts.empty() || v > cuts.back()) cuts.push_back(v);
    }
    BinnedColumn& col = b.columns[f];
    col.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = std::lower_bound(cuts.begin(), cuts.end(), rows[i][f]);
      col[i] = static_cast<std::uint8_t>(it - cuts.begin());
    }
  });
  for (std::size_t f = 0; f < d; ++f)
    b.max_bins = std::max(b.max_bins, static_cast<int>(b.cuts[f].size()) + 1);
  return b;
}

struct SplitChoice {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;
  double g_left = 0.0, h_left = 0.0;
  int count_left = 0;
};

struct GradHist {
  std::vector<double> g, h;
  std::vector<int> count;
  void reset(int bins) {
    g.assign(bins, 0.0);
    h.assign(bins, 0.0);
    count.assign(bins, 0);
  }
};

double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

double score_part(double g, double h, double lambda) { return g * g / (h + lambda); }

// One boosting tree on the binned data.
class GbdtTreeBuilder {
 public:
  GbdtTreeBuilder(const BinnedData& data, const std::vector<double>& grad,
                  const std::vector<double>& hess, const std::vector<int>& rows,
                  const std::vector<int>& features, const GbdtConfig& cfg, int workers)
      : data_(data), grad_(grad), hess_(hess), features_(features), cfg_(cfg),
        workers_(workers) {
    hists_.resize(features.size());
    node_rows_.push_back(rows);
    double g = 0.0, h = 0.0;
    for (int i : rows) {
      g += grad_[i];
      h += hess_[i];
    }
    TreeNode root;
    root.count = static_cast<int>(rows.size());
    tree_.nodes.push_back(root);
    node_g_ = {g};
    node_h_ = {h};
    node_depth_ = {0};
  }

  DecisionTree build(std::vector<double>& feature_gain) {
    if (cfg_.growth == GbdtConfig::Growth::kLeafWise) {
      std::vector<int> open = {0};
      std::vector<SplitChoice> best = {find_split(0)};
      int n_leaves = 1;
      while (n_leaves < cfg_.max_leaves) {
        int pick = -1;
        for (std::size_t i = 0; i < open.size(); ++i)
          if (best[i].feature >= 0 && (pick < 0 || best[i].gain > best[pick].gain))
            pick = static_cast<int>(i);
        if (pick < 0) break;
        const int node = open[pick];
        const SplitChoice chosen = best[pick];
        open.erase(open.begin() + pick);
        best.erase(best.begin() + pick);
        auto [l, r] = apply_split(node, chosen, feature_gain);
        open.push_back(l);
        best.push_back(find_split(l));
        open.push_back(r);
        best.push_back(find_split(r));
        ++n_leaves;
      }
    } else {
      std::vector<int> frontier = {0};
      while (!frontier.empty()) {
        std::vector<int> next;
        for (int node : frontier) {
          if (node_depth_[node] >= cfg_.max_depth) continue;
          const SplitChoice chosen = find_split(node);
          if (chosen.feature < 0) continue;
          auto [l, r] = apply_split(node, chosen, feature_gain);
          next.push_back(l);
          next.push_back(r);
        }
        frontier = std::move(next);
      }
    }
    finalize_leaves();
    return std::move(tree_);
  }

 private:
  SplitChoice find_split(int node) {
    const std::vector<int>& rows = node_rows_[node];
    if (rows.size() < 2) return {};
    const double g_total = node_g_[node];
    const double h_total = node_h_[node];
    const double lambda = cfg_.l2_lambda;
    const double parent_score = score_part(g_total, h_total, lambda);

    std::vector<SplitChoice> per_feature(features_.size());
    parallel_for(features_.size(), workers_, [&](std::size_t fi) {
      const int f = features_[fi];
      const int bins = static_cast<int>(data_.cuts[f].size()) + 1;
      if (bins < 2) return;
      GradHist& hist = hists_[fi];
      hist.reset(bins);
      const BinnedColumn& col = data_.columns[f];
      for (int i : rows) {
        const int b = col[i];
        hist.g[b] += grad_[i];
        hist.h[b] += hess_[i];
        ++hist.count[b];
      }
      SplitChoice best;
      double gl = 0.0, hl = 0.0;
      int cl = 0;
      for (int b = 0; b + 1 < bins; ++b) {
        gl += hist.g[b];
        hl += hist.h[b];
        cl += hist.count[b];
        if (cl == 0) continue;
        if (cl == static_cast<int>(rows.size())) break;
        const double hr = h_total - hl;
        if (hl < cfg_.min_child_weight || hr < cfg_.min_child_weight) continue;
        const double gain = 0.5 * (score_part(gl, hl, lambda) +
                                   score_part(g_total - gl, hr, lambda) - parent_score);
        if (gain > best.gain + 1e-12) {
          best.gain = gain;
          best.feature = f;
          best.bin = b;
          best.g_left = gl;
          best.h_left = hl;
          best.count_left = cl;
        }
      }
      per_feature[fi] = best;
    });

    SplitChoice best;
    for (const SplitChoice& c : per_feature)
      if (c.feature >= 0 && c.gain > best.gain + 1e-12) best = c;
    if (best.feature >= 0 && best.gain <= 1e-12) best.feature = -1;
    return best;
  }

  std::pair<int, int> apply_split(int node, const SplitChoice& s,
                                  std::vector<double>& feature_gain) {
    const std::vector<int>& rows = node_rows_[node];
    std::vector<int> left_rows, right_rows;
    left_rows.reserve(s.count_left);
    right_rows.reserve(rows.size() - s.count_left);
    const BinnedColumn& col = data_.columns[s.feature];
    for (int i : rows)
      (col[i] <= s.bin ? left_rows : right_rows).push_back(i);

    const int l = static_cast<int>(tree_.nodes.size());
    const int r = l + 1;
    TreeNode& nd = tree_.nodes[node];
    nd.feature = s.feature;
    nd.bin = s.bin;
    nd.threshold = data_.cuts[s.feature][s.bin];
    nd.left = l;
    nd.right = r;
    nd.gain = s.gain;
    feature_gain[s.feature] += s.gain;

    TreeNode ln, rn;
    ln.count = static_cast<int>(left_rows.size());
    rn.count = static_cast<int>(right_rows.size());
    tree_.nodes.push_back(ln);
    tree_.nodes.push_back(rn);
    node_rows_.push_back(std::move(left_rows));
    node_rows_.push_back(std::move(right_rows));
    node_g_.push_back(s.g_left);
    node_h_.push_back(s.h_left);
    node_g_.push_back(node_g_[node] - s.g_left);
    node_h_.push_back(node_h_[node] - s.h_left);
    node_depth_.push_back(node_depth_[node] + 1);
    node_depth_.push_back(node_depth_[node] + 1);
    node_rows_[node].clear();
    node_rows_[node].shrink_to_fit();
    return {l, r};
  }

  void finalize_leaves() {
    for (std::size_t i = 0; i < tree_.nodes.size(); ++i)
      if (tree_.nodes[i].feature < 0)
        tree_.nodes[i].value =
            leaf_weight(node_g_[i], node_h_[i], cfg_.l2_lambda) * cfg_.learning_rate;
  }

  const BinnedData& data_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const std::vector<int>& features_;
  const GbdtConfig& cfg_;
  int workers_;
  DecisionTree tree_;
  std::vector<std::vector<int>> node_rows_;
  std::vector<double> node_g_, node_h_;
  std::vector<int> node_depth_;
  std::vector<GradHist> hists_;
};

double tree_predict_binned(const DecisionTree& t, const BinnedData& data, int row) {
  int node = 0;
  while (t.nodes[node].feature >= 0) {
    const TreeNode& nd = t.nodes[node];
    node = data.columns[nd.feature][row] <= nd.bin ? nd.left : nd.right;
  }
  return t.nodes[node].value;
}

void softmax_inplace(std::vector<double>& scores) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - mx);
    sum += s;
  }
  for (double& s : scores) s /= sum;
}

std::vector<int> subsample_features(std::size_t d, double fraction, const CounterRng& rng) {
  const std::size_t want =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * d)));
  std::vector<int> all(d);
  std::iota(all.begin(), all.end(), 0);
  if (want >= d) return all;
  for (std::size_t i = 0; i < want; ++i)
    std::swap(all[i], all[i + rng.pick(i, d - i)]);
  all.resize(want);
  std::sort(all.begin(), all.end());
  return all;
}

void validate_training_input(const TrainData& train, int n_classes) {
  if (train.rows.empty()) throw std::invalid_argument("empty training set");
  if (train.rows.size() != train.labels.size())
    throw std::invalid_argument("row/label count mismatch");
  const std::size_t d = train.rows[0].size();
  for (const auto& r : train.rows)
    if (r.size() != d) throw std::invalid_argument("ragged training rows");
  std::vector<int> seen(n_classes, 0);
  for (int l : train.labels) {
    if (l < 0 || l >= n_classes)
      throw std::invalid_argument("label outside [0, n_classes)");
    seen[l] = 1;
  }
  if (std::accumulate(seen.begin(), seen.end(), 0) < 2)
    throw std::invalid_argument("training labels contain a single class");
}

}  // namespace

void softmax_gradient(const std::vector<double>& scores, int label,
                      std::vector<double>& grad, std::vector<double>& hess) {
  std::vector<double> p = scores;
  softmax_inplace(p);
  grad.resize(p.size());
  hess.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    grad[k] = p[k] - (static_cast<int>(k) == label ? 1.0 : 0.0);
    hess[k] = std::max(p[k] * (1.0 - p[k]), 1e-16);
  }
}

double cross_entropy(const std::vector<int>& labels,
                     const std::vector<std::vector<double>>& proba) {
  if (labels.size() != proba.size())
    throw std::invalid_argument("cross_entropy: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    total -= std::log(std::max(proba[i][labels[i]], 1e-15));
  return total / static_cast<double>(labels.size());
}

TreeEnsembleModel fit_gbdt(const TrainData& train, const GbdtConfig& cfg, int n_classes,
                           const TrainData* validation, int workers) {
  if (n_classes < 2) throw std::invalid_argument("fit_gbdt: need at least 2 classes");
  if (cfg.n_bins < 2 || cfg.n_bins > 255)
    throw std::invalid_argument("fit_gbdt: n_bins must be in [2, 255]");
  if (cfg.learning_rate <= 0) throw std::invalid_argument("fit_gbdt: learning_rate <= 0");
  if (cfg.row_subsample <= 0 || cfg.row_subsample > 1 || cfg.feature_subsample <= 0 ||
      cfg.feature_subsample > 1)
    throw std::invalid_argument("fit_gbdt: subsample ratios must be in (0, 1]");
  validate_training_input(train, n_classes);

  const std::size_t n = train.rows.size();
  const std::size_t d = train.rows[0].size();
  const int K = n_classes;

  TreeEnsembleModel model;
  model.kind = TreeEnsembleModel::Kind::kGbdt;
  model.n_classes = K;
  model.feature_names = train.feature_names;
  model.gbdt_config = cfg;
  model.feature_gain.assign(d, 0.0);

  BinnedData binned = bin_features(train.rows, cfg.n_bins, workers);
  model.bin_upper = binned.cuts;

  model.base_score.resize(K);
  for (int l : train.labels) model.base_score[l] += 1.0;
  for (double& b : model.base_score)
    b = std::log(std::max(b / static_cast<double>(n), 1e-12));

  std::vector<double> scores(n * K);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < K; ++k) scores[i * K + k] = model.base_score[k];

  std::vector<double> valid_scores;
  if (validation) {
    valid_scores.resize(validation->rows.size() * K);
    for (std::size_t i = 0; i < validation->rows.size(); ++i)
      for (int k = 0; k < K; ++k) valid_scores[i * K + k] = model.base_score[k];
  }

  auto mean_ce = [K](const std::vector<double>& sc, const std::vector<int>& labels) {
    double total = 0.0;
    std::vector<double> p(K);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (int k = 0; k < K; ++k) p[k] = sc[i * K + k];
      softmax_inplace(p);
      total -= std::log(std::max(p[labels[i]], 1e-15));
    }
    return labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
  };

  const CounterRng rng(cfg.seed);
  std::vector<double> grad(n), hess(n), prob(K);
  double best_valid = std::numeric_limits<double>::infinity();
  int best_round = -1;

  for (int round = 0; round < cfg.n_rounds; ++round) {
    // Row subsample is Bernoulli per row, keyed so order never matters.
    std::vector<int> rows;
    rows.reserve(n);
    if (cfg.row_subsample < 1.0) {
      const CounterRng row_rng = rng.with("rows").with(static_cast<std::uint64_t>(round));
      for (std::size_t i = 0; i < n; ++i)
        if (row_rng.uniform(i) < cfg.row_subsample) rows.push_back(static_cast<int>(i));
      if (rows.empty()) rows.push_back(0);
    } else {
      rows.resize(n);
      std::iota(rows.begin(), rows.end(), 0);
    }

    for (int k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < K; ++c) prob[c] = scores[i * K + c];
        softmax_inplace(prob);
        grad[i] = prob[k] - (train.labels[i] == k ? 1.0 : 0.0);
        hess[i] = std::max(prob[k] * (1.0 - prob[k]), 1e-16);
      }
      const std::vector<int> feats = subsample_features(
          d, cfg.feature_subsample,
          rng.with("features").with(static_cast<std::uint64_t>(round) * K + k));
      GbdtTreeBuilder builder(binned, grad, hess, rows, feats, cfg, workers);
      DecisionTree tree = builder.build(model.feature_gain);
      for (std::size_t i = 0; i < n; ++i)
        scores[i * K + k] += tree_predict_binned(tree, binned, static_cast<int>(i));
      if (validation)
        for (std::size_t i = 0; i < validation->rows.size(); ++i)
          valid_scores[i * K + k] += tree.predict(validation->rows[i]);
      model.trees.push_back(std::move(tree));
      model.tree_class.push_back(k);
    }

    model.train_loss_per_round.push_back(mean_ce(scores, train.labels));
    if (validation) {
      const double vl = mean_ce(valid_scores, validation->labels);
      model.valid_loss_per_round.push_back(vl);
      if (vl < best_valid - 1e-12) {
        best_valid = vl;
        best_round = round;
      } else if (cfg.early_stopping_rounds > 0 &&
                 round - best_round >= cfg.early_stopping_rounds) {
        break;
      }
    }
  }

  if (validation && cfg.early_stopping_rounds > 0 && best_round >= 0) {
    model.best_round = best_round;
    model.trees.resize(static_cast<std::size_t>(best_round + 1) * K);
    model.tree_class.resize(model.trees.size());
    model.train_loss_per_round.resize(best_round + 1);
    model.valid_loss_per_round.resize(best_round + 1);
    // Gains must match the retained trees.
    std::fill(model.feature_gain.begin(), model.feature_gain.end(), 0.0);
    for (const DecisionTree& t : model.trees)
      for (const TreeNode& nd : t.nodes)
        if (nd.feature >= 0) model.feature_gain[nd.feature] += nd.gain;
  } else {
    model.best_round = static_cast<int>(model.trees.size()) / K - 1;
  }
  return model;
}

namespace {

struct RfNodeTask {
  int node;
  std::vector<int> rows;
  int depth;
};

DecisionTree build_rf_tree(const BinnedData& binned, const std::vector<int>& labels,
                           int n_classes, const RfConfig& cfg, const CounterRng& rng,
                           std::vector<double>& feature_gain) {
  const std::size_t n = binned.n_rows;
  const std::size_t d = binned.columns.size();
  DecisionTree tree;

  std::vector<int> boot(n);
  const CounterRng boot_rng = rng.with("bootstrap");
  for (std::size_t i = 0; i < n; ++i)
    boot[i] = static_cast<int>(boot_rng.pick(i, n));
  std::sort(boot.begin(), boot.end());

  tree.nodes.push_back({});
  tree.nodes[0].count = static_cast<int>(boot.size());
  std::vector<RfNodeTask> stack = {{0, std::move(boot), 0}};
  int node_counter = 0;

  auto gini = [&](const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / total) * (c / total);
    return s;
  };

  while (!stack.empty()) {
    RfNodeTask task = std::move(stack.back());
    stack.pop_back();
    ++node_counter;

    std::vector<double> counts(n_classes, 0.0);
    for (int i : task.rows) counts[labels[i]] += 1.0;
    const double total = static_cast<double>(task.rows.size());
    int majority = 0;
    for (int k = 1; k < n_classes; ++k)
      if (counts[k] > counts[majority]) majority = k;

    const double parent_gini = gini(counts, total);
    const bool stop = task.depth >= cfg.max_depth || parent_gini == 0.0 ||
                      static_cast<int>(task.rows.size()) < 2 * cfg.min_samples_leaf;
    SplitChoice best;
    if (!stop) {
      const std::vector<int> feats = subsample_features(
          d, cfg.feature_subsample,
          rng.with("feat").with(static_cast<std::uint64_t>(node_counter)));
      for (int f : feats) {
        const int bins = static_cast<int>(binned.cuts[f].size()) + 1;
        if (bins < 2) continue;
        std::vector<double> hist(static_cast<std::size_t>(bins) * n_classes, 0.0);
        std::vector<int> bin_count(bins, 0);
        for (int i : task.rows) {
          const int b = binned.columns[f][i];
          hist[static_cast<std::size_t>(b) * n_classes + labels[i]] += 1.0;
          ++bin_count[b];
        }
        std::vector<double> left(n_classes, 0.0);
        int cl = 0;
        for (int b = 0; b + 1 < bins; ++b) {
          for (int k = 0; k < n_classes; ++k)
            left[k] += hist[static_cast<std::size_t>(b) * n_classes + k];
          cl += bin_count[b];
          const int cr = static_cast<int>(task.rows.size()) - cl;
          if (cl < cfg.min_samples_leaf || cr < cfg.min_samples_leaf) continue;
          std::vector<double> right(n_classes);
          for (int k = 0; k < n_classes; ++k) right[k] = counts[k] - left[k];
          // Count-weighted impurity decrease; additive over the tree.
          const double gain = total * parent_gini - cl * gini(left, cl) -
                              cr * gini(right, cr);
          if (gain > best.gain + 1e-12) {
            best.gain = gain;
            best.feature = f;
            best.bin = b;
            best.count_left = cl;
          }
        }
      }
    }

    if (best.feature < 0) {
      tree.nodes[task.node].value = static_cast<double>(majority);
      continue;
    }
    std::vector<int> lrows, rrows;
    lrows.reserve(best.count_left);
    rrows.reserve(task.rows.size() - best.count_left);
    for (int i : task.rows)
      (binned.columns[best.feature][i] <= best.bin ? lrows : rrows).push_back(i);

    const int l = static_cast<int>(tree.nodes.size());
    TreeNode& nd = tree.nodes[task.node];
    nd.feature = best.feature;
    nd.bin = best.bin;
    nd.threshold = binned.cuts[best.feature][best.bin];
    nd.left = l;
    nd.right = l + 1;
    nd.gain = best.gain;
    feature_gain[best.feature] += best.gain;
    TreeNode ln, rn;
    ln.count = static_cast<int>(lrows.size());
    rn.count = static_cast<int>(rrows.size());
    tree.nodes.push_back(ln);
    tree.nodes.push_back(rn);
    stack.push_back({l + 1, std::move(rrows), task.depth + 1});
    stack.push_back({l, std::move(lrows), task.depth + 1});
  }
  return tree;
}

}  // namespace

TreeEnsembleModel fit_random_forest(const TrainData& train, const RfConfig& cfg,
                                    int n_classes, int workers) {
  if (n_classes < 2)
    throw std::invalid_argument("fit_random_forest: need at least 2 classes");
  if (cfg.n_trees < 1) throw std::invalid_argument("fit_random_forest: n_trees < 1");
  if (cfg.feature_subsample <= 0 || cfg.feature_subsample > 1)
    throw std::invalid_argument("fit_random_forest: feature_subsample out of range");
  validate_training_input(train, n_classes);

  const std::size_t d = train.rows[0].size();
  TreeEnsembleModel model;
  model.kind = TreeEnsembleModel::Kind::kRandomForest;
  model.n_classes = n_classes;
  model.feature_names = train.feature_names;
  model.rf_config = cfg;
  model.feature_gain.assign(d, 0.0);

  BinnedData binned = bin_features(train.rows, 255, workers);
  model.bin_upper = binned.cuts;

  const CounterRng rng(cfg.seed);
  std::vector<DecisionTree> trees(cfg.n_trees);
  std::vector<std::vector<double>> gains(cfg.n_trees,
                                         std::vector<double>(d, 0.0));
  parallel_for(cfg.n_trees, workers, [&](std::size_t t) {
    trees[t] = build_rf_tree(binned, train.labels, n_classes, cfg,
                             rng.with("tree").with(t), gains[t]);
  });
  for (int t = 0; t < cfg.n_trees; ++t) {
    model.trees.push_back(std::move(trees[t]));
    model.tree_class.push_back(-1);
    for (std::size_t f = 0; f < d; ++f) model.feature_gain[f] += gains[t][f];
  }
  return model;
}

std::vector<std::vector<double>> predict_proba(const TreeEnsembleModel& m,
                                               const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  const std::size_t d = m.feature_names.empty()
                            ? (m.bin_upper.empty() ? 0 : m.bin_upper.size())
                            : m.feature_names.size();
  for (const auto& x : rows) {
    if (d > 0 && x.size() != d)
      throw std::invalid_argument("predict_proba: feature count mismatch");
    std::vector<double> p(m.n_classes, 0.0);
    if (m.kind == TreeEnsembleModel::Kind::kGbdt) {
      std::vector<double> score = m.base_score;
      for (std::size_t t = 0; t < m.trees.size(); ++t)
        score[m.tree_class[t]] += m.trees[t].predict(x);
      softmax_inplace(score);
      p = std::move(score);
    } else {
      for (const DecisionTree& t : m.trees) {
        const int vote = static_cast<int>(t.predict(x));
        p[std::clamp(vote, 0, m.n_classes - 1)] += 1.0;
      }
      for (double& v : p) v /= static_cast<double>(m.trees.size());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<int> predict_label(const TreeEnsembleModel& m,
                               const std::vector<std::vector<double>>& rows) {
  const auto proba = predict_proba(m, rows);
  std::vector<int> out;
  out.reserve(proba.size());
  for (const auto& p : proba) {
    int arg = 0;
    for (int k = 1; k < static_cast<int>(p.size()); ++k)
      if (p[k] > p[arg]) arg = k;
    out.push_back(arg);
  }
  return out;
}

Table feature_importance(const TreeEnsembleModel& m, int top_k) {
  std::vector<std::size_t> order(m.feature_gain.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (m.feature_gain[a] != m.feature_gain[b])
      return m.feature_gain[a] > m.feature_gain[b];
    return a < b;
  });
  Table t({"rank", "feature", "gain"});
  const std::size_t limit =
      top_k <= 0 ? order.size() : std::min<std::size_t>(top_k, order.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t f = order[i];
    const std::string name = f < m.feature_names.size()
                                 ? m.feature_names[f]
                                 : "f" + std::to_string(f);
    t.add_row({static_cast<double>(i + 1), name, m.feature_gain[f]});
  }
  return t;
}

namespace {

using json = nlohmann::ordered_json;

json tree_to_json(const DecisionTree& t) {
  json j;
  std::vector<int> feature, bin, left, right, count;
  std::vector<double> threshold, value, gain;
  for (const TreeNode& nd : t.nodes) {
    feature.push_back(nd.feature);
    threshold.push_back(nd.threshold);
    bin.push_back(nd.bin);
    left.push_back(nd.left);
    right.push_back(nd.right);
    value.push_back(nd.value);
    gain.push_back(nd.gain);
    count.push_back(nd.count);
  }
  j["record"] = "tree";
  j["feature"] = feature;
  j["threshold"] = threshold;
  j["bin"] = bin;
  j["left"] = left;
  j["right"] = right;
  j["value"] = value;
  j["gain"] = gain;
  j["count"] = count;
  return j;
}

DecisionTree tree_from_json(const json& j) {
  DecisionTree t;
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto bin = j.at("bin").get<std::vector<int>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto gain = j.at("gain").get<std::vector<double>>();
  const auto count = j.at("count").get<std::vector<int>>();
  for (std::size_t i = 0; i < feature.size(); ++i)
    t.nodes.push_back({feature[i], threshold[i], bin[i], left[i], right[i], value[i],
                       gain[i], count[i]});
  return t;
}

}  // namespace

std::size_t save_model(const TreeEnsembleModel& m, const std::filesystem::path& dest) {
  std::ofstream f(dest, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + dest.string() + " for writing");
  std::size_t bytes = 0;
  auto emit = [&](const json& j) {
    const std::string line = j.dump();
    f << line << '\n';
    bytes += line.size() + 1;
  };

  json header;
  header["record"] = "header";
  header["format"] = "model/1";
  header["kind"] =
      m.kind == TreeEnsembleModel::Kind::kGbdt ? "GBDT" : "RANDOM_FOREST";
  header["n_classes"] = m.n_classes;
  header["class_names"] = m.class_names;
  header["feature_names"] = m.feature_names;
  header["base_score"] = m.base_score;
  header["best_round"] = m.best_round;
  json gc;
  gc["n_rounds"] = m.gbdt_config.n_rounds;
  gc["learning_rate"] = m.gbdt_config.learning_rate;
  gc["growth"] = to_string(m.gbdt_config.growth);
  gc["max_leaves"] = m.gbdt_config.max_leaves;
  gc["max_depth"] = m.gbdt_config.max_depth;
  gc["n_bins"] = m.gbdt_config.n_bins;
  gc["l2_lambda"] = m.gbdt_config.l2_lambda;
  gc["min_child_weight"] = m.gbdt_config.min_child_weight;
  gc["row_subsample"] = m.gbdt_config.row_subsample;
  gc["feature_subsample"] = m.gbdt_config.feature_subsample;
  gc["seed"] = m.gbdt_config.seed;
  gc["early_stopping_rounds"] = m.gbdt_config.early_stopping_rounds;
  header["gbdt_config"] = gc;
  json rc;
  rc["n_trees"] = m.rf_config.n_trees;
  rc["max_depth"] = m.rf_config.max_depth;
  rc["feature_subsample"] = m.rf_config.feature_subsample;
  rc["min_samples_leaf"] = m.rf_config.min_samples_leaf;
  rc["seed"] = m.rf_config.seed;
  header["rf_config"] = rc;
  emit(header);

  for (std::size_t fidx = 0; fidx < m.bin_upper.size(); ++fidx) {
    json j;
    j["record"] = "bins";
    j["feature"] = fidx;
    j["cuts"] = m.bin_upper[fidx];
    emit(j);
  }
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    json j = tree_to_json(m.trees[t]);
    j["class"] = m.tree_class[t];
    emit(j);
  }
  json footer;
  footer["record"] = "footer";
  footer["feature_gain"] = m.feature_gain;
  footer["train_loss_per_round"] = m.train_loss_per_round;
  footer["valid_loss_per_round"] = m.valid_loss_per_round;
  emit(footer);
  if (!f) throw std::runtime_error("write failed");
  return bytes;
}

TreeEnsembleModel load_model(const std::filesystem::path& source) {
  std::ifstream f(source, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + source.string());
  TreeEnsembleModel m;
  std::string line;
  bool saw_header = false, saw_footer = false;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line);
    const std::string record = j.at("record").get<std::string>();
    if (record == "header") {
      if (j.at("format").get<std::string>() != "model/1")
        throw std::runtime_error("unknown model format version");
      m.kind = j.at("kind").get<std::string>() == "GBDT"
                   ? TreeEnsembleModel::Kind::kGbdt
                   : TreeEnsembleModel::Kind::kRandomForest;
      m.n_classes = j.at("n_classes").get<int>();
      m.class_names = j.at("class_names").get<std::vector<std::string>>();
      m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      m.base_score = j.at("base_score").get<std::vector<double>>();
      m.best_round = j.at("best_round").get<int>();
      const json& gc = j.at("gbdt_config");
      m.gbdt_config.n_rounds = gc.at("n_rounds").get<int>();
      m.gbdt_config.learning_rate = gc.at("learning_rate").get<double>();
      m.gbdt_config.growth =
          parse_growth(gc.at("growth").get<std::string>()).value();
      m.gbdt_config.max_leaves = gc.at("max_leaves").get<int>();
      m.gbdt_config.max_depth = gc.at("max_depth").get<int>();
      m.gbdt_config.n_bins = gc.at("n_bins").get<int>();
      m.gbdt_config.l2_lambda = gc.at("l2_lambda").get<double>();
      m.gbdt_config.min_child_weight = gc.at("min_child_weight").get<double>();
      m.gbdt_config.row_subsample = gc.at("row_subsample").get<double>();
      m.gbdt_config.feature_subsample = gc.at("feature_subsample").get<double>();
      m.gbdt_config.seed = gc.at("seed").get<std::uint64_t>();
      m.gbdt_config.early_stopping_rounds = gc.at("early_stopping_rounds").get<int>();
      const json& rc = j.at("rf_config");
      m.rf_config.n_trees = rc.at("n_trees").get<int>();
      m.rf_config.max_depth = rc.at("max_depth").get<int>();
      m.rf_config.feature_subsample = rc.at("feature_subsample").get<double>();
      m.rf_config.min_samples_leaf = rc.at("min_samples_leaf").get<int>();
      m.rf_config.seed = rc.at("seed").get<std::uint64_t>();
      saw_header = true;
    } else if (record == "bins") {
      const std::size_t fidx = j.at("feature").get<std::size_t>();
      if (m.bin_upper.size() <= fidx) m.bin_upper.resize(fidx + 1);
      m.bin_upper[fidx] = j.at("cuts").get<std::vector<double>>();
    } else if (record == "tree") {
      m.trees.push_back(tree_from_json(j));
      m.tree_class.push_back(j.at("class").get<int>());
    } else if (record == "footer") {
      m.feature_gain = j.at("feature_gain").get<std::vector<double>>();
      m.train_loss_per_round =
          j.at("train_loss_per_round").get<std::vector<double>>();
      m.valid_loss_per_round =
          j.at("valid_loss_per_round").get<std::vector<double>>();
      saw_footer = true;
    } else {
      throw std::runtime_error("unknown model record '" + record + "' at line " +
                               std::to_string(line_no));
    }
  }
  if (!saw_header || !saw_footer)
    throw std::runtime_error("model file missing header or footer record");
  return m;
}

}  // namespace gridfail
