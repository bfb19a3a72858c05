#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/features.hpp"

// From-scratch random forest over binary features: multiclass trees split by
// information gain, bootstrap aggregation, out-of-bag error, and per-column
// permutation importance (shuffle the column within each tree's OOB rows,
// importance = sum over trees of (e2 - e1) / N_t).

namespace famclass {

// Row-major bit matrix; O(1) column tests during training.
class BoolMatrix {
 public:
  BoolMatrix() = default;
  BoolMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), stride_((cols + 63) / 64), bits_(rows * stride_, 0) {}

  static BoolMatrix from_dataset(const LabeledDataset& ds) {
    BoolMatrix m(ds.rows.size(), ds.dimension());
    for (std::size_t r = 0; r < ds.rows.size(); ++r)
      for (std::uint32_t c : ds.rows[r].vec.columns) m.set(r, c);
    return m;
  }

  void set(std::size_t r, std::size_t c) {
    bits_[r * stride_ + c / 64] |= std::uint64_t{1} << (c % 64);
  }
  bool get(std::size_t r, std::size_t c) const {
    return (bits_[r * stride_ + c / 64] >> (c % 64)) & 1;
  }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_ = 0, cols_ = 0, stride_ = 0;
  std::vector<std::uint64_t> bits_;
};

struct DecisionTree {
  struct Node {
    std::int32_t column = -1;  // -1 = leaf
    std::int32_t left = -1;    // child when the feature is 0
    std::int32_t right = -1;   // child when the feature is 1
    std::vector<double> dist;  // leaf class counts (weighted)
  };
  std::vector<Node> nodes;                 // nodes[0] is the root
  std::vector<std::uint32_t> used_columns; // sorted distinct split columns
  std::size_t n_classes = 0;

  bool uses_column(std::uint32_t c) const {
    return std::binary_search(used_columns.begin(), used_columns.end(), c);
  }

  // `value_of` maps column -> bool.
  template <typename ValueFn>
  const std::vector<double>& leaf_dist(ValueFn&& value_of) const {
    std::size_t i = 0;
    while (nodes[i].column >= 0)
      i = static_cast<std::size_t>(value_of(static_cast<std::uint32_t>(nodes[i].column))
                                       ? nodes[i].right
                                       : nodes[i].left);
    return nodes[i].dist;
  }

  template <typename ValueFn>
  std::int32_t predict(ValueFn&& value_of) const {
    const std::vector<double>& d = leaf_dist(value_of);
    return static_cast<std::int32_t>(std::max_element(d.begin(), d.end()) - d.begin());
  }

  std::int32_t predict_vec(const FeatureVector& x) const {
    return predict([&](std::uint32_t c) { return x.test(c); });
  }
};

struct TreeConfig {
  std::size_t max_depth = 16;
  std::size_t mtry = 0;  // columns sampled per node; 0 = use all columns
  std::uint64_t seed = 0;
};

namespace detail {

inline double weighted_entropy(const std::vector<double>& counts, double total) {
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double c : counts) {
    if (c <= 0.0) continue;
    double p = c / total;
    h -= p * std::log2(p);
  }
  return h;
}

class TreeBuilder {
 public:
  TreeBuilder(const BoolMatrix& x, const std::vector<std::int32_t>& y,
              const std::vector<double>& w, std::size_t n_classes, const TreeConfig& cfg)
      : x_(x), y_(y), w_(w), n_classes_(n_classes), cfg_(cfg) {}

  DecisionTree build(std::vector<std::uint32_t> row_indices) {
    tree_.n_classes = n_classes_;
    rows_ = std::move(row_indices);
    build_node(0, rows_.size(), 0, 0);
    std::sort(tree_.used_columns.begin(), tree_.used_columns.end());
    tree_.used_columns.erase(
        std::unique(tree_.used_columns.begin(), tree_.used_columns.end()),
        tree_.used_columns.end());
    return std::move(tree_);
  }

 private:
  // Candidate columns at a node get their own seed derived from the tree
  // seed and the node's (depth, path), so a deeper depth limit grows the
  // same tree further instead of reshuffling sibling subtrees.
  std::vector<std::uint32_t> sample_candidates(std::size_t depth, std::uint64_t path) {
    const std::size_t d = x_.cols();
    if (cfg_.mtry == 0 || cfg_.mtry >= d) {
      std::vector<std::uint32_t> all(d);
      std::iota(all.begin(), all.end(), 0u);
      return all;
    }
    std::uint64_t node_key = (static_cast<std::uint64_t>(depth) << 48) ^ path;
    Rng rng(derive_seed(cfg_.seed, "node", node_key));
    // Floyd's sampling: mtry distinct values in [0, d).
    std::set<std::uint32_t> chosen;
    for (std::size_t i = d - cfg_.mtry; i < d; ++i) {
      auto v = static_cast<std::uint32_t>(rng.bounded(i + 1));
      if (!chosen.insert(v).second) chosen.insert(static_cast<std::uint32_t>(i));
    }
    return {chosen.begin(), chosen.end()};
  }

  std::int32_t build_node(std::size_t begin, std::size_t end, std::size_t depth,
                          std::uint64_t path) {
    std::vector<double> counts(n_classes_, 0.0);
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      counts[static_cast<std::size_t>(y_[rows_[i]])] += w_[rows_[i]];
      total += w_[rows_[i]];
    }
    std::size_t n_present = 0;
    for (double c : counts)
      if (c > 0.0) ++n_present;

    bool make_leaf = depth >= cfg_.max_depth || (end - begin) < 2 || n_present <= 1;
    std::int32_t best_col = -1;
    if (!make_leaf) {
      double parent_h = weighted_entropy(counts, total);
      double best_gain = 0.0;
      std::vector<double> right(n_classes_);
      for (std::uint32_t col : sample_candidates(depth, path)) {
        std::fill(right.begin(), right.end(), 0.0);
        double right_total = 0.0;
        std::size_t right_n = 0;
        for (std::size_t i = begin; i < end; ++i) {
          if (x_.get(rows_[i], col)) {
            right[static_cast<std::size_t>(y_[rows_[i]])] += w_[rows_[i]];
            right_total += w_[rows_[i]];
            ++right_n;
          }
        }
        if (right_n == 0 || right_n == end - begin) continue;  // useless split
        std::vector<double> left(n_classes_);
        for (std::size_t k = 0; k < n_classes_; ++k) left[k] = counts[k] - right[k];
        double left_total = total - right_total;
        double cond = (right_total * weighted_entropy(right, right_total) +
                       left_total * weighted_entropy(left, left_total)) /
                      total;
        double gain = parent_h - cond;
        if (gain > best_gain + 1e-15) {  // first (lowest) column wins ties
          best_gain = gain;
          best_col = static_cast<std::int32_t>(col);
        }
      }
      if (best_col < 0) make_leaf = true;
    }

    if (make_leaf) {
      auto idx = static_cast<std::int32_t>(tree_.nodes.size());
      tree_.nodes.emplace_back();
      tree_.nodes.back().dist = std::move(counts);
      return idx;
    }

    auto mid_it = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::uint32_t r) {
                                   return !x_.get(r, static_cast<std::uint32_t>(best_col));
                                 });
    auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    auto idx = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(idx)].column = best_col;
    tree_.used_columns.push_back(static_cast<std::uint32_t>(best_col));
    std::int32_t left = build_node(begin, mid, depth + 1, path << 1);
    std::int32_t right = build_node(mid, end, depth + 1, (path << 1) | 1);
    tree_.nodes[static_cast<std::size_t>(idx)].left = left;
    tree_.nodes[static_cast<std::size_t>(idx)].right = right;
    return idx;
  }

  const BoolMatrix& x_;
  const std::vector<std::int32_t>& y_;
  const std::vector<double>& w_;
  std::size_t n_classes_;
  TreeConfig cfg_;
  std::vector<std::uint32_t> rows_;
  DecisionTree tree_;
};

}  // namespace detail

inline DecisionTree train_tree(const BoolMatrix& x, const std::vector<std::int32_t>& y,
                               const std::vector<double>& w,
                               const std::vector<std::uint32_t>& row_indices,
                               std::size_t n_classes, const TreeConfig& cfg) {
  return detail::TreeBuilder(x, y, w, n_classes, cfg).build(row_indices);
}

struct ForestModel {
  std::vector<DecisionTree> trees;
  std::vector<std::vector<std::uint32_t>> bootstraps;  // per tree, with multiplicity
  std::vector<std::vector<std::uint32_t>> oob;         // per tree, sorted complement
  std::vector<std::string> families;
  std::uint64_t rng_seed = 0;
  std::size_t max_depth = 0;

  // Training snapshot used by OOB statistics and permutation importance.
  BoolMatrix x;
  std::vector<std::int32_t> y;
};

struct ImportanceVector {
  std::vector<double> values;  // per column; may be negative
};

struct OobStats {
  std::vector<double> per_tree;  // e1 per tree
  double aggregate = 0.0;        // ensemble-vote OOB error over covered rows
  std::size_t covered = 0;
  std::size_t uncovered = 0;  // rows that are OOB for zero trees
};

inline ForestModel train_forest_raw(BoolMatrix x, std::vector<std::int32_t> y,
                                    std::vector<std::string> families, std::size_t n_trees,
                                    std::size_t max_depth, std::uint64_t seed) {
  if (x.rows() == 0) throw DataError("cannot train a forest on an empty dataset");
  if (families.size() < 2) throw DegenerateLabels("forest training needs at least 2 families");

  ForestModel model;
  model.families = std::move(families);
  model.rng_seed = seed;
  model.max_depth = max_depth;
  model.x = std::move(x);
  model.y = std::move(y);

  const std::size_t m = model.x.rows();
  const std::size_t d = model.x.cols();
  const auto mtry = static_cast<std::size_t>(
      std::max(1.0, std::floor(std::sqrt(static_cast<double>(d)))));
  const std::vector<double> unit_weights(m, 1.0);

  model.trees.resize(n_trees);
  model.bootstraps.resize(n_trees);
  model.oob.resize(n_trees);
  parallel_for(n_trees, [&](std::size_t t) {
    std::uint64_t tree_seed = derive_seed(seed, "tree", t);
    Rng rng(derive_seed(tree_seed, "bootstrap"));
    std::vector<std::uint32_t> boot(m);
    std::vector<char> in_bag(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      auto r = static_cast<std::uint32_t>(rng.bounded(m));
      boot[i] = r;
      in_bag[r] = 1;
    }
    std::vector<std::uint32_t> oob;
    for (std::uint32_t r = 0; r < m; ++r)
      if (!in_bag[r]) oob.push_back(r);
    TreeConfig cfg{max_depth, mtry, tree_seed};
    model.trees[t] = train_tree(model.x, model.y, unit_weights, boot,
                                model.families.size(), cfg);
    model.bootstraps[t] = std::move(boot);
    model.oob[t] = std::move(oob);
  });
  return model;
}

inline ForestModel train_forest(const LabeledDataset& dataset, std::size_t n_trees,
                                std::size_t max_depth, std::uint64_t seed) {
  std::vector<std::int32_t> y(dataset.rows.size());
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    y[r] = dataset.rows[r].effective_train_label();
    if (y[r] < 0)
      throw DataError("forest training requires a label on every row (row '" +
                      dataset.rows[r].id + "')");
  }
  return train_forest_raw(BoolMatrix::from_dataset(dataset), std::move(y), dataset.families,
                          n_trees, max_depth, seed);
}

// Mean of per-tree normalized leaf distributions; argmax label, ties to the
// earliest family.
inline std::pair<std::int32_t, std::vector<double>> predict_forest(const ForestModel& model,
                                                                   const FeatureVector& x) {
  if (x.dimension != model.x.cols())
    throw DimensionMismatch("feature vector dimension " + std::to_string(x.dimension) +
                            " != model dimension " + std::to_string(model.x.cols()));
  std::vector<double> probs(model.families.size(), 0.0);
  for (const DecisionTree& tree : model.trees) {
    const std::vector<double>& d = tree.leaf_dist([&](std::uint32_t c) { return x.test(c); });
    double total = std::accumulate(d.begin(), d.end(), 0.0);
    if (total <= 0.0) continue;
    for (std::size_t k = 0; k < probs.size(); ++k) probs[k] += d[k] / total;
  }
  if (!model.trees.empty())
    for (double& p : probs) p /= static_cast<double>(model.trees.size());
  auto label = static_cast<std::int32_t>(
      std::max_element(probs.begin(), probs.end()) - probs.begin());
  return {label, std::move(probs)};
}

namespace detail {

inline double tree_oob_error(const ForestModel& model, std::size_t t) {
  const auto& oob = model.oob[t];
  if (oob.empty()) return 0.0;
  std::size_t wrong = 0;
  for (std::uint32_t r : oob) {
    std::int32_t pred = model.trees[t].predict(
        [&](std::uint32_t c) { return model.x.get(r, c); });
    if (pred != model.y[r]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(oob.size());
}

}  // namespace detail

inline OobStats oob_error(const ForestModel& model) {
  OobStats stats;
  stats.per_tree.resize(model.trees.size(), 0.0);
  parallel_for(model.trees.size(), [&](std::size_t t) {
    stats.per_tree[t] = detail::tree_oob_error(model, t);
  });

  // Ensemble vote per row over the trees for which the row is out of bag.
  const std::size_t m = model.y.size();
  std::vector<std::vector<double>> votes(m);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    for (std::uint32_t r : model.oob[t]) {
      const std::vector<double>& d = model.trees[t].leaf_dist(
          [&](std::uint32_t c) { return model.x.get(r, c); });
      double total = std::accumulate(d.begin(), d.end(), 0.0);
      if (total <= 0.0) continue;
      if (votes[r].empty()) votes[r].assign(model.families.size(), 0.0);
      for (std::size_t k = 0; k < d.size(); ++k) votes[r][k] += d[k] / total;
    }
  }
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (votes[r].empty()) {
      ++stats.uncovered;
      continue;
    }
    ++stats.covered;
    auto pred = static_cast<std::int32_t>(
        std::max_element(votes[r].begin(), votes[r].end()) - votes[r].begin());
    if (pred != model.y[r]) ++wrong;
  }
  stats.aggregate = stats.covered == 0
                        ? 0.0
                        : static_cast<double>(wrong) / static_cast<double>(stats.covered);
  if (stats.uncovered > 0)
    log_warn(std::to_string(stats.uncovered) +
             " rows were never out of bag; excluded from the OOB error");
  return stats;
}

namespace detail {

// e2 for one (tree, column): the column is shuffled within the tree's OOB
// rows; every other column keeps its value.
inline double tree_permuted_error(const ForestModel& model, std::size_t t,
                                  std::uint32_t column, std::uint64_t seed) {
  const auto& oob = model.oob[t];
  if (oob.empty()) return 0.0;
  std::vector<std::uint32_t> donor(oob.begin(), oob.end());
  Rng rng(seed);
  rng.shuffle(donor);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < oob.size(); ++i) {
    std::uint32_t r = oob[i];
    bool forced = model.x.get(donor[i], column);
    std::int32_t pred = model.trees[t].predict([&](std::uint32_t c) {
      return c == column ? forced : model.x.get(r, c);
    });
    if (pred != model.y[r]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(oob.size());
}

inline std::uint64_t perm_seed(const ForestModel& model, std::uint64_t seed, std::size_t t,
                               std::uint32_t column) {
  return derive_seed(seed, "permute", static_cast<std::uint64_t>(t) * model.x.cols() + column);
}

}  // namespace detail

// Eq-style single-column importance: sum over trees of (e2 - e1) / N_t.
// Trees whose splits never touch the column leave their OOB predictions
// unchanged, so they contribute exactly 0.
inline double permutation_importance(const ForestModel& model, std::uint32_t column,
                                     std::uint64_t seed) {
  const auto n_trees = static_cast<double>(model.trees.size());
  if (n_trees == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    if (!model.trees[t].uses_column(column)) continue;
    double e1 = detail::tree_oob_error(model, t);
    double e2 = detail::tree_permuted_error(model, t, column,
                                            detail::perm_seed(model, seed, t, column));
    sum += e2 - e1;
  }
  return sum / n_trees;
}

// All-column importance. Identical to calling permutation_importance per
// column (same per-(tree,column) seeds) but only evaluates columns a tree
// actually splits on.
inline ImportanceVector permutation_importances(const ForestModel& model, std::uint64_t seed) {
  const std::size_t n_trees = model.trees.size();
  ImportanceVector imp;
  imp.values.assign(model.x.cols(), 0.0);
  if (n_trees == 0) return imp;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> deltas(n_trees);
  parallel_for(n_trees, [&](std::size_t t) {
    double e1 = detail::tree_oob_error(model, t);
    for (std::uint32_t col : model.trees[t].used_columns) {
      double e2 = detail::tree_permuted_error(model, t, col,
                                              detail::perm_seed(model, seed, t, col));
      deltas[t].emplace_back(col, e2 - e1);
    }
  });
  for (std::size_t t = 0; t < n_trees; ++t)  // fixed tree order
    for (const auto& [col, delta] : deltas[t]) imp.values[col] += delta;
  for (double& v : imp.values) v /= static_cast<double>(n_trees);
  return imp;
}

struct FeatureSelection {
  std::vector<std::uint32_t> kept_columns;  // old column ids, in new column order
  LabeledDataset reduced;
};

// Keeps the top_k columns by importance (ties by token, ascending) and
// rebuilds the dictionary and rows on the subset. top_k >= dimension is the
// identity reduction.
inline FeatureSelection select_top_features(const LabeledDataset& dataset,
                                            const ImportanceVector& importances,
                                            std::size_t top_k) {
  const std::size_t d = dataset.dimension();
  if (importances.values.size() != d)
    throw DimensionMismatch("importance vector length != dataset dimension");
  if (top_k > d) {
    log_warn("top_k " + std::to_string(top_k) + " exceeds dimension " + std::to_string(d) +
             "; keeping all columns");
    top_k = d;
  }
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (importances.values[a] != importances.values[b])
      return importances.values[a] > importances.values[b];
    return dataset.dictionary.entries[a].token < dataset.dictionary.entries[b].token;
  });
  order.resize(top_k);

  std::vector<std::string> tokens;
  tokens.reserve(top_k);
  for (std::uint32_t c : order) tokens.push_back(dataset.dictionary.entries[c].token);

  FeatureSelection sel;
  sel.reduced.dictionary = FeatureDictionary::from_tokens(tokens);
  sel.reduced.families = dataset.families;
  sel.kept_columns.resize(top_k);
  std::vector<std::int32_t> old_to_new(d, -1);
  for (std::uint32_t c : order) {
    auto new_col = sel.reduced.dictionary.index.at(dataset.dictionary.entries[c].token);
    sel.kept_columns[new_col] = c;
    old_to_new[c] = static_cast<std::int32_t>(new_col);
  }
  sel.reduced.rows.reserve(dataset.rows.size());
  for (const DatasetRow& row : dataset.rows) {
    DatasetRow r;
    r.id = row.id;
    r.label = row.label;
    r.train_label = row.train_label;
    r.vec.dimension = static_cast<std::uint32_t>(top_k);
    for (std::uint32_t c : row.vec.columns)
      if (old_to_new[c] >= 0) r.vec.columns.push_back(static_cast<std::uint32_t>(old_to_new[c]));
    std::sort(r.vec.columns.begin(), r.vec.columns.end());
    sel.reduced.rows.push_back(std::move(r));
  }
  return sel;
}

}  // namespace famclass
