#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "famclass/cluster.hpp"
#include "famclass/common.hpp"
#include "famclass/features.hpp"
#include "famclass/forest.hpp"

// Adaptive weighted ensemble: one SAMME AdaBoost classifier per cluster;
// at predict time each classifier's vote is weighted by the sample's
// weighted distance to that cluster's center, w_j = (1+d_j)^-1 normalized
// over clusters.

namespace famclass {

struct BoostConfig {
  std::size_t n_rounds = 50;
  std::size_t weak_depth = 3;
  std::uint64_t seed = 0;
};

struct BoostedClassifier {
  struct Round {
    DecisionTree learner;
    double alpha = 0.0;
  };
  std::vector<Round> rounds;
  std::vector<std::int32_t> families_present;  // global family ids seen in this cluster
  std::int32_t constant_family = -1;  // fallback when rounds is empty

  // Normalized weighted-vote share per global family; families absent from
  // the cluster's training data get probability 0.
  std::vector<double> predict_proba(const FeatureVector& x, std::size_t n_families) const {
    std::vector<double> probs(n_families, 0.0);
    if (rounds.empty()) {
      if (constant_family >= 0) probs[static_cast<std::size_t>(constant_family)] = 1.0;
      return probs;
    }
    double total = 0.0;
    for (const Round& r : rounds) {
      auto local = static_cast<std::size_t>(r.learner.predict_vec(x));
      probs[static_cast<std::size_t>(families_present[local])] += r.alpha;
      total += r.alpha;
    }
    if (total > 0.0)
      for (double& p : probs) p /= total;
    return probs;
  }

  std::int32_t predict(const FeatureVector& x, std::size_t n_families) const {
    std::vector<double> p = predict_proba(x, n_families);
    return static_cast<std::int32_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

// Multiclass SAMME over depth-limited information-gain trees. Labels are
// global family ids; internally the cluster's present families are packed
// so the admissibility threshold uses the cluster's own class count. A
// single-family cluster yields a constant classifier with zero rounds.
inline BoostedClassifier train_adaboost(const BoolMatrix& x,
                                        const std::vector<std::int32_t>& labels,
                                        const std::vector<std::uint32_t>& row_indices,
                                        const BoostConfig& cfg) {
  if (row_indices.empty()) throw DataError("train_adaboost: empty row set");

  BoostedClassifier clf;
  for (std::uint32_t r : row_indices) clf.families_present.push_back(labels[r]);
  std::sort(clf.families_present.begin(), clf.families_present.end());
  clf.families_present.erase(
      std::unique(clf.families_present.begin(), clf.families_present.end()),
      clf.families_present.end());
  const std::size_t n_local = clf.families_present.size();

  // Local (packed) labels.
  std::vector<std::int32_t> local(labels.size(), -1);
  for (std::uint32_t r : row_indices) {
    auto it = std::lower_bound(clf.families_present.begin(), clf.families_present.end(),
                               labels[r]);
    local[r] = static_cast<std::int32_t>(it - clf.families_present.begin());
  }

  if (n_local == 1) {
    clf.constant_family = clf.families_present[0];
    return clf;
  }

  const std::size_t m = row_indices.size();
  std::vector<double> w(labels.size(), 0.0);
  for (std::uint32_t r : row_indices) w[r] = 1.0 / static_cast<double>(m);

  const double admissible = 1.0 - 1.0 / static_cast<double>(n_local);
  for (std::size_t round = 0; round < cfg.n_rounds; ++round) {
    TreeConfig tree_cfg{cfg.weak_depth, /*mtry=*/0, cfg.seed};
    DecisionTree learner = train_tree(x, local, w, row_indices, n_local, tree_cfg);

    double err = 0.0;
    std::vector<std::int32_t> preds(m);
    for (std::size_t i = 0; i < m; ++i) {
      std::uint32_t r = row_indices[i];
      preds[i] = learner.predict([&](std::uint32_t c) { return x.get(r, c); });
      if (preds[i] != local[r]) err += w[r];
    }

    if (err >= admissible) {
      if (clf.rounds.empty()) {
        // No admissible weak learner at all; fall back to the weighted
        // majority family so the classifier still answers.
        std::vector<double> mass(n_local, 0.0);
        for (std::uint32_t r : row_indices) mass[static_cast<std::size_t>(local[r])] += w[r];
        auto best = static_cast<std::size_t>(
            std::max_element(mass.begin(), mass.end()) - mass.begin());
        clf.constant_family = clf.families_present[best];
        log_warn("boosting halted before any admissible round; constant classifier");
      }
      break;
    }

    constexpr double kErrFloor = 1e-12;
    double clamped = std::max(err, kErrFloor);
    double alpha = std::log((1.0 - clamped) / clamped) +
                   std::log(static_cast<double>(n_local) - 1.0);
    clf.rounds.push_back(BoostedClassifier::Round{std::move(learner), alpha});

    if (err <= kErrFloor) break;  // perfect learner; further rounds are no-ops

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      std::uint32_t r = row_indices[i];
      if (preds[i] != local[r]) w[r] *= std::exp(alpha);
      total += w[r];
    }
    for (std::uint32_t r : row_indices) w[r] /= total;
  }

  if (clf.rounds.empty() && clf.constant_family < 0) {
    std::vector<double> mass(n_local, 0.0);
    for (std::uint32_t r : row_indices) mass[static_cast<std::size_t>(local[r])] += w[r];
    auto best = static_cast<std::size_t>(
        std::max_element(mass.begin(), mass.end()) - mass.begin());
    clf.constant_family = clf.families_present[best];
  }
  return clf;
}

struct EnsembleModel {
  std::size_t k = 0;
  DenseRows centers;
  WeightVector weights;  // per-dimension weights for the distance (Eq. 5)
  std::vector<BoostedClassifier> classifiers;
  std::vector<std::string> families;  // global label list

  std::size_t dimension() const { return weights.size(); }
};

// Row of the distance matrix: the sample's weighted distance to every
// cluster center.
inline std::vector<double> distance_row(const FeatureVector& x, const EnsembleModel& model) {
  if (x.dimension != model.dimension())
    throw DimensionMismatch("distance_row: vector dimension " + std::to_string(x.dimension) +
                            " != model dimension " + std::to_string(model.dimension()));
  std::vector<double> dense = dense_from_vec(x);
  std::vector<double> d(model.k, 0.0);
  for (std::size_t j = 0; j < model.k; ++j)
    d[j] = weighted_distance(dense, model.centers[j], model.weights);
  return d;
}

// w_j = (1 + d_j)^-1 / sum_q (1 + d_q)^-1; rows sum to 1, entries in (0, 1].
inline std::vector<double> adaptive_weights(const std::vector<double>& distances) {
  std::vector<double> w(distances.size(), 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < distances.size(); ++j) {
    w[j] = 1.0 / (1.0 + distances[j]);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

// P(y = u) = sum_j P(F_j(y) = u) * w_j; argmax with ties to the earliest
// family in the global order.
inline std::pair<std::int32_t, std::vector<double>> predict(const FeatureVector& x,
                                                            const EnsembleModel& model) {
  std::vector<double> w = adaptive_weights(distance_row(x, model));
  std::vector<double> score(model.families.size(), 0.0);
  for (std::size_t j = 0; j < model.k; ++j) {
    std::vector<double> p = model.classifiers[j].predict_proba(x, model.families.size());
    for (std::size_t u = 0; u < score.size(); ++u) score[u] += w[j] * p[u];
  }
  auto label = static_cast<std::int32_t>(
      std::max_element(score.begin(), score.end()) - score.begin());
  return {label, std::move(score)};
}

// One boosted classifier per cluster, trained on that cluster's rows only.
inline EnsembleModel train_ensemble(const LabeledDataset& dataset,
                                    const ClusterModel& clusters, const BoostConfig& cfg) {
  if (clusters.assignments.size() != dataset.rows.size())
    throw DimensionMismatch("train_ensemble: cluster model does not match dataset");
  EnsembleModel model;
  model.k = clusters.k;
  model.centers = clusters.centers;
  model.weights = clusters.weights;
  model.families = dataset.families;

  BoolMatrix x = BoolMatrix::from_dataset(dataset);
  std::vector<std::int32_t> labels(dataset.rows.size());
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    labels[r] = dataset.rows[r].effective_train_label();
    if (labels[r] < 0)
      throw DataError("train_ensemble: unlabeled row '" + dataset.rows[r].id + "'");
  }

  std::vector<std::vector<std::uint32_t>> members(clusters.k);
  for (std::size_t r = 0; r < dataset.rows.size(); ++r)
    members[clusters.assignments[r]].push_back(static_cast<std::uint32_t>(r));

  model.classifiers.resize(clusters.k);
  parallel_for(clusters.k, [&](std::size_t j) {
    if (members[j].empty()) {
      // Unfillable cluster (duplicate-heavy data): neutral constant on the
      // globally most common family.
      std::vector<std::size_t> counts(model.families.size(), 0);
      for (std::int32_t y : labels) ++counts[static_cast<std::size_t>(y)];
      BoostedClassifier c;
      c.constant_family = static_cast<std::int32_t>(
          std::max_element(counts.begin(), counts.end()) - counts.begin());
      c.families_present = {c.constant_family};
      model.classifiers[j] = std::move(c);
      return;
    }
    BoostConfig local = cfg;
    local.seed = derive_seed(cfg.seed, "boost", j);
    model.classifiers[j] = train_adaboost(x, labels, members[j], local);
  });
  return model;
}

}  // namespace famclass
