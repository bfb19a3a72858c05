#include "famclass/forest.hpp"

#include <gtest/gtest.h>

#include <numeric>

#include "test_util.hpp"

using namespace famclass;

namespace {

LabeledDataset make_dataset(std::size_t n_cols,
                            const std::vector<std::vector<std::uint32_t>>& rows,
                            const std::vector<std::int32_t>& labels,
                            const std::vector<std::string>& families) {
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n_cols; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "perm:col%03zu", i);
    tokens.emplace_back(buf);
  }
  LabeledDataset ds;
  ds.dictionary = FeatureDictionary::from_tokens(tokens);
  ds.families = families;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    DatasetRow row;
    row.id = "r" + std::to_string(r);
    row.vec.dimension = static_cast<std::uint32_t>(n_cols);
    row.vec.columns = rows[r];
    std::sort(row.vec.columns.begin(), row.vec.columns.end());
    row.label = labels[r];
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

// Two families, four columns, all informative (col0/col2 mark family A,
// col1/col3 mark family B), fully separable.
LabeledDataset separable_toy() {
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({0, 2});
    labels.push_back(0);
    rows.push_back({1, 3});
    labels.push_back(1);
  }
  return make_dataset(4, rows, labels, {"famA", "famB"});
}

// Planted multiclass corpus: family f owns columns {2f, 2f+1} (present with
// probability 0.95); noise columns are family-independent.
LabeledDataset planted_corpus(std::size_t n_fam, std::size_t per_fam, std::size_t n_noise,
                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  const std::size_t n_cols = 2 * n_fam + n_noise;
  std::vector<std::string> fams;
  for (std::size_t f = 0; f < n_fam; ++f) fams.push_back("fam" + std::to_string(f));
  for (std::size_t f = 0; f < n_fam; ++f) {
    for (std::size_t s = 0; s < per_fam; ++s) {
      std::vector<std::uint32_t> cols;
      for (std::uint32_t c : {static_cast<std::uint32_t>(2 * f), static_cast<std::uint32_t>(2 * f + 1)})
        if (rng.uniform() < 0.95) cols.push_back(c);
      for (std::size_t i = 0; i < n_noise; ++i)
        if (rng.uniform() < 0.3) cols.push_back(static_cast<std::uint32_t>(2 * n_fam + i));
      rows.push_back(std::move(cols));
      labels.push_back(static_cast<std::int32_t>(f));
    }
  }
  return make_dataset(n_cols, rows, labels, fams);
}

double training_accuracy(const ForestModel& model, const LabeledDataset& ds) {
  std::size_t ok = 0;
  for (std::size_t r = 0; r < ds.rows.size(); ++r)
    if (predict_forest(model, ds.rows[r].vec).first == ds.rows[r].label) ++ok;
  return static_cast<double>(ok) / static_cast<double>(ds.rows.size());
}

}  // namespace

TEST(Forest, SeparableToyReachesPerfectTrainingAccuracy) {
  auto ds = separable_toy();
  auto model = train_forest(ds, 25, 16, 7);
  EXPECT_DOUBLE_EQ(training_accuracy(model, ds), 1.0);
}

TEST(Forest, SameSeedSamePredictions) {
  auto ds = planted_corpus(3, 15, 6, 21);
  auto m1 = train_forest(ds, 20, 10, 1234);
  auto m2 = train_forest(ds, 20, 10, 1234);
  for (const DatasetRow& row : ds.rows) {
    auto [l1, p1] = predict_forest(m1, row.vec);
    auto [l2, p2] = predict_forest(m2, row.vec);
    EXPECT_EQ(l1, l2);
    EXPECT_EQ(p1, p2);
  }
}

TEST(Forest, PlantedCorpusOobAccuracy) {
  auto ds = planted_corpus(10, 20, 10, 5);
  auto model = train_forest(ds, 60, 16, 17);
  auto stats = oob_error(model);
  EXPECT_LE(stats.aggregate, 0.10);
  EXPECT_EQ(stats.covered + stats.uncovered, ds.rows.size());
}

TEST(Forest, SingleTreePredictionEqualsTreeMajority) {
  auto ds = separable_toy();
  auto model = train_forest(ds, 1, 8, 3);
  ASSERT_EQ(model.trees.size(), 1u);
  for (const DatasetRow& row : ds.rows) {
    std::int32_t tree_label = model.trees[0].predict_vec(row.vec);
    EXPECT_EQ(predict_forest(model, row.vec).first, tree_label);
  }
}

TEST(Forest, UnanimousTreesGiveProbabilityOne) {
  auto ds = separable_toy();
  auto model = train_forest(ds, 15, 16, 11);
  auto [label, probs] = predict_forest(model, ds.rows[0].vec);
  EXPECT_EQ(label, ds.rows[0].label);
  EXPECT_DOUBLE_EQ(probs[static_cast<std::size_t>(label)], 1.0);
}

// Hand-traced aggregation: the forest probability vector equals the average
// of the per-tree normalized leaf distributions, traversed independently.
TEST(Forest, FiveTreeAggregationMatchesHandTrace) {
  auto ds = planted_corpus(3, 12, 4, 77);
  auto model = train_forest(ds, 5, 6, 99);
  for (std::size_t r = 0; r < 6; ++r) {
    const FeatureVector& x = ds.rows[r].vec;
    std::vector<double> want(ds.families.size(), 0.0);
    for (const DecisionTree& tree : model.trees) {
      // Independent walk over the stored node array.
      std::size_t node = 0;
      while (tree.nodes[node].column >= 0) {
        bool val = x.test(static_cast<std::uint32_t>(tree.nodes[node].column));
        node = static_cast<std::size_t>(val ? tree.nodes[node].right : tree.nodes[node].left);
      }
      const auto& dist = tree.nodes[node].dist;
      double total = std::accumulate(dist.begin(), dist.end(), 0.0);
      for (std::size_t k = 0; k < want.size(); ++k) want[k] += dist[k] / total;
    }
    for (double& w : want) w /= 5.0;
    auto [label, probs] = predict_forest(model, x);
    ASSERT_EQ(probs.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(probs[k], want[k], 1e-15);
    EXPECT_EQ(label, static_cast<std::int32_t>(std::max_element(want.begin(), want.end()) -
                                               want.begin()));
  }
}

TEST(Forest, OobErrorNearZeroOnSeparableData) {
  auto ds = planted_corpus(4, 25, 5, 31);
  auto model = train_forest(ds, 80, 16, 13);
  EXPECT_LE(oob_error(model).aggregate, 0.05);
}

TEST(Forest, OobErrorAtChanceLevelForShuffledLabels) {
  auto ds = planted_corpus(4, 30, 5, 41);
  Rng rng(4242);
  std::vector<std::int32_t> labels;
  for (const auto& r : ds.rows) labels.push_back(r.label);
  rng.shuffle(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) ds.rows[i].label = labels[i];
  auto model = train_forest(ds, 60, 8, 15);
  double e1 = oob_error(model).aggregate;
  EXPECT_NEAR(e1, 1.0 - 1.0 / 4.0, 0.1);
}

TEST(Forest, SingleTreeOobUsesThatTreesSet) {
  auto ds = separable_toy();
  auto model = train_forest(ds, 1, 8, 29);
  auto stats = oob_error(model);
  ASSERT_EQ(stats.per_tree.size(), 1u);
  EXPECT_DOUBLE_EQ(stats.per_tree[0], stats.aggregate);
  EXPECT_EQ(stats.covered, model.oob[0].size());
}

TEST(Forest, ImportanceOfUnusedColumnIsExactlyZero) {
  // Column 4 never splits: it is constant 0.
  auto ds = separable_toy();
  // widen with an always-zero column by rebuilding with 5 columns
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  for (const auto& r : ds.rows) {
    rows.push_back(r.vec.columns);
    labels.push_back(r.label);
  }
  auto wide = make_dataset(5, rows, labels, ds.families);
  auto model = train_forest(wide, 30, 10, 19);
  for (const auto& tree : model.trees) EXPECT_FALSE(tree.uses_column(4));
  EXPECT_EQ(permutation_importance(model, 4, 1), 0.0);
  auto imp = permutation_importances(model, 1);
  EXPECT_EQ(imp.values[4], 0.0);
}

TEST(Forest, PlantedSignalColumnIsStrictMaximum) {
  // One perfectly discriminative column (0), eight noise columns.
  Rng rng(55);
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 40; ++i) {
    std::vector<std::uint32_t> cols;
    std::int32_t y = i % 2;
    if (y == 1) cols.push_back(0);
    for (std::uint32_t c = 1; c < 9; ++c)
      if (rng.bounded(2)) cols.push_back(c);
    rows.push_back(std::move(cols));
    labels.push_back(y);
  }
  auto ds = make_dataset(9, rows, labels, {"a", "b"});
  auto model = train_forest(ds, 50, 12, 23);
  auto imp = permutation_importances(model, 9);
  for (std::size_t c = 1; c < 9; ++c) EXPECT_GT(imp.values[0], imp.values[c]);
}

// Correlated-feature oracle: duplicating the informative column dilutes the
// importance each copy receives.
TEST(Forest, DuplicatedColumnImportanceIsDiluted) {
  Rng rng(66);
  std::vector<std::vector<std::uint32_t>> solo_rows, dup_rows;
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 30; ++i) {
    std::int32_t y = i % 2;
    std::vector<std::uint32_t> noise;
    for (std::uint32_t c = 0; c < 8; ++c)
      if (rng.bounded(2)) noise.push_back(c);
    std::vector<std::uint32_t> solo = noise, dup = noise;
    if (y == 1) {
      solo.push_back(8);
      dup.push_back(8);
      dup.push_back(9);  // exact copy of column 8
    }
    solo_rows.push_back(std::move(solo));
    dup_rows.push_back(std::move(dup));
    labels.push_back(y);
  }
  auto solo_ds = make_dataset(9, solo_rows, labels, {"a", "b"});
  auto dup_ds = make_dataset(10, dup_rows, labels, {"a", "b"});
  auto solo_model = train_forest(solo_ds, 80, 12, 37);
  auto dup_model = train_forest(dup_ds, 80, 12, 37);
  double alone = permutation_importances(solo_model, 5).values[8];
  auto dup_imp = permutation_importances(dup_model, 5);
  EXPECT_GT(alone, 0.0);
  EXPECT_GE(dup_imp.values[8], 0.0);
  EXPECT_GE(dup_imp.values[9], 0.0);
  EXPECT_LT(dup_imp.values[8], alone);
  EXPECT_LT(dup_imp.values[9], alone);
}

TEST(Forest, SingleColumnImportanceMatchesBatch) {
  auto ds = planted_corpus(3, 15, 6, 81);
  auto model = train_forest(ds, 25, 10, 43);
  auto batch = permutation_importances(model, 7);
  for (std::uint32_t c = 0; c < ds.dimension(); ++c)
    EXPECT_DOUBLE_EQ(permutation_importance(model, c, 7), batch.values[c]);
}

TEST(Forest, LeafCountsSumToBootstrapSize) {
  auto ds = planted_corpus(3, 12, 4, 91);
  auto model = train_forest(ds, 10, 8, 47);
  for (const DecisionTree& tree : model.trees) {
    double total = 0.0;
    for (const auto& node : tree.nodes)
      if (node.column < 0) total += std::accumulate(node.dist.begin(), node.dist.end(), 0.0);
    EXPECT_NEAR(total, static_cast<double>(ds.rows.size()), 1e-9);
  }
}

TEST(Forest, OobMasksDisjointFromBootstrap) {
  auto ds = planted_corpus(2, 20, 4, 3);
  auto model = train_forest(ds, 12, 8, 53);
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    std::set<std::uint32_t> bag(model.bootstraps[t].begin(), model.bootstraps[t].end());
    std::set<std::uint32_t> oob(model.oob[t].begin(), model.oob[t].end());
    for (std::uint32_t r : oob) EXPECT_FALSE(bag.count(r));
    EXPECT_EQ(bag.size() + oob.size(), ds.rows.size());
  }
}

// Per-tree fit on its own bootstrap rows never degrades as the depth limit
// grows (deeper limits regrow the same tree further).
TEST(Forest, BootstrapAccuracyMonotoneInDepth) {
  auto ds = planted_corpus(4, 20, 8, 9);
  double prev = -1.0;
  for (std::size_t depth : {1u, 2u, 4u, 8u, 16u}) {
    auto model = train_forest(ds, 15, depth, 61);
    double acc_sum = 0.0;
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      std::size_t ok = 0;
      for (std::uint32_t r : model.bootstraps[t]) {
        std::int32_t pred = model.trees[t].predict(
            [&](std::uint32_t c) { return model.x.get(r, c); });
        if (pred == model.y[r]) ++ok;
      }
      acc_sum += static_cast<double>(ok) / static_cast<double>(model.bootstraps[t].size());
    }
    double mean_acc = acc_sum / static_cast<double>(model.trees.size());
    EXPECT_GE(mean_acc, prev - 1e-12);
    prev = mean_acc;
  }
}

TEST(Forest, SelectTopFeaturesIdentityAndReduction) {
  auto ds = planted_corpus(3, 10, 5, 71);
  auto model = train_forest(ds, 20, 10, 67);
  auto imp = permutation_importances(model, 3);

  auto identity = select_top_features(ds, imp, ds.dimension());
  EXPECT_EQ(identity.reduced.dimension(), ds.dimension());
  for (std::size_t c = 0; c < ds.dimension(); ++c)
    EXPECT_EQ(identity.reduced.dictionary.entries[c].token, ds.dictionary.entries[c].token);
  for (std::size_t r = 0; r < ds.rows.size(); ++r)
    EXPECT_EQ(identity.reduced.rows[r].vec.columns, ds.rows[r].vec.columns);

  auto reduced = select_top_features(ds, imp, 4);
  EXPECT_EQ(reduced.reduced.dimension(), 4u);
  EXPECT_EQ(reduced.kept_columns.size(), 4u);
}

TEST(Forest, PlantedColumnsSurviveSelection) {
  auto ds = planted_corpus(4, 20, 12, 101);
  auto model = train_forest(ds, 50, 14, 73);
  auto imp = permutation_importances(model, 11);
  // 8 planted columns; keep 16 and expect all planted column tokens kept.
  auto sel = select_top_features(ds, imp, 16);
  std::set<std::string> kept;
  for (const auto& e : sel.reduced.dictionary.entries) kept.insert(e.token);
  for (std::uint32_t c = 0; c < 8; ++c)
    EXPECT_TRUE(kept.count(ds.dictionary.entries[c].token))
        << "planted column " << c << " was dropped";
}

TEST(Forest, DegenerateLabelsThrow) {
  auto ds = make_dataset(2, {{0}, {1}}, {0, 0}, {"only"});
  EXPECT_THROW(train_forest(ds, 5, 4, 1), DegenerateLabels);
}

TEST(Forest, DimensionMismatchOnPredict) {
  auto ds = separable_toy();
  auto model = train_forest(ds, 5, 4, 1);
  FeatureVector bad;
  bad.dimension = 99;
  EXPECT_THROW(predict_forest(model, bad), DimensionMismatch);
}
