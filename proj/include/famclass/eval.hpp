#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/features.hpp"

// Stratified k-fold cross-validation and the metric suite: accuracy, macro
// precision/recall/F1, per-family breakdown, confusion matrix. Each fold
// rebuilds its own dictionary from training rows only, so no held-out
// statistic leaks into training.

namespace famclass {

struct FoldPlan {
  std::size_t n_folds = 0;
  std::vector<std::int32_t> fold_of;  // per row
  std::uint64_t seed = 0;
};

// Stratified partition: per-family counts across folds differ by at most
// one. Every family must have at least n_folds rows.
inline FoldPlan make_folds(const LabeledDataset& dataset, std::size_t n_folds,
                           std::uint64_t seed) {
  if (n_folds < 2) throw UsageError("cross-validation needs at least 2 folds");
  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.seed = seed;
  plan.fold_of.assign(dataset.rows.size(), -1);

  std::vector<std::vector<std::uint32_t>> by_family(dataset.families.size());
  for (std::size_t r = 0; r < dataset.rows.size(); ++r) {
    std::int32_t y = dataset.rows[r].label;
    if (y < 0) throw DataError("cannot fold unlabeled row '" + dataset.rows[r].id + "'");
    by_family[static_cast<std::size_t>(y)].push_back(static_cast<std::uint32_t>(r));
  }
  for (std::size_t f = 0; f < by_family.size(); ++f)
    if (by_family[f].size() < n_folds)
      throw FamilyTooSmall("family '" + dataset.families[f] + "' has " +
                           std::to_string(by_family[f].size()) + " rows, fewer than " +
                           std::to_string(n_folds) + " folds");

  std::size_t offset = 0;  // rotates so remainders spread across folds
  for (std::size_t f = 0; f < by_family.size(); ++f) {
    auto& rows = by_family[f];
    Rng rng(derive_seed(seed, "fold-shuffle", f));
    rng.shuffle(rows);
    for (std::size_t i = 0; i < rows.size(); ++i)
      plan.fold_of[rows[i]] = static_cast<std::int32_t>((offset + i) % n_folds);
    offset = (offset + rows.size()) % n_folds;
  }
  return plan;
}

struct FamilyMetrics {
  std::string family;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;       // harmonic mean of macro precision and macro recall
  double macro_f1_mean = 0.0;  // mean of per-family F1 (secondary variant)
  std::vector<FamilyMetrics> per_family;
  std::vector<std::vector<std::size_t>> confusion;  // rows = true, cols = predicted
  std::vector<std::string> families;
  std::vector<std::string> zero_division_families;
  std::size_t evaluated_rows = 0;
};

inline EvalReport compute_metrics(const std::vector<std::int32_t>& truth,
                                  const std::vector<std::int32_t>& predicted,
                                  const std::vector<std::string>& families) {
  if (truth.size() != predicted.size())
    throw LengthMismatch("compute_metrics: " + std::to_string(truth.size()) +
                         " true labels vs " + std::to_string(predicted.size()) +
                         " predictions");
  const std::size_t n = families.size();
  EvalReport rep;
  rep.families = families;
  rep.confusion.assign(n, std::vector<std::size_t>(n, 0));
  rep.evaluated_rows = truth.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto t = static_cast<std::size_t>(truth[i]);
    auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= n || p >= n) throw InternalError("compute_metrics: label out of range");
    ++rep.confusion[t][p];
    if (t == p) ++correct;
  }
  rep.accuracy = truth.empty() ? 0.0
                               : static_cast<double>(correct) / static_cast<double>(truth.size());

  double sum_p = 0.0, sum_r = 0.0, sum_f1 = 0.0;
  for (std::size_t f = 0; f < n; ++f) {
    std::size_t tp = rep.confusion[f][f];
    std::size_t fn = 0, fp = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == f) continue;
      fn += rep.confusion[f][o];
      fp += rep.confusion[o][f];
    }
    FamilyMetrics fm;
    fm.family = families[f];
    fm.support = tp + fn;
    bool zero_div = false;
    if (tp + fp == 0) {
      fm.precision = 0.0;
      zero_div = true;
    } else {
      fm.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    if (tp + fn == 0) {
      fm.recall = 0.0;
      zero_div = true;
    } else {
      fm.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    fm.f1 = (fm.precision + fm.recall) > 0.0
                ? 2.0 * fm.precision * fm.recall / (fm.precision + fm.recall)
                : 0.0;
    if (zero_div) rep.zero_division_families.push_back(families[f]);
    sum_p += fm.precision;
    sum_r += fm.recall;
    sum_f1 += fm.f1;
    rep.per_family.push_back(std::move(fm));
  }
  if (n > 0) {
    rep.macro_precision = sum_p / static_cast<double>(n);
    rep.macro_recall = sum_r / static_cast<double>(n);
    rep.macro_f1_mean = sum_f1 / static_cast<double>(n);
    rep.macro_f1 = (rep.macro_precision + rep.macro_recall) > 0.0
                       ? 2.0 * rep.macro_precision * rep.macro_recall /
                             (rep.macro_precision + rep.macro_recall)
                       : 0.0;
  }
  return rep;
}

// --- dataset views used by per-fold pipelines -----------------------------

inline LabeledDataset subset_rows(const LabeledDataset& ds,
                                  const std::vector<std::uint32_t>& indices) {
  LabeledDataset out;
  out.dictionary = ds.dictionary;
  out.families = ds.families;
  out.rows.reserve(indices.size());
  for (std::uint32_t r : indices) out.rows.push_back(ds.rows[r]);
  return out;
}

// Rebuilds the dictionary on the tokens with support >= 1 among this
// dataset's rows (the fold-local dictionary).
inline LabeledDataset restrict_to_support(const LabeledDataset& ds) {
  std::vector<char> seen(ds.dimension(), 0);
  for (const DatasetRow& row : ds.rows)
    for (std::uint32_t c : row.vec.columns) seen[c] = 1;
  std::vector<std::string> tokens;
  for (std::size_t c = 0; c < seen.size(); ++c)
    if (seen[c]) tokens.push_back(ds.dictionary.entries[c].token);

  LabeledDataset out;
  out.dictionary = FeatureDictionary::from_tokens(tokens);
  out.families = ds.families;
  std::vector<std::int32_t> remap(ds.dimension(), -1);
  for (std::size_t c = 0; c < ds.dimension(); ++c) {
    auto it = out.dictionary.index.find(ds.dictionary.entries[c].token);
    if (it != out.dictionary.index.end()) remap[c] = static_cast<std::int32_t>(it->second);
  }
  out.rows.reserve(ds.rows.size());
  for (const DatasetRow& row : ds.rows) {
    DatasetRow r;
    r.id = row.id;
    r.label = row.label;
    r.train_label = row.train_label;
    r.vec.dimension = static_cast<std::uint32_t>(out.dimension());
    for (std::uint32_t c : row.vec.columns)
      if (remap[c] >= 0) r.vec.columns.push_back(static_cast<std::uint32_t>(remap[c]));
    std::sort(r.vec.columns.begin(), r.vec.columns.end());
    out.rows.push_back(std::move(r));
  }
  return out;
}

// Re-expresses rows in a target dictionary; tokens it does not know are
// dropped (the unseen-at-predict-time rule).
inline LabeledDataset project_onto(const LabeledDataset& ds, const FeatureDictionary& target) {
  LabeledDataset out;
  out.dictionary = target;
  out.families = ds.families;
  std::vector<std::int32_t> remap(ds.dimension(), -1);
  for (std::size_t c = 0; c < ds.dimension(); ++c) {
    auto it = target.index.find(ds.dictionary.entries[c].token);
    if (it != target.index.end()) remap[c] = static_cast<std::int32_t>(it->second);
  }
  out.rows.reserve(ds.rows.size());
  for (const DatasetRow& row : ds.rows) {
    DatasetRow r;
    r.id = row.id;
    r.label = row.label;
    r.train_label = row.train_label;
    r.vec.dimension = static_cast<std::uint32_t>(target.size());
    for (std::uint32_t c : row.vec.columns)
      if (remap[c] >= 0) r.vec.columns.push_back(static_cast<std::uint32_t>(remap[c]));
    std::sort(r.vec.columns.begin(), r.vec.columns.end());
    out.rows.push_back(std::move(r));
  }
  return out;
}

// --- cross-validation ------------------------------------------------------

struct FoldOutput {
  std::vector<std::int32_t> predictions;   // global family ids, one per test row
  std::vector<std::string> selected_tokens;  // the fold's post-selection dictionary
};

// train is the fold-local dataset (dictionary already restricted to training
// support); test is projected onto that same dictionary.
using FoldRunner = std::function<FoldOutput(const LabeledDataset& train,
                                            const LabeledDataset& test, std::size_t fold)>;

struct FoldEval {
  EvalReport report;
  std::vector<std::string> selected_tokens;
};

struct CrossValResult {
  std::vector<FoldEval> folds;
  EvalReport averaged;  // metric means over folds; confusion summed
};

inline CrossValResult cross_validate(const LabeledDataset& dataset, const FoldPlan& plan,
                                     const FoldRunner& runner) {
  if (plan.fold_of.size() != dataset.rows.size())
    throw LengthMismatch("fold plan does not match dataset");
  CrossValResult result;
  const std::size_t n_fam = dataset.families.size();
  result.averaged.families = dataset.families;
  result.averaged.confusion.assign(n_fam, std::vector<std::size_t>(n_fam, 0));

  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    std::vector<std::uint32_t> train_idx, test_idx;
    for (std::size_t r = 0; r < dataset.rows.size(); ++r)
      (plan.fold_of[r] == static_cast<std::int32_t>(f) ? test_idx : train_idx)
          .push_back(static_cast<std::uint32_t>(r));

    LabeledDataset train = restrict_to_support(subset_rows(dataset, train_idx));
    LabeledDataset test = project_onto(subset_rows(dataset, test_idx), train.dictionary);

    FoldOutput out = runner(train, test, f);
    if (out.predictions.size() != test.rows.size())
      throw LengthMismatch("fold runner returned wrong prediction count");

    std::vector<std::int32_t> truth;
    truth.reserve(test.rows.size());
    for (const DatasetRow& row : test.rows) truth.push_back(row.label);

    FoldEval fe;
    fe.report = compute_metrics(truth, out.predictions, dataset.families);
    fe.selected_tokens = std::move(out.selected_tokens);
    log_info("fold " + std::to_string(f + 1) + "/" + std::to_string(plan.n_folds) +
             ": accuracy=" + std::to_string(fe.report.accuracy) +
             " macro_f1=" + std::to_string(fe.report.macro_f1));
    result.folds.push_back(std::move(fe));
  }

  EvalReport& avg = result.averaged;
  for (const FoldEval& fe : result.folds) {
    avg.accuracy += fe.report.accuracy;
    avg.macro_precision += fe.report.macro_precision;
    avg.macro_recall += fe.report.macro_recall;
    avg.macro_f1 += fe.report.macro_f1;
    avg.macro_f1_mean += fe.report.macro_f1_mean;
    avg.evaluated_rows += fe.report.evaluated_rows;
    for (std::size_t i = 0; i < n_fam; ++i)
      for (std::size_t j = 0; j < n_fam; ++j)
        avg.confusion[i][j] += fe.report.confusion[i][j];
  }
  auto folds = static_cast<double>(result.folds.size());
  if (folds > 0) {
    avg.accuracy /= folds;
    avg.macro_precision /= folds;
    avg.macro_recall /= folds;
    avg.macro_f1 /= folds;
    avg.macro_f1_mean /= folds;
  }
  // Per-family breakdown of the averaged report comes from the summed
  // confusion (per-fold supports can be tiny).
  for (std::size_t f = 0; f < n_fam; ++f) {
    std::size_t tp = avg.confusion[f][f], fn = 0, fp = 0;
    for (std::size_t o = 0; o < n_fam; ++o) {
      if (o == f) continue;
      fn += avg.confusion[f][o];
      fp += avg.confusion[o][f];
    }
    FamilyMetrics fm;
    fm.family = dataset.families[f];
    fm.support = tp + fn;
    fm.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    fm.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    fm.f1 = (fm.precision + fm.recall) > 0.0
                ? 2.0 * fm.precision * fm.recall / (fm.precision + fm.recall)
                : 0.0;
    avg.per_family.push_back(std::move(fm));
  }
  return result;
}

}  // namespace famclass
