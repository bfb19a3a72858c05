#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "famclass/callgraph.hpp"
#include "famclass/cluster.hpp"
#include "famclass/common.hpp"
#include "famclass/config.hpp"
#include "famclass/corpus.hpp"
#include "famclass/dataset_io.hpp"
#include "famclass/ensemble.hpp"
#include "famclass/eval.hpp"
#include "famclass/features.hpp"
#include "famclass/forest.hpp"
#include "famclass/model_io.hpp"

// End-to-end orchestration shared by the CLI and the cross-validation fold
// pipelines: extraction (ingest -> API vocabulary -> call graphs ->
// dictionary -> vectors), training (importance -> selection -> weights ->
// clustering -> per-cluster boosting), prediction, and reporting.

namespace famclass {

// --- extraction -------------------------------------------------------------

// Forest-mode API ranking: importance of each candidate's presence column
// under the OOB permutation measure, instead of plain information gain.
inline ApiVocabulary rank_apis_by_forest(const std::vector<AppSample>& samples,
                                         const std::vector<ApiId>& candidates,
                                         std::size_t top_n, const PipelineConfig& config) {
  std::vector<std::string> families;
  std::vector<const AppSample*> labeled;
  for (const AppSample& s : samples)
    if (const auto& f = s.effective_train_family()) {
      labeled.push_back(&s);
      families.push_back(*f);
    }
  std::sort(families.begin(), families.end());
  families.erase(std::unique(families.begin(), families.end()), families.end());
  if (families.size() < 2) {
    log_warn("fewer than 2 families; forest API ranking falls back to information gain");
    return prefilter_api_vocabulary(samples, candidates, top_n);
  }
  std::map<std::string, std::int32_t> fam_index;
  for (std::size_t i = 0; i < families.size(); ++i)
    fam_index[families[i]] = static_cast<std::int32_t>(i);
  std::map<ApiId, std::uint32_t> api_index;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    api_index[candidates[i]] = static_cast<std::uint32_t>(i);

  BoolMatrix x(labeled.size(), candidates.size());
  std::vector<std::int32_t> y(labeled.size());
  for (std::size_t r = 0; r < labeled.size(); ++r) {
    y[r] = fam_index.at(*labeled[r]->effective_train_family());
    for (const MethodInvocations& m : labeled[r]->methods)
      for (const ApiId& api : m.invocations) {
        auto it = api_index.find(api);
        if (it != api_index.end()) x.set(r, it->second);
      }
  }
  ForestModel forest = train_forest_raw(std::move(x), std::move(y), families, config.n_trees,
                                        config.tree_depth,
                                        derive_seed(config.seed, "api-forest"));
  ImportanceVector imp = permutation_importances(forest, derive_seed(config.seed, "api-imp"));

  std::vector<std::uint32_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (imp.values[a] != imp.values[b]) return imp.values[a] > imp.values[b];
    return candidates[a] < candidates[b];
  });
  if (candidates.size() < top_n)
    log_warn("only " + std::to_string(candidates.size()) +
             " candidate APIs available, requested vocabulary size " + std::to_string(top_n) +
             "; keeping all");
  order.resize(std::min<std::size_t>(top_n, order.size()));
  std::vector<ApiId> selected;
  for (std::uint32_t i : order) selected.push_back(candidates[i]);
  return ApiVocabulary::from_list(std::move(selected));
}

inline std::vector<RelationshipMatrix> build_matrices(const std::vector<AppSample>& samples,
                                                      const ApiVocabulary& vocab,
                                                      bool transitive) {
  std::vector<RelationshipMatrix> matrices(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    matrices[i] = flatten_to_matrix(build_call_graph(samples[i], vocab), transitive);
  });
  return matrices;
}

inline LabeledDataset assemble_dataset(const std::vector<AppSample>& samples,
                                       const std::vector<RelationshipMatrix>& matrices,
                                       const FeatureDictionary& dict) {
  LabeledDataset ds;
  ds.dictionary = dict;
  std::set<std::string> fams;
  for (const AppSample& s : samples) {
    if (s.family) fams.insert(*s.family);
    if (s.train_family) fams.insert(*s.train_family);
  }
  ds.families.assign(fams.begin(), fams.end());
  std::map<std::string, std::int32_t> fam_index;
  for (std::size_t i = 0; i < ds.families.size(); ++i)
    fam_index[ds.families[i]] = static_cast<std::int32_t>(i);

  ds.rows.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    DatasetRow row;
    row.id = samples[i].id;
    row.vec = vectorize(samples[i], matrices[i], ds.dictionary);
    if (samples[i].family) row.label = fam_index.at(*samples[i].family);
    if (samples[i].train_family && samples[i].train_family != samples[i].family)
      row.train_label = fam_index.at(*samples[i].train_family);
    ds.rows[i] = std::move(row);
  });
  return ds;
}

// Full training-time extraction: candidate APIs -> ranked vocabulary ->
// call-relationship matrices -> dictionary -> binary vectors.
inline DatasetFile extract_dataset(const std::vector<AppSample>& samples,
                                   const PipelineConfig& config) {
  if (samples.empty()) throw EmptyCorpus("no samples to extract");
  std::vector<ApiId> candidates = collect_candidate_apis(samples, config.api_prefixes);
  log_info(std::to_string(candidates.size()) + " candidate APIs under configured prefixes");
  ApiVocabulary vocab =
      config.api_rank_mode == "forest"
          ? rank_apis_by_forest(samples, candidates, config.api_vocab_size, config)
          : prefilter_api_vocabulary(samples, candidates, config.api_vocab_size);
  std::vector<RelationshipMatrix> matrices =
      build_matrices(samples, vocab, config.apirel_transitive);
  FeatureDictionary dict = build_dictionary(samples, matrices);

  DatasetFile file;
  file.dataset = assemble_dataset(samples, matrices, dict);
  file.vocabulary = std::move(vocab);
  file.config = config;
  return file;
}

// Predict-time extraction: vectors against a model's fixed vocabulary and
// post-selection dictionary; unseen tokens drop out.
inline LabeledDataset extract_against_model(const std::vector<AppSample>& samples,
                                            const ModelBundle& bundle) {
  std::vector<RelationshipMatrix> matrices =
      build_matrices(samples, bundle.vocabulary, bundle.config.apirel_transitive);
  LabeledDataset ds;
  ds.dictionary = bundle.dictionary;
  ds.families = bundle.ensemble.families;
  std::map<std::string, std::int32_t> fam_index;
  for (std::size_t i = 0; i < ds.families.size(); ++i)
    fam_index[ds.families[i]] = static_cast<std::int32_t>(i);
  ds.rows.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    DatasetRow row;
    row.id = samples[i].id;
    row.vec = vectorize(samples[i], matrices[i], ds.dictionary);
    if (samples[i].family) {
      auto it = fam_index.find(*samples[i].family);
      if (it != fam_index.end()) row.label = it->second;
    }
    ds.rows[i] = std::move(row);
  });
  return ds;
}

// --- training ---------------------------------------------------------------

// Drops unlabeled rows and families below the support threshold, then
// re-indexes labels. Train labels pointing at dropped families fall back to
// the row's true family.
inline LabeledDataset filter_for_training(const LabeledDataset& ds, std::size_t min_support) {
  std::vector<std::size_t> support(ds.families.size(), 0);
  std::size_t unlabeled = 0;
  for (const DatasetRow& r : ds.rows) {
    if (r.label < 0) {
      ++unlabeled;
      continue;
    }
    ++support[static_cast<std::size_t>(r.label)];
  }
  if (unlabeled > 0)
    log_warn(std::to_string(unlabeled) + " unlabeled rows excluded from training");

  std::vector<std::string> kept;
  std::vector<std::int32_t> remap(ds.families.size(), -1);
  for (std::size_t f = 0; f < ds.families.size(); ++f) {
    if (support[f] >= min_support) {
      remap[f] = static_cast<std::int32_t>(kept.size());
      kept.push_back(ds.families[f]);
    } else if (support[f] > 0) {
      log_warn("family '" + ds.families[f] + "' has support " + std::to_string(support[f]) +
               " < min_family_support " + std::to_string(min_support) + "; dropped");
    }
  }

  LabeledDataset out;
  out.dictionary = ds.dictionary;
  out.families = kept;
  for (const DatasetRow& r : ds.rows) {
    if (r.label < 0 || remap[static_cast<std::size_t>(r.label)] < 0) continue;
    DatasetRow row = r;
    row.label = remap[static_cast<std::size_t>(r.label)];
    if (r.train_label >= 0) {
      std::int32_t t = remap[static_cast<std::size_t>(r.train_label)];
      row.train_label = t;  // -1 falls back to the true family
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

struct TrainResult {
  ModelBundle bundle;
  ImportanceVector importances;      // over the full input dictionary
  FeatureDictionary full_dictionary;
  ClusterModel clusters;
  LabeledDataset reduced;            // post-selection training rows
};

// Importance-driven selection, weighting, clustering and per-cluster
// boosting. `dataset` must already be filtered (labeled rows, final family
// list with at least 2 entries).
inline TrainResult train_core(const LabeledDataset& dataset, const ApiVocabulary& vocabulary,
                              const PipelineConfig& config) {
  if (dataset.families.size() < 2)
    throw DegenerateLabels("training needs at least 2 families after filtering");

  TrainResult result;
  result.full_dictionary = dataset.dictionary;

  ForestModel forest = train_forest(dataset, config.n_trees, config.tree_depth,
                                    derive_seed(config.seed, "forest"));
  result.importances = permutation_importances(forest, derive_seed(config.seed, "importance"));

  std::size_t top_k = std::min<std::size_t>(config.top_k_features, dataset.dimension());
  FeatureSelection sel = select_top_features(dataset, result.importances, top_k);

  ImportanceVector reduced_imp;
  reduced_imp.values.reserve(top_k);
  for (std::uint32_t old_col : sel.kept_columns)
    reduced_imp.values.push_back(result.importances.values[old_col]);
  WeightVector weights = normalize_weights(reduced_imp);

  DenseRows rows = dense_rows_from(sel.reduced);
  std::size_t k = config.k_clusters;
  if (k == 0) {
    k = pick_k_by_silhouette(rows, weights);
    log_info("silhouette sweep selected k=" + std::to_string(k));
  }
  if (k > rows.size()) {
    log_warn("k_clusters " + std::to_string(k) + " exceeds row count; clamping");
    k = rows.size();
  }
  result.clusters = kmeans(rows, k, weights);

  BoostConfig boost{config.boost_rounds, config.weak_depth, derive_seed(config.seed, "boost")};
  result.bundle.ensemble = train_ensemble(sel.reduced, result.clusters, boost);
  result.bundle.config = config;
  result.bundle.dictionary = sel.reduced.dictionary;
  result.bundle.vocabulary = vocabulary;
  result.reduced = std::move(sel.reduced);
  return result;
}

// --- prediction -------------------------------------------------------------

struct Prediction {
  std::string id;
  std::int32_t label = -1;
  std::vector<double> scores;  // per global family
};

// Rows must already live in the bundle's dictionary space.
inline std::vector<Prediction> predict_rows(const ModelBundle& bundle,
                                            const LabeledDataset& ds) {
  std::vector<Prediction> out(ds.rows.size());
  parallel_for(ds.rows.size(), [&](std::size_t i) {
    auto [label, scores] = predict(ds.rows[i].vec, bundle.ensemble);
    out[i] = Prediction{ds.rows[i].id, label, std::move(scores)};
  });
  return out;
}

// --- cross-validation and sweep ----------------------------------------------

// Per-fold pipeline: trains on the fold's training rows only (fold-local
// dictionary, importances, weights, centers, classifiers), then predicts the
// held-out rows projected onto the fold's post-selection dictionary.
inline FoldRunner pipeline_fold_runner(const PipelineConfig& config) {
  return [config](const LabeledDataset& train, const LabeledDataset& test,
                  std::size_t fold) -> FoldOutput {
    PipelineConfig fold_config = config;
    fold_config.seed = derive_seed(config.seed, "fold", fold);
    TrainResult tr = train_core(train, ApiVocabulary{}, fold_config);

    LabeledDataset projected = project_onto(test, tr.bundle.dictionary);
    FoldOutput out;
    out.predictions.reserve(projected.rows.size());
    for (const DatasetRow& row : projected.rows)
      out.predictions.push_back(predict(row.vec, tr.bundle.ensemble).first);
    for (const auto& e : tr.bundle.dictionary.entries) out.selected_tokens.push_back(e.token);
    return out;
  };
}

inline CrossValResult evaluate_dataset(const DatasetFile& file, const PipelineConfig& config) {
  LabeledDataset ds = filter_for_training(file.dataset, config.min_family_support);
  if (ds.families.size() < 2)
    throw DegenerateLabels("evaluation needs at least 2 families after filtering");
  FoldPlan plan = make_folds(ds, config.n_folds, derive_seed(config.seed, "folds"));
  return cross_validate(ds, plan, pipeline_fold_runner(config));
}

struct SweepPoint {
  std::size_t top_k = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

inline std::vector<std::size_t> default_sweep_grid(std::size_t dimension) {
  std::vector<std::size_t> grid;
  for (std::size_t v : {std::size_t{50}, std::size_t{100}, std::size_t{200}, std::size_t{400},
                        std::size_t{600}, std::size_t{800}, std::size_t{1200}})
    if (v < dimension) grid.push_back(v);
  grid.push_back(dimension);  // the "all features" endpoint
  return grid;
}

// Re-runs the full cross-validation at each feature count; the resulting
// accuracy/F1 curve mirrors the feature-count sweep plot.
inline std::vector<SweepPoint> sweep_top_k(const DatasetFile& file, const PipelineConfig& config,
                                           std::vector<std::size_t> grid) {
  if (grid.empty()) grid = default_sweep_grid(file.dataset.dimension());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<SweepPoint> points;
  for (std::size_t top_k : grid) {
    PipelineConfig c = config;
    c.top_k_features = top_k;
    CrossValResult cv = evaluate_dataset(file, c);
    points.push_back(SweepPoint{top_k, cv.averaged.accuracy, cv.averaged.macro_f1});
    log_info("sweep top_k=" + std::to_string(top_k) +
             ": accuracy=" + std::to_string(cv.averaged.accuracy) +
             " macro_f1=" + std::to_string(cv.averaged.macro_f1));
  }
  return points;
}

// --- reporting --------------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& rep) {
  nlohmann::json per_family = nlohmann::json::array();
  for (const FamilyMetrics& fm : rep.per_family)
    per_family.push_back({{"family", fm.family},
                          {"precision", fm.precision},
                          {"recall", fm.recall},
                          {"f1", fm.f1},
                          {"support", fm.support}});
  return nlohmann::json{{"accuracy", rep.accuracy},
                        {"macro_precision", rep.macro_precision},
                        {"macro_recall", rep.macro_recall},
                        {"macro_f1", rep.macro_f1},
                        {"macro_f1_per_family_mean", rep.macro_f1_mean},
                        {"evaluated_rows", rep.evaluated_rows},
                        {"families", rep.families},
                        {"zero_division_families", rep.zero_division_families},
                        {"per_family", std::move(per_family)},
                        {"confusion", rep.confusion}};
}

inline nlohmann::json crossval_to_json(const CrossValResult& cv) {
  nlohmann::json folds = nlohmann::json::array();
  for (const FoldEval& fe : cv.folds) folds.push_back(report_to_json(fe.report));
  return nlohmann::json{{"averaged", report_to_json(cv.averaged)}, {"folds", std::move(folds)}};
}

inline std::string confusion_csv(const EvalReport& rep) {
  std::string out = "true\\predicted";
  for (const auto& f : rep.families) out += "," + f;
  out += "\n";
  for (std::size_t i = 0; i < rep.families.size(); ++i) {
    out += rep.families[i];
    for (std::size_t j = 0; j < rep.families.size(); ++j)
      out += "," + std::to_string(rep.confusion[i][j]);
    out += "\n";
  }
  return out;
}

inline std::string per_family_csv(const EvalReport& rep) {
  std::string out = "family,support,precision,recall,f1\n";
  char buf[160];
  for (const FamilyMetrics& fm : rep.per_family) {
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f\n", fm.family.c_str(), fm.support,
                  fm.precision, fm.recall, fm.f1);
    out += buf;
  }
  return out;
}

// Per-family accuracy (the diagonal share of each family's row).
inline std::string family_accuracy_csv(const EvalReport& rep) {
  std::string out = "family,accuracy\n";
  char buf[120];
  for (const FamilyMetrics& fm : rep.per_family) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", fm.family.c_str(), fm.recall);
    out += buf;
  }
  return out;
}

inline std::string summary_table(const EvalReport& rep, const std::string& model_name) {
  char buf[160];
  std::string out = "model                     ACC      F1\n";
  std::snprintf(buf, sizeof(buf), "%-24s  %.4f   %.4f\n", model_name.c_str(), rep.accuracy,
                rep.macro_f1);
  out += buf;
  return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "top_k,accuracy,macro_f1\n";
  char buf[120];
  for (const SweepPoint& p : points) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", p.top_k, p.accuracy, p.macro_f1);
    out += buf;
  }
  return out;
}

inline std::string predictions_csv(const std::vector<Prediction>& preds,
                                   const std::vector<std::string>& families) {
  std::string out = "sample_id,predicted_family";
  for (const auto& f : families) out += ",score_" + f;
  out += "\n";
  char buf[64];
  for (const Prediction& p : preds) {
    out += p.id + "," + (p.label >= 0 ? families[static_cast<std::size_t>(p.label)] : "?");
    for (double s : p.scores) {
      std::snprintf(buf, sizeof(buf), ",%.9f", s);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

inline std::string cluster_report_csv(const LabeledDataset& reduced, const ClusterModel& model) {
  DenseRows rows = dense_rows_from(reduced);
  std::string out = "sample_id,cluster,weighted_distance_to_center\n";
  char buf[64];
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double d = weighted_distance(rows[r], model.centers[model.assignments[r]], model.weights);
    out += reduced.rows[r].id + "," + std::to_string(model.assignments[r]);
    std::snprintf(buf, sizeof(buf), ",%.9f\n", d);
    out += buf;
  }
  return out;
}

inline std::string importance_csv(const FeatureDictionary& dict, const ImportanceVector& imp) {
  std::string out = "token,kind,importance\n";
  char buf[64];
  for (std::size_t c = 0; c < dict.size(); ++c) {
    out += dict.entries[c].token;
    out += ",";
    out += feature_kind_name(dict.entries[c].kind);
    std::snprintf(buf, sizeof(buf), ",%.12g\n", imp.values[c]);
    out += buf;
  }
  return out;
}

}  // namespace famclass
