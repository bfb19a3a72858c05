// famclass command-line driver: extract / train / predict / evaluate /
// sweep / synth. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 internal error.

#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "famclass/pipeline.hpp"
#include "famclass/synth.hpp"

namespace fs = std::filesystem;
using namespace famclass;

namespace {

struct ConfigCli {
  std::string preset = "full";
  std::string config_file;
  std::string k_clusters = "";  // number or "auto"
  std::size_t api_vocab_size = 0;
  std::size_t top_k = 0;
  std::size_t n_trees = 0;
  std::size_t tree_depth = 0;
  std::size_t boost_rounds = 0;
  std::size_t weak_depth = 0;
  std::size_t n_folds = 0;
  std::size_t min_family_support = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> api_prefixes;
  std::string api_rank_mode;
  bool apirel_transitive = false;

  CLI::Option* seed_opt = nullptr;
  CLI::Option* transitive_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Config preset: full or desk")
        ->check(CLI::IsMember({"full", "desk"}));
    cmd->add_option("--config", config_file, "JSON config file (fields mirror the flags)");
    cmd->add_option("--api-vocab-size", api_vocab_size, "API vocabulary size");
    cmd->add_option("--top-k", top_k, "Features kept after importance selection");
    cmd->add_option("--k-clusters", k_clusters, "Cluster count, or 'auto'");
    cmd->add_option("--n-trees", n_trees, "Random forest size");
    cmd->add_option("--tree-depth", tree_depth, "Forest tree depth limit");
    cmd->add_option("--boost-rounds", boost_rounds, "AdaBoost rounds per cluster");
    cmd->add_option("--weak-depth", weak_depth, "Weak learner depth");
    cmd->add_option("--n-folds", n_folds, "Cross-validation folds");
    cmd->add_option("--min-family-support", min_family_support,
                    "Smallest family kept for training/evaluation");
    seed_opt = cmd->add_option("--seed", seed, "Master seed");
    cmd->add_option("--api-prefix", api_prefixes,
                    "Candidate API package prefix (repeatable; replaces defaults)");
    cmd->add_option("--api-rank-mode", api_rank_mode, "API ranking: infogain or forest")
        ->check(CLI::IsMember({"infogain", "forest"}));
    transitive_opt = cmd->add_flag("--apirel-transitive", apirel_transitive,
                                   "Use reachability instead of direct edges in the matrix");
  }

  PipelineConfig resolve(const CLI::App* cmd) const {
    PipelineConfig c = preset == "desk" ? PipelineConfig::desk() : PipelineConfig{};
    if (!config_file.empty()) {
      try {
        c = config_from_json(nlohmann::json::parse(read_file(config_file)));
      } catch (const nlohmann::json::exception& e) {
        throw UsageError("bad config file " + config_file + ": " + e.what());
      }
      if (cmd->count("--preset") > 0)
        log_warn("--preset is ignored when --config is given");
    }
    if (cmd->count("--api-vocab-size")) c.api_vocab_size = api_vocab_size;
    if (cmd->count("--top-k")) c.top_k_features = top_k;
    if (cmd->count("--k-clusters")) {
      if (k_clusters == "auto") {
        c.k_clusters = 0;
      } else {
        try {
          c.k_clusters = std::stoul(k_clusters);
        } catch (...) {
          throw UsageError("--k-clusters expects a number or 'auto'");
        }
        if (c.k_clusters == 0) throw UsageError("--k-clusters must be >= 1 (or 'auto')");
      }
    }
    if (cmd->count("--n-trees")) c.n_trees = n_trees;
    if (cmd->count("--tree-depth")) c.tree_depth = tree_depth;
    if (cmd->count("--boost-rounds")) c.boost_rounds = boost_rounds;
    if (cmd->count("--weak-depth")) c.weak_depth = weak_depth;
    if (cmd->count("--n-folds")) c.n_folds = n_folds;
    if (cmd->count("--min-family-support")) c.min_family_support = min_family_support;
    if (seed_opt->count()) c.seed = seed;
    if (cmd->count("--api-prefix")) c.api_prefixes = api_prefixes;
    if (cmd->count("--api-rank-mode")) c.api_rank_mode = api_rank_mode;
    if (transitive_opt->count()) c.apirel_transitive = apirel_transitive;
    c.validate();
    return c;
  }
};

void print_extract_stats(const DatasetFile& file) {
  std::map<std::string, std::size_t> by_kind;
  for (const auto& e : file.dataset.dictionary.entries)
    ++by_kind[feature_kind_name(e.kind)];
  std::printf("samples: %zu\n", file.dataset.rows.size());
  std::printf("families: %zu\n", file.dataset.families.size());
  std::printf("api vocabulary: %zu\n", file.vocabulary.size());
  std::printf("features: %zu total", file.dataset.dictionary.size());
  for (const auto& [kind, n] : by_kind) std::printf(" %s=%zu", kind.c_str(), n);
  std::printf("\n");
}

int cmd_extract(const std::string& corpus, const std::string& labels,
                const std::string& train_labels, const std::string& out,
                const std::string& graph_dir, const PipelineConfig& config) {
  std::vector<AppSample> samples = ingest_corpus(corpus, labels.empty() ? fs::path{} : fs::path(labels),
                                                 train_labels.empty() ? fs::path{} : fs::path(train_labels));
  DatasetFile file = extract_dataset(samples, config);
  if (!graph_dir.empty()) {
    fs::create_directories(graph_dir);
    for (const AppSample& s : samples) {
      ApiCallGraph g = build_call_graph(s, file.vocabulary);
      write_file_atomic(fs::path(graph_dir) / (s.id + ".edges"), export_edge_list(g));
    }
  }
  save_dataset(out, file);
  print_extract_stats(file);
  std::printf("dataset written to %s (+.rows)\n", out.c_str());
  return 0;
}

int cmd_train(const std::string& dataset_path, const std::string& out,
              const std::string& importance_path, const std::string& cluster_report_path,
              const CLI::App* cmd, const ConfigCli& cli) {
  DatasetFile file = load_dataset(dataset_path);
  PipelineConfig config = file.config;
  // Flags given on the command line override the dataset's stored config.
  {
    PipelineConfig overridden = cli.resolve(cmd);
    if (cmd->count("--api-vocab-size") || cmd->count("--config") || cmd->count("--preset"))
      log_warn("api_vocab_size is fixed at extraction time; training uses the dataset as-is");
    config.top_k_features = overridden.top_k_features;
    config.k_clusters = overridden.k_clusters;
    config.n_trees = overridden.n_trees;
    config.tree_depth = overridden.tree_depth;
    config.boost_rounds = overridden.boost_rounds;
    config.weak_depth = overridden.weak_depth;
    config.n_folds = overridden.n_folds;
    config.min_family_support = overridden.min_family_support;
    if (cli.seed_opt->count() || cmd->count("--config")) config.seed = overridden.seed;
  }
  config.validate();

  LabeledDataset ds = filter_for_training(file.dataset, config.min_family_support);
  TrainResult result = train_core(ds, file.vocabulary, config);
  save_model(out, result.bundle);
  if (!importance_path.empty())
    write_file_atomic(importance_path, importance_csv(ds.dictionary, result.importances));
  if (!cluster_report_path.empty())
    write_file_atomic(cluster_report_path, cluster_report_csv(result.reduced, result.clusters));
  std::printf("model written to %s (k=%zu, features=%zu, families=%zu)\n", out.c_str(),
              result.bundle.ensemble.k, result.bundle.dictionary.size(),
              result.bundle.ensemble.families.size());
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& corpus,
                const std::string& dataset_path, const std::string& labels,
                const std::string& out) {
  ModelBundle bundle = load_model(model_path);
  LabeledDataset rows;
  if (!corpus.empty()) {
    std::vector<AppSample> samples =
        ingest_corpus(corpus, labels.empty() ? fs::path{} : fs::path(labels));
    rows = extract_against_model(samples, bundle);
  } else {
    DatasetFile file = load_dataset(dataset_path);
    rows = project_onto(file.dataset, bundle.dictionary);
  }
  std::vector<Prediction> preds = predict_rows(bundle, rows);
  write_file_atomic(out, predictions_csv(preds, bundle.ensemble.families));

  // If truth is available, report agreement.
  std::size_t labeled = 0, agree = 0;
  std::map<std::string, std::int32_t> fam_index;
  for (std::size_t i = 0; i < bundle.ensemble.families.size(); ++i)
    fam_index[bundle.ensemble.families[i]] = static_cast<std::int32_t>(i);
  for (std::size_t i = 0; i < rows.rows.size(); ++i) {
    if (rows.rows[i].label < 0) continue;
    ++labeled;
    if (rows.rows[i].label == preds[i].label) ++agree;
  }
  std::printf("predictions written to %s (%zu samples)\n", out.c_str(), preds.size());
  if (labeled > 0)
    std::printf("agreement with provided labels: %.4f (%zu/%zu)\n",
                static_cast<double>(agree) / static_cast<double>(labeled), agree, labeled);
  return 0;
}

int cmd_evaluate(const std::string& dataset_path, const std::string& out_dir,
                 const PipelineConfig& config) {
  DatasetFile file = load_dataset(dataset_path);
  CrossValResult cv = evaluate_dataset(file, config);
  fs::create_directories(out_dir);
  nlohmann::json j = crossval_to_json(cv);
  j["config"] = config_to_json(config);
  write_file_atomic(fs::path(out_dir) / "report.json", j.dump(2) + "\n");
  write_file_atomic(fs::path(out_dir) / "confusion.csv", confusion_csv(cv.averaged));
  write_file_atomic(fs::path(out_dir) / "per_family.csv", per_family_csv(cv.averaged));
  write_file_atomic(fs::path(out_dir) / "family_accuracy.csv", family_accuracy_csv(cv.averaged));
  write_file_atomic(fs::path(out_dir) / "summary.txt", summary_table(cv.averaged, "famclass-awec"));
  std::printf("%s", summary_table(cv.averaged, "famclass-awec").c_str());
  std::printf("reports written to %s\n", out_dir.c_str());
  return 0;
}

int cmd_sweep(const std::string& dataset_path, const std::string& out,
              const std::string& grid_arg, const PipelineConfig& config) {
  DatasetFile file = load_dataset(dataset_path);
  std::vector<std::size_t> grid;
  if (!grid_arg.empty()) {
    for (const std::string& part : split(grid_arg, ',')) {
      std::string_view t = trim(part);
      if (t.empty()) continue;
      try {
        grid.push_back(std::stoul(std::string(t)));
      } catch (...) {
        throw UsageError("--grid expects comma-separated feature counts");
      }
    }
  }
  std::vector<SweepPoint> points = sweep_top_k(file, config, grid);
  write_file_atomic(out, sweep_csv(points));
  std::printf("sweep written to %s (%zu points)\n", out.c_str(), points.size());
  return 0;
}

int cmd_synth(const std::string& out, const std::string& preset, std::size_t total,
              std::size_t n_families, std::size_t per_family, std::size_t sig_size,
              std::size_t noise_tokens, double presence, std::size_t noise_per_sample,
              std::size_t noise_invokes, double flip_rate, std::uint64_t seed) {
  SyntheticSpec spec = preset == "balanced"
                           ? SyntheticSpec::balanced(n_families, per_family, seed)
                           : SyntheticSpec::skewed_preset(total, seed);
  spec.signature_size = sig_size;
  spec.noise_tokens = noise_tokens;
  spec.signature_presence = presence;
  spec.noise_per_sample = noise_per_sample;
  spec.noise_invokes = noise_invokes;
  spec.label_flip_rate = flip_rate;
  std::size_t n = generate_corpus(spec, out);
  std::printf("synthetic corpus: %zu samples, %zu families -> %s\n", n, spec.families.size(),
              out.c_str());
  std::printf("labels: %s/labels.tsv%s\n", out.c_str(),
              flip_rate > 0 ? " (trainer view: labels_train.tsv)" : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Android malware family classification pipeline"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|quiet")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "quiet"}));
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  // extract
  auto* extract = app.add_subcommand("extract", "Parse a corpus and build the feature dataset");
  std::string x_corpus, x_labels, x_train_labels, x_out = "dataset.fds", x_graphs;
  extract->add_option("corpus", x_corpus, "Corpus root directory")->required();
  extract->add_option("--labels", x_labels, "Label file (app_id<TAB>family)");
  extract->add_option("--train-labels", x_train_labels,
                      "Optional noisy label file used for training only");
  extract->add_option("--out", x_out, "Output dataset file");
  extract->add_option("--export-graphs", x_graphs, "Directory for per-sample edge lists");
  ConfigCli x_cfg;
  x_cfg.attach(extract);

  // train
  auto* train = app.add_subcommand("train", "Train a model bundle from a dataset");
  std::string t_dataset, t_out = "model.fcm", t_importance, t_cluster_report;
  train->add_option("dataset", t_dataset, "Dataset file from `extract`")->required();
  train->add_option("--out", t_out, "Output model bundle");
  train->add_option("--importance-csv", t_importance, "Write token,kind,importance CSV");
  train->add_option("--cluster-report", t_cluster_report,
                    "Write sample_id,cluster,weighted_distance_to_center CSV");
  ConfigCli t_cfg;
  t_cfg.attach(train);

  // predict
  auto* predict = app.add_subcommand("predict", "Classify samples with a trained bundle");
  std::string p_model, p_corpus, p_dataset, p_labels, p_out = "predictions.csv";
  predict->add_option("model", p_model, "Model bundle file")->required();
  auto* p_corpus_opt = predict->add_option("--corpus", p_corpus, "Corpus root to classify");
  auto* p_dataset_opt = predict->add_option("--dataset", p_dataset, "Dataset file to classify");
  predict->add_option("--labels", p_labels, "Optional label file (agreement report)");
  predict->add_option("--out", p_out, "Output CSV");
  p_corpus_opt->excludes(p_dataset_opt);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Stratified k-fold cross-validation report");
  std::string e_dataset, e_out = "eval";
  evaluate->add_option("dataset", e_dataset, "Dataset file from `extract`")->required();
  evaluate->add_option("--out", e_out, "Output report directory");
  ConfigCli e_cfg;
  e_cfg.attach(evaluate);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Accuracy/F1 curve over feature counts");
  std::string s_dataset, s_out = "sweep.csv", s_grid;
  sweep->add_option("dataset", s_dataset, "Dataset file from `extract`")->required();
  sweep->add_option("--out", s_out, "Output CSV");
  sweep->add_option("--grid", s_grid, "Comma-separated top_k values (default: auto grid)");
  ConfigCli s_cfg;
  s_cfg.attach(sweep);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a deterministic synthetic corpus");
  std::string sy_out, sy_preset = "skewed";
  std::size_t sy_total = 1000, sy_families = 10, sy_per_family = 100, sy_sig = 10,
              sy_noise_tokens = 64, sy_noise_per_sample = 6, sy_noise_invokes = 12;
  double sy_presence = 0.95, sy_flip = 0.0;
  std::uint64_t sy_seed = 42;
  synth->add_option("--out", sy_out, "Target directory (must be empty or absent)")->required();
  synth->add_option("--preset", sy_preset, "skewed (10 families, realistic imbalance) or balanced")
      ->check(CLI::IsMember({"skewed", "balanced"}));
  synth->add_option("--total", sy_total, "Total samples (skewed preset)");
  synth->add_option("--families", sy_families, "Family count (balanced preset)");
  synth->add_option("--per-family", sy_per_family, "Samples per family (balanced preset)");
  synth->add_option("--sig-size", sy_sig, "Signature tokens per family");
  synth->add_option("--noise-tokens", sy_noise_tokens, "Shared noise pool size");
  synth->add_option("--presence", sy_presence, "Signature token inclusion probability");
  synth->add_option("--noise-per-sample", sy_noise_per_sample, "Noise manifest tokens per sample");
  synth->add_option("--noise-invokes", sy_noise_invokes, "Noise API invokes per sample");
  synth->add_option("--flip-rate", sy_flip, "Training label flip rate");
  synth->add_option("--seed", sy_seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_log_level(parse_log_level(log_level));
    set_thread_count(threads);
    if (extract->parsed())
      return cmd_extract(x_corpus, x_labels, x_train_labels, x_out, x_graphs,
                         x_cfg.resolve(extract));
    if (train->parsed())
      return cmd_train(t_dataset, t_out, t_importance, t_cluster_report, train, t_cfg);
    if (predict->parsed()) {
      if (p_corpus.empty() && p_dataset.empty())
        throw UsageError("predict needs --corpus or --dataset");
      return cmd_predict(p_model, p_corpus, p_dataset, p_labels, p_out);
    }
    if (evaluate->parsed()) return cmd_evaluate(e_dataset, e_out, e_cfg.resolve(evaluate));
    if (sweep->parsed()) return cmd_sweep(s_dataset, s_out, s_grid, s_cfg.resolve(sweep));
    if (synth->parsed())
      return cmd_synth(sy_out, sy_preset, sy_total, sy_families, sy_per_family, sy_sig,
                       sy_noise_tokens, sy_presence, sy_noise_per_sample, sy_noise_invokes,
                       sy_flip, sy_seed);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    log_error(e.what());
    return UsageError::exit_code;
  } catch (const DataError& e) {
    log_error(e.what());
    return DataError::exit_code;
  } catch (const std::exception& e) {
    log_error(std::string("internal error: ") + e.what());
    return InternalError::exit_code;
  }
}
