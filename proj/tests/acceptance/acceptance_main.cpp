// Acceptance suite: each criterion prints one PASS/FAIL line. Run with no
// arguments for all criteria, or pass criterion names (e.g. `C3 C5`).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "famclass/pipeline.hpp"
#include "famclass/synth.hpp"

namespace fs = std::filesystem;
using namespace famclass;

namespace {

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define REQUIRE(cond, msg)                                                       \
  do {                                                                           \
    if (!(cond)) throw CheckFailure(std::string(msg) + " [" #cond "]");          \
  } while (0)

struct Scratch {
  fs::path root;
  explicit Scratch(const std::string& tag) {
    root = fs::temp_directory_path() /
           ("famclass_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
  fs::path operator/(const std::string& rel) const { return root / rel; }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CheckFailure("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void run_cli(const std::string& args) {
  std::string cmd = std::string(FAMCLASS_CLI_PATH) + " " + args;
  int rc = std::system(cmd.c_str());
  if (rc != 0) throw CheckFailure("CLI command failed (" + std::to_string(rc) + "): " + cmd);
}

// Shared helpers -------------------------------------------------------------

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

double adjusted_rand_index(const std::vector<std::uint32_t>& a,
                           const std::vector<std::uint32_t>& b) {
  std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
  std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<std::size_t>> table(ka, std::vector<std::size_t>(kb, 0));
  for (std::size_t i = 0; i < a.size(); ++i) ++table[a[i]][b[i]];
  auto choose2 = [](std::size_t n) { return static_cast<double>(n) * (n - 1) / 2.0; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (std::size_t i = 0; i < ka; ++i) {
    std::size_t row = 0;
    for (std::size_t j = 0; j < kb; ++j) {
      sum_ij += choose2(table[i][j]);
      row += table[i][j];
    }
    sum_a += choose2(row);
  }
  for (std::size_t j = 0; j < kb; ++j) {
    std::size_t col = 0;
    for (std::size_t i = 0; i < ka; ++i) col += table[i][j];
    sum_b += choose2(col);
  }
  double total = choose2(a.size());
  double expected = sum_a * sum_b / total;
  double max_index = 0.5 * (sum_a + sum_b);
  return (sum_ij - expected) / (max_index - expected);
}

// C1: synth (10 families, 1000 samples, realistic imbalance, 5% label-flip
// noise, seed 42) then evaluate with desk defaults, end to end through the
// CLI, in under 5 minutes with averaged accuracy and macro F1 >= 0.95.
void criterion_c1() {
  Scratch tmp("c1");
  auto t0 = std::chrono::steady_clock::now();
  run_cli("--log-level warn synth --out " + (tmp / "corpus").string() +
          " --preset skewed --total 1000 --flip-rate 0.05 --seed 42");
  run_cli("--log-level warn extract " + (tmp / "corpus").string() + " --labels " +
          (tmp / "corpus/labels.tsv").string() + " --train-labels " +
          (tmp / "corpus/labels_train.tsv").string() + " --preset desk --seed 42 --out " +
          (tmp / "ds.fds").string());
  run_cli("--log-level warn evaluate " + (tmp / "ds.fds").string() +
          " --preset desk --seed 42 --out " + (tmp / "eval").string());
  auto elapsed =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0)
          .count();

  auto j = nlohmann::json::parse(slurp(tmp / "eval/report.json"));
  double acc = j.at("averaged").at("accuracy").get<double>();
  double f1 = j.at("averaged").at("macro_f1").get<double>();
  std::printf("      accuracy=%.4f macro_f1=%.4f elapsed=%llds\n", acc, f1,
              static_cast<long long>(elapsed));
  REQUIRE(elapsed < 300, "end-to-end run must finish in under 5 minutes");
  REQUIRE(acc >= 0.95, "averaged 5-fold accuracy must be >= 0.95");
  REQUIRE(f1 >= 0.95, "averaged macro F1 must be >= 0.95");
}

// C2: permutation importance of the single perfectly discriminative column
// is the strict maximum; never-split and constant columns are exactly 0.
void criterion_c2() {
  Rng rng(2);
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  for (int i = 0; i < 60; ++i) {
    std::int32_t y = i % 2;
    std::vector<std::uint32_t> cols;
    if (y == 1) cols.push_back(0);  // the perfect column
    cols.push_back(1);              // constant one
    // column 2 is constant zero; columns 3..10 are noise
    for (std::uint32_t c = 3; c < 11; ++c)
      if (rng.bounded(2)) cols.push_back(c);
    rows.push_back(std::move(cols));
    labels.push_back(y);
  }
  auto ds = make_dataset(11, rows, labels, {"famA", "famB"});
  auto model = train_forest(ds, 60, 12, 4242);
  auto imp = permutation_importances(model, 17);

  for (std::size_t c = 1; c < 11; ++c)
    REQUIRE(imp.values[0] > imp.values[c],
            "perfect column must have strictly maximal importance");
  REQUIRE(imp.values[1] == 0.0, "constant-one column importance must be exactly 0");
  REQUIRE(imp.values[2] == 0.0, "constant-zero column importance must be exactly 0");
  for (const auto& tree : model.trees) {
    REQUIRE(!tree.uses_column(1), "constant column must never be split on");
    REQUIRE(!tree.uses_column(2), "constant column must never be split on");
  }
  // Every column untouched by every tree is exactly zero.
  for (std::uint32_t c = 0; c < 11; ++c) {
    bool used = false;
    for (const auto& tree : model.trees) used = used || tree.uses_column(c);
    if (!used) REQUIRE(imp.values[c] == 0.0, "never-split column importance must be exactly 0");
  }
  std::printf("      signal importance=%.5f, max noise=%.5f\n", imp.values[0],
              *std::max_element(imp.values.begin() + 3, imp.values.end()));
}

// C3: three planted blobs (200 rows, 20 dims): ARI >= 0.9 and the weighted
// within-cluster SSE never increases, on every run.
void criterion_c3() {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    Rng rng(seed);
    const std::size_t dim = 20;
    DenseRows prototypes(3, std::vector<double>(dim, 0.0));
    for (std::size_t d = 0; d < dim; ++d) prototypes[d % 3][d] = 1.0;
    DenseRows rows;
    std::vector<std::uint32_t> truth;
    for (std::uint32_t blob = 0; blob < 3; ++blob) {
      for (int i = 0; i < 67 && rows.size() < 200; ++i) {
        auto row = prototypes[blob];
        for (std::size_t d = 0; d < dim; ++d)
          if (rng.uniform() < 0.05) row[d] = 1.0 - row[d];
        rows.push_back(std::move(row));
        truth.push_back(blob);
      }
    }
    WeightVector w = uniform_weights(dim);
    auto model = kmeans(rows, 3, w);
    double ari = adjusted_rand_index(model.assignments, truth);
    if (seed == 1) std::printf("      ARI=%.4f iterations=%zu\n", ari, model.iterations_run);
    REQUIRE(ari >= 0.9, "planted blob recovery needs ARI >= 0.9");
    for (std::size_t i = 1; i < model.wcss_history.size(); ++i)
      REQUIRE(model.wcss_history[i] <= model.wcss_history[i - 1] + 1e-9,
              "weighted WCSS must be non-increasing");
  }
}

// C4: with a single cluster the ensemble's predictions equal a plain SAMME
// classifier trained on the same data and seed, over a 500-row probe set.
void criterion_c4() {
  Rng rng(4);
  std::vector<std::vector<std::uint32_t>> rows;
  std::vector<std::int32_t> labels;
  std::vector<std::string> fams{"f0", "f1", "f2", "f3", "f4"};
  for (int i = 0; i < 500; ++i) {
    std::int32_t y = i % 5;
    std::vector<std::uint32_t> cols;
    if (rng.uniform() < 0.9) cols.push_back(static_cast<std::uint32_t>(y));
    for (std::uint32_t c = 5; c < 12; ++c)
      if (rng.bounded(2)) cols.push_back(c);
    rows.push_back(std::move(cols));
    labels.push_back(y);
  }
  auto ds = make_dataset(12, rows, labels, fams);

  DenseRows dense = dense_rows_from(ds);
  WeightVector w = uniform_weights(ds.dimension());
  auto clusters = kmeans(dense, 1, w);
  BoostConfig cfg{25, 3, 987};
  auto ensemble = train_ensemble(ds, clusters, cfg);

  BoostConfig plain_cfg = cfg;
  plain_cfg.seed = derive_seed(cfg.seed, "boost", 0);
  BoolMatrix x = BoolMatrix::from_dataset(ds);
  std::vector<std::int32_t> y;
  for (const auto& r : ds.rows) y.push_back(r.label);
  std::vector<std::uint32_t> all(ds.rows.size());
  std::iota(all.begin(), all.end(), 0u);
  auto plain = train_adaboost(x, y, all, plain_cfg);

  std::size_t checked = 0;
  for (const auto& row : ds.rows) {
    auto ens = predict(row.vec, ensemble).first;
    auto ref = plain.predict(row.vec, fams.size());
    REQUIRE(ens == ref, "k=1 ensemble must match plain AdaBoost exactly");
    ++checked;
  }
  std::printf("      %zu probe predictions identical\n", checked);
}

// C5: over 10,000 random distance rows the Eq-style weights sum to 1 within
// 1e-12, lie in (0,1], and strictly decrease with distance.
void criterion_c5() {
  Rng rng(5);
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t k = 2 + rng.bounded(9);
    std::vector<double> d(k);
    for (double& v : d) v = rng.uniform() * 20.0;
    auto w = adaptive_weights(d);
    double sum = 0.0;
    for (double v : w) {
      REQUIRE(v > 0.0 && v <= 1.0, "weights must lie in (0, 1]");
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) <= 1e-12, "weight rows must sum to 1 within 1e-12");
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (d[i] < d[j])
          REQUIRE(w[i] > w[j], "weights must strictly decrease with distance");
  }
  std::printf("      10000 rows verified\n");
}

// C6: metric oracle on the fixed confusion matrix, plus trace/total equals
// accuracy on 100 random label sets.
void criterion_c6() {
  std::vector<std::int32_t> truth, pred;
  auto add = [&](std::int32_t t, std::int32_t p, int n) {
    for (int i = 0; i < n; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(0, 0, 8);
  add(0, 1, 2);
  add(1, 0, 3);
  add(1, 1, 7);
  auto rep = compute_metrics(truth, pred, {"a", "b"});

  // Independent hand computation.
  double p0 = 8.0 / 11.0, p1 = 7.0 / 9.0;
  double r0 = 8.0 / 10.0, r1 = 7.0 / 10.0;
  double mp = (p0 + p1) / 2.0, mr = (r0 + r1) / 2.0;
  double mf1 = 2.0 * mp * mr / (mp + mr);
  REQUIRE(std::abs(rep.accuracy - 0.75) <= 1e-12, "accuracy must be 0.75");
  REQUIRE(std::abs(rep.macro_precision - mp) <= 1e-12, "macro precision mismatch");
  REQUIRE(std::abs(rep.macro_recall - mr) <= 1e-12, "macro recall mismatch");
  REQUIRE(std::abs(rep.macro_f1 - mf1) <= 1e-12, "macro F1 mismatch");

  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n_fam = 2 + rng.bounded(6);
    std::vector<std::int32_t> t2, p2;
    std::size_t n = 10 + rng.bounded(90);
    for (std::size_t i = 0; i < n; ++i) {
      t2.push_back(static_cast<std::int32_t>(rng.bounded(n_fam)));
      p2.push_back(static_cast<std::int32_t>(rng.bounded(n_fam)));
    }
    std::vector<std::string> fams;
    for (std::size_t f = 0; f < n_fam; ++f) fams.push_back("f" + std::to_string(f));
    auto r = compute_metrics(t2, p2, fams);
    std::size_t trace = 0, total = 0;
    for (std::size_t i = 0; i < n_fam; ++i)
      for (std::size_t j = 0; j < n_fam; ++j) {
        total += r.confusion[i][j];
        if (i == j) trace += r.confusion[i][j];
      }
    REQUIRE(r.accuracy == static_cast<double>(trace) / static_cast<double>(total),
            "trace/total must equal accuracy");
  }
  std::printf("      macroP=%.12f macroR=%.12f macroF1=%.12f\n", rep.macro_precision,
              rep.macro_recall, rep.macro_f1);
}

// C7: handcrafted manifest/smali fixture suite parses to exactly the
// hand-enumerated facts; the chain and filter cases of the call-graph
// construction hold exactly.
void criterion_c7() {
  const fs::path fixtures{FAMCLASS_FIXTURE_DIR};

  auto full = parse_manifest(slurp(fixtures / "manifests/full.xml"));
  REQUIRE(full.permissions.size() == 3, "full.xml must have 3 permissions");
  REQUIRE(full.hardware.size() == 2, "full.xml must have 2 hardware features");
  REQUIRE(full.components.size() == 4, "full.xml must have 4 components");
  REQUIRE(full.intent_filters.size() == 2, "full.xml must have 2 intent actions");

  auto nested = parse_manifest(slurp(fixtures / "manifests/nested.xml"));
  REQUIRE(nested.permissions == std::set<std::string>{"android.permission.CAMERA"},
          "nested.xml permissions must dedup and trim");
  REQUIRE(nested.components.size() == 3, "nested.xml must keep kinds distinct");
  REQUIRE(nested.intent_filters.size() == 5,
          "nested.xml must collect actions+categories from all filters");

  bool threw = false;
  try {
    parse_manifest(slurp(fixtures / "manifests/malformed.xml"));
  } catch (const MalformedManifest&) {
    threw = true;
  }
  REQUIRE(threw, "malformed.xml must raise MalformedManifest");

  auto pair_methods = parse_smali_dir(fixtures / "smali/pair");
  REQUIRE(pair_methods.size() == 3, "pair fixture must yield 3 methods");
  std::size_t invokes = 0;
  for (const auto& m : pair_methods) invokes += m.invocations.size();
  REQUIRE(invokes == 7, "pair fixture must yield 7 invokes");
  REQUIRE(pair_methods[0].invocations[0] == "Ljava/lang/Object;-><init>()V",
          "first invoke of the first method");
  REQUIRE(pair_methods[2].invocations[0].rfind("Landroid/telephony/SmsManager;"
                                               "->sendTextMessage",
                                               0) == 0,
          "/range invoke must be recognized");

  auto forms =
      parse_smali_text(slurp(fixtures / "smali/forms/all_forms.smali"), "all_forms.smali");
  REQUIRE(forms.size() == 1 && forms[0].invocations.size() == 10,
          "all five invoke forms and their /range variants, nothing else");

  // Alg-style chain and filter cases.
  const ApiId A = "La/A;->a()V", B = "La/B;->b()V", C = "La/C;->c()V", X = "La/X;->x()V";
  auto vocab = ApiVocabulary::from_list({A, B, C});
  AppSample chain;
  chain.id = "chain";
  MethodInvocations m1;
  m1.method_id = "m";
  m1.invocations = {A, B, C};
  chain.methods.push_back(m1);
  auto g1 = build_call_graph(chain, vocab);
  REQUIRE(g1.edges == (std::set<std::pair<ApiId, ApiId>>{{A, B}, {B, C}}),
          "[A,B,C] must yield {A->B, B->C}");

  AppSample filtered;
  filtered.id = "filtered";
  MethodInvocations m2;
  m2.method_id = "m";
  m2.invocations = {A, X, B};
  filtered.methods.push_back(m2);
  auto g2 = build_call_graph(filtered, vocab);
  REQUIRE(g2.edges == (std::set<std::pair<ApiId, ApiId>>{{A, B}}),
          "[A, X not-in-vocab, B] must yield {A->B}");
  std::printf("      manifest + smali fixtures and chain/filter cases exact\n");
}

// C8: byte-identical artifacts across repeated runs, and bundle save/load
// preserves every prediction.
void criterion_c8() {
  Scratch tmp("c8");
  std::string synth_args = " --preset balanced --families 4 --per-family 30 --sig-size 4 "
                           "--flip-rate 0.1 --seed 11";
  run_cli("--log-level warn synth --out " + (tmp / "corpus1").string() + synth_args);
  run_cli("--log-level warn synth --out " + (tmp / "corpus2").string() + synth_args);
  // Corpora byte-identical.
  for (auto& entry : fs::recursive_directory_iterator(tmp / "corpus1")) {
    if (!entry.is_regular_file()) continue;
    auto rel = fs::relative(entry.path(), tmp / "corpus1");
    REQUIRE(slurp(entry.path()) == slurp(tmp / "corpus2" / rel),
            "synth output must be byte-identical: " + rel.string());
  }

  std::string common = " --preset desk --n-trees 30 --tree-depth 10 --boost-rounds 10 "
                       "--k-clusters 3 --min-family-support 5 --seed 11";
  for (int run = 1; run <= 2; ++run) {
    std::string n = std::to_string(run);
    run_cli("--log-level warn extract " + (tmp / "corpus1").string() + " --labels " +
            (tmp / "corpus1/labels.tsv").string() + " --train-labels " +
            (tmp / "corpus1/labels_train.tsv").string() + common + " --out " +
            (tmp / ("ds" + n + ".fds")).string());
    run_cli("--log-level warn train " + (tmp / ("ds" + n + ".fds")).string() + common +
            " --out " + (tmp / ("model" + n + ".fcm")).string());
    run_cli("--log-level warn evaluate " + (tmp / ("ds" + n + ".fds")).string() + common +
            " --n-folds 3 --out " + (tmp / ("eval" + n)).string());
  }
  REQUIRE(slurp(tmp / "ds1.fds") == slurp(tmp / "ds2.fds"), "dataset files must be identical");
  REQUIRE(slurp(tmp / "ds1.fds.rows") == slurp(tmp / "ds2.fds.rows"),
          "row files must be identical");
  REQUIRE(slurp(tmp / "model1.fcm") == slurp(tmp / "model2.fcm"),
          "model bundles must be identical");
  REQUIRE(slurp(tmp / "eval1/report.json") == slurp(tmp / "eval2/report.json"),
          "evaluation reports must be identical");

  // Save/load preserves predictions exactly.
  ModelBundle bundle = load_model(tmp / "model1.fcm");
  DatasetFile file = load_dataset(tmp / "ds1.fds");
  LabeledDataset probe = project_onto(file.dataset, bundle.dictionary);
  Scratch tmp2("c8b");
  save_model(tmp2 / "again.fcm", bundle);
  ModelBundle reloaded = load_model(tmp2 / "again.fcm");
  for (const auto& row : probe.rows) {
    auto [l1, s1] = predict(row.vec, bundle.ensemble);
    auto [l2, s2] = predict(row.vec, reloaded.ensemble);
    REQUIRE(l1 == l2, "reloaded bundle must predict identical labels");
    for (std::size_t u = 0; u < s1.size(); ++u)
      REQUIRE(s1[u] == s2[u], "reloaded bundle must produce bit-identical scores");
  }
  std::printf("      dataset/model/report bytes identical; predictions preserved\n");
}

// C9: no token supported only by held-out rows ever enters a fold's
// post-selection dictionary.
void criterion_c9() {
  Scratch tmp("c9");
  SyntheticSpec spec = SyntheticSpec::balanced(5, 40, 33);
  spec.signature_size = 5;
  spec.label_flip_rate = 0.05;
  generate_corpus(spec, tmp / "corpus");
  auto samples =
      ingest_corpus(tmp / "corpus", tmp / "corpus/labels.tsv", tmp / "corpus/labels_train.tsv");
  PipelineConfig config = PipelineConfig::desk();
  config.n_trees = 30;
  config.tree_depth = 10;
  config.boost_rounds = 10;
  config.k_clusters = 3;
  config.seed = 33;
  DatasetFile file = extract_dataset(samples, config);

  LabeledDataset ds = filter_for_training(file.dataset, config.min_family_support);
  FoldPlan plan = make_folds(ds, config.n_folds, derive_seed(config.seed, "folds"));

  // Plant a canary token on every row held out in fold 0 (and nowhere else).
  {
    std::vector<std::string> tokens;
    for (const auto& e : ds.dictionary.entries) tokens.push_back(e.token);
    tokens.push_back("perm:canary.heldout.only");
    FeatureDictionary widened = FeatureDictionary::from_tokens(tokens);
    LabeledDataset replanted = project_onto(ds, widened);
    std::uint32_t canary = widened.index.at("perm:canary.heldout.only");
    for (std::size_t r = 0; r < replanted.rows.size(); ++r)
      if (plan.fold_of[r] == 0) {
        replanted.rows[r].vec.columns.push_back(canary);
        std::sort(replanted.rows[r].vec.columns.begin(), replanted.rows[r].vec.columns.end());
      }
    ds = std::move(replanted);
  }

  auto cv = cross_validate(ds, plan, pipeline_fold_runner(config));
  std::size_t checked = 0;
  for (const std::string& tok : cv.folds[0].selected_tokens) {
    REQUIRE(tok != "perm:canary.heldout.only",
            "held-out-only token leaked into the fold dictionary");
    ++checked;
  }
  // Also sweep every fold for any naturally held-out-only token.
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    std::vector<char> any_support(ds.dimension(), 0), train_support(ds.dimension(), 0);
    for (std::size_t r = 0; r < ds.rows.size(); ++r)
      for (std::uint32_t c : ds.rows[r].vec.columns) {
        any_support[c] = 1;
        if (plan.fold_of[r] != static_cast<std::int32_t>(f)) train_support[c] = 1;
      }
    std::set<std::string> held_only;
    for (std::size_t c = 0; c < ds.dimension(); ++c)
      if (any_support[c] && !train_support[c])
        held_only.insert(ds.dictionary.entries[c].token);
    for (const std::string& tok : cv.folds[f].selected_tokens)
      REQUIRE(!held_only.count(tok),
              "held-out-only token leaked into fold dictionary: " + tok);
  }
  std::printf("      canary excluded from %zu fold-0 tokens (accuracy %.3f)\n", checked,
              cv.averaged.accuracy);
}

// C10: the sweep CSV has the rise-then-plateau shape: the maximum is
// attained strictly before the all-features endpoint.
void criterion_c10() {
  Scratch tmp("c10");
  run_cli("--log-level warn synth --out " + (tmp / "corpus").string() +
          " --preset balanced --families 6 --per-family 40 --sig-size 6 --flip-rate 0.05 "
          "--noise-tokens 120 --seed 10");
  run_cli("--log-level warn extract " + (tmp / "corpus").string() + " --labels " +
          (tmp / "corpus/labels.tsv").string() + " --train-labels " +
          (tmp / "corpus/labels_train.tsv").string() +
          " --preset desk --seed 10 --min-family-support 5 --out " + (tmp / "ds.fds").string());
  run_cli("--log-level warn sweep " + (tmp / "ds.fds").string() +
          " --preset desk --seed 10 --n-trees 40 --tree-depth 10 --boost-rounds 12 "
          "--k-clusters 3 --n-folds 3 --min-family-support 5 "
          "--grid 8,32,96,256,1024 --out " +
          (tmp / "sweep.csv").string());

  std::istringstream csv(slurp(tmp / "sweep.csv"));
  std::string line;
  std::getline(csv, line);  // header
  std::vector<std::pair<std::size_t, double>> points;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    points.emplace_back(std::stoul(line.substr(0, c1)),
                        std::stod(line.substr(c1 + 1, c2 - c1 - 1)));
  }
  REQUIRE(points.size() >= 4, "sweep must emit multiple grid points");
  double max_acc = 0.0;
  for (auto& [k, acc] : points) max_acc = std::max(max_acc, acc);
  std::printf("      sweep:");
  for (auto& [k, acc] : points) std::printf(" (%zu, %.3f)", k, acc);
  std::printf("\n");
  // Rise: the smallest feature count must not already attain the max.
  REQUIRE(points.front().second < max_acc,
          "the smallest top_k must underfit (rising segment)");
  // Plateau: the maximum is attained before the all-features endpoint.
  bool attained_early = false;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    if (points[i].second >= max_acc - 1e-12) attained_early = true;
  REQUIRE(attained_early, "max accuracy must be attained at top_k < all features");
  REQUIRE(max_acc >= 0.9, "planted corpus must be learnable at the sweep optimum");
}

struct Criterion {
  const char* name;
  const char* summary;
  std::function<void()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  set_log_level(LogLevel::warn);
  std::vector<Criterion> criteria{
      {"C1", "end-to-end planted-corpus accuracy (synth -> extract -> evaluate)", criterion_c1},
      {"C2", "permutation importance correctness", criterion_c2},
      {"C3", "clustering recovery on planted blobs", criterion_c3},
      {"C4", "k=1 ensemble equals plain AdaBoost", criterion_c4},
      {"C5", "adaptive weight contract over 10,000 rows", criterion_c5},
      {"C6", "metric oracle", criterion_c6},
      {"C7", "parser fidelity on the handcrafted fixture suite", criterion_c7},
      {"C8", "determinism and persistence", criterion_c8},
      {"C9", "no-leakage canary", criterion_c9},
      {"C10", "feature-count sweep shape", criterion_c10},
  };

  std::set<std::string> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(argv[i]);

  int failures = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.name)) continue;
    ++ran;
    auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn();
      auto secs = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count() /
                  1000.0;
      std::printf("[%s] PASS  %s (%.1fs)\n", c.name, c.summary, secs);
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[%s] FAIL  %s\n      %s\n", c.name, c.summary, e.what());
    }
  }
  if (ran == 0) {
    std::fprintf(stderr, "no matching criteria (usage: %s [C1..C10])\n", argv[0]);
    return 2;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
