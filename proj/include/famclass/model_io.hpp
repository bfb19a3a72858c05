#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "famclass/callgraph.hpp"
#include "famclass/common.hpp"
#include "famclass/config.hpp"
#include "famclass/dataset_io.hpp"
#include "famclass/ensemble.hpp"
#include "famclass/features.hpp"

// Model bundle: one file holding a JSON header (version, config, dictionary,
// API vocabulary, families, dimension weights, cluster centers) followed by
// a binary section with the boosted trees, and a trailing checksum over
// both. Load(save(bundle)) reproduces bit-identical predictions.

namespace famclass {

inline constexpr int kModelFormatVersion = 1;
inline constexpr char kModelMagic[5] = "FCMB";

struct ModelBundle {
  PipelineConfig config;
  FeatureDictionary dictionary;  // post-selection
  ApiVocabulary vocabulary;      // API list the call graphs were built over
  EnsembleModel ensemble;
};

namespace detail {

inline void encode_tree(std::string& buf, const DecisionTree& tree) {
  io::put_u32(buf, static_cast<std::uint32_t>(tree.n_classes));
  io::put_u32(buf, static_cast<std::uint32_t>(tree.nodes.size()));
  for (const DecisionTree::Node& n : tree.nodes) {
    io::put_i32(buf, n.column);
    io::put_i32(buf, n.left);
    io::put_i32(buf, n.right);
    io::put_u32(buf, static_cast<std::uint32_t>(n.dist.size()));
    for (double d : n.dist) io::put_f64(buf, d);
  }
  io::put_u32(buf, static_cast<std::uint32_t>(tree.used_columns.size()));
  for (std::uint32_t c : tree.used_columns) io::put_u32(buf, c);
}

inline DecisionTree decode_tree(io::Reader& r) {
  DecisionTree tree;
  tree.n_classes = r.get_u32();
  std::uint32_t n_nodes = r.get_u32();
  tree.nodes.resize(n_nodes);
  for (DecisionTree::Node& n : tree.nodes) {
    n.column = r.get_i32();
    n.left = r.get_i32();
    n.right = r.get_i32();
    std::uint32_t nd = r.get_u32();
    n.dist.resize(nd);
    for (double& d : n.dist) d = r.get_f64();
  }
  std::uint32_t n_used = r.get_u32();
  tree.used_columns.resize(n_used);
  for (std::uint32_t& c : tree.used_columns) c = r.get_u32();
  return tree;
}

inline std::string encode_classifiers(const std::vector<BoostedClassifier>& clfs) {
  std::string buf;
  io::put_u32(buf, static_cast<std::uint32_t>(clfs.size()));
  for (const BoostedClassifier& c : clfs) {
    io::put_i32(buf, c.constant_family);
    io::put_u32(buf, static_cast<std::uint32_t>(c.families_present.size()));
    for (std::int32_t f : c.families_present) io::put_i32(buf, f);
    io::put_u32(buf, static_cast<std::uint32_t>(c.rounds.size()));
    for (const BoostedClassifier::Round& round : c.rounds) {
      io::put_f64(buf, round.alpha);
      encode_tree(buf, round.learner);
    }
  }
  return buf;
}

inline std::vector<BoostedClassifier> decode_classifiers(io::Reader& r) {
  std::vector<BoostedClassifier> clfs(r.get_u32());
  for (BoostedClassifier& c : clfs) {
    c.constant_family = r.get_i32();
    c.families_present.resize(r.get_u32());
    for (std::int32_t& f : c.families_present) f = r.get_i32();
    c.rounds.resize(r.get_u32());
    for (BoostedClassifier::Round& round : c.rounds) {
      round.alpha = r.get_f64();
      round.learner = decode_tree(r);
    }
  }
  return clfs;
}

}  // namespace detail

inline void save_model(const std::filesystem::path& path, const ModelBundle& bundle) {
  nlohmann::json j;
  j["format"] = "famclass-model";
  j["version"] = kModelFormatVersion;
  j["config"] = config_to_json(bundle.config);
  nlohmann::json dict = nlohmann::json::array();
  for (const auto& e : bundle.dictionary.entries) dict.push_back(e.token);
  j["dictionary"] = std::move(dict);
  j["api_vocabulary"] = bundle.vocabulary.apis;
  j["families"] = bundle.ensemble.families;
  j["weights"] = bundle.ensemble.weights.w;
  j["centers"] = bundle.ensemble.centers;
  j["k_clusters"] = bundle.ensemble.k;
  std::string header = j.dump();

  std::string bytes;
  bytes.append(kModelMagic, 4);
  io::put_u32(bytes, static_cast<std::uint32_t>(header.size()));
  bytes += header;
  bytes += detail::encode_classifiers(bundle.ensemble.classifiers);
  io::put_u64(bytes, fnv1a64(bytes.data(), bytes.size()));
  write_file_atomic(path, bytes);
}

inline ModelBundle load_model(const std::filesystem::path& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::string_view(bytes.data(), 4) != std::string_view(kModelMagic, 4))
    throw CorruptModel("not a model bundle: " + path.string());
  std::string_view body(bytes.data(), bytes.size() - 8);
  io::Reader tail(std::string_view(bytes).substr(bytes.size() - 8));
  if (tail.get_u64() != fnv1a64(body.data(), body.size()))
    throw CorruptModel("model bundle checksum mismatch: " + path.string());

  io::Reader r(body.substr(4));
  std::uint32_t header_len = r.get_u32();
  if (8 + header_len > body.size()) throw CorruptModel("model header truncated: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel("bad model header: " + std::string(e.what()));
  }
  if (j.value("format", "") != "famclass-model")
    throw CorruptModel("wrong bundle format: " + path.string());
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw CorruptModel("unsupported model version");

  ModelBundle bundle;
  bundle.config = config_from_json(j.at("config"));
  auto tokens = j.at("dictionary").get<std::vector<std::string>>();
  bundle.dictionary = FeatureDictionary::from_tokens(tokens);
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (bundle.dictionary.entries.size() <= i || bundle.dictionary.entries[i].token != tokens[i])
      throw CorruptModel("model dictionary not in canonical order");
  bundle.vocabulary =
      ApiVocabulary::from_list(j.at("api_vocabulary").get<std::vector<std::string>>());
  bundle.ensemble.families = j.at("families").get<std::vector<std::string>>();
  bundle.ensemble.weights.w = j.at("weights").get<std::vector<double>>();
  bundle.ensemble.centers = j.at("centers").get<DenseRows>();
  bundle.ensemble.k = j.at("k_clusters").get<std::size_t>();

  io::Reader body_reader(body.substr(8 + header_len));
  bundle.ensemble.classifiers = detail::decode_classifiers(body_reader);
  if (!body_reader.at_end()) throw CorruptModel("trailing bytes in model bundle");
  if (bundle.ensemble.classifiers.size() != bundle.ensemble.k ||
      bundle.ensemble.centers.size() != bundle.ensemble.k)
    throw CorruptModel("model bundle cluster count mismatch");
  return bundle;
}

}  // namespace famclass
