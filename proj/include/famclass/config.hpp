#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "famclass/common.hpp"

namespace famclass {

// Every knob of the pipeline. Serialized verbatim into dataset files and
// model bundles so any artifact can be reproduced from its inputs and seed.
struct PipelineConfig {
  std::size_t api_vocab_size = 7000;  // desk preset uses 200
  std::size_t top_k_features = 600;
  std::size_t k_clusters = 5;  // 0 = auto (silhouette sweep over k in [2,10])
  std::size_t n_trees = 100;
  std::size_t tree_depth = 16;
  std::size_t boost_rounds = 50;
  std::size_t weak_depth = 3;
  std::size_t n_folds = 5;
  std::uint64_t seed = 42;
  std::vector<std::string> api_prefixes = {"Landroid/", "Ljava/", "Ljavax/", "Lorg/apache/",
                                           "Lcom/google/android/"};
  std::size_t min_family_support = 10;
  std::string api_rank_mode = "infogain";  // or "forest"
  bool apirel_transitive = false;

  // Desk-scale preset: small API vocabulary so the pair space stays
  // tractable on a workstation; everything else keeps its default.
  static PipelineConfig desk() {
    PipelineConfig c;
    c.api_vocab_size = 200;
    return c;
  }

  void validate() const {
    if (api_vocab_size < 1 || top_k_features < 1 || n_trees < 1 || tree_depth < 1 ||
        boost_rounds < 1 || weak_depth < 1 || n_folds < 1 || min_family_support < 1)
      throw UsageError("all pipeline counts must be >= 1");
    if (api_rank_mode != "infogain" && api_rank_mode != "forest")
      throw UsageError("api_rank_mode must be 'infogain' or 'forest'");
  }
};

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return nlohmann::json{{"api_vocab_size", c.api_vocab_size},
                        {"top_k_features", c.top_k_features},
                        {"k_clusters", c.k_clusters},
                        {"n_trees", c.n_trees},
                        {"tree_depth", c.tree_depth},
                        {"boost_rounds", c.boost_rounds},
                        {"weak_depth", c.weak_depth},
                        {"n_folds", c.n_folds},
                        {"seed", c.seed},
                        {"api_prefixes", c.api_prefixes},
                        {"min_family_support", c.min_family_support},
                        {"api_rank_mode", c.api_rank_mode},
                        {"apirel_transitive", c.apirel_transitive}};
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).template get<std::decay_t<decltype(out)>>();
  };
  get("api_vocab_size", c.api_vocab_size);
  get("top_k_features", c.top_k_features);
  get("k_clusters", c.k_clusters);
  get("n_trees", c.n_trees);
  get("tree_depth", c.tree_depth);
  get("boost_rounds", c.boost_rounds);
  get("weak_depth", c.weak_depth);
  get("n_folds", c.n_folds);
  get("seed", c.seed);
  get("api_prefixes", c.api_prefixes);
  get("min_family_support", c.min_family_support);
  get("api_rank_mode", c.api_rank_mode);
  get("apirel_transitive", c.apirel_transitive);
  c.validate();
  return c;
}

}  // namespace famclass
