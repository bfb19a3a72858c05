#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/corpus.hpp"

// Per-app directed API call graph over a selected vocabulary, and its
// flattening into the sparse binary call-relationship matrix.
//
// An edge a->b means: within one method body, b is the next retained
// (vocabulary-member) invocation after a. Methods are independent opcode
// sequences; no cross-method edges.

namespace famclass {

struct ApiVocabulary {
  std::vector<ApiId> apis;             // selection order (rank order)
  std::map<ApiId, std::uint32_t> index;

  static ApiVocabulary from_list(std::vector<ApiId> list) {
    ApiVocabulary v;
    v.apis = std::move(list);
    for (std::uint32_t i = 0; i < v.apis.size(); ++i) {
      auto [it, inserted] = v.index.emplace(v.apis[i], i);
      if (!inserted) throw InternalError("duplicate API in vocabulary: " + v.apis[i]);
    }
    return v;
  }

  bool contains(const ApiId& api) const { return index.count(api) != 0; }
  std::size_t size() const { return apis.size(); }
};

struct ApiCallGraph {
  const ApiVocabulary* vocabulary = nullptr;
  std::set<std::pair<ApiId, ApiId>> edges;  // ordered (from, to); self-loops allowed
};

struct RelationshipMatrix {
  const ApiVocabulary* vocabulary = nullptr;
  std::set<std::pair<std::uint32_t, std::uint32_t>> present_pairs;  // (row, col) = 1
};

inline ApiCallGraph build_call_graph(const AppSample& sample, const ApiVocabulary& vocab) {
  ApiCallGraph g;
  g.vocabulary = &vocab;
  std::vector<const ApiId*> retained;
  for (const MethodInvocations& m : sample.methods) {
    retained.clear();
    for (const ApiId& api : m.invocations)
      if (vocab.contains(api)) retained.push_back(&api);
    for (std::size_t i = 1; i < retained.size(); ++i)
      g.edges.emplace(*retained[i - 1], *retained[i]);
  }
  return g;
}

// Matrix entry (i,j)=1 iff edge apis[i]->apis[j]. With `transitive` set the
// matrix instead holds reachability (every directed path becomes a 1); off
// by default.
inline RelationshipMatrix flatten_to_matrix(const ApiCallGraph& graph,
                                            bool transitive = false) {
  RelationshipMatrix m;
  m.vocabulary = graph.vocabulary;
  for (const auto& [from, to] : graph.edges)
    m.present_pairs.emplace(m.vocabulary->index.at(from), m.vocabulary->index.at(to));
  if (transitive && !m.present_pairs.empty()) {
    std::map<std::uint32_t, std::vector<std::uint32_t>> adj;
    for (const auto& [i, j] : m.present_pairs) adj[i].push_back(j);
    std::set<std::pair<std::uint32_t, std::uint32_t>> closure;
    for (const auto& [start, _] : adj) {
      std::vector<std::uint32_t> stack{start};
      std::set<std::uint32_t> seen;
      while (!stack.empty()) {
        std::uint32_t node = stack.back();
        stack.pop_back();
        auto it = adj.find(node);
        if (it == adj.end()) continue;
        for (std::uint32_t next : it->second)
          if (seen.insert(next).second) {
            closure.emplace(start, next);
            stack.push_back(next);
          }
      }
    }
    m.present_pairs = std::move(closure);
  }
  return m;
}

// One token per present pair; these feed the global feature dictionary.
inline std::vector<std::string> pair_feature_tokens(const RelationshipMatrix& matrix) {
  std::vector<std::string> tokens;
  tokens.reserve(matrix.present_pairs.size());
  for (const auto& [i, j] : matrix.present_pairs)
    tokens.push_back("apirel:" + matrix.vocabulary->apis[i] + "->" +
                     matrix.vocabulary->apis[j]);
  return tokens;
}

// Edge-list export for external graph tooling: `from<TAB>to`, one per line.
inline std::string export_edge_list(const ApiCallGraph& graph) {
  std::string out;
  for (const auto& [from, to] : graph.edges) {
    out += from;
    out += '\t';
    out += to;
    out += '\n';
  }
  return out;
}

}  // namespace famclass
