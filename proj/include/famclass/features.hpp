#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "famclass/callgraph.hpp"
#include "famclass/common.hpp"
#include "famclass/corpus.hpp"

// Global feature dictionary and binary vectorization. Features are strictly
// binary: a column is 1 iff the sample exhibits that token.

namespace famclass {

enum class FeatureKind : int { perm = 0, hw, comp, intent, apirel };

inline const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::perm: return "perm";
    case FeatureKind::hw: return "hw";
    case FeatureKind::comp: return "comp";
    case FeatureKind::intent: return "intent";
    case FeatureKind::apirel: return "apirel";
  }
  return "?";
}

inline FeatureKind feature_kind_from_token(std::string_view token) {
  if (token.rfind("perm:", 0) == 0) return FeatureKind::perm;
  if (token.rfind("hw:", 0) == 0) return FeatureKind::hw;
  if (token.rfind("comp:", 0) == 0) return FeatureKind::comp;
  if (token.rfind("intent:", 0) == 0) return FeatureKind::intent;
  if (token.rfind("apirel:", 0) == 0) return FeatureKind::apirel;
  throw InternalError("token has no recognized kind prefix: " + std::string(token));
}

struct FeatureDictionary {
  struct Entry {
    std::string token;
    FeatureKind kind;
  };
  std::vector<Entry> entries;                 // column order
  std::map<std::string, std::uint32_t> index; // token -> column

  static FeatureDictionary from_tokens(std::vector<std::string> tokens) {
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    FeatureDictionary d;
    d.entries.reserve(tokens.size());
    for (auto& t : tokens) {
      FeatureKind k = feature_kind_from_token(t);
      d.index.emplace(t, static_cast<std::uint32_t>(d.entries.size()));
      d.entries.push_back(Entry{std::move(t), k});
    }
    return d;
  }

  std::size_t size() const { return entries.size(); }
};

struct FeatureVector {
  std::vector<std::uint32_t> columns;  // sorted, deduplicated; value 1
  std::uint32_t dimension = 0;

  bool test(std::uint32_t col) const {
    return std::binary_search(columns.begin(), columns.end(), col);
  }
  bool operator==(const FeatureVector&) const = default;
};

struct DatasetRow {
  std::string id;
  FeatureVector vec;
  std::int32_t label = -1;        // index into families; -1 = unlabeled
  std::int32_t train_label = -1;  // label seen by trainers; -1 = same as `label`

  std::int32_t effective_train_label() const { return train_label >= 0 ? train_label : label; }
};

struct LabeledDataset {
  FeatureDictionary dictionary;
  std::vector<DatasetRow> rows;
  std::vector<std::string> families;  // sorted distinct labels

  std::size_t dimension() const { return dictionary.size(); }
};

// All feature tokens of one sample: manifest facts plus the sample's
// call-relationship pairs. Sorted and deduplicated. Token prefixes encode
// the kind; component tokens also carry the component kind so identically
// named components of different kinds stay distinct.
inline std::vector<std::string> sample_tokens(const AppSample& sample,
                                              const RelationshipMatrix& matrix) {
  std::vector<std::string> tokens;
  for (const auto& p : sample.manifest.permissions) tokens.push_back("perm:" + p);
  for (const auto& h : sample.manifest.hardware) tokens.push_back("hw:" + h);
  for (const auto& [kind, name] : sample.manifest.components)
    tokens.push_back(std::string("comp:") + component_kind_name(kind) + ":" + name);
  for (const auto& a : sample.manifest.intent_filters) tokens.push_back("intent:" + a);
  for (auto& t : pair_feature_tokens(matrix)) tokens.push_back(std::move(t));
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

// Dictionary over every token observed in at least one sample. Entry order
// is lexicographic, which groups kinds by their distinct prefixes.
inline FeatureDictionary build_dictionary(const std::vector<AppSample>& samples,
                                          const std::vector<RelationshipMatrix>& matrices) {
  if (samples.size() != matrices.size())
    throw InternalError("build_dictionary: samples/matrices size mismatch");
  std::set<std::string> tokens;
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (auto& t : sample_tokens(samples[i], matrices[i])) tokens.insert(std::move(t));
  return FeatureDictionary::from_tokens({tokens.begin(), tokens.end()});
}

// Tokens absent from the dictionary (unseen at predict time) are ignored.
inline FeatureVector vectorize(const AppSample& sample, const RelationshipMatrix& matrix,
                               const FeatureDictionary& dict) {
  FeatureVector v;
  v.dimension = static_cast<std::uint32_t>(dict.size());
  for (const auto& t : sample_tokens(sample, matrix)) {
    auto it = dict.index.find(t);
    if (it != dict.index.end()) v.columns.push_back(it->second);
  }
  std::sort(v.columns.begin(), v.columns.end());
  return v;
}

// Shannon entropy in bits of a count histogram.
inline double entropy_bits(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    double p = static_cast<double>(c) / static_cast<double>(total);
    h -= p * std::log2(p);
  }
  return h;
}

// Ig(C,f) = H(C) - H(C|f) for the binary column, over the labels trainers
// see. A single-family dataset has no label uncertainty; the gain is 0.
inline double information_gain(const LabeledDataset& dataset, std::uint32_t column) {
  const std::size_t n_fam = dataset.families.size();
  if (n_fam < 2) return 0.0;
  std::vector<std::size_t> all(n_fam, 0), present(n_fam, 0), absent(n_fam, 0);
  std::size_t n_present = 0, n_total = 0;
  for (const DatasetRow& row : dataset.rows) {
    std::int32_t y = row.effective_train_label();
    if (y < 0) continue;
    ++n_total;
    ++all[static_cast<std::size_t>(y)];
    if (row.vec.test(column)) {
      ++present[static_cast<std::size_t>(y)];
      ++n_present;
    } else {
      ++absent[static_cast<std::size_t>(y)];
    }
  }
  if (n_total == 0) return 0.0;
  double h = entropy_bits(all);
  double p1 = static_cast<double>(n_present) / static_cast<double>(n_total);
  double cond = p1 * entropy_bits(present) + (1.0 - p1) * entropy_bits(absent);
  double gain = h - cond;
  return gain > 0.0 ? gain : 0.0;
}

// All distinct ApiIds invoked by any sample whose class descriptor starts
// with one of the configured package prefixes.
inline std::vector<ApiId> collect_candidate_apis(const std::vector<AppSample>& samples,
                                                 const std::vector<std::string>& prefixes) {
  std::set<ApiId> apis;
  for (const AppSample& s : samples)
    for (const MethodInvocations& m : s.methods)
      for (const ApiId& api : m.invocations)
        for (const std::string& p : prefixes)
          if (api.rfind(p, 0) == 0) {
            apis.insert(api);
            break;
          }
  return {apis.begin(), apis.end()};
}

// Ranks candidate APIs by the information gain of their presence/absence
// indicator over labeled samples and keeps the top_n (gain desc, then ApiId
// asc). Fewer candidates than n keeps them all with a warning.
inline ApiVocabulary prefilter_api_vocabulary(const std::vector<AppSample>& samples,
                                              const std::vector<ApiId>& candidate_apis,
                                              std::size_t top_n) {
  if (top_n < 1) throw UsageError("api vocabulary size must be >= 1");

  // Labeled samples only; families from training labels.
  std::vector<std::string> families;
  for (const AppSample& s : samples)
    if (const auto& f = s.effective_train_family()) families.push_back(*f);
  std::sort(families.begin(), families.end());
  families.erase(std::unique(families.begin(), families.end()), families.end());
  std::map<std::string, std::int32_t> fam_index;
  for (std::size_t i = 0; i < families.size(); ++i)
    fam_index[families[i]] = static_cast<std::int32_t>(i);

  std::vector<std::int32_t> label_of;
  std::vector<const AppSample*> labeled;
  for (const AppSample& s : samples)
    if (const auto& f = s.effective_train_family()) {
      labeled.push_back(&s);
      label_of.push_back(fam_index.at(*f));
    }

  std::map<ApiId, std::uint32_t> api_index;
  for (std::size_t i = 0; i < candidate_apis.size(); ++i)
    api_index[candidate_apis[i]] = static_cast<std::uint32_t>(i);

  // Presence sets per API.
  std::vector<std::vector<std::uint32_t>> present_rows(candidate_apis.size());
  for (std::size_t r = 0; r < labeled.size(); ++r) {
    std::set<std::uint32_t> seen;
    for (const MethodInvocations& m : labeled[r]->methods)
      for (const ApiId& api : m.invocations) {
        auto it = api_index.find(api);
        if (it != api_index.end()) seen.insert(it->second);
      }
    for (std::uint32_t a : seen) present_rows[a].push_back(static_cast<std::uint32_t>(r));
  }

  std::vector<std::size_t> all_counts(families.size(), 0);
  for (std::int32_t y : label_of) ++all_counts[static_cast<std::size_t>(y)];
  const double h_all = entropy_bits(all_counts);
  const std::size_t n_total = label_of.size();

  std::vector<double> gains(candidate_apis.size(), 0.0);
  if (families.size() >= 2 && n_total > 0) {
    parallel_for(candidate_apis.size(), [&](std::size_t a) {
      std::vector<std::size_t> present(families.size(), 0);
      for (std::uint32_t r : present_rows[a]) ++present[static_cast<std::size_t>(label_of[r])];
      std::vector<std::size_t> absent(families.size());
      for (std::size_t f = 0; f < families.size(); ++f) absent[f] = all_counts[f] - present[f];
      double p1 = static_cast<double>(present_rows[a].size()) / static_cast<double>(n_total);
      double gain = h_all - (p1 * entropy_bits(present) + (1.0 - p1) * entropy_bits(absent));
      gains[a] = gain > 0.0 ? gain : 0.0;
    });
  }

  std::vector<std::uint32_t> order(candidate_apis.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (gains[a] != gains[b]) return gains[a] > gains[b];
    return candidate_apis[a] < candidate_apis[b];
  });

  if (candidate_apis.size() < top_n)
    log_warn("only " + std::to_string(candidate_apis.size()) +
             " candidate APIs available, requested vocabulary size " + std::to_string(top_n) +
             "; keeping all");
  std::size_t keep = std::min<std::size_t>(top_n, order.size());
  std::vector<ApiId> selected;
  selected.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) selected.push_back(candidate_apis[order[i]]);
  return ApiVocabulary::from_list(std::move(selected));
}

}  // namespace famclass
