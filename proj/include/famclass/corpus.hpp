#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "famclass/common.hpp"
#include "famclass/manifest.hpp"
#include "famclass/smali.hpp"

// Corpus ingestion. Layout per app: <root>/<app_id>/AndroidManifest.xml and
// <root>/<app_id>/smali/**/*.smali. Labels come from a tab-separated file.

namespace famclass {

struct AppSample {
  std::string id;                       // directory name; unique in a corpus
  std::optional<std::string> family;    // present for training samples
  std::optional<std::string> train_family;  // label the trainer sees; defaults to family
  ManifestFacts manifest;
  std::vector<MethodInvocations> methods;

  const std::optional<std::string>& effective_train_family() const {
    return train_family.has_value() ? train_family : family;
  }
};

// Label file: one `app_id<TAB>family` per line, `#` comments allowed.
inline std::map<std::string, std::string> read_label_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open label file: " + path.string());
  std::map<std::string, std::string> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::size_t tab = t.find('\t');
    if (tab == std::string_view::npos) {
      log_warn("label file " + path.string() + ":" + std::to_string(lineno) +
               ": no tab separator, line ignored");
      continue;
    }
    std::string id(trim(t.substr(0, tab)));
    std::string family(trim(t.substr(tab + 1)));
    if (id.empty() || family.empty()) continue;
    if (labels.count(id))
      log_warn("label file: duplicate id '" + id + "', keeping last entry");
    labels[id] = family;
  }
  return labels;
}

// Ingests every app directory under root, in lexicographic id order.
// Samples with a missing or malformed manifest are skipped with a warning;
// an empty result is fatal.
inline std::vector<AppSample> ingest_corpus(
    const std::filesystem::path& root,
    const std::filesystem::path& label_file = {},
    const std::filesystem::path& train_label_file = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw EmptyCorpus("corpus root is not a directory: " + root.string());

  std::map<std::string, std::string> labels;
  if (!label_file.empty()) labels = read_label_file(label_file);
  std::map<std::string, std::string> train_labels;
  if (!train_label_file.empty()) train_labels = read_label_file(train_label_file);

  std::vector<fs::path> app_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) app_dirs.push_back(entry.path());
  std::sort(app_dirs.begin(), app_dirs.end());

  std::vector<AppSample> samples(app_dirs.size());
  std::vector<char> keep(app_dirs.size(), 0);
  parallel_for(app_dirs.size(), [&](std::size_t i) {
    const fs::path& dir = app_dirs[i];
    std::string id = dir.filename().string();
    fs::path manifest_path = dir / "AndroidManifest.xml";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
      log_warn("missing manifest, skipping sample: " + id);
      return;
    }
    std::string xml((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    AppSample s;
    s.id = id;
    try {
      s.manifest = parse_manifest(xml);
    } catch (const MalformedManifest& e) {
      log_warn(std::string(e.what()) + "; skipping sample: " + id);
      return;
    }
    s.methods = parse_smali_dir(dir / "smali");
    samples[i] = std::move(s);
    keep[i] = 1;
  });

  std::vector<AppSample> out;
  out.reserve(app_dirs.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!keep[i]) continue;
    AppSample& s = samples[i];
    if (auto it = labels.find(s.id); it != labels.end()) s.family = it->second;
    if (auto it = train_labels.find(s.id); it != train_labels.end()) s.train_family = it->second;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw EmptyCorpus("no ingestible samples under " + root.string());
  return out;
}

}  // namespace famclass
