#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "famclass/callgraph.hpp"
#include "famclass/common.hpp"
#include "famclass/config.hpp"
#include "famclass/features.hpp"

// Dataset persistence: a versioned JSON document (dictionary, families,
// vocabulary, config) next to a compact binary row file (<path>.rows with
// sample id, labels, sorted column indices). Writes are atomic
// (temp + rename) and byte-deterministic.

namespace famclass {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr char kRowsMagic[5] = "FCRW";

inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct DatasetFile {
  LabeledDataset dataset;
  ApiVocabulary vocabulary;
  PipelineConfig config;
};

namespace detail {

inline std::string encode_rows(const LabeledDataset& ds) {
  std::string buf;
  buf.append(kRowsMagic, 4);
  io::put_u32(buf, kDatasetFormatVersion);
  io::put_u64(buf, ds.rows.size());
  for (const DatasetRow& row : ds.rows) {
    io::put_str(buf, row.id);
    io::put_i32(buf, row.label);
    io::put_i32(buf, row.train_label);
    io::put_u32(buf, static_cast<std::uint32_t>(row.vec.columns.size()));
    for (std::uint32_t c : row.vec.columns) io::put_u32(buf, c);
  }
  return buf;
}

}  // namespace detail

inline void save_dataset(const std::filesystem::path& path, const DatasetFile& file) {
  std::string rows = detail::encode_rows(file.dataset);
  std::filesystem::path rows_path = path;
  rows_path += ".rows";

  nlohmann::json j;
  j["format"] = "famclass-dataset";
  j["version"] = kDatasetFormatVersion;
  j["config"] = config_to_json(file.config);
  nlohmann::json dict = nlohmann::json::array();
  for (const auto& e : file.dataset.dictionary.entries)
    dict.push_back({{"token", e.token}, {"kind", feature_kind_name(e.kind)}});
  j["dictionary"] = std::move(dict);
  j["families"] = file.dataset.families;
  j["api_vocabulary"] = file.vocabulary.apis;
  j["rows_checksum"] = fnv1a64(rows.data(), rows.size());
  j["row_count"] = file.dataset.rows.size();

  write_file_atomic(rows_path, rows);
  write_file_atomic(path, j.dump(2) + "\n");
}

inline DatasetFile load_dataset(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad dataset file " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "famclass-dataset")
    throw DataError("not a dataset file: " + path.string());

  DatasetFile file;
  file.config = config_from_json(j.at("config"));
  std::vector<std::string> tokens;
  for (const auto& e : j.at("dictionary")) tokens.push_back(e.at("token").get<std::string>());
  // from_tokens sorts; dictionary files are written in sorted order already
  // so the column mapping is preserved.
  file.dataset.dictionary = FeatureDictionary::from_tokens(tokens);
  if (file.dataset.dictionary.size() != tokens.size())
    throw DataError("dataset dictionary has duplicate tokens: " + path.string());
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (file.dataset.dictionary.entries[i].token != tokens[i])
      throw DataError("dataset dictionary is not in canonical order: " + path.string());
  file.dataset.families = j.at("families").get<std::vector<std::string>>();
  file.vocabulary =
      ApiVocabulary::from_list(j.at("api_vocabulary").get<std::vector<std::string>>());

  std::filesystem::path rows_path = path;
  rows_path += ".rows";  // always written alongside the JSON document
  std::string rows = read_file(rows_path);
  if (j.at("rows_checksum").get<std::uint64_t>() != fnv1a64(rows.data(), rows.size()))
    throw DataError("row file checksum mismatch: " + rows_path.string());

  if (rows.size() < 4 || std::string_view(rows.data(), 4) != std::string_view(kRowsMagic, 4))
    throw DataError("bad row file magic: " + rows_path.string());
  io::Reader r(std::string_view(rows).substr(4));
  if (r.get_u32() != kDatasetFormatVersion)
    throw DataError("unsupported row file version: " + rows_path.string());
  std::uint64_t count = r.get_u64();
  const auto dim = static_cast<std::uint32_t>(file.dataset.dictionary.size());
  const auto n_fam = static_cast<std::int32_t>(file.dataset.families.size());
  file.dataset.rows.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    DatasetRow row;
    row.id = r.get_str();
    row.label = r.get_i32();
    row.train_label = r.get_i32();
    if (row.label >= n_fam || row.train_label >= n_fam)
      throw DataError("row label out of range in " + rows_path.string());
    std::uint32_t ncols = r.get_u32();
    row.vec.dimension = dim;
    row.vec.columns.reserve(ncols);
    for (std::uint32_t c = 0; c < ncols; ++c) {
      std::uint32_t col = r.get_u32();
      if (col >= dim) throw DataError("row column out of range in " + rows_path.string());
      row.vec.columns.push_back(col);
    }
    file.dataset.rows.push_back(std::move(row));
  }
  if (!r.at_end()) throw DataError("trailing bytes in row file: " + rows_path.string());
  return file;
}

}  // namespace famclass
