#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cavp/data/features.hpp"
#include "cavp/data/text.hpp"

namespace cavp::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FeatureRef {
  std::string path;  // relative paths resolve against the manifest directory
  std::uint64_t row_begin = 0;
  std::uint64_t row_end = 0;
};

struct ManifestEntry {
  std::string image_id;
  FeatureRef feature_ref;
  std::vector<std::string> captions;
  std::vector<std::string> paragraph;  // sentences, in order

  bool is_paragraph() const { return !paragraph.empty(); }
};

struct DatasetManifest {
  std::string split = "train";
  std::vector<ManifestEntry> entries;

  void validate() const {
    static const std::set<std::string> splits = {"train", "val", "test"};
    if (!splits.count(split)) throw DataError("manifest split must be train, val or test, got " + split);
    std::set<std::string> ids;
    for (const auto& e : entries) {
      if (!ids.insert(e.image_id).second) throw DataError("duplicate image_id in manifest: " + e.image_id);
      if (e.captions.empty() && e.paragraph.empty()) throw DataError("manifest entry without captions: " + e.image_id);
      if (e.feature_ref.row_end <= e.feature_ref.row_begin)
        throw DataError("empty feature row range for image " + e.image_id);
    }
  }

  const ManifestEntry& find(const std::string& image_id) const {
    for (const auto& e : entries)
      if (e.image_id == image_id) return e;
    throw DataError("unknown image_id: " + image_id);
  }
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    nlohmann::json j = {{"image_id", e.image_id},
                        {"feature_ref",
                         {{"path", e.feature_ref.path},
                          {"row_begin", e.feature_ref.row_begin},
                          {"row_end", e.feature_ref.row_end}}}};
    if (!e.captions.empty()) j["captions"] = e.captions;
    if (!e.paragraph.empty()) j["paragraph"] = e.paragraph;
    entries.push_back(std::move(j));
  }
  return {{"split", m.split}, {"entries", entries}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.split = j.value("split", std::string("train"));
    for (const auto& ej : j.at("entries")) {
      ManifestEntry e;
      e.image_id = ej.at("image_id").get<std::string>();
      const auto& fr = ej.at("feature_ref");
      e.feature_ref = {fr.at("path").get<std::string>(), fr.at("row_begin").get<std::uint64_t>(),
                       fr.at("row_end").get<std::uint64_t>()};
      if (ej.contains("captions")) e.captions = ej["captions"].get<std::vector<std::string>>();
      if (ej.contains("paragraph")) e.paragraph = ej["paragraph"].get<std::vector<std::string>>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write manifest: " + path.string());
  os << to_json(m).dump(2) << '\n';
}

/// Resolves feature references, caching one FeatureFile per path.
class FeatureResolver {
 public:
  explicit FeatureResolver(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}

  Tensor<float> rows(const FeatureRef& ref) {
    auto p = std::filesystem::path(ref.path);
    if (p.is_relative()) p = base_ / p;
    auto it = files_.find(p.string());
    if (it == files_.end()) {
      if (!std::filesystem::exists(p)) throw DataError("feature file not found: " + p.string());
      try {
        it = files_.emplace(p.string(), FeatureFile(p)).first;
      } catch (const io::FormatError& e) {
        throw DataError(e.what());
      }
    }
    try {
      return it->second.read_rows(ref.row_begin, ref.row_end);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }

 private:
  std::filesystem::path base_;
  std::map<std::string, FeatureFile> files_;
};

template <class T = double>
RegionFeatureSet<T> load_features(const DatasetManifest& m, const std::filesystem::path& base_dir,
                                  const std::string& image_id) {
  FeatureResolver r(base_dir);
  return to_region_set<T>(r.rows(m.find(image_id).feature_ref));
}

/// One training/evaluation item with encoded references.
struct Example {
  std::string image_id;
  RegionFeatureSet<double> features;
  std::vector<std::vector<TokenId>> captions;   // EOS-terminated
  std::vector<std::vector<TokenId>> paragraph;  // sentences, each EOS-terminated
  std::vector<std::vector<TokenId>> references; // content ids used for rewards and scores
};

struct Dataset {
  Vocabulary vocab;
  std::vector<Example> items;

  bool is_paragraph() const { return !items.empty() && !items.front().paragraph.empty(); }
  std::size_t region_dim() const { return items.empty() ? 0 : items.front().features.dim(); }
};

struct DatasetOptions {
  std::size_t min_count = 1;
  std::size_t max_len = 16;
};

/// Encodes captions and fetches features through `rows`. Builds the
/// vocabulary from the manifest unless one is supplied.
inline Dataset build_dataset(const DatasetManifest& m, const std::function<Tensor<float>(const FeatureRef&)>& rows,
                             const DatasetOptions& opt = {}, const Vocabulary* vocab = nullptr) {
  if (m.entries.empty()) throw DataError("dataset is empty");
  Dataset d;
  if (vocab) {
    d.vocab = *vocab;
  } else {
    std::vector<std::vector<std::string>> corpus;
    for (const auto& e : m.entries) {
      for (const auto& c : e.captions) corpus.push_back(trim(tokenize(c), opt.max_len));
      for (const auto& s : e.paragraph) corpus.push_back(trim(tokenize(s), opt.max_len));
    }
    d.vocab = build_vocab(corpus, opt.min_count);
  }
  for (const auto& e : m.entries) {
    Example ex;
    ex.image_id = e.image_id;
    ex.features = to_region_set<double>(rows(e.feature_ref));
    for (const auto& c : e.captions) {
      ex.captions.push_back(encode_caption(d.vocab, c, opt.max_len));
      ex.references.push_back(content_ids(ex.captions.back()));
    }
    if (!e.paragraph.empty()) {
      std::vector<TokenId> flat;
      for (const auto& s : e.paragraph) {
        ex.paragraph.push_back(encode_caption(d.vocab, s, opt.max_len));
        auto c = content_ids(ex.paragraph.back());
        flat.insert(flat.end(), c.begin(), c.end());
      }
      ex.references.push_back(std::move(flat));
    }
    d.items.push_back(std::move(ex));
  }
  const auto D = d.items.front().features.dim();
  for (const auto& ex : d.items)
    if (ex.features.dim() != D) throw DataError("mixed feature dimensions in dataset at image " + ex.image_id);
  return d;
}

inline Dataset load_dataset(const DatasetManifest& m, const std::filesystem::path& base_dir,
                            const DatasetOptions& opt = {}, const Vocabulary* vocab = nullptr) {
  FeatureResolver resolver(base_dir);
  return build_dataset(m, [&](const FeatureRef& r) { return resolver.rows(r); }, opt, vocab);
}

inline Dataset load_dataset(const std::filesystem::path& manifest_path, const DatasetOptions& opt = {},
                            const Vocabulary* vocab = nullptr) {
  return load_dataset(load_manifest(manifest_path), manifest_path.parent_path(), opt, vocab);
}

}  // namespace cavp::data
