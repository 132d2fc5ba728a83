#pragma once

#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "cavp/data/features.hpp"
#include "cavp/data/manifest.hpp"
#include "cavp/substrate/random.hpp"

namespace cavp::data {

/// Word lists of the synthetic grammar "a <attr> <obj> <relation> a <attr> <obj>".
struct SynthVocab {
  std::vector<std::string> objects = {"man", "horse", "dog", "ball", "woman", "bike", "cat", "kite"};
  std::vector<std::string> attributes = {"red", "small", "young", "brown"};
  std::vector<std::string> relations = {"riding", "holding", "chasing", "watching"};

  std::vector<std::string> closure() const {
    std::vector<std::string> out = {"a"};
    out.insert(out.end(), objects.begin(), objects.end());
    out.insert(out.end(), attributes.begin(), attributes.end());
    out.insert(out.end(), relations.begin(), relations.end());
    return out;
  }

  /// Relation between subject and object classes (subject has the lower index).
  std::size_t relation(std::size_t subject, std::size_t object) const { return (subject + object) % relations.size(); }
};

inline constexpr std::size_t kPairSlots = 4;

struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t n_images = 20;
  std::size_t k = 6;
  std::size_t dim = 24;
  bool paragraph = false;
  std::size_t captions_per_image = 2;
  double feature_noise = 0.05;  // on the object/attribute/slot blocks
  double background_noise = 0.5;
  // Every region also carries a hidden relation code; a pair's relation is
  // the sum of its two codes modulo the relation count.
  bool relation_codes = false;
  SynthVocab vocab;
  std::string feature_file = "features.bin";
};

struct SynthPair {
  std::size_t subject_region = 0, object_region = 0;
  std::size_t subject_class = 0, object_class = 0;
  std::size_t subject_attr = 0, object_attr = 0;
  std::size_t relation = 0;
  std::size_t subject_code = 0, object_code = 0;  // with relation_codes
};

struct SynthImage {
  std::string image_id;
  std::vector<SynthPair> pairs;       // one per sentence
  std::vector<std::string> sentences;
};

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<Tensor<float>> features;
  std::vector<SynthImage> images;
};

/// Region layout: [object one-hot | attribute one-hot | pair slot one-hot |
/// relation code one-hot (optional) | noise].
/// Each image has one salient region pair per sentence, marked in its pair
/// slot, plus distractor regions with random object and attribute codes.
inline SynthDataset synth_dataset(const SynthOptions& opt) {
  const auto& V = opt.vocab;
  const std::size_t n_obj = V.objects.size(), n_attr = V.attributes.size();
  const std::size_t n_rel = V.relations.size();
  const std::size_t code_begin = n_obj + n_attr + kPairSlots;
  const std::size_t structured = code_begin + (opt.relation_codes ? n_rel : 0);
  if (opt.n_images == 0) throw std::invalid_argument("synth: n_images must be at least 1");
  if (opt.dim < structured)
    throw std::invalid_argument("synth: dim must be at least " + std::to_string(structured));
  if (opt.k < (opt.paragraph ? 4u : 2u))
    throw std::invalid_argument(std::string("synth: k must be at least ") + (opt.paragraph ? "4" : "2"));
  if (n_obj < 2 || V.relations.empty() || n_attr == 0) throw std::invalid_argument("synth: vocabulary too small");
  if (opt.captions_per_image == 0) throw std::invalid_argument("synth: captions_per_image must be at least 1");

  Rng rng(opt.seed);
  SynthDataset ds;
  ds.manifest.split = "train";
  for (std::size_t img = 0; img < opt.n_images; ++img) {
    SynthImage si;
    si.image_id = "synth_" + std::to_string(img);
    const std::size_t max_pairs = std::min(kPairSlots, opt.k / 2);
    const std::size_t n_pairs = opt.paragraph ? 2 + uniform_index(rng, max_pairs - 1) : 1;

    std::vector<std::size_t> order(opt.k);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);

    Tensor<float> regions({opt.k, opt.dim});
    auto put_code = [&](std::size_t row, std::size_t cls, std::size_t attr) {
      regions(row, cls) = 1.0f;
      regions(row, n_obj + attr) = 1.0f;
    };
    for (std::size_t p = 0; p < n_pairs; ++p) {
      SynthPair sp;
      const std::size_t a = uniform_index(rng, n_obj);
      std::size_t b = uniform_index(rng, n_obj - 1);
      if (b >= a) ++b;
      sp.subject_class = std::min(a, b);
      sp.object_class = std::max(a, b);
      sp.subject_attr = uniform_index(rng, n_attr);
      sp.object_attr = uniform_index(rng, n_attr);
      // Regions appear in random order; the subject region is not always first.
      const bool swap = uniform_index(rng, 2) == 1;
      sp.subject_region = order[2 * p + (swap ? 1 : 0)];
      sp.object_region = order[2 * p + (swap ? 0 : 1)];
      sp.relation = V.relation(sp.subject_class, sp.object_class);
      if (opt.relation_codes) {
        sp.subject_code = uniform_index(rng, n_rel);
        sp.object_code = uniform_index(rng, n_rel);
        sp.relation = (sp.subject_code + sp.object_code) % n_rel;
        regions(sp.subject_region, code_begin + sp.subject_code) = 1.0f;
        regions(sp.object_region, code_begin + sp.object_code) = 1.0f;
      }
      put_code(sp.subject_region, sp.subject_class, sp.subject_attr);
      put_code(sp.object_region, sp.object_class, sp.object_attr);
      regions(sp.subject_region, n_obj + n_attr + p) = 1.0f;
      regions(sp.object_region, n_obj + n_attr + p) = 1.0f;
      si.sentences.push_back("a " + V.attributes[sp.subject_attr] + " " + V.objects[sp.subject_class] + " " +
                             V.relations[sp.relation] + " a " + V.attributes[sp.object_attr] + " " +
                             V.objects[sp.object_class]);
      si.pairs.push_back(sp);
    }
    for (std::size_t r = 2 * n_pairs; r < opt.k; ++r) {
      put_code(order[r], uniform_index(rng, n_obj), uniform_index(rng, n_attr));
      if (opt.relation_codes) regions(order[r], code_begin + uniform_index(rng, n_rel)) = 1.0f;
    }
    for (std::size_t r = 0; r < opt.k; ++r) {
      for (std::size_t c = 0; c < structured; ++c)
        regions(r, c) += static_cast<float>(normal(rng, 0.0, opt.feature_noise));
      for (std::size_t c = structured; c < opt.dim; ++c)
        regions(r, c) = static_cast<float>(normal(rng, 0.0, opt.background_noise));
    }

    ManifestEntry e;
    e.image_id = si.image_id;
    e.feature_ref = {opt.feature_file, img * opt.k, (img + 1) * opt.k};
    if (opt.paragraph) {
      e.paragraph = si.sentences;
    } else {
      e.captions.assign(opt.captions_per_image, si.sentences.front());
    }
    ds.manifest.entries.push_back(std::move(e));
    ds.features.push_back(std::move(regions));
    ds.images.push_back(std::move(si));
  }
  return ds;
}

/// In-memory dataset with the same contents as writing and reloading `ds`.
inline Dataset to_dataset(const SynthDataset& ds, const DatasetOptions& opt = {}) {
  DatasetOptions o = opt;
  if (!ds.manifest.entries.empty() && ds.manifest.entries.front().is_paragraph() && o.max_len < 30) o.max_len = 30;
  return build_dataset(
      ds.manifest,
      [&](const FeatureRef& r) {
        const std::size_t k = ds.features.front().rows();
        return ds.features.at(r.row_begin / k);
      },
      o);
}

/// Writes the feature file and manifest.json into `dir`; returns the manifest path.
inline std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, const SynthDataset& ds) {
  std::filesystem::create_directories(dir);
  write_feature_file(dir / ds.manifest.entries.front().feature_ref.path, ds.features);
  const auto manifest = dir / "manifest.json";
  save_manifest(manifest, ds.manifest);
  return manifest;
}

}  // namespace cavp::data
