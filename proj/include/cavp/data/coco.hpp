#pragma once

#include <map>
#include <string>

#include "json.hpp"

#include "cavp/data/manifest.hpp"

namespace cavp::data {

/// Groups COCO-style annotations {"annotations": [{image_id, caption}]} by
/// image. Image ids may be numbers or strings.
inline std::map<std::string, std::vector<std::string>> coco_captions(const nlohmann::json& j) {
  std::map<std::string, std::vector<std::string>> out;
  try {
    for (const auto& a : j.at("annotations")) {
      const auto& id = a.at("image_id");
      const std::string key = id.is_string() ? id.get<std::string>() : id.dump();
      out[key].push_back(a.at("caption").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed COCO annotations: ") + e.what());
  }
  return out;
}

/// Manifest for COCO captions whose features are stored one block per image,
/// in `image_order`, in a single feature file with k regions per image.
inline DatasetManifest coco_manifest(const nlohmann::json& annotations, const std::vector<std::string>& image_order,
                                     const std::string& feature_path, std::size_t k, const std::string& split = "train") {
  const auto caps = coco_captions(annotations);
  DatasetManifest m;
  m.split = split;
  for (std::size_t i = 0; i < image_order.size(); ++i) {
    auto it = caps.find(image_order[i]);
    if (it == caps.end()) throw DataError("no captions for image " + image_order[i]);
    m.entries.push_back({image_order[i], {feature_path, i * k, (i + 1) * k}, it->second, {}});
  }
  m.validate();
  return m;
}

}  // namespace cavp::data
