#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cavp/substrate/binary_io.hpp"
#include "cavp/substrate/parameter.hpp"

namespace cavp {

// Layout (all integers little-endian):
//   "CAVPCKPT" | u32 header_len | header JSON | u32 n_params |
//   n_params x { u32 name_len | name | u32 rank | rank x u64 dim | values as f64 }
inline constexpr char kCheckpointMagic[8] = {'C', 'A', 'V', 'P', 'C', 'K', 'P', 'T'};
inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  nlohmann::json header;
  std::map<std::string, Tensor<double>> tensors;
  std::vector<std::string> order;

  std::string config_hash() const { return header.value("model_config_hash", std::string{}); }
};

/// FNV-1a over the canonical (sorted-key, compact) JSON dump, as 16 hex digits.
inline std::string config_hash(const nlohmann::json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

template <class T>
void write_checkpoint(std::ostream& os, const ParameterStore<T>& store, const std::string& model_config_hash) {
  nlohmann::json header = {{"format_version", kCheckpointFormatVersion}, {"model_config_hash", model_config_hash}};
  const std::string hs = header.dump();
  os.write(kCheckpointMagic, 8);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(store.count()));
  for (const auto& p : store) {
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(p->name.size()));
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    const auto& shape = p->value.shape();
    io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) io::put_le<std::uint64_t>(os, d);
    for (auto v : p->value.storage()) io::put_f64(os, static_cast<double>(v));
  }
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<T>& store,
                     const std::string& model_config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(os, store, model_config_hash);
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

inline Checkpoint read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw io::FormatError("not a checkpoint file (bad magic)");
  Checkpoint ck;
  const auto hlen = io::get_le<std::uint32_t>(is, "header length");
  std::string hs(hlen, '\0');
  if (!is.read(hs.data(), hlen)) throw io::FormatError("truncated checkpoint header");
  ck.header = nlohmann::json::parse(hs);
  if (ck.header.value("format_version", 0) != kCheckpointFormatVersion)
    throw io::FormatError("unsupported checkpoint format version");
  const auto n = io::get_le<std::uint32_t>(is, "parameter count");
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto nl = io::get_le<std::uint32_t>(is, "name length");
    std::string name(nl, '\0');
    if (!is.read(name.data(), nl)) throw io::FormatError("truncated parameter name");
    const auto rank = io::get_le<std::uint32_t>(is, "rank");
    if (rank == 0 || rank > 2) throw io::FormatError("bad rank for parameter " + name);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(io::get_le<std::uint64_t>(is, "dimension"));
    Tensor<double> t(shape);
    for (auto& v : t.storage()) v = io::get_f64(is, "parameter values");
    ck.order.push_back(name);
    ck.tensors.emplace(name, std::move(t));
  }
  return ck;
}

inline Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  return read_checkpoint(is);
}

/// Copies checkpoint values into a store whose names and shapes must match exactly.
template <class T>
void apply_checkpoint(const Checkpoint& ck, ParameterStore<T>& store) {
  if (ck.tensors.size() != store.count())
    throw io::FormatError("checkpoint holds " + std::to_string(ck.tensors.size()) + " parameters, model has " +
                          std::to_string(store.count()));
  for (auto& p : store) {
    auto it = ck.tensors.find(p->name);
    if (it == ck.tensors.end()) throw io::FormatError("checkpoint is missing parameter " + p->name);
    if (it->second.shape() != p->value.shape())
      throw io::FormatError("shape mismatch for " + p->name + ": checkpoint " + shape_string(it->second.shape()) +
                            ", model " + shape_string(p->value.shape()));
    for (std::size_t i = 0; i < p->size(); ++i) p->value[i] = static_cast<T>(it->second[i]);
  }
}

}  // namespace cavp
