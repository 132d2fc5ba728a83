#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cavp/policy/visual_policy.hpp"
#include "cavp/substrate/binary_io.hpp"

namespace cavp::data {

inline constexpr char kFeatureMagic[8] = {'C', 'A', 'V', 'P', 'F', 'E', 'A', 'T'};
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
inline constexpr std::uint64_t kFeatureHeaderBytes = 8 + 4 * 4;

struct FeatureHeader {
  std::uint32_t version = kFeatureFormatVersion;
  std::uint32_t k = 0;
  std::uint32_t dim = 0;
  std::uint32_t count = 0;

  std::uint64_t body_bytes() const { return std::uint64_t{count} * k * dim * 4; }
  std::uint64_t total_rows() const { return std::uint64_t{count} * k; }
};

/// Writes `blocks` (each k x D) as little-endian float32.
inline void write_feature_file(const std::filesystem::path& path, const std::vector<Tensor<float>>& blocks) {
  if (blocks.empty()) throw std::invalid_argument("write_feature_file: no feature blocks");
  const std::size_t k = blocks.front().rows(), D = blocks.front().cols();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open feature file for writing: " + path.string());
  os.write(kFeatureMagic, 8);
  io::put_le<std::uint32_t>(os, kFeatureFormatVersion);
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(k));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(D));
  io::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(blocks.size()));
  for (const auto& b : blocks) {
    if (b.rank() != 2 || b.rows() != k || b.cols() != D)
      throw DimensionError("write_feature_file: every block must be " + std::to_string(k) + "x" + std::to_string(D));
    for (float v : b.storage()) io::put_f32(os, v);
  }
  if (!os) throw std::runtime_error("failed writing feature file: " + path.string());
}

/// Read-only view of a feature file. Every read opens its own stream, so one
/// instance may serve concurrent readers.
class FeatureFile {
 public:
  explicit FeatureFile(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream is(path_, std::ios::binary);
    if (!is) throw io::FormatError("cannot open feature file: " + path_.string());
    char magic[8];
    if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kFeatureMagic))
      throw io::FormatError("feature file magic mismatch: " + path_.string());
    header_.version = io::get_le<std::uint32_t>(is, "feature file version");
    if (header_.version != kFeatureFormatVersion)
      throw io::FormatError("unsupported feature file version " + std::to_string(header_.version));
    header_.k = io::get_le<std::uint32_t>(is, "feature file k");
    header_.dim = io::get_le<std::uint32_t>(is, "feature file D");
    header_.count = io::get_le<std::uint32_t>(is, "feature file count");
    if (header_.k == 0 || header_.dim == 0) throw io::FormatError("feature file has zero k or D");
    const auto expected = kFeatureHeaderBytes + header_.body_bytes();
    const auto actual = std::filesystem::file_size(path_);
    if (actual != expected)
      throw io::FormatError("feature file " + path_.string() + " has " + std::to_string(actual) +
                            " bytes, expected " + std::to_string(expected));
  }

  const FeatureHeader& header() const noexcept { return header_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  /// Rows [row_begin, row_end) of the file viewed as one (count*k) x D matrix.
  Tensor<float> read_rows(std::uint64_t row_begin, std::uint64_t row_end) const {
    if (row_begin >= row_end || row_end > header_.total_rows())
      throw std::out_of_range("feature rows [" + std::to_string(row_begin) + ", " + std::to_string(row_end) +
                              ") outside file with " + std::to_string(header_.total_rows()) + " rows");
    std::ifstream is(path_, std::ios::binary);
    if (!is) throw io::FormatError("cannot open feature file: " + path_.string());
    is.seekg(static_cast<std::streamoff>(kFeatureHeaderBytes + row_begin * header_.dim * 4));
    Tensor<float> out({static_cast<std::size_t>(row_end - row_begin), header_.dim});
    for (auto& v : out.storage()) v = io::get_f32(is, "feature values");
    return out;
  }

  Tensor<float> block(std::size_t index) const {
    return read_rows(std::uint64_t{index} * header_.k, std::uint64_t{index + 1} * header_.k);
  }

 private:
  std::filesystem::path path_;
  FeatureHeader header_;
};

template <class T = double>
RegionFeatureSet<T> to_region_set(const Tensor<float>& block) {
  return RegionFeatureSet<T>(block.template cast<T>());
}

}  // namespace cavp::data
