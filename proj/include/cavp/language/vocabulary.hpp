#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace cavp {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kReservedTokens = 4;

/// Token <-> id bijection with PAD/BOS/EOS/UNK at ids 0..3.
class Vocabulary {
 public:
  Vocabulary() : tokens_{"<pad>", "<bos>", "<eos>", "<unk>"} {
    for (TokenId i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = i;
  }

  /// Content tokens in id order (ids start at 4).
  explicit Vocabulary(const std::vector<std::string>& content) : Vocabulary() {
    for (const auto& t : content) add(t);
  }

  TokenId add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    tokens_.push_back(token);
    ids_[token] = tokens_.size() - 1;
    return tokens_.size() - 1;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }

  TokenId id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) throw std::out_of_range("token id " + std::to_string(id) + " out of vocabulary");
    return tokens_[id];
  }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  /// Content words only: stops at EOS, skips PAD/BOS.
  std::vector<std::string> decode(const std::vector<TokenId>& ids) const {
    std::vector<std::string> out;
    for (auto i : ids) {
      if (i == kEos) break;
      if (i == kPad || i == kBos) continue;
      out.push_back(token(i));
    }
    return out;
  }

  nlohmann::json to_json() const { return {{"tokens", tokens_}}; }

  static Vocabulary from_json(const nlohmann::json& j) {
    auto toks = j.at("tokens").get<std::vector<std::string>>();
    if (toks.size() < kReservedTokens + 1) throw std::invalid_argument("vocabulary needs at least one content token");
    const char* reserved[] = {"<pad>", "<bos>", "<eos>", "<unk>"};
    for (std::size_t i = 0; i < kReservedTokens; ++i)
      if (toks[i] != reserved[i]) throw std::invalid_argument("vocabulary reserved ids are not in canonical order");
    Vocabulary v;
    for (std::size_t i = kReservedTokens; i < toks.size(); ++i) {
      if (v.contains(toks[i])) throw std::invalid_argument("duplicate vocabulary token: " + toks[i]);
      v.add(toks[i]);
    }
    return v;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Content tokens of a decoded id sequence (drops EOS and anything after it).
inline std::vector<TokenId> content_ids(const std::vector<TokenId>& ids) {
  std::vector<TokenId> out;
  for (auto i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace cavp
