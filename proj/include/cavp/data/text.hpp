#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavp/language/vocabulary.hpp"

namespace cavp::data {

/// Lowercases, splits on whitespace, strips leading and trailing ASCII
/// punctuation from each token and drops tokens left empty.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && std::ispunct(static_cast<unsigned char>(cur[b]))) ++b;
    while (e > b && std::ispunct(static_cast<unsigned char>(cur[e - 1]))) --e;
    if (e > b) out.push_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

inline std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

/// Tokens seen at least `min_count` times, ordered by descending count then
/// alphabetically, after the reserved ids.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t min_count = 5) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: corpus must be non-empty");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : corpus)
    for (const auto& t : s) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [t, c] : counts)
    if (c >= min_count) kept.emplace_back(t, c);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [t, c] : kept)
    if (!v.contains(t)) v.add(t);
  return v;
}

inline std::vector<std::string> trim(const std::vector<std::string>& tokens, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("trim: max_len must be at least 1");
  return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(std::min(max_len, tokens.size()))};
}

/// Tokenize, trim to max_len, map to ids and append EOS.
inline std::vector<TokenId> encode_caption(const Vocabulary& vocab, const std::string& text, std::size_t max_len) {
  auto ids = vocab.encode(trim(tokenize(text), max_len));
  ids.push_back(kEos);
  return ids;
}

}  // namespace cavp::data
