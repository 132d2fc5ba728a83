#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace cavp::metrics {

inline constexpr std::size_t kMaxOrder = 4;

template <class Tok>
using NGram = std::vector<Tok>;

/// Counts of the n-grams of one order.
template <class Tok>
using NGramCounts = std::map<NGram<Tok>, std::size_t>;

template <class Tok>
NGramCounts<Tok> count_ngrams(std::span<const Tok> tokens, std::size_t n) {
  NGramCounts<Tok> out;
  if (n == 0 || tokens.size() < n) return out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) ++out[NGram<Tok>(tokens.begin() + i, tokens.begin() + i + n)];
  return out;
}

template <class Tok>
NGramCounts<Tok> count_ngrams(const std::vector<Tok>& tokens, std::size_t n) {
  return count_ngrams(std::span<const Tok>(tokens), n);
}

/// Orders 1..max_n, index 0 holding unigrams.
template <class Tok>
std::vector<NGramCounts<Tok>> ngram_stats(const std::vector<Tok>& tokens, std::size_t max_n = kMaxOrder) {
  std::vector<NGramCounts<Tok>> out;
  for (std::size_t n = 1; n <= max_n; ++n) out.push_back(count_ngrams(tokens, n));
  return out;
}

}  // namespace cavp::metrics
