#pragma once

#include <array>
#include <set>
#include <string>
#include <vector>

#include "cavp/language/vocabulary.hpp"

namespace cavp::training {

/// Output sub-policy actions: single feature, composition feature, mean region.
inline constexpr std::size_t kOutputSingle = 0;
inline constexpr std::size_t kOutputComposition = 1;
inline constexpr std::size_t kOutputSentinel = 2;

using OutputPrior = std::array<double, 3>;

inline const std::set<std::string>& function_words() {
  static const std::set<std::string> words = {
      // articles and determiners
      "a", "an", "the", "this", "that", "these", "those", "some", "its", "their", "his", "her",
      // prepositions
      "of", "in", "on", "at", "by", "with", "from", "to", "into", "onto", "over", "under", "near", "next", "behind",
      "above", "below", "for", "through", "across", "around", "beside", "between", "up", "down", "off", "out",
      // conjunctions
      "and", "or", "but", "while", "as",
      // auxiliaries
      "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do", "does", "can", "will",
      // punctuation tokens
      ".", ",", ";", ":", "!", "?", "'s"};
  return words;
}

/// Heuristic expert for the output sub-policy: the upcoming ground-truth
/// word selects the mean region when it is a function word (or a reserved
/// token), else splits evenly between the single and composition features.
class ExpertPolicy {
 public:
  explicit ExpertPolicy(const Vocabulary& vocab) : function_(vocab.size(), false) {
    for (TokenId i = 0; i < vocab.size(); ++i)
      function_[i] = i < kReservedTokens || function_words().count(vocab.token(i)) != 0;
  }

  bool is_function_word(TokenId id) const { return id >= function_.size() || function_[id]; }

  OutputPrior operator()(TokenId target) const {
    if (is_function_word(target)) return {0.0, 0.0, 1.0};
    return {0.5, 0.5, 0.0};
  }

  std::vector<OutputPrior> targets(const std::vector<TokenId>& y) const {
    std::vector<OutputPrior> out;
    out.reserve(y.size());
    for (auto t : y) out.push_back((*this)(t));
    return out;
  }

 private:
  std::vector<bool> function_;
};

}  // namespace cavp::training
