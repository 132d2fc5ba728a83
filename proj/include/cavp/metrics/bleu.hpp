#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "cavp/metrics/ngram.hpp"

namespace cavp::metrics {

/// Zero precisions are replaced by this value in sentence mode.
inline constexpr double kSentenceBleuEpsilon = 1e-9;

/// Sufficient statistics of one candidate against its references.
struct BleuStats {
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;  // closest reference length
  std::size_t matches[kMaxOrder] = {};
  std::size_t totals[kMaxOrder] = {};

  BleuStats& operator+=(const BleuStats& o) {
    candidate_length += o.candidate_length;
    reference_length += o.reference_length;
    for (std::size_t i = 0; i < kMaxOrder; ++i) {
      matches[i] += o.matches[i];
      totals[i] += o.totals[i];
    }
    return *this;
  }
};

/// Reference length closest to c; ties go to the shorter reference.
template <class Tok>
std::size_t closest_reference_length(std::size_t c, const std::vector<std::vector<Tok>>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t x) { return x > c ? x - c : c - x; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

template <class Tok>
BleuStats bleu_stats(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs) {
  if (refs.empty()) throw std::invalid_argument("bleu: references must be non-empty");
  BleuStats s;
  s.candidate_length = cand.size();
  s.reference_length = closest_reference_length(cand.size(), refs);
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const auto c = count_ngrams(cand, n);
    NGramCounts<Tok> max_ref;
    for (const auto& r : refs)
      for (const auto& [g, k] : count_ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    for (const auto& [g, k] : c) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) s.matches[n - 1] += std::min(k, it->second);
      s.totals[n - 1] += k;
    }
  }
  return s;
}

inline double brevity_penalty(std::size_t c, std::size_t r) {
  if (c == 0) return 0.0;
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

/// BLEU-n from accumulated statistics. `epsilon` replaces zero precisions
/// (0 disables smoothing).
inline double bleu_from_stats(const BleuStats& s, std::size_t n, double epsilon) {
  if (n < 1 || n > kMaxOrder) throw std::invalid_argument("bleu: order must be in 1..4");
  if (s.candidate_length == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p = s.totals[i] == 0 ? 0.0 : static_cast<double>(s.matches[i]) / static_cast<double>(s.totals[i]);
    if (p == 0.0) {
      if (epsilon <= 0.0) return 0.0;
      p = epsilon;
    }
    log_sum += std::log(p);
  }
  return brevity_penalty(s.candidate_length, s.reference_length) * std::exp(log_sum / static_cast<double>(n));
}

/// Sentence BLEU-n with uniform weights.
template <class Tok>
double bleu(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs, std::size_t n) {
  if (refs.empty()) throw std::invalid_argument("bleu: references must be non-empty");
  if (cand.empty()) return 0.0;
  return bleu_from_stats(bleu_stats(cand, refs), n, kSentenceBleuEpsilon);
}

/// Corpus BLEU-n: counts and lengths are summed before the ratios; no smoothing.
template <class Tok>
double corpus_bleu(const std::vector<std::vector<Tok>>& cands, const std::vector<std::vector<std::vector<Tok>>>& refs,
                   std::size_t n) {
  if (cands.size() != refs.size()) throw std::invalid_argument("corpus_bleu: candidate/reference count mismatch");
  BleuStats total;
  for (std::size_t i = 0; i < cands.size(); ++i) total += bleu_stats(cands[i], refs[i]);
  return bleu_from_stats(total, n, 0.0);
}

}  // namespace cavp::metrics
