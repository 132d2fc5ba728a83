#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace cavp::metrics {

template <class Tok>
std::size_t lcs_length(const std::vector<Tok>& a, const std::vector<Tok>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS F-measure F = (1 + b^2) P R / (R + b^2 P), maximised over references.
template <class Tok>
double rouge_l(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs, double beta = 1.2) {
  if (refs.empty()) throw std::invalid_argument("rouge_l: references must be non-empty");
  double best = 0.0;
  if (cand.empty()) return best;
  const double b2 = beta * beta;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    const auto l = lcs_length(cand, r);
    if (l == 0) continue;
    const double p = static_cast<double>(l) / static_cast<double>(cand.size());
    const double rec = static_cast<double>(l) / static_cast<double>(r.size());
    best = std::max(best, (1.0 + b2) * p * rec / (rec + b2 * p));
  }
  return best;
}

}  // namespace cavp::metrics
