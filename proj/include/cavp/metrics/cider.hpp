#pragma once

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "cavp/metrics/ngram.hpp"

namespace cavp::metrics {

/// Document frequencies of n-grams (orders 1..4) over a reference corpus,
/// one document per image.
template <class Tok>
struct IdfTable {
  std::map<NGram<Tok>, std::size_t> df;
  std::size_t images = 0;

  bool empty() const noexcept { return images == 0; }
  double log_images() const { return std::log(static_cast<double>(images)); }

  std::size_t document_frequency(const NGram<Tok>& g) const {
    auto it = df.find(g);
    return it == df.end() ? 0 : it->second;
  }

  /// log(N) - log(max(1, df)); n-grams unseen in the corpus get log N.
  double idf(const NGram<Tok>& g) const {
    const auto d = document_frequency(g);
    return log_images() - std::log(static_cast<double>(d > 0 ? d : 1));
  }
};

template <class Tok>
IdfTable<Tok> build_idf(const std::vector<std::vector<std::vector<Tok>>>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("build_idf: corpus must be non-empty");
  IdfTable<Tok> t;
  t.images = corpus.size();
  for (const auto& refs : corpus) {
    std::set<NGram<Tok>> seen;
    for (const auto& r : refs)
      for (std::size_t n = 1; n <= kMaxOrder; ++n)
        for (const auto& kv : count_ngrams(r, n)) seen.insert(kv.first);
    for (const auto& g : seen) ++t.df[g];
  }
  return t;
}

struct CiderOptions {
  double sigma = 6.0;
  /// false: plain CIDEr (no clipping, no length penalty, no x10 scaling).
  bool cider_d = true;
};

namespace detail {

template <class Tok>
struct TfIdfVector {
  std::map<NGram<Tok>, double> weights;
  double norm = 0.0;
};

template <class Tok>
TfIdfVector<Tok> tfidf(const std::vector<Tok>& s, std::size_t n, const IdfTable<Tok>& idf) {
  TfIdfVector<Tok> v;
  for (const auto& [g, tf] : count_ngrams(s, n)) {
    const double w = static_cast<double>(tf) * idf.idf(g);
    v.weights[g] = w;
    v.norm += w * w;
  }
  v.norm = std::sqrt(v.norm);
  return v;
}

}  // namespace detail

/// CIDEr-D: per order, the clipped tf-idf cosine between candidate and each
/// reference times exp(-(l_c - l_r)^2 / (2 sigma^2)); averaged over references
/// and orders 1..4, times 10.
template <class Tok>
double cider(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs, const IdfTable<Tok>& idf,
             const CiderOptions& opt = {}) {
  if (idf.empty()) throw std::invalid_argument("cider: idf table is empty; build it with build_idf over the references");
  if (refs.empty()) throw std::invalid_argument("cider: references must be non-empty");
  double total = 0.0;
  for (std::size_t n = 1; n <= kMaxOrder; ++n) {
    const auto vc = detail::tfidf(cand, n, idf);
    double order_sum = 0.0;
    for (const auto& r : refs) {
      const auto vr = detail::tfidf(r, n, idf);
      if (vc.norm == 0.0 || vr.norm == 0.0) continue;
      double dot = 0.0;
      for (const auto& [g, wc] : vc.weights) {
        auto it = vr.weights.find(g);
        if (it == vr.weights.end()) continue;
        dot += opt.cider_d ? std::min(wc, it->second) * it->second : wc * it->second;
      }
      double sim = dot / (vc.norm * vr.norm);
      if (opt.cider_d) {
        const double delta = static_cast<double>(cand.size()) - static_cast<double>(r.size());
        sim *= std::exp(-(delta * delta) / (2.0 * opt.sigma * opt.sigma));
      }
      order_sum += sim;
    }
    total += order_sum / static_cast<double>(refs.size());
  }
  const double mean = total / static_cast<double>(kMaxOrder);
  return opt.cider_d ? 10.0 * mean : mean;
}

template <class Tok>
double cider_d(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs, const IdfTable<Tok>& idf,
               double sigma = 6.0) {
  return cider(cand, refs, idf, {sigma, true});
}

}  // namespace cavp::metrics
