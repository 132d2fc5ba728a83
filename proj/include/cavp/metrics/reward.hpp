#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cavp/metrics/bleu.hpp"
#include "cavp/metrics/cider.hpp"
#include "cavp/metrics/rouge.hpp"

namespace cavp::metrics {

enum class Metric { bleu1, bleu2, bleu3, bleu4, cider_d, cider, rouge_l };

inline Metric parse_metric(const std::string& name) {
  static const std::map<std::string, Metric> names = {
      {"BLEU-1", Metric::bleu1}, {"BLEU-2", Metric::bleu2}, {"BLEU-3", Metric::bleu3},
      {"BLEU-4", Metric::bleu4}, {"CIDEr-D", Metric::cider_d}, {"CIDEr", Metric::cider_d},
      {"CIDEr-plain", Metric::cider}, {"ROUGE-L", Metric::rouge_l}};
  auto it = names.find(name);
  if (it == names.end()) throw std::invalid_argument("unknown metric: " + name);
  return it->second;
}

inline std::string metric_name(Metric m) {
  switch (m) {
    case Metric::bleu1: return "BLEU-1";
    case Metric::bleu2: return "BLEU-2";
    case Metric::bleu3: return "BLEU-3";
    case Metric::bleu4: return "BLEU-4";
    case Metric::cider_d: return "CIDEr-D";
    case Metric::cider: return "CIDEr-plain";
    case Metric::rouge_l: return "ROUGE-L";
  }
  return {};
}

inline bool needs_idf(Metric m) { return m == Metric::cider_d || m == Metric::cider; }

/// Reward function r(.) selected by name. "CIDEr" is an alias of CIDEr-D.
struct RewardSpec {
  Metric metric = Metric::cider_d;
  double sigma = 6.0;
  double beta = 1.2;

  static RewardSpec named(const std::string& name) { return {parse_metric(name)}; }
  std::string name() const { return metric_name(metric); }
};

template <class Tok>
double reward(const std::vector<Tok>& cand, const std::vector<std::vector<Tok>>& refs, const RewardSpec& spec,
              const IdfTable<Tok>* idf = nullptr) {
  switch (spec.metric) {
    case Metric::bleu1: return bleu(cand, refs, 1);
    case Metric::bleu2: return bleu(cand, refs, 2);
    case Metric::bleu3: return bleu(cand, refs, 3);
    case Metric::bleu4: return bleu(cand, refs, 4);
    case Metric::cider_d:
    case Metric::cider:
      if (idf == nullptr) throw std::invalid_argument("reward: CIDEr requires an idf table (build_idf)");
      return cider(cand, refs, *idf, {spec.sigma, spec.metric == Metric::cider_d});
    case Metric::rouge_l: return rouge_l(cand, refs, spec.beta);
  }
  throw std::invalid_argument("reward: unhandled metric");
}

/// Corpus scores: BLEU-1..4 from pooled counts; CIDEr-D and ROUGE-L as means
/// over images. CIDEr-D uses an idf table built from `refs`.
template <class Tok>
std::map<std::string, double> evaluate_corpus(const std::vector<std::vector<Tok>>& cands,
                                              const std::vector<std::vector<std::vector<Tok>>>& refs,
                                              const std::vector<Metric>& which = {Metric::bleu1, Metric::bleu2,
                                                                                  Metric::bleu3, Metric::bleu4,
                                                                                  Metric::cider_d, Metric::rouge_l}) {
  if (cands.empty()) throw std::invalid_argument("evaluate_corpus: no candidates");
  if (cands.size() != refs.size()) throw std::invalid_argument("evaluate_corpus: candidate/reference count mismatch");
  std::map<std::string, double> out;
  std::optional<IdfTable<Tok>> idf;
  const double n = static_cast<double>(cands.size());
  for (auto m : which) {
    switch (m) {
      case Metric::bleu1:
      case Metric::bleu2:
      case Metric::bleu3:
      case Metric::bleu4:
        out[metric_name(m)] = corpus_bleu(cands, refs, static_cast<std::size_t>(m) + 1);
        break;
      case Metric::cider_d:
      case Metric::cider: {
        if (!idf) idf = build_idf(refs);
        double s = 0.0;
        for (std::size_t i = 0; i < cands.size(); ++i) s += cider(cands[i], refs[i], *idf, {6.0, m == Metric::cider_d});
        out[metric_name(m)] = s / n;
        break;
      }
      case Metric::rouge_l: {
        double s = 0.0;
        for (std::size_t i = 0; i < cands.size(); ++i) s += rouge_l(cands[i], refs[i]);
        out[metric_name(m)] = s / n;
        break;
      }
    }
  }
  return out;
}

}  // namespace cavp::metrics
