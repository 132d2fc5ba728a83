#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "cavp/language/captioning.hpp"
#include "cavp/language/paragraph_model.hpp"
#include "cavp/language/sentence_model.hpp"
#include "cavp/training/expert.hpp"

namespace cavp::training {

inline constexpr double kKlFloor = 1e-8;

template <class T>
struct XeResult {
  Var loss;
  std::vector<Var> output_distributions;  // one per fed token; empty for the single-only variant
  std::size_t tokens = 0;
};

inline void check_target(const std::vector<TokenId>& y) {
  if (y.empty()) throw std::invalid_argument("xe_loss: empty target");
  std::size_t n = y.size();
  while (n > 0 && y[n - 1] == kPad) --n;
  if (n == 0 || y[n - 1] != kEos) throw std::invalid_argument("xe_loss: target must be EOS-terminated");
}

/// -sum_t log pi(y_t | y_{<t}), teacher-forced; trailing PAD positions are masked.
template <class T>
XeResult<T> xe_loss(Graph<T>& g, const SentenceModel<T>& model, const RegionFeatureSet<T>& rf,
                    const std::vector<TokenId>& y) {
  check_target(y);
  SentenceSession<T> s(g, model, rf);
  auto st = s.initial();
  XeResult<T> r;
  std::vector<Var> terms;
  TokenId prev = kBos;
  for (auto tok : y) {
    if (tok == kPad) break;
    Var lp = s.step(st, prev);
    if (tok >= g.dim(lp)) throw std::out_of_range("token id " + std::to_string(tok) + " out of vocabulary");
    terms.push_back(g.pick(lp, tok));
    if (s.last().output_distribution.valid()) r.output_distributions.push_back(s.last().output_distribution);
    prev = tok;
  }
  r.tokens = terms.size();
  r.loss = g.scale(g.sum(terms), T(-1));
  return r;
}

/// KL(p || q) with q floored at kKlFloor; terms with p = 0 vanish.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], 0.0) + kKlFloor));
  return kl;
}

/// KL(expert || output) summed over steps, on the graph.
template <class T>
Var kl_term(Graph<T>& g, const std::vector<Var>& output_distributions, const std::vector<OutputPrior>& expert) {
  if (output_distributions.size() != expert.size())
    throw std::invalid_argument("behavior cloning: " + std::to_string(output_distributions.size()) +
                                " output distributions for " + std::to_string(expert.size()) + " expert targets");
  std::vector<Var> terms;
  const Var floor = g.input(Tensor<T>({3}, T(kKlFloor)));
  for (std::size_t t = 0; t < expert.size(); ++t) {
    const auto& e = expert[t];
    double entropy_part = 0.0;
    for (double p : e)
      if (p > 0.0) entropy_part += p * std::log(p);
    Tensor<T> pe({3});
    for (std::size_t i = 0; i < 3; ++i) pe[i] = static_cast<T>(e[i]);
    Var cross = g.dot(g.input(pe), g.log(g.add(output_distributions[t], floor)));
    terms.push_back(g.sub(g.input(Tensor<T>({1}, static_cast<T>(entropy_part))), cross));
  }
  return g.sum(terms);
}

/// xe + mu * sum_t KL(pi^e_t || pi^o_t).
template <class T>
Var behavior_cloning_loss(Graph<T>& g, const std::vector<Var>& output_distributions,
                          const std::vector<OutputPrior>& expert, Var xe, double mu = 1.0) {
  if (expert.empty()) return xe;
  return g.add(xe, g.scale(kl_term(g, output_distributions, expert), static_cast<T>(mu)));
}

/// Teacher-forced XE plus behavior cloning toward the expert output policy.
template <class T>
Var xe_bc_loss(Graph<T>& g, const SentenceModel<T>& model, const RegionFeatureSet<T>& rf,
               const std::vector<TokenId>& y, const ExpertPolicy* expert, double mu) {
  auto xe = xe_loss(g, model, rf, y);
  if (!expert || mu == 0.0 || xe.output_distributions.empty()) return xe.loss;
  std::vector<TokenId> fed(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(xe.tokens));
  return behavior_cloning_loss(g, xe.output_distributions, expert->targets(fed), xe.loss, mu);
}

struct ParagraphLossWeights {
  double word = 1.0;
  double stop = 5.0;
};

/// lambda_w * sum of word XE over sentences + lambda_s * stop XE
/// (STOP on the last sentence, CONTINUE otherwise).
template <class T>
Var paragraph_xe_loss(Graph<T>& g, const ParagraphModel<T>& model, const RegionFeatureSet<T>& rf,
                      const std::vector<std::vector<TokenId>>& paragraph, ParagraphLossWeights w = {},
                      const ExpertPolicy* expert = nullptr, double mu = 0.0) {
  if (paragraph.empty()) throw std::invalid_argument("paragraph_xe_loss: empty paragraph");
  for (const auto& s : paragraph) check_target(s);
  ParagraphRollout<T> roll(g, model, rf);
  auto forced = teacher_force_paragraph(roll, paragraph);
  std::vector<Var> words;
  for (const auto& s : forced.word_logprobs) words.insert(words.end(), s.begin(), s.end());
  Var word_nll = g.scale(g.sum(words), T(-1));
  Var stop_nll = g.scale(g.sum(forced.stop_label_logprobs), T(-1));
  Var loss = g.add(g.scale(word_nll, static_cast<T>(w.word)), g.scale(stop_nll, static_cast<T>(w.stop)));
  if (expert && mu != 0.0 && !forced.output_distributions.empty()) {
    std::vector<TokenId> fed;
    for (const auto& s : paragraph) fed.insert(fed.end(), s.begin(), s.end());
    loss = behavior_cloning_loss(g, forced.output_distributions, expert->targets(fed), loss, mu);
  }
  return loss;
}

}  // namespace cavp::training
