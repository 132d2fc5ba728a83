#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cavp/language/captioning.hpp"
#include "cavp/language/paragraph_model.hpp"
#include "cavp/language/sentence_model.hpp"
#include "cavp/metrics/reward.hpp"

namespace cavp::training {

using References = std::vector<std::vector<TokenId>>;

/// Reward r(.) over content token ids.
struct Reward {
  metrics::RewardSpec spec;
  const metrics::IdfTable<TokenId>* idf = nullptr;

  double operator()(const std::vector<TokenId>& candidate, const References& refs) const {
    return metrics::reward(candidate, refs, spec, idf);
  }
};

/// Self-critical surrogate -A * sum_t log pi(y^s_t) with A = r(y^s) - r(y_hat).
struct ScstRollout {
  Var surrogate;
  double advantage = 0.0;      // mean over sentences at the sentence level
  bool has_signal = false;     // some advantage is nonzero
  double reward_sample = 0.0;
  double reward_greedy = 0.0;
  std::size_t tokens = 0;
  std::vector<std::vector<TokenId>> sample, greedy;  // one entry per sentence
};

/// Samples on `g` and decodes the greedy baseline on a separate graph; both
/// see the same parameter values.
template <class T>
ScstRollout scst_rollout(Graph<T>& g, const SentenceModel<T>& model, const RegionFeatureSet<T>& rf,
                         const References& refs, const Reward& reward, Rng& rng,
                         std::size_t max_len = kSentenceMaxLen) {
  if (refs.empty()) throw std::invalid_argument("scst: references must be non-empty");
  SentenceSession<T> s(g, model, rf);
  auto ys = decode_sample(s, max_len, rng);
  Graph<T> gb;
  SentenceSession<T> sb(gb, model, rf);
  auto yg = decode_greedy(sb, max_len);
  ScstRollout r;
  r.sample = {ys.content()};
  r.greedy = {yg.content()};
  r.reward_sample = reward(r.sample[0], refs);
  r.reward_greedy = reward(r.greedy[0], refs);
  r.advantage = r.reward_sample - r.reward_greedy;
  r.has_signal = r.advantage != 0.0;
  r.tokens = ys.tokens.size();
  r.surrogate = g.scale(g.sum(ys.token_logprobs), static_cast<T>(-r.advantage));
  return r;
}

/// Accumulates the self-critical gradient into the parameter gradients.
/// With a zero advantage nothing is accumulated.
template <class T>
ScstRollout scst_step(const SentenceModel<T>& model, const RegionFeatureSet<T>& rf, const References& refs,
                      const Reward& reward, std::uint64_t seed, std::size_t max_len = kSentenceMaxLen,
                      double loss_scale = 1.0) {
  Graph<T> g;
  Rng rng(seed);
  auto r = scst_rollout(g, model, rf, refs, reward, rng, max_len);
  if (r.has_signal) g.backward(r.surrogate, static_cast<T>(loss_scale));
  return r;
}

enum class RewardLevel { paragraph, sentence };

inline RewardLevel parse_reward_level(const std::string& s) {
  if (s == "paragraph") return RewardLevel::paragraph;
  if (s == "sentence") return RewardLevel::sentence;
  throw std::invalid_argument("reward level must be paragraph or sentence, got " + s);
}

/// Feeds ground-truth sentences through the rollout without recording losses.
template <class T>
void feed_sentences(ParagraphRollout<T>& roll, const std::vector<std::vector<TokenId>>& sentences) {
  for (const auto& s : sentences) {
    auto [sent, words] = roll.next_sentence();
    auto st = words.initial();
    TokenId prev = kBos;
    for (auto y : s) {
      words.step(st, prev);
      prev = y;
    }
    roll.finish_sentence(st);
  }
}

struct ParagraphLimits {
  std::size_t max_sentences = kParagraphMaxSentences;
  std::size_t max_words = kParagraphMaxWords;
};

/// Paragraph level: one advantage for the flattened paragraph against `refs`.
/// Sentence level: for each ground-truth sentence i, the first i-1 ground-truth
/// sentences are teacher-forced, sentence i is sampled and greedily decoded
/// (independent rollouts) and rewarded against ground-truth sentence i.
template <class T>
ScstRollout paragraph_scst_rollout(Graph<T>& g, const ParagraphModel<T>& model, const RegionFeatureSet<T>& rf,
                                   const std::vector<std::vector<TokenId>>& gt_paragraph, const References& refs,
                                   const Reward& reward, RewardLevel level, Rng& rng, ParagraphLimits lim = {}) {
  ScstRollout r;
  if (level == RewardLevel::paragraph) {
    if (refs.empty()) throw std::invalid_argument("paragraph scst: references must be non-empty");
    ParagraphRollout<T> roll(g, model, rf);
    auto ps = decode_paragraph(roll, lim.max_sentences, lim.max_words, DecodeMode::sample, 1, &rng);
    Graph<T> gb;
    ParagraphRollout<T> rollb(gb, model, rf);
    auto pg = decode_paragraph(rollb, lim.max_sentences, lim.max_words, DecodeMode::greedy);
    r.sample = ps.content();
    r.greedy = pg.content();
    r.reward_sample = reward(ps.flattened(), refs);
    r.reward_greedy = reward(pg.flattened(), refs);
    r.advantage = r.reward_sample - r.reward_greedy;
    r.has_signal = r.advantage != 0.0;
    std::vector<Var> lps;
    for (const auto& s : ps.sentences) lps.insert(lps.end(), s.token_logprobs.begin(), s.token_logprobs.end());
    r.tokens = lps.size();
    r.surrogate = g.scale(g.sum(lps), static_cast<T>(-r.advantage));
    return r;
  }

  if (gt_paragraph.empty()) throw std::invalid_argument("sentence-level reward requires a ground-truth paragraph");
  std::vector<Var> terms;
  for (std::size_t i = 0; i < gt_paragraph.size(); ++i) {
    const std::vector<std::vector<TokenId>> prefix(gt_paragraph.begin(), gt_paragraph.begin() + static_cast<std::ptrdiff_t>(i));
    ParagraphRollout<T> roll(g, model, rf);
    feed_sentences(roll, prefix);
    auto [sent, words] = roll.next_sentence();
    auto ys = decode_sample(words, lim.max_words, rng);

    Graph<T> gb;
    ParagraphRollout<T> rollb(gb, model, rf);
    feed_sentences(rollb, prefix);
    auto [sentb, wordsb] = rollb.next_sentence();
    auto yg = decode_greedy(wordsb, lim.max_words);

    const References ref_i = {content_ids(gt_paragraph[i])};
    const double rs = reward(ys.content(), ref_i);
    const double rg = reward(yg.content(), ref_i);
    const double a = rs - rg;
    r.sample.push_back(ys.content());
    r.greedy.push_back(yg.content());
    r.reward_sample += rs;
    r.reward_greedy += rg;
    r.tokens += ys.tokens.size();
    if (a != 0.0) r.has_signal = true;
    terms.push_back(g.scale(g.sum(ys.token_logprobs), static_cast<T>(-a)));
  }
  const double n = static_cast<double>(gt_paragraph.size());
  r.reward_sample /= n;
  r.reward_greedy /= n;
  r.advantage = r.reward_sample - r.reward_greedy;
  r.surrogate = g.sum(terms);
  return r;
}

template <class T>
ScstRollout paragraph_scst_step(const ParagraphModel<T>& model, const RegionFeatureSet<T>& rf,
                                const std::vector<std::vector<TokenId>>& gt_paragraph, const References& refs,
                                const Reward& reward, RewardLevel level, std::uint64_t seed,
                                ParagraphLimits lim = {}, double loss_scale = 1.0) {
  Graph<T> g;
  Rng rng(seed);
  auto r = paragraph_scst_rollout(g, model, rf, gt_paragraph, refs, reward, level, rng, lim);
  if (r.has_signal) g.backward(r.surrogate, static_cast<T>(loss_scale));
  return r;
}

}  // namespace cavp::training
