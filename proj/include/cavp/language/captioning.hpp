#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cavp/language/decode.hpp"
#include "cavp/language/sentence_model.hpp"

namespace cavp {

enum class DecodeMode { greedy, sample, beam };

inline DecodeMode parse_decode_mode(const std::string& s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "sample") return DecodeMode::sample;
  if (s == "beam") return DecodeMode::beam;
  throw std::invalid_argument("unknown decode mode: " + s);
}

inline constexpr std::size_t kSentenceMaxLen = 16;
inline constexpr std::size_t kParagraphMaxWords = 30;
inline constexpr std::size_t kParagraphMaxSentences = 6;
inline constexpr std::size_t kDefaultBeam = 5;

/// Teacher-forced log pi_l(y_{1:T}) = sum_t log pi_l(y_t | y_{1:t-1}).
template <class T>
double sequence_logprob(const SentenceModel<T>& model, const RegionFeatureSet<T>& rf,
                        const std::vector<TokenId>& y) {
  if (y.empty()) throw std::invalid_argument("sequence_logprob: empty sequence");
  if (y.back() != kEos) throw std::invalid_argument("sequence_logprob: sequence must end with EOS");
  Graph<T> g;
  SentenceSession<T> s(g, model, rf);
  auto st = s.initial();
  double total = 0.0;
  for (Var v : teacher_force(s, st, y)) total += static_cast<double>(g.scalar(v));
  return total;
}

/// Attention distributions recorded while feeding `tokens`; since decoding is
/// deterministic this reproduces the trace of the decode that produced them.
template <class T>
AttentionTrace trace_sequence(const SentenceModel<T>& model, const RegionFeatureSet<T>& rf,
                              const std::vector<TokenId>& tokens) {
  Graph<T> g;
  SentenceSession<T> s(g, model, rf);
  s.record_trace(true);
  auto st = s.initial();
  AttentionTrace trace;
  TokenId prev = kBos;
  for (auto y : tokens) {
    s.step(st, prev);
    auto step = s.last().trace;
    step.token = y;
    trace.push_back(std::move(step));
    prev = y;
  }
  return trace;
}

struct CaptionResult {
  std::vector<TokenId> tokens;
  double logprob = 0.0;
};

template <class T>
CaptionResult caption_image(const SentenceModel<T>& model, const RegionFeatureSet<T>& rf, DecodeMode mode,
                            std::size_t beam_size, std::size_t max_len, std::uint64_t seed) {
  Graph<T> g;
  SentenceSession<T> s(g, model, rf);
  switch (mode) {
    case DecodeMode::greedy: {
      auto r = decode_greedy(s, max_len);
      return {r.tokens, r.logprob};
    }
    case DecodeMode::sample: {
      Rng rng(seed);
      auto r = decode_sample(s, max_len, rng);
      return {r.tokens, r.logprob};
    }
    case DecodeMode::beam: {
      auto r = decode_beam(s, beam_size, max_len);
      return {r.tokens, r.logprob};
    }
  }
  return {};
}

}  // namespace cavp
