#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cavp/language/vocabulary.hpp"
#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/random.hpp"

namespace cavp {

/// A session exposes an initial recurrent state and a step that consumes the
/// previous token and returns log-probabilities of the next one.
template <class S>
concept DecodeSession = requires(S s, typename S::State st, TokenId tok) {
  { s.initial() } -> std::same_as<typename S::State>;
  { s.step(st, tok) } -> std::same_as<Var>;
  s.graph();
};

template <class State>
struct DecodeResult {
  std::vector<TokenId> tokens;        // EOS-terminated when finished
  std::vector<Var> token_logprobs;    // log pi(y_t) on the session graph
  double logprob = 0.0;
  bool finished = false;              // emitted EOS before max_len
  State final_state{};

  std::vector<TokenId> content() const { return content_ids(tokens); }
  double normalized_logprob() const { return tokens.empty() ? 0.0 : logprob / static_cast<double>(tokens.size()); }
};

/// Lowest-id argmax.
template <class T>
TokenId argmax_token(const Tensor<T>& logprobs) {
  TokenId best = 0;
  for (TokenId i = 1; i < logprobs.size(); ++i)
    if (logprobs[i] > logprobs[best]) best = i;
  return best;
}

/// Inverse-CDF draw from exp(logprobs).
template <class T>
TokenId sample_token(const Tensor<T>& logprobs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  TokenId last_positive = 0;
  for (TokenId i = 0; i < logprobs.size(); ++i) {
    const double p = std::exp(static_cast<double>(logprobs[i]));
    if (p > 0.0) last_positive = i;
    cum += p;
    if (u < cum) return i;
  }
  return last_positive;
}

template <DecodeSession S>
auto decode_greedy(S& session, std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  DecodeResult<typename S::State> r;
  auto state = session.initial();
  TokenId prev = kBos;
  auto& g = session.graph();
  for (std::size_t t = 0; t < max_len; ++t) {
    Var lp = session.step(state, prev);
    const TokenId y = argmax_token(g.value(lp));
    r.tokens.push_back(y);
    r.token_logprobs.push_back(g.pick(lp, y));
    r.logprob += static_cast<double>(g.value(lp)[y]);
    prev = y;
    if (y == kEos) {
      r.finished = true;
      break;
    }
  }
  r.final_state = state;
  return r;
}

template <DecodeSession S>
auto decode_sample(S& session, std::size_t max_len, Rng& rng) {
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  DecodeResult<typename S::State> r;
  auto state = session.initial();
  TokenId prev = kBos;
  auto& g = session.graph();
  for (std::size_t t = 0; t < max_len; ++t) {
    Var lp = session.step(state, prev);
    const TokenId y = sample_token(g.value(lp), rng);
    r.tokens.push_back(y);
    r.token_logprobs.push_back(g.pick(lp, y));
    r.logprob += static_cast<double>(g.value(lp)[y]);
    prev = y;
    if (y == kEos) {
      r.finished = true;
      break;
    }
  }
  r.final_state = state;
  return r;
}

/// Beam search ranked by length-normalised log-probability (sum / length).
/// Candidates are ordered by score, then hypothesis rank, then token id, so
/// beam_size = 1 reproduces decode_greedy exactly.
template <DecodeSession S>
auto decode_beam(S& session, std::size_t beam_size, std::size_t max_len) {
  if (beam_size == 0) throw std::invalid_argument("beam_size must be at least 1");
  if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
  using State = typename S::State;
  struct Hyp {
    State state;
    std::vector<TokenId> tokens;
    std::vector<Var> token_logprobs;
    double logprob = 0.0;
  };
  struct Cand {
    std::size_t hyp;
    TokenId token;
    double logprob;
    double score;
  };
  auto& g = session.graph();
  std::vector<Hyp> live(1);
  live[0].state = session.initial();
  std::vector<Hyp> done;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Cand> cands;
    std::vector<Var> step_lp(live.size());
    std::vector<State> next_state(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      next_state[h] = live[h].state;
      const TokenId prev = live[h].tokens.empty() ? kBos : live[h].tokens.back();
      step_lp[h] = session.step(next_state[h], prev);
      const auto& lp = g.value(step_lp[h]);
      const double len = static_cast<double>(live[h].tokens.size() + 1);
      for (TokenId y = 0; y < lp.size(); ++y) {
        const double total = live[h].logprob + static_cast<double>(lp[y]);
        cands.push_back({h, y, total, total / len});
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.score > b.score; });
    std::vector<Hyp> next;
    for (std::size_t c = 0; c < std::min(beam_size, cands.size()); ++c) {
      const auto& cd = cands[c];
      Hyp h;
      h.state = next_state[cd.hyp];
      h.tokens = live[cd.hyp].tokens;
      h.tokens.push_back(cd.token);
      h.token_logprobs = live[cd.hyp].token_logprobs;
      h.token_logprobs.push_back(g.pick(step_lp[cd.hyp], cd.token));
      h.logprob = cd.logprob;
      (cd.token == kEos ? done : next).push_back(std::move(h));
    }
    live = std::move(next);
  }

  DecodeResult<State> r;
  auto take = [&](Hyp& h, bool finished) {
    const double score = h.logprob / static_cast<double>(h.tokens.size());
    if (r.tokens.empty() || score > r.normalized_logprob()) {
      r.tokens = h.tokens;
      r.token_logprobs = h.token_logprobs;
      r.logprob = h.logprob;
      r.finished = finished;
      r.final_state = h.state;
    }
  };
  for (auto& h : done) take(h, true);
  for (auto& h : live) take(h, false);
  return r;
}

/// Feeds a fixed token sequence and returns log pi(y_t | y_{<t}) per position.
template <DecodeSession S>
std::vector<Var> teacher_force(S& session, typename S::State& state, const std::vector<TokenId>& tokens) {
  std::vector<Var> out;
  out.reserve(tokens.size());
  TokenId prev = kBos;
  auto& g = session.graph();
  for (auto y : tokens) {
    Var lp = session.step(state, prev);
    if (y >= g.dim(lp))
      throw std::out_of_range("token id " + std::to_string(y) + " out of vocabulary of " + std::to_string(g.dim(lp)));
    out.push_back(g.pick(lp, y));
    prev = y;
  }
  return out;
}

}  // namespace cavp
