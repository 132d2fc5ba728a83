#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cavp/substrate/graph.hpp"
#include "cavp/substrate/lstm.hpp"

namespace cavp {

/// Raised when a sub-policy is asked to choose among zero candidates.
class EmptyActionSpace : public std::invalid_argument {
 public:
  EmptyActionSpace() : std::invalid_argument("empty action space") {}
};

/// Observed state s_t = [h^l_{t-1}, mean region, embedding of y_{t-1}].
/// Built once per step and handed unchanged to every sub-policy.
struct PolicyState {
  Var lp_hidden;
  Var mean_region;
  Var prev_word_embed;
  Var joined;
};

template <class T>
PolicyState make_policy_state(Graph<T>& g, Var lp_hidden, Var mean_region, Var prev_word_embed) {
  return {lp_hidden, mean_region, prev_word_embed, g.concat({lp_hidden, mean_region, prev_word_embed})};
}

/// Candidate features Q as a [d x D'] matrix together with their attention
/// projections W_q q_i ([d x A]). Projections of fixed candidates (regions) are
/// computed once per image and reused at every step.
struct FeatureBank {
  Var features;
  Var projected;
  std::size_t count = 0;
};

template <class T>
struct AttentionResult {
  Var distribution;  // pi(a_t), [d]
  Var pooled;        // sum_i pi(a_t = i) q_i
  LstmState<T> recurrent;
};

/// Additive-attention sub-policy: an LSTM encodes the state, candidates are
/// scored by w_a^T tanh(W_h h_t + W_q q_i) and pooled by the softmax weights.
template <class T = double>
struct SubPolicy {
  LstmCell<T> lstm;  // may be shared with sibling sub-policies
  Parameter<T>* W_h = nullptr;  // [A x H]
  Parameter<T>* W_q = nullptr;  // [A x D']
  Parameter<T>* w_a = nullptr;  // [A]

  static SubPolicy create(ParameterStore<T>& store, const std::string& prefix, const LstmCell<T>& lstm,
                          std::size_t feature_dim, std::size_t attn_size) {
    SubPolicy sp;
    sp.lstm = lstm;
    sp.W_h = &store.add(prefix + ".attn.W_h", {attn_size, lstm.hidden_size});
    sp.W_q = &store.add(prefix + ".attn.W_q", {attn_size, feature_dim});
    sp.w_a = &store.add(prefix + ".attn.w_a", {attn_size});
    return sp;
  }

  void initialize_attention(Rng& rng) const {
    init_uniform_fan_in(*W_h, rng);
    init_uniform_fan_in(*W_q, rng);
    init_uniform_fan_in(*w_a, rng);
  }

  std::size_t feature_dim() const { return W_q->value.cols(); }

  FeatureBank project(Graph<T>& g, Var features) const {
    if (g.value(features).cols() != feature_dim())
      throw DimensionError("sub-policy expects features of dimension " + std::to_string(feature_dim()) + ", got " +
                           shape_string(g.shape(features)));
    return {features, g.rows_affine(features, g.param(*W_q)), g.value(features).rows()};
  }

  FeatureBank project(Graph<T>& g, const std::vector<Var>& features) const {
    if (features.empty()) throw EmptyActionSpace();
    return project(g, g.stack_rows(features));
  }
};

/// One decision of a sub-policy over a prepared feature bank.
template <class T>
AttentionResult<T> sp_step(Graph<T>& g, const SubPolicy<T>& sp, const PolicyState& state, const FeatureBank& bank,
                           const LstmState<T>& recurrent) {
  if (bank.count == 0) throw EmptyActionSpace();
  LstmState<T> next = lstm_cell(g, sp.lstm, state.joined, recurrent);
  Var hidden_proj = g.affine(g.param(*sp.W_h), next.h);
  Var act = g.tanh(g.add_to_rows(bank.projected, hidden_proj));
  Var scores = g.affine(act, g.param(*sp.w_a));
  Var dist = g.softmax(scores);
  return {dist, g.weighted_sum(dist, bank.features), next};
}

template <class T>
AttentionResult<T> sp_step(Graph<T>& g, const SubPolicy<T>& sp, const PolicyState& state,
                           const std::vector<Var>& features, const LstmState<T>& recurrent) {
  return sp_step(g, sp, state, sp.project(g, features), recurrent);
}

/// Index of the most probable action; ties go to the lowest index.
inline std::size_t hard_argmax(std::span<const double> distribution) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < distribution.size(); ++i)
    if (distribution[i] > distribution[best]) best = i;
  return best;
}

template <class T>
std::size_t hard_argmax(const Graph<T>& g, const AttentionResult<T>& result) {
  const auto& d = g.value(result.distribution).storage();
  std::vector<double> v(d.begin(), d.end());
  return hard_argmax(v);
}

}  // namespace cavp
