#pragma once

#include <vector>

#include "cavp/language/model_config.hpp"
#include "cavp/language/vocabulary.hpp"
#include "cavp/policy/visual_policy.hpp"
#include "cavp/substrate/lstm.hpp"

namespace cavp {

template <class T>
struct LpOutput {
  Var logits;
  Var logprobs;  // log pi_l(. | y_{1:t-1}), [V]
  LstmState<T> state;
};

/// Sentence captioner: CAVP visual policy feeding the language policy
///   h^l_t = LSTM([h^s_t, v_t], h^l_{t-1}),  pi_l = softmax(W_y h^l_t + b_y).
template <class T = double>
class SentenceModel {
 public:
  using Scalar = T;

  struct State {
    CavpRecurrent<T> cavp;
    LstmState<T> lp;
    VisualContextBuffer buffer;
  };

  struct StepOutput {
    Var logprobs;
    Var output_distribution;
    TraceStep trace;
  };

  explicit SentenceModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const std::size_t V = cfg.vocab_size, E = cfg.embed_size, H = cfg.hidden_size, D = cfg.region_dim;
    W_e_ = &store_.add("embed.W_e", {V, E});
    cavp_ = VisualPolicy<T>(store_, "cavp", cfg.cavp());
    lp_lstm_ = LstmCell<T>::create(store_, "lp.lstm", H + D, H);
    W_y_ = &store_.add("lp.W_y", {V, H});
    b_y_ = &store_.add("lp.b_y", {V});
  }

  SentenceModel(SentenceModel&&) = default;

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    init_uniform_fan_in(*W_e_, rng);
    cavp_.initialize(rng);
    lp_lstm_.initialize(rng);
    init_uniform_fan_in(*W_y_, rng);
    b_y_->value.fill(T(0));
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& parameters() noexcept { return store_; }
  const ParameterStore<T>& parameters() const noexcept { return store_; }
  const VisualPolicy<T>& visual_policy() const noexcept { return cavp_; }
  Parameter<T>& embedding() const { return *W_e_; }
  Parameter<T>& output_weight() const { return *W_y_; }
  Parameter<T>& output_bias() const { return *b_y_; }
  const LstmCell<T>& lp_cell() const { return lp_lstm_; }

  BoundImage bind(Graph<T>& g, const RegionFeatureSet<T>& rf) const { return cavp_.bind(g, rf); }

  State initial_state(Graph<T>& g) const {
    return {cavp_.zero_state(g), lp_lstm_.zero_state(g), {}};
  }

  /// Language policy step from the single sub-policy hidden and v_t.
  LpOutput<T> lp_step(Graph<T>& g, Var h_single, Var v, const LstmState<T>& prev) const {
    auto next = lstm_cell(g, lp_lstm_, g.concat({h_single, v}), prev);
    Var logits = g.affine(g.param(*W_y_), next.h, g.param(*b_y_));
    return {logits, g.log_softmax(logits), next};
  }

  /// Consumes y_{t-1} and returns the distribution over y_t.
  StepOutput step(Graph<T>& g, const BoundImage& img, State& st, TokenId prev, bool want_trace = false) const {
    Var emb = g.embedding(g.param(*W_e_), prev);
    PolicyState ps = make_policy_state(g, st.lp.h, img.mean_region, emb);
    auto cv = cavp_.step(g, ps, img, st.buffer, st.cavp, want_trace);
    st.cavp = cv.recurrent;
    auto lp = lp_step(g, cv.single_hidden, cv.v, st.lp);
    st.lp = lp.state;
    return {lp.logprobs, cv.output_distribution, std::move(cv.trace)};
  }

 private:
  ModelConfig cfg_;
  ParameterStore<T> store_;
  Parameter<T>* W_e_ = nullptr;
  VisualPolicy<T> cavp_;
  LstmCell<T> lp_lstm_;
  Parameter<T>* W_y_ = nullptr;
  Parameter<T>* b_y_ = nullptr;
};

/// Decoding view of a sentence model bound to one image on one graph.
template <class T>
class SentenceSession {
 public:
  using State = typename SentenceModel<T>::State;
  using Scalar = T;

  SentenceSession(Graph<T>& g, const SentenceModel<T>& m, const RegionFeatureSet<T>& rf)
      : g_(g), m_(m), img_(m.bind(g, rf)) {}

  Graph<T>& graph() { return g_; }
  const BoundImage& image() const { return img_; }
  State initial() { return m_.initial_state(g_); }

  Var step(State& s, TokenId prev) {
    last_ = m_.step(g_, img_, s, prev, record_trace_);
    return last_.logprobs;
  }

  const typename SentenceModel<T>::StepOutput& last() const { return last_; }
  void record_trace(bool on) { record_trace_ = on; }

 private:
  Graph<T>& g_;
  const SentenceModel<T>& m_;
  BoundImage img_;
  typename SentenceModel<T>::StepOutput last_;
  bool record_trace_ = false;
};

}  // namespace cavp
