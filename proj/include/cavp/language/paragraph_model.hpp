#pragma once

#include <optional>
#include <vector>

#include "cavp/language/captioning.hpp"
#include "cavp/language/decode.hpp"
#include "cavp/language/model_config.hpp"
#include "cavp/language/vocabulary.hpp"
#include "cavp/policy/visual_policy.hpp"
#include "cavp/substrate/lstm.hpp"

namespace cavp {

inline constexpr std::size_t kContinue = 0;
inline constexpr std::size_t kStop = 1;

/// Output of the sentence-level language policy for one sentence.
struct SentenceLPOutput {
  Var topic;              // [H]
  Var stop_distribution;  // [2] over {CONTINUE, STOP}
  Var stop_logprobs;
};

/// Hierarchical captioner. A sentence-level CAVP + LSTM emits one topic vector
/// and a stop distribution per sentence; a word-level CAVP + LSTM expands each
/// topic into words.
///
/// The sentence-level policy state uses the BOS embedding in the word slot. The
/// word LSTM consumes concat(topic, word embedding); the word-level visual
/// output v_{i,j} enters the word distribution through its own projection:
///   pi(y_{i,j}) = softmax(W_y h^w_j + W_v v_{i,j} + b_y).
template <class T = double>
class ParagraphModel {
 public:
  using Scalar = T;

  struct SentenceState {
    CavpRecurrent<T> cavp;
    LstmState<T> lstm;
    VisualContextBuffer buffer;  // sentence-level outputs v_1..v_i
  };

  struct SentenceOutput {
    Var v;
    SentenceLPOutput lp;
    TraceStep trace;
  };

  struct WordState {
    CavpRecurrent<T> cavp;
    LstmState<T> lstm;
    VisualContextBuffer words;  // word-level outputs, used with WordContext::previous_words
  };

  struct WordStepOutput {
    Var logprobs;
    Var output_distribution;
    std::size_t lp_input_width = 0;
    TraceStep trace;
  };

  explicit ParagraphModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.mode = CaptionMode::paragraph;
    cfg_.validate();
    const std::size_t V = cfg.vocab_size, E = cfg.embed_size, H = cfg.hidden_size, D = cfg.region_dim;
    W_e_ = &store_.add("embed.W_e", {V, E});
    sentence_cavp_ = VisualPolicy<T>(store_, "sentence.cavp", cfg.cavp());
    sentence_lstm_ = LstmCell<T>::create(store_, "sentence.lp.lstm", D, H);
    W_topic_ = &store_.add("sentence.topic.W", {H, H});
    b_topic_ = &store_.add("sentence.topic.b", {H});
    W_stop_ = &store_.add("sentence.stop.W", {2, H});
    b_stop_ = &store_.add("sentence.stop.b", {2});
    word_cavp_ = VisualPolicy<T>(store_, "word.cavp", cfg.cavp());
    word_lstm_ = LstmCell<T>::create(store_, "word.lp.lstm", H + E, H);
    W_y_ = &store_.add("word.lp.W_y", {V, H});
    W_v_ = &store_.add("word.lp.W_v", {V, D});
    b_y_ = &store_.add("word.lp.b_y", {V});
  }

  ParagraphModel(ParagraphModel&&) = default;

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    init_uniform_fan_in(*W_e_, rng);
    sentence_cavp_.initialize(rng);
    sentence_lstm_.initialize(rng);
    init_uniform_fan_in(*W_topic_, rng);
    b_topic_->value.fill(T(0));
    init_uniform_fan_in(*W_stop_, rng);
    b_stop_->value.fill(T(0));
    word_cavp_.initialize(rng);
    word_lstm_.initialize(rng);
    init_uniform_fan_in(*W_y_, rng);
    init_uniform_fan_in(*W_v_, rng);
    b_y_->value.fill(T(0));
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore<T>& parameters() noexcept { return store_; }
  const ParameterStore<T>& parameters() const noexcept { return store_; }
  Parameter<T>& stop_weight() const { return *W_stop_; }
  Parameter<T>& stop_bias() const { return *b_stop_; }
  Parameter<T>& word_bias() const { return *b_y_; }
  Parameter<T>& word_weight() const { return *W_y_; }
  Parameter<T>& word_visual_weight() const { return *W_v_; }
  const VisualPolicy<T>& sentence_policy() const { return sentence_cavp_; }
  const VisualPolicy<T>& word_policy() const { return word_cavp_; }
  std::size_t topic_size() const { return cfg_.hidden_size; }

  BoundImage bind(Graph<T>& g, const RegionFeatureSet<T>& rf) const {
    // Both levels attend over the same regions; the word level keeps its own projections.
    BoundImage img = sentence_cavp_.bind(g, rf);
    return img;
  }

  /// Region projections for the word-level single sub-policy.
  BoundImage bind_word_level(Graph<T>& g, const BoundImage& sentence_img) const {
    BoundImage img = sentence_img;
    img.single_bank = word_cavp_.single().project(g, img.regions);
    return img;
  }

  SentenceState initial_sentence_state(Graph<T>& g) const {
    return {sentence_cavp_.zero_state(g), sentence_lstm_.zero_state(g), {}};
  }

  WordState initial_word_state(Graph<T>& g, const VisualContextBuffer& carried = {}) const {
    return {word_cavp_.zero_state(g), word_lstm_.zero_state(g), carried};
  }

  /// Sentence LSTM over v_i, then topic = W_t h_i + b_t and p_stop = softmax(W_s h_i + b_s).
  std::pair<SentenceLPOutput, LstmState<T>> sentence_lp_step(Graph<T>& g, Var v, const LstmState<T>& prev) const {
    auto next = lstm_cell(g, sentence_lstm_, v, prev);
    Var topic = g.affine(g.param(*W_topic_), next.h, g.param(*b_topic_));
    Var logits = g.affine(g.param(*W_stop_), next.h, g.param(*b_stop_));
    return {{topic, g.softmax(logits), g.log_softmax(logits)}, next};
  }

  /// v_i = CAVP(R, {v_1..v_{i-1}}) followed by the sentence-level LP.
  SentenceOutput sentence_step(Graph<T>& g, const BoundImage& img, SentenceState& st, bool want_trace = false) const {
    Var emb = g.embedding(g.param(*W_e_), kBos);
    PolicyState ps = make_policy_state(g, st.lstm.h, img.mean_region, emb);
    auto cv = sentence_cavp_.step(g, ps, img, st.buffer, st.cavp, want_trace);
    st.cavp = cv.recurrent;
    auto [lp, next] = sentence_lp_step(g, cv.v, st.lstm);
    st.lstm = next;
    return {cv.v, lp, std::move(cv.trace)};
  }

  /// Context pool for the words of sentence i: the sentence-level outputs before v_i.
  static std::vector<Var> word_pool(const SentenceState& st) {
    if (st.buffer.empty()) return {};
    return {st.buffer.history.begin(), st.buffer.history.end() - 1};
  }

  WordStepOutput word_step(Graph<T>& g, const BoundImage& word_img, Var topic, const std::vector<Var>& pool,
                           WordState& ws, TokenId prev, bool want_trace = false) const {
    Var emb = g.embedding(g.param(*W_e_), prev);
    PolicyState ps = make_policy_state(g, ws.lstm.h, word_img.mean_region, emb);
    const bool recall_words = cfg_.word_context == WordContext::previous_words;
    auto cv = word_cavp_.compute(g, ps, word_img, recall_words ? ws.words.history : pool, ws.cavp, want_trace);
    ws.cavp = cv.recurrent;
    if (recall_words) ws.words.append(cv.v);
    Var lp_input = g.concat({topic, emb});
    ws.lstm = lstm_cell(g, word_lstm_, lp_input, ws.lstm);
    Var logits = g.add(g.affine(g.param(*W_y_), ws.lstm.h, g.param(*b_y_)), g.affine(g.param(*W_v_), cv.v));
    return {g.log_softmax(logits), cv.output_distribution, g.dim(lp_input), std::move(cv.trace)};
  }

 private:
  ModelConfig cfg_;
  ParameterStore<T> store_;
  Parameter<T>* W_e_ = nullptr;
  VisualPolicy<T> sentence_cavp_;
  LstmCell<T> sentence_lstm_;
  Parameter<T>* W_topic_ = nullptr;
  Parameter<T>* b_topic_ = nullptr;
  Parameter<T>* W_stop_ = nullptr;
  Parameter<T>* b_stop_ = nullptr;
  VisualPolicy<T> word_cavp_;
  LstmCell<T> word_lstm_;
  Parameter<T>* W_y_ = nullptr;
  Parameter<T>* W_v_ = nullptr;
  Parameter<T>* b_y_ = nullptr;
};

/// Word-level decoding view for one sentence of a paragraph.
template <class T>
class WordSession {
 public:
  using State = typename ParagraphModel<T>::WordState;
  using Scalar = T;

  WordSession(Graph<T>& g, const ParagraphModel<T>& m, const BoundImage& word_img, Var topic, std::vector<Var> pool,
              State initial)
      : g_(g), m_(m), img_(word_img), topic_(topic), pool_(std::move(pool)), initial_(std::move(initial)) {}

  Graph<T>& graph() { return g_; }
  State initial() { return initial_; }

  Var step(State& s, TokenId prev) {
    last_ = m_.word_step(g_, img_, topic_, pool_, s, prev, record_trace_);
    return last_.logprobs;
  }

  const typename ParagraphModel<T>::WordStepOutput& last() const { return last_; }
  void record_trace(bool on) { record_trace_ = on; }

 private:
  Graph<T>& g_;
  const ParagraphModel<T>& m_;
  BoundImage img_;
  Var topic_;
  std::vector<Var> pool_;
  State initial_;
  typename ParagraphModel<T>::WordStepOutput last_;
  bool record_trace_ = false;
};

/// Paragraph rollout on one graph: sentence-level state plus the carried
/// word-level buffer. Used by decoding, teacher forcing, and the
/// sentence-level reward schedule.
template <class T>
class ParagraphRollout {
 public:
  ParagraphRollout(Graph<T>& g, const ParagraphModel<T>& m, const RegionFeatureSet<T>& rf)
      : g_(g), m_(m), img_(m.bind(g, rf)), word_img_(m.bind_word_level(g, img_)), sent_(m.initial_sentence_state(g)) {}

  Graph<T>& graph() { return g_; }
  std::size_t sentences() const { return sent_.buffer.size(); }

  /// Advances the sentence level by one sentence and returns a word session for it.
  std::pair<typename ParagraphModel<T>::SentenceOutput, WordSession<T>> next_sentence(bool want_trace = false) {
    auto out = m_.sentence_step(g_, img_, sent_, want_trace);
    WordSession<T> ws(g_, m_, word_img_, out.lp.topic, ParagraphModel<T>::word_pool(sent_),
                      m_.initial_word_state(g_, carried_));
    return {out, std::move(ws)};
  }

  /// Records the word-level buffer left by a finished sentence.
  void finish_sentence(const typename ParagraphModel<T>::WordState& final_state) { carried_ = final_state.words; }

 private:
  Graph<T>& g_;
  const ParagraphModel<T>& m_;
  BoundImage img_;
  BoundImage word_img_;
  typename ParagraphModel<T>::SentenceState sent_;
  VisualContextBuffer carried_;
};

template <class T>
struct ParagraphDecode {
  using WordState = typename ParagraphModel<T>::WordState;
  std::vector<DecodeResult<WordState>> sentences;
  std::vector<double> stop_probabilities;  // p_stop(STOP) per emitted sentence
  std::vector<Var> stop_logprobs;

  std::vector<std::vector<TokenId>> content() const {
    std::vector<std::vector<TokenId>> out;
    for (const auto& s : sentences) out.push_back(s.content());
    return out;
  }
  std::vector<TokenId> flattened() const {
    std::vector<TokenId> out;
    for (const auto& s : sentences) {
      auto c = s.content();
      out.insert(out.end(), c.begin(), c.end());
    }
    return out;
  }
  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sentences) n += s.tokens.size();
    return n;
  }
  double logprob() const {
    double t = 0.0;
    for (const auto& s : sentences) t += s.logprob;
    return t;
  }
};

/// Generates sentences until p_stop(STOP) > 0.5 or max_sentences is reached.
template <class T>
ParagraphDecode<T> decode_paragraph(ParagraphRollout<T>& roll, std::size_t max_sentences, std::size_t max_words,
                                    DecodeMode mode, std::size_t beam_size = kDefaultBeam, Rng* rng = nullptr) {
  if (max_sentences == 0) throw std::invalid_argument("max_sentences must be at least 1");
  if (mode == DecodeMode::sample && rng == nullptr) throw std::invalid_argument("sampling requires an RNG");
  ParagraphDecode<T> out;
  auto& g = roll.graph();
  for (std::size_t i = 0; i < max_sentences; ++i) {
    auto [sent, words] = roll.next_sentence();
    auto r = mode == DecodeMode::greedy   ? decode_greedy(words, max_words)
             : mode == DecodeMode::sample ? decode_sample(words, max_words, *rng)
                                          : decode_beam(words, beam_size, max_words);
    roll.finish_sentence(r.final_state);
    const double p_stop = static_cast<double>(g.value(sent.lp.stop_distribution)[kStop]);
    out.stop_probabilities.push_back(p_stop);
    out.stop_logprobs.push_back(sent.lp.stop_logprobs);
    out.sentences.push_back(std::move(r));
    if (p_stop > 0.5) break;
  }
  return out;
}

template <class T>
ParagraphDecode<T> decode_paragraph(const ParagraphModel<T>& model, const RegionFeatureSet<T>& rf,
                                    std::size_t max_sentences, std::size_t max_words, DecodeMode mode,
                                    std::size_t beam_size = kDefaultBeam, std::uint64_t seed = 0) {
  Graph<T> g;
  ParagraphRollout<T> roll(g, model, rf);
  Rng rng(seed);
  return decode_paragraph(roll, max_sentences, max_words, mode, beam_size, &rng);
}

/// Teacher-forced log-probabilities of every ground-truth word (per sentence)
/// and of the ground-truth stop labels.
template <class T>
struct ParagraphForced {
  std::vector<std::vector<Var>> word_logprobs;
  std::vector<Var> stop_label_logprobs;
  std::vector<Var> output_distributions;  // word level, one per word
};

template <class T>
ParagraphForced<T> teacher_force_paragraph(ParagraphRollout<T>& roll,
                                           const std::vector<std::vector<TokenId>>& sentences) {
  if (sentences.empty()) throw std::invalid_argument("paragraph must contain at least one sentence");
  ParagraphForced<T> out;
  auto& g = roll.graph();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto [sent, words] = roll.next_sentence();
    const std::size_t label = i + 1 == sentences.size() ? kStop : kContinue;
    out.stop_label_logprobs.push_back(g.pick(sent.lp.stop_logprobs, label));
    auto st = words.initial();
    std::vector<Var> lps;
    TokenId prev = kBos;
    for (auto y : sentences[i]) {
      Var lp = words.step(st, prev);
      if (y >= g.dim(lp)) throw std::out_of_range("token id " + std::to_string(y) + " out of vocabulary");
      lps.push_back(g.pick(lp, y));
      if (words.last().output_distribution.valid()) out.output_distributions.push_back(words.last().output_distribution);
      prev = y;
    }
    roll.finish_sentence(st);
    out.word_logprobs.push_back(std::move(lps));
  }
  return out;
}

/// Word-level trace of a paragraph, one record per emitted token.
template <class T>
AttentionTrace trace_paragraph(const ParagraphModel<T>& model, const RegionFeatureSet<T>& rf,
                               const std::vector<std::vector<TokenId>>& sentences) {
  Graph<T> g;
  ParagraphRollout<T> roll(g, model, rf);
  AttentionTrace trace;
  std::size_t step = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto [sent, words] = roll.next_sentence();
    words.record_trace(true);
    auto st = words.initial();
    TokenId prev = kBos;
    for (auto y : sentences[i]) {
      words.step(st, prev);
      auto rec = words.last().trace;
      rec.step = ++step;
      rec.sentence = i + 1;
      rec.token = y;
      trace.push_back(std::move(rec));
      prev = y;
    }
    roll.finish_sentence(st);
  }
  return trace;
}

}  // namespace cavp
