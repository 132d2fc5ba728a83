#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavp/attention/sub_policy.hpp"
#include "cavp/policy/trace.hpp"
#include "cavp/substrate/lstm.hpp"

namespace cavp {

/// Region features {r_1..r_k} of one image and their mean r_bar.
template <class T = double>
struct RegionFeatureSet {
  Tensor<T> regions;       // [k x D]
  Tensor<T> mean_region;   // [D]

  RegionFeatureSet() = default;
  explicit RegionFeatureSet(Tensor<T> r) : regions(std::move(r)) {
    if (regions.rank() != 2) throw DimensionError("region features must be a k x D matrix");
    const std::size_t k = regions.rows(), D = regions.cols();
    mean_region = Tensor<T>({D});
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < D; ++j) mean_region[j] += regions(i, j);
    for (std::size_t j = 0; j < D; ++j) mean_region[j] /= static_cast<T>(k);
  }

  std::size_t k() const noexcept { return regions.rows(); }
  std::size_t dim() const noexcept { return regions.cols(); }

  template <class U>
  RegionFeatureSet<U> cast() const {
    return RegionFeatureSet<U>(regions.template cast<U>());
  }
};

/// History v_1..v_{t-1} of visual outputs within one decode.
struct VisualContextBuffer {
  std::vector<Var> history;

  std::size_t size() const noexcept { return history.size(); }
  bool empty() const noexcept { return history.empty(); }
  void append(Var v) { history.push_back(v); }
  void clear() { history.clear(); }
};

enum class ContextMode { full_history, last_step };
enum class PolicyVariant { full, single_only };

struct CavpConfig {
  ContextMode context_mode = ContextMode::full_history;
  bool share_lstm = true;
  PolicyVariant variant = PolicyVariant::full;
  std::size_t hidden_size = 32;   // sub-policy LSTMs
  std::size_t lp_hidden_size = 32;
  std::size_t attn_size = 32;
  std::size_t embed_size = 16;
  std::size_t region_dim = 24;

  std::size_t state_size() const { return lp_hidden_size + region_dim + embed_size; }
};

/// Graph-bound view of one image: constant region matrix, r_bar, and the
/// single sub-policy's region projections.
struct BoundImage {
  Var regions;
  Var mean_region;
  FeatureBank single_bank;
  std::size_t k = 0;
};

/// Per-decode recurrent state of the four sub-policies.
template <class T>
struct CavpRecurrent {
  LstmState<T> single, context, composition, output;
};

template <class T>
struct CavpStepResult {
  Var v;              // visual output v_t
  Var single_hidden;  // h_t^s, consumed by the language policy
  Var output_distribution;  // 3-way pi^o; invalid for the single-only variant
  CavpRecurrent<T> recurrent;
  TraceStep trace;
};

/// Context-aware visual policy: single, context, composition and output
/// sub-policies chained into v_t = CAVP(R, S_t).
template <class T = double>
class VisualPolicy {
 public:
  VisualPolicy() = default;

  VisualPolicy(ParameterStore<T>& store, const std::string& prefix, const CavpConfig& cfg) : cfg_(cfg) {
    const std::size_t S = cfg.state_size(), H = cfg.hidden_size, A = cfg.attn_size, D = cfg.region_dim;
    if (cfg.variant == PolicyVariant::single_only) {
      lstms_.push_back(LstmCell<T>::create(store, prefix + ".single.lstm", S, H));
      single_ = SubPolicy<T>::create(store, prefix + ".single", lstms_[0], D, A);
      return;
    }
    if (cfg.share_lstm) {
      lstms_.push_back(LstmCell<T>::create(store, prefix + ".shared_lstm", S, H));
      single_ = SubPolicy<T>::create(store, prefix + ".single", lstms_[0], D, A);
      context_ = SubPolicy<T>::create(store, prefix + ".context", lstms_[0], D, A);
      composition_ = SubPolicy<T>::create(store, prefix + ".composition", lstms_[0], D, A);
      output_ = SubPolicy<T>::create(store, prefix + ".output", lstms_[0], D, A);
    } else {
      const char* names[] = {".single", ".context", ".composition", ".output"};
      for (auto n : names) lstms_.push_back(LstmCell<T>::create(store, prefix + n + ".lstm", S, H));
      single_ = SubPolicy<T>::create(store, prefix + ".single", lstms_[0], D, A);
      context_ = SubPolicy<T>::create(store, prefix + ".context", lstms_[1], D, A);
      composition_ = SubPolicy<T>::create(store, prefix + ".composition", lstms_[2], D, A);
      output_ = SubPolicy<T>::create(store, prefix + ".output", lstms_[3], D, A);
    }
    // Fusion c_{t,i} = W_c [f_t^c; r_i], projected back to the region dimension.
    W_c_ = &store.add(prefix + ".context.W_c", {D, 2 * D});
  }

  void initialize(Rng& rng) const {
    for (auto& l : lstms_) l.initialize(rng);
    single_.initialize_attention(rng);
    if (!single_only()) {
      context_.initialize_attention(rng);
      composition_.initialize_attention(rng);
      output_.initialize_attention(rng);
      init_uniform_fan_in(*W_c_, rng);
    }
  }

  const CavpConfig& config() const noexcept { return cfg_; }
  bool single_only() const noexcept { return cfg_.variant == PolicyVariant::single_only; }
  const SubPolicy<T>& single() const { return single_; }
  const SubPolicy<T>& context() const { return context_; }
  const SubPolicy<T>& composition() const { return composition_; }
  const SubPolicy<T>& output() const { return output_; }
  Parameter<T>& fusion() const { return *W_c_; }

  BoundImage bind(Graph<T>& g, const RegionFeatureSet<T>& rf) const {
    if (rf.dim() != cfg_.region_dim)
      throw DimensionError("region dimension " + std::to_string(rf.dim()) + " does not match configured " +
                           std::to_string(cfg_.region_dim));
    if (rf.k() == 0) throw EmptyActionSpace();
    BoundImage img;
    img.regions = g.input(rf.regions);
    img.mean_region = g.input(rf.mean_region);
    img.single_bank = single_.project(g, img.regions);
    img.k = rf.k();
    return img;
  }

  CavpRecurrent<T> zero_state(Graph<T>& g) const {
    const std::size_t H = cfg_.hidden_size;
    auto z = [&] { return LstmState<T>{g.zeros(H), g.zeros(H)}; };
    return {z(), z(), z(), z()};
  }

  // ---- individual sub-policies ---------------------------------------------

  AttentionResult<T> single_sp(Graph<T>& g, const PolicyState& s, const BoundImage& img,
                               const LstmState<T>& rec) const {
    return sp_step(g, single_, s, img.single_bank, rec);
  }

  struct ContextOutput {
    Var features;  // [k x D], rows c_{t,i}
    std::optional<AttentionResult<T>> attention;  // full_history mode with a non-empty pool
    Var f_context;
    LstmState<T> recurrent;
  };

  /// Chooses a context from `pool` and fuses it with every region.
  ContextOutput context_sp(Graph<T>& g, const PolicyState& s, const std::vector<Var>& pool, const BoundImage& img,
                           const LstmState<T>& rec) const {
    ContextOutput out;
    out.recurrent = rec;
    if (cfg_.context_mode == ContextMode::last_step) {
      out.f_context = pool.empty() ? g.zeros(cfg_.region_dim) : pool.back();
    } else if (pool.empty()) {
      // No history at the first step: neutral zero context. The LSTM still
      // advances so its state sequence does not depend on the pool size.
      out.recurrent = lstm_cell(g, context_.lstm, s.joined, rec);
      out.f_context = g.zeros(cfg_.region_dim);
    } else {
      auto att = sp_step(g, context_, s, context_.project(g, pool), rec);
      out.f_context = att.pooled;
      out.recurrent = att.recurrent;
      out.attention = att;
    }
    out.features = g.rows_affine(g.prepend_to_rows(out.f_context, img.regions), g.param(*W_c_));
    return out;
  }

  AttentionResult<T> composition_sp(Graph<T>& g, const PolicyState& s, Var context_features,
                                    const LstmState<T>& rec) const {
    return sp_step(g, composition_, s, composition_.project(g, context_features), rec);
  }

  AttentionResult<T> output_sp(Graph<T>& g, const PolicyState& s, Var v_single, Var v_comp, const BoundImage& img,
                               const LstmState<T>& rec) const {
    return sp_step(g, output_, s, std::vector<Var>{v_single, v_comp, img.mean_region}, rec);
  }

  // ---- composed step --------------------------------------------------------

  /// v_t from a fixed context pool (not modified).
  CavpStepResult<T> compute(Graph<T>& g, const PolicyState& s, const BoundImage& img, const std::vector<Var>& pool,
                            const CavpRecurrent<T>& rec, bool want_trace = false) const {
    CavpStepResult<T> r;
    r.recurrent = rec;
    auto single = single_sp(g, s, img, rec.single);
    r.recurrent.single = single.recurrent;
    r.single_hidden = single.recurrent.h;
    if (want_trace) r.trace.single = values(g, single.distribution);
    if (single_only()) {
      r.v = single.pooled;
      return r;
    }
    auto ctx = context_sp(g, s, pool, img, rec.context);
    r.recurrent.context = ctx.recurrent;
    auto comp = composition_sp(g, s, ctx.features, rec.composition);
    r.recurrent.composition = comp.recurrent;
    auto out = output_sp(g, s, single.pooled, comp.pooled, img, rec.output);
    r.recurrent.output = out.recurrent;
    r.v = out.pooled;
    r.output_distribution = out.distribution;
    if (want_trace) {
      if (ctx.attention) {
        r.trace.context = values(g, ctx.attention->distribution);
      } else if (!pool.empty()) {
        r.trace.context = std::vector<double>(pool.size(), 0.0);
        r.trace.context.back() = 1.0;
      }
      r.trace.composition = values(g, comp.distribution);
      r.trace.output = values(g, out.distribution);
    }
    return r;
  }

  /// v_t = CAVP(R, {v_1..v_{t-1}}); appends v_t to the buffer.
  CavpStepResult<T> step(Graph<T>& g, const PolicyState& s, const BoundImage& img, VisualContextBuffer& buffer,
                         const CavpRecurrent<T>& rec, bool want_trace = false) const {
    auto r = compute(g, s, img, buffer.history, rec, want_trace);
    r.trace.step = buffer.size() + 1;
    buffer.append(r.v);
    return r;
  }

 private:
  static std::vector<double> values(const Graph<T>& g, Var v) {
    const auto& s = g.value(v).storage();
    return {s.begin(), s.end()};
  }

  CavpConfig cfg_;
  std::vector<LstmCell<T>> lstms_;
  SubPolicy<T> single_, context_, composition_, output_;
  Parameter<T>* W_c_ = nullptr;
};

}  // namespace cavp
