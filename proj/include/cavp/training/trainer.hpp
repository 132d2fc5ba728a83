#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "cavp/data/manifest.hpp"
#include "cavp/language/captioning.hpp"
#include "cavp/language/paragraph_model.hpp"
#include "cavp/language/sentence_model.hpp"
#include "cavp/metrics/reward.hpp"
#include "cavp/substrate/checkpoint.hpp"
#include "cavp/training/config.hpp"
#include "cavp/training/expert.hpp"
#include "cavp/training/losses.hpp"
#include "cavp/training/optimizer.hpp"
#include "cavp/training/scst.hpp"

namespace cavp::training {

struct StepReport {
  double loss = 0.0;
  double reward_sample = 0.0;
  double reward_greedy = 0.0;
  double grad_norm = 0.0;
  double tokens_per_sec = 0.0;
  bool skipped = false;  // no optimizer update
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based, continuing across phases
  Phase phase = Phase::xe;
  double mean_loss = 0.0;
  std::optional<double> mean_reward_sample;
  std::optional<double> mean_reward_greedy;
  std::optional<double> train_cider;
  double mean_grad_norm = 0.0;
  double tokens_per_sec = 0.0;
  std::size_t steps = 0;
  std::size_t skipped_steps = 0;
};

inline constexpr const char* kLogHeader = "epoch,phase,mean_loss,mean_reward_sample,mean_reward_greedy,train_CIDEr";

inline std::string format_real(std::optional<double> v) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", *v);
  return buf;
}

inline std::string csv_row(const EpochReport& r) {
  return std::to_string(r.epoch) + "," + phase_name(r.phase) + "," + format_real(r.mean_loss) + "," +
         format_real(r.mean_reward_sample) + "," + format_real(r.mean_reward_greedy) + "," +
         format_real(r.train_cider);
}

struct TrainOutput {
  std::optional<std::filesystem::path> dir;  // checkpoints, log.csv, model.json
  std::ostream* log = nullptr;               // CSV rows, mirrored from log.csv
  std::function<void(const EpochReport&)> on_epoch;
};

template <class M>
inline constexpr bool is_paragraph_model_v = std::is_same_v<M, ParagraphModel<typename M::Scalar>>;

/// Greedy decode of one dataset item as content ids (flattened for paragraphs).
template <class M>
std::vector<TokenId> greedy_content(const M& model, const RegionFeatureSet<typename M::Scalar>& rf) {
  using T = typename M::Scalar;
  if constexpr (is_paragraph_model_v<M>) {
    return decode_paragraph(model, rf, kParagraphMaxSentences, kParagraphMaxWords, DecodeMode::greedy).flattened();
  } else {
    Graph<T> g;
    SentenceSession<T> s(g, model, rf);
    return decode_greedy(s, kSentenceMaxLen).content();
  }
}

/// Corpus CIDEr-D of greedy decodes against the dataset references.
template <class M>
double training_cider(const M& model, const data::Dataset& ds, const metrics::IdfTable<TokenId>& idf) {
  using T = typename M::Scalar;
  double total = 0.0;
  for (const auto& ex : ds.items)
    total += metrics::cider_d(greedy_content(model, ex.features.template cast<T>()), ex.references, idf);
  return total / static_cast<double>(ds.items.size());
}

template <class M>
std::vector<std::vector<std::vector<TokenId>>> reference_corpus(const data::Dataset& ds) {
  std::vector<std::vector<std::vector<TokenId>>> c;
  for (const auto& ex : ds.items) c.push_back(ex.references);
  return c;
}

template <class M>
nlohmann::json model_description(const M& model, const Vocabulary& vocab) {
  return {{"model", model.config().to_json()}, {"vocab", vocab.to_json()}};
}

/// Two-phase training: cross-entropy epochs, then self-critical epochs.
/// Deterministic in (model initialisation, dataset, config).
template <class M>
std::vector<EpochReport> train(M& model, const data::Dataset& ds, const TrainConfig& cfg, const TrainOutput& out = {}) {
  using T = typename M::Scalar;
  constexpr bool paragraph = is_paragraph_model_v<M>;
  cfg.validate();
  if (ds.items.empty()) throw data::DataError("training dataset is empty");
  if (ds.vocab.size() != model.config().vocab_size)
    throw ConfigError("model vocab_size " + std::to_string(model.config().vocab_size) + " does not match dataset vocabulary of " +
                      std::to_string(ds.vocab.size()));
  if (ds.region_dim() != model.config().region_dim)
    throw ConfigError("model region_dim " + std::to_string(model.config().region_dim) +
                      " does not match dataset features of dimension " + std::to_string(ds.region_dim()));
  if constexpr (paragraph) {
    if (!ds.is_paragraph()) throw data::DataError("paragraph model requires a paragraph dataset");
  }

  auto& store = model.parameters();
  Adam<T> adam(store);
  Rng order_rng(cfg.seed * 2 + 1);
  Rng sample_rng(cfg.seed * 2 + 2);
  const ExpertPolicy expert(ds.vocab);
  const auto idf = metrics::build_idf(reference_corpus<M>(ds));
  const Reward reward{metrics::RewardSpec::named(cfg.reward), &idf};
  const std::string hash = model.config().hash();

  std::ofstream csv;
  if (out.dir) {
    std::filesystem::create_directories(*out.dir);
    std::ofstream(*out.dir / "model.json") << model_description(model, ds.vocab).dump(2) << '\n';
    csv.open(*out.dir / "log.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write training log in " + out.dir->string());
    csv << kLogHeader << '\n';
  }
  if (out.log) *out.log << kLogHeader << '\n';

  std::vector<EpochReport> reports;
  std::size_t epoch = 0;

  auto finish_epoch = [&](EpochReport& r) {
    if (cfg.eval_train_cider) r.train_cider = training_cider(model, ds, idf);
    const auto row = csv_row(r);
    if (csv.is_open()) csv << row << '\n' << std::flush;
    if (out.log) *out.log << row << '\n';
    if (out.on_epoch) out.on_epoch(r);
    if (out.dir && cfg.checkpoint_every && r.epoch % cfg.checkpoint_every == 0)
      save_checkpoint(*out.dir / ("epoch_" + std::to_string(r.epoch) + ".ckpt"), store, hash);
    reports.push_back(r);
  };

  // Units: (image, caption) pairs in sentence mode, images otherwise.
  std::vector<std::pair<std::size_t, std::size_t>> xe_units;
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    if constexpr (paragraph) {
      xe_units.emplace_back(i, 0);
    } else {
      for (std::size_t c = 0; c < ds.items[i].captions.size(); ++c) xe_units.emplace_back(i, c);
    }
  }
  std::vector<RegionFeatureSet<T>> features;
  for (const auto& ex : ds.items) features.push_back(ex.features.template cast<T>());

  const double mu = cfg.behavior_cloning ? cfg.bc_weight : 0.0;
  auto optimizer_step = [&](double lr, StepReport& rep) {
    if (all_gradients_zero(store)) {
      rep.skipped = true;
      return;
    }
    rep.grad_norm = clip_grad_norm(store, cfg.clip_norm);
    adam.step(lr);
  };

  if (cfg.runs_xe()) {
    for (std::size_t e = 0; e < cfg.xe_epochs; ++e) {
      EpochReport r;
      r.epoch = ++epoch;
      r.phase = Phase::xe;
      const double lr = cfg.xe_lr.rate(e);
      auto units = xe_units;
      shuffle(units.begin(), units.end(), order_rng);
      double loss_sum = 0.0, norm_sum = 0.0;
      std::size_t tokens = 0;
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t b = 0; b < units.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(units.size(), b + cfg.batch_size);
        const T scale = static_cast<T>(1.0 / static_cast<double>(end - b));
        store.zero_grad();
        StepReport step;
        for (std::size_t u = b; u < end; ++u) {
          const auto& ex = ds.items[units[u].first];
          Graph<T> g;
          Var loss;
          if constexpr (paragraph) {
            loss = paragraph_xe_loss(g, model, features[units[u].first], ex.paragraph, {cfg.lambda_w, cfg.lambda_s},
                                     &expert, mu);
            for (const auto& s : ex.paragraph) tokens += s.size();
          } else {
            const auto& y = ex.captions[units[u].second];
            loss = xe_bc_loss(g, model, features[units[u].first], y, &expert, mu);
            tokens += y.size();
          }
          step.loss += static_cast<double>(g.scalar(loss));
          g.backward(loss, scale);
        }
        optimizer_step(lr, step);
        loss_sum += step.loss;
        norm_sum += step.grad_norm;
        ++r.steps;
        r.skipped_steps += step.skipped ? 1 : 0;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.mean_loss = loss_sum / static_cast<double>(units.size());
      r.mean_grad_norm = r.steps ? norm_sum / static_cast<double>(r.steps) : 0.0;
      r.tokens_per_sec = secs > 0.0 ? static_cast<double>(tokens) / secs : 0.0;
      finish_epoch(r);
    }
  }

  if (cfg.runs_rl()) {
    std::vector<std::size_t> items(ds.items.size());
    for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
    for (std::size_t e = 0; e < cfg.rl_epochs; ++e) {
      EpochReport r;
      r.epoch = ++epoch;
      r.phase = Phase::rl;
      const double lr = cfg.rl_lr.rate(e);
      shuffle(items.begin(), items.end(), order_rng);
      double loss_sum = 0.0, rs_sum = 0.0, rg_sum = 0.0, norm_sum = 0.0;
      std::size_t tokens = 0;
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t b = 0; b < items.size(); b += cfg.batch_size) {
        const std::size_t end = std::min(items.size(), b + cfg.batch_size);
        const T scale = static_cast<T>(1.0 / static_cast<double>(end - b));
        store.zero_grad();
        StepReport step;
        // Every rollout of the batch sees the same pre-step parameters.
        for (std::size_t u = b; u < end; ++u) {
          const auto& ex = ds.items[items[u]];
          Graph<T> g;
          ScstRollout ro;
          if constexpr (paragraph) {
            ro = paragraph_scst_rollout(g, model, features[items[u]], ex.paragraph, ex.references, reward,
                                        cfg.reward_level, sample_rng);
          } else {
            ro = scst_rollout(g, model, features[items[u]], ex.references, reward, sample_rng);
          }
          step.loss += static_cast<double>(g.scalar(ro.surrogate));
          step.reward_sample += ro.reward_sample;
          step.reward_greedy += ro.reward_greedy;
          tokens += ro.tokens;
          if (ro.has_signal) g.backward(ro.surrogate, scale);
        }
        optimizer_step(lr, step);
        loss_sum += step.loss;
        rs_sum += step.reward_sample;
        rg_sum += step.reward_greedy;
        norm_sum += step.grad_norm;
        ++r.steps;
        r.skipped_steps += step.skipped ? 1 : 0;
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double n = static_cast<double>(items.size());
      r.mean_loss = loss_sum / n;
      r.mean_reward_sample = rs_sum / n;
      r.mean_reward_greedy = rg_sum / n;
      r.mean_grad_norm = r.steps ? norm_sum / static_cast<double>(r.steps) : 0.0;
      r.tokens_per_sec = secs > 0.0 ? static_cast<double>(tokens) / secs : 0.0;
      finish_epoch(r);
    }
  }

  if (out.dir) save_checkpoint(*out.dir / "final.ckpt", store, hash);
  return reports;
}

}  // namespace cavp::training
