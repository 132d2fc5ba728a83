#pragma once

#include <set>
#include <string>

#include "json.hpp"

#include "cavp/language/model_config.hpp"
#include "cavp/metrics/reward.hpp"
#include "cavp/training/optimizer.hpp"
#include "cavp/training/scst.hpp"

namespace cavp::training {

enum class Phase { xe, rl, both };

inline Phase parse_phase(const std::string& s) {
  if (s == "XE") return Phase::xe;
  if (s == "RL") return Phase::rl;
  if (s == "XE+RL") return Phase::both;
  throw ConfigError("phase must be XE, RL or XE+RL, got " + s);
}

inline std::string phase_name(Phase p) {
  switch (p) {
    case Phase::xe: return "XE";
    case Phase::rl: return "RL";
    case Phase::both: return "XE+RL";
  }
  return {};
}

struct TrainConfig {
  Phase phase = Phase::both;
  std::size_t xe_epochs = 37;
  std::size_t rl_epochs = 10;
  LrSchedule xe_lr{5e-4, 0.8, 3};
  LrSchedule rl_lr{5e-5, 0.1, 55};
  std::size_t batch_size = 10;
  std::string reward = "CIDEr-D";
  RewardLevel reward_level = RewardLevel::sentence;
  double lambda_w = 1.0;
  double lambda_s = 5.0;
  bool behavior_cloning = true;
  double bc_weight = 1.0;  // mu
  double clip_norm = 10.0;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  bool eval_train_cider = true;

  /// Paragraph-mode defaults: XE decay every 20 epochs, BLEU-4 reward.
  static TrainConfig paragraph_defaults() {
    TrainConfig c;
    c.xe_lr.interval = 20;
    c.reward = "BLEU-4";
    return c;
  }

  bool runs_xe() const { return phase != Phase::rl; }
  bool runs_rl() const { return phase != Phase::xe; }

  void validate() const {
    auto check_lr = [](const LrSchedule& s, const char* which) {
      if (!(s.base > 0.0)) throw ConfigError(std::string(which) + " learning rate must be positive");
      if (!(s.decay > 0.0 && s.decay <= 1.0)) throw ConfigError(std::string(which) + " decay must be in (0, 1]");
    };
    check_lr(xe_lr, "XE");
    check_lr(rl_lr, "RL");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (lambda_w < 0.0 || lambda_s < 0.0) throw ConfigError("lambda_w and lambda_s must be non-negative");
    if (bc_weight < 0.0) throw ConfigError("bc_weight must be non-negative");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
    try {
      metrics::parse_metric(reward);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  nlohmann::json to_json() const {
    auto lr = [](const LrSchedule& s) {
      return nlohmann::json{{"base", s.base}, {"decay", s.decay}, {"interval", s.interval}};
    };
    return {{"phase", phase_name(phase)},
            {"xe_epochs", xe_epochs},
            {"rl_epochs", rl_epochs},
            {"xe_lr", lr(xe_lr)},
            {"rl_lr", lr(rl_lr)},
            {"batch_size", batch_size},
            {"reward", reward},
            {"reward_level", reward_level == RewardLevel::paragraph ? "paragraph" : "sentence"},
            {"lambda_w", lambda_w},
            {"lambda_s", lambda_s},
            {"behavior_cloning", behavior_cloning},
            {"bc_weight", bc_weight},
            {"clip_norm", clip_norm},
            {"seed", seed},
            {"checkpoint_every", checkpoint_every},
            {"eval_train_cider", eval_train_cider}};
  }

  /// Overrides fields present in `j`; unknown keys are rejected.
  void merge_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "phase",    "xe_epochs",  "rl_epochs",        "xe_lr",     "rl_lr",      "batch_size",
        "reward",   "reward_level", "lambda_w",       "lambda_s",  "behavior_cloning", "bc_weight",
        "clip_norm", "seed",      "checkpoint_every", "eval_train_cider"};
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) throw ConfigError("unknown train config key: " + it.key());
    auto lr = [](const nlohmann::json& s, LrSchedule& out, const char* which) {
      static const std::set<std::string> keys = {"base", "decay", "interval"};
      if (!s.is_object()) throw ConfigError(std::string(which) + " must be an object");
      for (auto it = s.begin(); it != s.end(); ++it)
        if (!keys.count(it.key())) throw ConfigError(std::string("unknown key in ") + which + ": " + it.key());
      if (s.contains("base")) out.base = s["base"].get<double>();
      if (s.contains("decay")) out.decay = s["decay"].get<double>();
      if (s.contains("interval")) out.interval = s["interval"].get<std::size_t>();
    };
    try {
      if (j.contains("phase")) phase = parse_phase(j["phase"].get<std::string>());
      if (j.contains("xe_epochs")) xe_epochs = j["xe_epochs"].get<std::size_t>();
      if (j.contains("rl_epochs")) rl_epochs = j["rl_epochs"].get<std::size_t>();
      if (j.contains("xe_lr")) lr(j["xe_lr"], xe_lr, "xe_lr");
      if (j.contains("rl_lr")) lr(j["rl_lr"], rl_lr, "rl_lr");
      if (j.contains("batch_size")) batch_size = j["batch_size"].get<std::size_t>();
      if (j.contains("reward")) reward = j["reward"].get<std::string>();
      if (j.contains("reward_level")) {
        try {
          reward_level = parse_reward_level(j["reward_level"].get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
      if (j.contains("lambda_w")) lambda_w = j["lambda_w"].get<double>();
      if (j.contains("lambda_s")) lambda_s = j["lambda_s"].get<double>();
      if (j.contains("behavior_cloning")) behavior_cloning = j["behavior_cloning"].get<bool>();
      if (j.contains("bc_weight")) bc_weight = j["bc_weight"].get<double>();
      if (j.contains("clip_norm")) clip_norm = j["clip_norm"].get<double>();
      if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
      if (j.contains("checkpoint_every")) checkpoint_every = j["checkpoint_every"].get<std::size_t>();
      if (j.contains("eval_train_cider")) eval_train_cider = j["eval_train_cider"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("train config: ") + e.what());
    }
    validate();
  }
};

}  // namespace cavp::training
