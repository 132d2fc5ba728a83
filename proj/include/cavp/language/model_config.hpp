#pragma once

#include <set>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "cavp/policy/visual_policy.hpp"
#include "cavp/substrate/checkpoint.hpp"

namespace cavp {

enum class CaptionMode { sentence, paragraph };

/// Which visual outputs the word-level policy may recall in paragraph mode.
/// `sentence_outputs`: the earlier sentence-level outputs {v_1..v_{i-1}}.
/// `previous_words`: the earlier word-level outputs of the paragraph.
enum class WordContext { sentence_outputs, previous_words };

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  CaptionMode mode = CaptionMode::sentence;
  std::size_t vocab_size = 30;
  std::size_t embed_size = 16;
  std::size_t hidden_size = 32;
  std::size_t attn_size = 32;
  std::size_t region_dim = 24;
  ContextMode context_mode = ContextMode::full_history;
  bool share_lstm = true;
  PolicyVariant variant = PolicyVariant::full;
  WordContext word_context = WordContext::sentence_outputs;

  /// Published full-scale dimensions.
  static ModelConfig sentence_full_scale(std::size_t vocab) {
    ModelConfig c;
    c.vocab_size = vocab;
    c.hidden_size = 1300;
    c.attn_size = 1024;
    c.embed_size = 1000;
    c.region_dim = 2048;
    return c;
  }
  static ModelConfig paragraph_full_scale(std::size_t vocab) {
    ModelConfig c;
    c.mode = CaptionMode::paragraph;
    c.vocab_size = vocab;
    c.hidden_size = 512;
    c.attn_size = 512;
    c.embed_size = 512;
    c.region_dim = 4096;
    return c;
  }

  CavpConfig cavp() const {
    CavpConfig c;
    c.context_mode = context_mode;
    c.share_lstm = share_lstm;
    c.variant = variant;
    c.hidden_size = hidden_size;
    c.lp_hidden_size = hidden_size;
    c.attn_size = attn_size;
    c.embed_size = embed_size;
    c.region_dim = region_dim;
    return c;
  }

  void validate() const {
    if (vocab_size < 5) throw ConfigError("vocab_size must be at least 5");
    if (!embed_size || !hidden_size || !attn_size || !region_dim)
      throw ConfigError("model dimensions must be positive");
  }

  nlohmann::json to_json() const {
    return {{"mode", mode == CaptionMode::sentence ? "sentence" : "paragraph"},
            {"vocab_size", vocab_size},
            {"embed_size", embed_size},
            {"hidden_size", hidden_size},
            {"attn_size", attn_size},
            {"region_dim", region_dim},
            {"context_mode", context_mode == ContextMode::full_history ? "full_history" : "last_step"},
            {"share_lstm", share_lstm},
            {"variant", variant == PolicyVariant::full ? "full" : "single_only"},
            {"word_context", word_context == WordContext::sentence_outputs ? "sentence_outputs" : "previous_words"}};
  }

  /// Fields absent from `j` keep their current values; unknown keys are rejected.
  void merge_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"mode",       "vocab_size",   "embed_size", "hidden_size",
                                                "attn_size",  "region_dim",   "context_mode", "share_lstm",
                                                "variant",    "word_context"};
    if (!j.is_object()) throw ConfigError("model config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) throw ConfigError("unknown model config key: " + it.key());
    try {
      if (j.contains("mode")) mode = parse_mode(j["mode"].get<std::string>());
      if (j.contains("vocab_size")) vocab_size = j["vocab_size"].get<std::size_t>();
      if (j.contains("embed_size")) embed_size = j["embed_size"].get<std::size_t>();
      if (j.contains("hidden_size")) hidden_size = j["hidden_size"].get<std::size_t>();
      if (j.contains("attn_size")) attn_size = j["attn_size"].get<std::size_t>();
      if (j.contains("region_dim")) region_dim = j["region_dim"].get<std::size_t>();
      if (j.contains("context_mode")) {
        auto s = j["context_mode"].get<std::string>();
        if (s == "full_history") context_mode = ContextMode::full_history;
        else if (s == "last_step") context_mode = ContextMode::last_step;
        else throw ConfigError("context_mode must be full_history or last_step");
      }
      if (j.contains("share_lstm")) share_lstm = j["share_lstm"].get<bool>();
      if (j.contains("variant")) {
        auto s = j["variant"].get<std::string>();
        if (s == "full") variant = PolicyVariant::full;
        else if (s == "single_only") variant = PolicyVariant::single_only;
        else throw ConfigError("variant must be full or single_only");
      }
      if (j.contains("word_context")) {
        auto s = j["word_context"].get<std::string>();
        if (s == "sentence_outputs") word_context = WordContext::sentence_outputs;
        else if (s == "previous_words") word_context = WordContext::previous_words;
        else throw ConfigError("word_context must be sentence_outputs or previous_words");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("model config: ") + e.what());
    }
    validate();
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.merge_json(j);
    return c;
  }

  static CaptionMode parse_mode(const std::string& s) {
    if (s == "sentence") return CaptionMode::sentence;
    if (s == "paragraph") return CaptionMode::paragraph;
    throw ConfigError("mode must be sentence or paragraph, got " + s);
  }

  std::string hash() const { return config_hash(to_json()); }
};

}  // namespace cavp
