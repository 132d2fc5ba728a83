#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cavp/data/coco.hpp"
#include "cavp/data/manifest.hpp"
#include "cavp/data/synth.hpp"
#include "cavp/language/captioning.hpp"
#include "cavp/language/paragraph_model.hpp"
#include "cavp/language/sentence_model.hpp"
#include "cavp/metrics/reward.hpp"
#include "cavp/substrate/checkpoint.hpp"
#include "cavp/training/trainer.hpp"

namespace cavp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Everything `train` needs: model, optimisation, data and output location.
struct RunConfig {
  ModelConfig model;
  training::TrainConfig train;
  std::string manifest;
  std::size_t min_count = 1;
  std::size_t max_len = 0;  // 0: 16 for sentences, 30 for paragraphs
  std::string output_dir;

  std::size_t effective_max_len() const {
    if (max_len) return max_len;
    return model.mode == CaptionMode::paragraph ? kParagraphMaxWords : kSentenceMaxLen;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {"mode", "model", "train", "data", "output_dir"};
    if (!j.is_object()) throw ConfigError("run config must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!known.count(it.key())) throw ConfigError("unknown run config key: " + it.key());
    RunConfig c;
    try {
      if (j.contains("mode")) c.model.mode = ModelConfig::parse_mode(j["mode"].get<std::string>());
      if (j.contains("model")) {
        c.model.merge_json(j["model"]);
        if (j.contains("mode")) c.model.mode = ModelConfig::parse_mode(j["mode"].get<std::string>());
      }
      if (c.model.mode == CaptionMode::paragraph) c.train = training::TrainConfig::paragraph_defaults();
      if (j.contains("train")) c.train.merge_json(j["train"]);
      if (j.contains("data")) {
        static const std::set<std::string> data_keys = {"manifest", "min_count", "max_len"};
        const auto& d = j["data"];
        if (!d.is_object()) throw ConfigError("data must be an object");
        for (auto it = d.begin(); it != d.end(); ++it)
          if (!data_keys.count(it.key())) throw ConfigError("unknown data config key: " + it.key());
        if (d.contains("manifest")) c.manifest = d["manifest"].get<std::string>();
        if (d.contains("min_count")) c.min_count = d["min_count"].get<std::size_t>();
        if (d.contains("max_len")) c.max_len = d["max_len"].get<std::size_t>();
      }
      if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("run config: ") + e.what());
    }
    return c;
  }
};

namespace detail {

struct CliError {
  int code;
  std::string message;
};

inline nlohmann::json read_json_file(const std::string& path, int code_on_error) {
  std::ifstream is(path);
  if (!is) throw CliError{code_on_error, "cannot open " + path};
  try {
    nlohmann::json j;
    is >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw CliError{code_on_error, path + " is not valid JSON: " + e.what()};
  }
}

inline std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("CAVP_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw CliError{kExitConfig, std::string("CAVP_SEED is not an unsigned integer: ") + s};
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct ImageInput {
  std::string image_id;
  Tensor<float> regions;
};

inline std::vector<ImageInput> caption_inputs(const std::string& manifest, const std::string& features) {
  std::vector<ImageInput> out;
  try {
    if (!manifest.empty()) {
      if (!std::filesystem::exists(manifest)) throw CliError{kExitData, "manifest not found: " + manifest};
      const auto m = data::load_manifest(manifest);
      data::FeatureResolver r(std::filesystem::path(manifest).parent_path());
      for (const auto& e : m.entries) out.push_back({e.image_id, r.rows(e.feature_ref)});
    } else {
      if (!std::filesystem::exists(features)) throw CliError{kExitData, "feature file not found: " + features};
      data::FeatureFile f(features);
      for (std::size_t i = 0; i < f.header().count; ++i) out.push_back({std::to_string(i), f.block(i)});
    }
  } catch (const data::DataError& e) {
    throw CliError{kExitData, e.what()};
  } catch (const io::FormatError& e) {
    throw CliError{kExitData, e.what()};
  }
  return out;
}

struct CaptionRequest {
  DecodeMode mode = DecodeMode::beam;
  std::size_t beam = kDefaultBeam;
  std::size_t max_len = 0;
  std::size_t max_sentences = kParagraphMaxSentences;
  std::uint64_t seed = 0;
  bool trace = false;
};

struct CaptionRecord {
  nlohmann::json json;
  AttentionTrace trace;
};

template <class T>
CaptionRecord caption_one(const SentenceModel<T>& model, const Vocabulary& vocab, const ImageInput& in,
                          const CaptionRequest& req, std::uint64_t seed) {
  const RegionFeatureSet<T> rf(in.regions.template cast<T>());
  const auto r = caption_image(model, rf, req.mode, req.beam, req.max_len ? req.max_len : kSentenceMaxLen, seed);
  CaptionRecord rec;
  rec.json = {{"image_id", in.image_id},
              {"caption", data::detokenize(vocab.decode(content_ids(r.tokens)))},
              {"logprob", r.logprob}};
  if (req.trace) rec.trace = trace_sequence(model, rf, r.tokens);
  return rec;
}

template <class T>
CaptionRecord caption_one(const ParagraphModel<T>& model, const Vocabulary& vocab, const ImageInput& in,
                          const CaptionRequest& req, std::uint64_t seed) {
  const RegionFeatureSet<T> rf(in.regions.template cast<T>());
  const auto p = decode_paragraph(model, rf, req.max_sentences, req.max_len ? req.max_len : kParagraphMaxWords,
                                  req.mode, req.beam, seed);
  std::vector<std::string> sentences;
  std::vector<std::vector<TokenId>> tokens;
  for (const auto& s : p.sentences) {
    sentences.push_back(data::detokenize(vocab.decode(s.content())));
    tokens.push_back(s.tokens);
  }
  CaptionRecord rec;
  rec.json = {{"image_id", in.image_id}, {"sentences", sentences}, {"logprob", p.logprob()}};
  if (req.trace) rec.trace = trace_paragraph(model, rf, tokens);
  return rec;
}

/// Per-image seeds derived from the base seed and the image position.
inline std::uint64_t image_seed(std::uint64_t base, std::size_t index) {
  return base * 1000003ULL + static_cast<std::uint64_t>(index);
}

template <class Model>
std::vector<CaptionRecord> caption_all(const Model& model, const Vocabulary& vocab,
                                       const std::vector<ImageInput>& inputs, const CaptionRequest& req,
                                       std::size_t jobs) {
  std::vector<CaptionRecord> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    out[i] = caption_one(model, vocab, inputs[i], req, image_seed(req.seed, i));
  });
  return out;
}

template <class T>
std::vector<CaptionRecord> caption_with(const ModelConfig& mc, const Checkpoint& ck, const Vocabulary& vocab,
                                        const std::vector<ImageInput>& inputs, const CaptionRequest& req,
                                        std::size_t jobs) {
  if (mc.mode == CaptionMode::paragraph) {
    ParagraphModel<T> m(mc);
    apply_checkpoint(ck, m.parameters());
    return caption_all(m, vocab, inputs, req, jobs);
  }
  SentenceModel<T> m(mc);
  apply_checkpoint(ck, m.parameters());
  return caption_all(m, vocab, inputs, req, jobs);
}

/// Candidates: a JSON array, or JSON lines, of {image_id, caption | sentences}.
inline std::map<std::string, std::string> read_candidates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw CliError{kExitData, "cannot open candidates: " + path};
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  std::vector<nlohmann::json> records;
  try {
    auto j = nlohmann::json::parse(text, nullptr, true);
    if (j.is_array()) {
      for (auto& r : j) records.push_back(r);
    } else {
      records.push_back(j);
    }
  } catch (const nlohmann::json::exception&) {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw CliError{kExitData, "candidates are neither JSON nor JSON lines: " + std::string(e.what())};
      }
    }
  }
  std::map<std::string, std::string> out;
  for (const auto& r : records) {
    if (!r.is_object() || !r.contains("image_id") || !(r.contains("caption") || r.contains("sentences")))
      throw CliError{kExitData, "candidate records need image_id and caption or sentences"};
    const auto& id = r["image_id"];
    const std::string key = id.is_string() ? id.get<std::string>() : id.dump();
    std::string text_out;
    if (r.contains("caption")) {
      text_out = r["caption"].get<std::string>();
    } else {
      for (const auto& s : r["sentences"]) text_out += (text_out.empty() ? "" : " ") + s.get<std::string>();
    }
    if (!out.emplace(key, text_out).second) throw CliError{kExitData, "duplicate candidate image_id " + key};
  }
  return out;
}

/// References: a manifest, COCO annotations, or {image_id: [captions]}.
/// Paragraph references are joined into one text.
inline std::map<std::string, std::vector<std::string>> read_references(const std::string& path) {
  const auto j = read_json_file(path, kExitData);
  std::map<std::string, std::vector<std::string>> out;
  try {
    if (j.is_object() && j.contains("entries")) {
      for (const auto& e : data::manifest_from_json(j).entries) {
        if (e.is_paragraph()) {
          std::string joined;
          for (const auto& s : e.paragraph) joined += (joined.empty() ? "" : " ") + s;
          out[e.image_id].push_back(joined);
        } else {
          out[e.image_id] = e.captions;
        }
      }
    } else if (j.is_object() && j.contains("annotations")) {
      out = data::coco_captions(j);
    } else if (j.is_object()) {
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.value().is_string()) out[it.key()].push_back(it.value().get<std::string>());
        else out[it.key()] = it.value().get<std::vector<std::string>>();
      }
    } else {
      throw CliError{kExitData, "unrecognised references format in " + path};
    }
  } catch (const nlohmann::json::exception& e) {
    throw CliError{kExitData, "malformed references: " + std::string(e.what())};
  } catch (const data::DataError& e) {
    throw CliError{kExitData, e.what()};
  }
  return out;
}

inline std::vector<metrics::Metric> parse_metric_list(const std::vector<std::string>& names) {
  static const std::map<std::string, std::vector<metrics::Metric>> aliases = {
      {"bleu", {metrics::Metric::bleu1, metrics::Metric::bleu2, metrics::Metric::bleu3, metrics::Metric::bleu4}},
      {"cider", {metrics::Metric::cider_d}},
      {"rouge", {metrics::Metric::rouge_l}}};
  std::vector<metrics::Metric> out;
  for (const auto& n : names) {
    std::string lower = n;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (auto it = aliases.find(lower); it != aliases.end()) {
      out.insert(out.end(), it->second.begin(), it->second.end());
      continue;
    }
    try {
      out.push_back(metrics::parse_metric(n));
    } catch (const std::invalid_argument& e) {
      throw CliError{kExitConfig, e.what()};
    }
  }
  return out;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware visual policy captioning"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // train
  auto* train = app.add_subcommand("train", "Train a captioning model");
  std::string train_config, manifest, output_dir, phase, reward, reward_level;
  std::optional<std::size_t> epochs, xe_epochs, rl_epochs, batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  train->add_option("--config", train_config, "Run config JSON");
  train->add_option("--manifest", manifest, "Dataset manifest JSON");
  train->add_option("--output-dir", output_dir, "Directory for checkpoints and log.csv");
  train->add_option("--epochs", epochs, "Epochs for every enabled phase");
  train->add_option("--xe-epochs", xe_epochs, "Cross-entropy epochs");
  train->add_option("--rl-epochs", rl_epochs, "Self-critical epochs");
  train->add_option("--batch-size", batch_size, "Batch size");
  train->add_option("--lr", lr, "Base learning rate of the cross-entropy phase");
  train->add_option("--phase", phase, "XE, RL or XE+RL")->check(CLI::IsMember({"XE", "RL", "XE+RL"}));
  train->add_option("--reward", reward, "Reward metric (CIDEr-D, BLEU-4, ROUGE-L, ...)");
  train->add_option("--reward-level", reward_level, "paragraph or sentence")
      ->check(CLI::IsMember({"paragraph", "sentence"}));
  train->add_option("--seed", seed, "Random seed (falls back to CAVP_SEED)");

  // caption
  auto* caption = app.add_subcommand("caption", "Caption images with a trained model");
  std::string checkpoint, model_json, cap_manifest, cap_features, decode = "beam", trace_path, precision = "f64";
  std::size_t beam_size = kDefaultBeam, max_len = 0, max_sentences = kParagraphMaxSentences, jobs = 1;
  std::optional<std::uint64_t> cap_seed;
  caption->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  caption->add_option("--model", model_json, "model.json written by train (default: next to the checkpoint)");
  auto* mopt = caption->add_option("--manifest", cap_manifest, "Manifest listing the images");
  auto* fopt = caption->add_option("--features", cap_features, "Feature file; one image per block");
  mopt->excludes(fopt);
  caption->add_option("--decode", decode, "greedy, beam or sample")->check(CLI::IsMember({"greedy", "beam", "sample"}));
  caption->add_option("--beam-size", beam_size, "Beam width")->check(CLI::PositiveNumber);
  caption->add_option("--max-len", max_len, "Maximum words per sentence");
  caption->add_option("--max-sentences", max_sentences, "Maximum sentences per paragraph")->check(CLI::PositiveNumber);
  caption->add_option("--trace", trace_path, "Write attention traces as JSON lines");
  caption->add_option("--seed", cap_seed, "Sampling seed (falls back to CAVP_SEED)");
  caption->add_option("--jobs", jobs, "Images captioned in parallel")->check(CLI::PositiveNumber);
  caption->add_option("--precision", precision, "f64 or f32")->check(CLI::IsMember({"f64", "f32"}));

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score candidate captions against references");
  std::string candidates, references;
  std::vector<std::string> metric_names = {"BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "CIDEr-D", "ROUGE-L"};
  std::size_t eval_jobs = 1;
  evaluate->add_option("--candidates", candidates, "Candidates JSON or JSON lines")->required();
  evaluate->add_option("--references", references, "References JSON")->required();
  evaluate->add_option("--metrics", metric_names, "Metrics to report")->delimiter(',');
  evaluate->add_option("--jobs", eval_jobs, "Unused for corpus metrics; accepted for symmetry")
      ->check(CLI::PositiveNumber);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  data::SynthOptions so;
  std::string synth_dir;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--seed", synth_seed, "Random seed (falls back to CAVP_SEED)");
  synth->add_option("--n-images", so.n_images, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--k", so.k, "Regions per image")->check(CLI::PositiveNumber);
  synth->add_option("--dim", so.dim, "Region feature dimension")->check(CLI::PositiveNumber);
  synth->add_option("--captions-per-image", so.captions_per_image, "Captions per image")->check(CLI::PositiveNumber);
  synth->add_flag("--paragraph", so.paragraph, "Generate paragraphs instead of captions");
  synth->add_flag("--relation-codes", so.relation_codes, "Relations follow hidden per-region codes");
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();

  // inspect-trace
  auto* inspect = app.add_subcommand("inspect-trace", "Summarise an attention trace");
  std::string inspect_path, inspect_id;
  inspect->add_option("--trace", inspect_path, "Trace JSON lines")->required();
  inspect->add_option("--image-id", inspect_id, "Only records of this image");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (train->parsed()) {
      RunConfig rc;
      if (!train_config.empty()) {
        try {
          rc = RunConfig::from_json(detail::read_json_file(train_config, kExitConfig));
        } catch (const ConfigError& e) {
          throw detail::CliError{kExitConfig, e.what()};
        }
      }
      if (!manifest.empty()) rc.manifest = manifest;
      if (!output_dir.empty()) rc.output_dir = output_dir;
      auto& tc = rc.train;
      try {
        if (!phase.empty()) tc.phase = training::parse_phase(phase);
        if (epochs) tc.xe_epochs = tc.rl_epochs = *epochs;
        if (xe_epochs) tc.xe_epochs = *xe_epochs;
        if (rl_epochs) tc.rl_epochs = *rl_epochs;
        if (batch_size) tc.batch_size = *batch_size;
        if (lr) tc.xe_lr.base = *lr;
        if (!reward.empty()) tc.reward = reward;
        if (!reward_level.empty()) tc.reward_level = training::parse_reward_level(reward_level);
        if (seed) tc.seed = *seed;
        else if (auto s = detail::env_seed()) tc.seed = *s;
        tc.validate();
      } catch (const std::invalid_argument& e) {
        throw detail::CliError{kExitConfig, e.what()};
      }
      if (rc.output_dir.empty()) throw detail::CliError{kExitConfig, "no output directory (--output-dir)"};
      if (rc.manifest.empty()) throw detail::CliError{kExitData, "no dataset manifest given (--manifest)"};
      if (!std::filesystem::exists(rc.manifest))
        throw detail::CliError{kExitData, "dataset manifest not found: " + rc.manifest};

      data::Dataset ds;
      try {
        ds = data::load_dataset(rc.manifest, {rc.min_count, rc.effective_max_len()});
      } catch (const data::DataError& e) {
        throw detail::CliError{kExitData, e.what()};
      } catch (const io::FormatError& e) {
        throw detail::CliError{kExitData, e.what()};
      }
      if ((rc.model.mode == CaptionMode::paragraph) != ds.is_paragraph())
        throw detail::CliError{kExitData, "dataset does not match mode " + rc.model.to_json()["mode"].get<std::string>()};
      rc.model.vocab_size = ds.vocab.size();
      rc.model.region_dim = ds.region_dim();
      try {
        rc.model.validate();
      } catch (const ConfigError& e) {
        throw detail::CliError{kExitConfig, e.what()};
      }

      std::vector<training::EpochReport> log;
      const training::TrainOutput to{std::filesystem::path(rc.output_dir), nullptr, {}};
      if (rc.model.mode == CaptionMode::paragraph) {
        ParagraphModel<double> m(rc.model);
        m.initialize(tc.seed);
        log = training::train(m, ds, tc, to);
      } else {
        SentenceModel<double> m(rc.model);
        m.initialize(tc.seed);
        log = training::train(m, ds, tc, to);
      }
      nlohmann::json summary = {{"checkpoint", (std::filesystem::path(rc.output_dir) / "final.ckpt").string()},
                                {"log", (std::filesystem::path(rc.output_dir) / "log.csv").string()},
                                {"epochs", log.size()},
                                {"seed", tc.seed}};
      if (!log.empty() && log.back().train_cider) summary["train_CIDEr"] = *log.back().train_cider;
      out << summary.dump() << '\n';
      return kExitOk;
    }

    if (caption->parsed()) {
      if (cap_manifest.empty() && cap_features.empty())
        throw detail::CliError{kExitConfig, "caption needs --manifest or --features"};
      if (!std::filesystem::exists(checkpoint)) throw detail::CliError{kExitData, "checkpoint not found: " + checkpoint};
      if (model_json.empty()) model_json = (std::filesystem::path(checkpoint).parent_path() / "model.json").string();
      const auto desc = detail::read_json_file(model_json, kExitConfig);
      ModelConfig mc;
      Vocabulary vocab;
      try {
        mc = ModelConfig::from_json(desc.at("model"));
        vocab = Vocabulary::from_json(desc.at("vocab"));
      } catch (const std::exception& e) {
        throw detail::CliError{kExitConfig, std::string("invalid model description: ") + e.what()};
      }
      Checkpoint ck;
      try {
        ck = load_checkpoint_file(checkpoint);
      } catch (const std::exception& e) {
        throw detail::CliError{kExitData, e.what()};
      }
      if (ck.config_hash() != mc.hash())
        throw detail::CliError{kExitConfig, "checkpoint config hash " + ck.config_hash() +
                                                " does not match model config hash " + mc.hash()};
      if (vocab.size() != mc.vocab_size) throw detail::CliError{kExitConfig, "vocabulary size does not match model"};

      const auto inputs = detail::caption_inputs(cap_manifest, cap_features);
      for (const auto& in : inputs)
        if (in.regions.cols() != mc.region_dim)
          throw detail::CliError{kExitData, "image " + in.image_id + " has feature dimension " +
                                                std::to_string(in.regions.cols()) + ", model expects " +
                                                std::to_string(mc.region_dim)};
      detail::CaptionRequest req;
      req.mode = parse_decode_mode(decode);
      req.beam = beam_size;
      req.max_len = max_len;
      req.max_sentences = max_sentences;
      req.trace = !trace_path.empty();
      if (cap_seed) req.seed = *cap_seed;
      else if (auto s = detail::env_seed()) req.seed = *s;

      std::vector<detail::CaptionRecord> records;
      try {
        records = precision == "f32" ? detail::caption_with<float>(mc, ck, vocab, inputs, req, jobs)
                                     : detail::caption_with<double>(mc, ck, vocab, inputs, req, jobs);
      } catch (const io::FormatError& e) {
        throw detail::CliError{kExitConfig, e.what()};
      }
      std::ofstream trace_os;
      if (req.trace) {
        trace_os.open(trace_path, std::ios::trunc);
        if (!trace_os) throw detail::CliError{kExitData, "cannot write trace: " + trace_path};
      }
      for (auto& r : records) {
        if (req.trace) {
          write_trace_jsonl(trace_os, r.trace, r.json["image_id"].get<std::string>());
          r.json["trace_path"] = trace_path;
        }
        out << r.json.dump() << '\n';
      }
      return kExitOk;
    }

    if (evaluate->parsed()) {
      const auto which = detail::parse_metric_list(metric_names);
      const auto cands = detail::read_candidates(candidates);
      const auto refs = detail::read_references(references);
      if (cands.empty()) throw detail::CliError{kExitData, "no candidates to evaluate"};
      std::vector<std::string> missing;
      for (const auto& [id, text] : cands)
        if (!refs.count(id)) missing.push_back(id);
      if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
        throw detail::CliError{kExitData, "candidate image ids without references: " + list};
      }
      std::vector<std::vector<std::string>> c;
      std::vector<std::vector<std::vector<std::string>>> r;
      for (const auto& [id, text] : cands) {
        c.push_back(data::tokenize(text));
        std::vector<std::vector<std::string>> rs;
        for (const auto& t : refs.at(id)) rs.push_back(data::tokenize(t));
        if (rs.empty()) throw detail::CliError{kExitData, "image " + id + " has no references"};
        r.push_back(std::move(rs));
      }
      const bool wants_cider = std::any_of(which.begin(), which.end(), metrics::needs_idf);
      if (wants_cider && cands.size() < 2)
        err << "warning: CIDEr idf needs at least 2 images; every idf weight is 0 for a single image\n";
      nlohmann::json result = nlohmann::json::object();
      for (const auto& [name, value] : metrics::evaluate_corpus(c, r, which)) result[name] = value;
      out << result.dump() << '\n';
      return kExitOk;
    }

    if (synth->parsed()) {
      if (synth_seed) so.seed = *synth_seed;
      else if (auto s = detail::env_seed()) so.seed = *s;
      data::SynthDataset ds;
      try {
        ds = data::synth_dataset(so);
      } catch (const std::invalid_argument& e) {
        throw detail::CliError{kExitConfig, e.what()};
      }
      const auto path = data::write_synth_dataset(synth_dir, ds);
      out << nlohmann::json{{"manifest", path.string()}, {"images", ds.images.size()}, {"seed", so.seed}}.dump()
          << '\n';
      return kExitOk;
    }

    if (inspect->parsed()) {
      std::ifstream is(inspect_path);
      if (!is) throw detail::CliError{kExitData, "cannot open trace: " + inspect_path};
      std::string line;
      std::size_t n = 0;
      while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        TraceStep step;
        try {
          j = nlohmann::json::parse(line);
          step = trace_step_from_json(j);
        } catch (const nlohmann::json::exception& e) {
          throw detail::CliError{kExitData, "malformed trace record: " + std::string(e.what())};
        }
        const std::string id = j.value("image_id", std::string{});
        if (!inspect_id.empty() && id != inspect_id) continue;
        nlohmann::json summary = {{"image_id", id}, {"step", step.step}, {"argmax", argmaxes(step)}};
        if (step.sentence) summary["sentence"] = *step.sentence;
        if (step.token) summary["token"] = *step.token;
        out << summary.dump() << '\n';
        ++n;
      }
      if (n == 0) err << "warning: no trace records matched\n";
      return kExitOk;
    }
  } catch (const detail::CliError& e) {
    err << "error: " << e.message << '\n';
    return e.code;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const data::DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace cavp::cli
