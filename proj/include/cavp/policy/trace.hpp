#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cavp/attention/sub_policy.hpp"

namespace cavp {

/// Attention distributions of every sub-policy at one decode step.
struct TraceStep {
  std::size_t step = 0;
  std::optional<std::size_t> sentence;  // paragraph mode only
  std::optional<std::size_t> token;
  std::vector<double> single;
  std::vector<double> context;
  std::vector<double> composition;
  std::vector<double> output;
};

using AttentionTrace = std::vector<TraceStep>;

inline nlohmann::json argmaxes(const TraceStep& s) {
  auto pick = [](const std::vector<double>& d) -> nlohmann::json {
    if (d.empty()) return nullptr;
    return hard_argmax(d);
  };
  return {{"single", pick(s.single)},
          {"context", pick(s.context)},
          {"composition", pick(s.composition)},
          {"output", pick(s.output)}};
}

inline nlohmann::json to_json(const TraceStep& s) {
  nlohmann::json j = {{"step", s.step},          {"single", s.single}, {"context", s.context},
                      {"composition", s.composition}, {"output", s.output}, {"argmaxes", argmaxes(s)}};
  if (s.sentence) j["sentence"] = *s.sentence;
  if (s.token) j["token"] = *s.token;
  return j;
}

inline TraceStep trace_step_from_json(const nlohmann::json& j) {
  TraceStep s;
  s.step = j.at("step").get<std::size_t>();
  s.single = j.at("single").get<std::vector<double>>();
  s.context = j.at("context").get<std::vector<double>>();
  s.composition = j.at("composition").get<std::vector<double>>();
  s.output = j.at("output").get<std::vector<double>>();
  if (j.contains("sentence")) s.sentence = j["sentence"].get<std::size_t>();
  if (j.contains("token")) s.token = j["token"].get<std::size_t>();
  return s;
}

/// JSON-lines: one record per step.
inline void write_trace_jsonl(std::ostream& os, const AttentionTrace& trace, const std::string& image_id = {}) {
  for (const auto& s : trace) {
    auto j = to_json(s);
    if (!image_id.empty()) j["image_id"] = image_id;
    os << j.dump() << '\n';
  }
}

inline AttentionTrace read_trace_jsonl(std::istream& is) {
  AttentionTrace out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(trace_step_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace cavp
