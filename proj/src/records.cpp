#include "synguard/records.hpp"

#include <algorithm>

#include "synguard/error.hpp"

namespace synguard {

namespace {

template <typename T>
void read_field(const Json& j, const char* name, T& out) {
  if (!j.contains(name)) return;
  try {
    out = j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + name + "': " + e.what());
  }
}

template <typename T>
T require_field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw FormatError(std::string("missing field '") + name + "'");
  T out{};
  read_field(j, name, out);
  return out;
}

}  // namespace

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view what) {
  if (!j.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw FormatError(std::string(what) + ": unknown field '" + k + "'");
}

Json to_json(const GenParams& p) {
  return Json{{"max_tokens", p.max_tokens},       {"min_tokens", p.min_tokens},
              {"temperature", p.temperature},     {"delta", p.delta},
              {"g_scale", p.g_scale},             {"rng_seed", p.rng_seed},
              {"hybrid_tournament", p.hybrid_tournament}, {"stop_at_eos", p.stop_at_eos}};
}

GenParams gen_params_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"max_tokens", "min_tokens", "temperature", "delta", "g_scale", "rng_seed",
                       "hybrid_tournament", "stop_at_eos"},
                      "params");
  GenParams p;
  read_field(j, "max_tokens", p.max_tokens);
  read_field(j, "min_tokens", p.min_tokens);
  read_field(j, "temperature", p.temperature);
  read_field(j, "delta", p.delta);
  read_field(j, "g_scale", p.g_scale);
  read_field(j, "rng_seed", p.rng_seed);
  read_field(j, "hybrid_tournament", p.hybrid_tournament);
  read_field(j, "stop_at_eos", p.stop_at_eos);
  p.validate();
  return p;
}

Json to_json(const GenerationRecord& r) {
  return Json{{"regime", to_string(r.regime)},
              {"prompt_ids", r.prompt},
              {"output_ids", r.output},
              {"params", to_json(r.params)},
              {"key_fingerprint", r.key_fingerprint}};
}

GenerationRecord generation_from_json(const Json& j) {
  GenerationRecord r;
  r.regime = parse_regime(require_field<std::string>(j, "regime"));
  r.prompt = require_field<std::vector<TokenId>>(j, "prompt_ids");
  r.output = require_field<std::vector<TokenId>>(j, "output_ids");
  if (j.contains("params")) r.params = gen_params_from_json(j.at("params"));
  read_field(j, "key_fingerprint", r.key_fingerprint);
  return r;
}

Json to_json(const AttackSpec& a) {
  return Json{{"kind", to_string(a.kind)},       {"epsilon", a.epsilon},
              {"ratio", a.ratio},                {"lex_div", a.lex_div},
              {"order_div", a.order_div},        {"fidelity_q", a.fidelity_q},
              {"reorder_window", a.reorder_window}, {"rng_seed", a.rng_seed}};
}

AttackSpec attack_spec_from_json(const Json& j) {
  reject_unknown_keys(j,
                      {"kind", "epsilon", "ratio", "lex_div", "order_div", "fidelity_q",
                       "reorder_window", "rng_seed"},
                      "attack");
  AttackSpec a;
  std::string kind = "none";
  read_field(j, "kind", kind);
  a.kind = parse_attack_kind(kind);
  read_field(j, "epsilon", a.epsilon);
  read_field(j, "ratio", a.ratio);
  read_field(j, "lex_div", a.lex_div);
  read_field(j, "order_div", a.order_div);
  read_field(j, "fidelity_q", a.fidelity_q);
  read_field(j, "reorder_window", a.reorder_window);
  read_field(j, "rng_seed", a.rng_seed);
  a.validate();
  return a;
}

Json to_json(const DetectionRecord& r) {
  return Json{{"sample_id", r.sample_id}, {"regime", r.regime},
              {"s_g", r.s_g},             {"s_semantic", r.s_semantic},
              {"s_hybrid", r.s_hybrid},   {"T", r.length}};
}

DetectionRecord detection_from_json(const Json& j) {
  DetectionRecord r;
  r.sample_id = require_field<std::string>(j, "sample_id");
  read_field(j, "regime", r.regime);
  r.s_g = require_field<double>(j, "s_g");
  r.s_semantic = require_field<double>(j, "s_semantic");
  r.s_hybrid = require_field<double>(j, "s_hybrid");
  r.length = require_field<std::size_t>(j, "T");
  return r;
}

std::vector<Json> read_jsonl(std::istream& in) {
  std::vector<Json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl_line(const Json& j) { return j.dump() + "\n"; }

}  // namespace synguard
