#pragma once

// JSON forms of the records passed between pipeline stages. Stages exchange
// one JSON object per line.

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synguard/attacks.hpp"
#include "synguard/detect.hpp"
#include "synguard/generate.hpp"

namespace synguard {

using Json = nlohmann::ordered_json;

Json to_json(const GenParams& p);
/// Missing fields keep their defaults; unknown fields are a FormatError.
GenParams gen_params_from_json(const Json& j);

/// {"regime","prompt_ids","output_ids","params","key_fingerprint"}
Json to_json(const GenerationRecord& r);
GenerationRecord generation_from_json(const Json& j);

Json to_json(const AttackSpec& a);
AttackSpec attack_spec_from_json(const Json& j);

struct DetectionRecord {
  std::string sample_id;
  std::string regime;
  double s_g = 0.0;
  double s_semantic = 0.0;
  double s_hybrid = 0.0;
  std::size_t length = 0;
};

/// {"sample_id","regime","s_g","s_semantic","s_hybrid","T"}
Json to_json(const DetectionRecord& r);
DetectionRecord detection_from_json(const Json& j);

/// Parse every non-blank line; errors name the offending line number.
std::vector<Json> read_jsonl(std::istream& in);
std::string to_jsonl_line(const Json& j);

/// Throws FormatError naming the first key of `j` not in `allowed`.
void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         std::string_view what);

}  // namespace synguard
