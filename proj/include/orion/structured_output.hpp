#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orion/core.hpp"
#include "orion/schema.hpp"

namespace orion {

/// Absent or null → chat mode. Accepts {"type": "json_schema", "schema": {...}}
/// and the {"type": "json_schema", "json_schema": {"schema": {...}}} wrapping.
/// Anything else throws UnsupportedResponseFormat.
std::optional<OutputSchema> parse_response_format(const json& value);

struct Validated {
  std::optional<json> value;
  std::vector<Violation> violations;
  bool ok() const noexcept { return value.has_value(); }
};

/// Parses and validates; unparseable text yields a single `parse` violation at "$".
Validated validate_final(std::string_view text, const OutputSchema& schema);

/// Names every violation path so one repair round can address all of them.
std::string repair_feedback(const std::vector<Violation>& v);

class StructuredOutputError : public Error {
 public:
  StructuredOutputError(std::string message, std::vector<Violation> violations, int calls)
      : Error(Errc::structured_output_failure, std::move(message)), violations_(std::move(violations)), calls_(calls) {}
  const std::vector<Violation>& violations() const noexcept { return violations_; }
  int calls() const noexcept { return calls_; }

 private:
  std::vector<Violation> violations_;
  int calls_;
};

/// Receives "" on the first call and repair feedback afterwards.
using Generator = std::function<std::string(const std::string& feedback)>;

struct Repaired {
  json value;
  int calls{0};
};

/// At most 1 + max_repairs calls to `generate`.
Repaired repair_loop(const Generator& generate, const OutputSchema& schema, int max_repairs = 2);

/// Builds a candidate answer from the agent's results: keys of the schema are
/// looked up in the final value, then in node outputs (in the given order).
/// With feedback, values are also reshaped to the schema (missing keys get
/// type defaults, scalars are converted, enums pick their first member).
std::string compose_structured(const OutputSchema& schema, const json& final_value,
                               const std::vector<json>& node_outputs, const std::string& feedback);

}  // namespace orion
