#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace orion {

using json = nlohmann::json;

enum class VerdictAction { finalize, retry, refine, fail };

std::string_view action_name(VerdictAction a) noexcept;
VerdictAction parse_action(std::string_view s);

/// Outcome of judging one round. retry/refine name a node; refine carries a hint
/// such as {"widen_query": "clock, watch"} or {"insert_before": {...}}.
struct Verdict {
  VerdictAction action{VerdictAction::finalize};
  std::optional<std::string> node_id;
  std::optional<json> hint;
  std::optional<double> score;
  std::string reason;
};

json to_json(const Verdict& v);
Verdict verdict_from_json(const json& j);

}  // namespace orion
