#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "orion/planner.hpp"
#include "orion/tool_registry.hpp"

namespace orion {

struct ExecPolicy {
  int max_parallel{4};
  std::int64_t node_timeout_ms{30000};
  int max_attempts{2};
};

struct StepRecord {
  std::string node_id;
  std::string tool;
  int attempt{1};
  int round{1};
  std::int64_t started_us{0};  // relative to the trace epoch
  std::int64_t ended_us{0};
  ToolResult result;
};

enum class TraceStatus { succeeded, failed, budget_exhausted };
std::string_view trace_status_name(TraceStatus s) noexcept;

struct ExecutionTrace {
  std::vector<StepRecord> steps;
  TraceStatus status{TraceStatus::succeeded};
  std::map<std::string, ToolResult> outputs;  // successful node results
  std::optional<std::string> failed_node;
  std::optional<ToolResult> failed_result;  // last result of the failed node, when it ran
  std::string error;
};

json to_json(const StepRecord& s);
json to_json(const ExecutionTrace& t);

/// Lit → value; file → {"file_id": id}; ref → selection over the node's output.
/// Throws PathMiss when the selector misses and UnreadyRef when the node has no output.
json resolve_binding(const Binding& b, const std::map<std::string, ToolResult>& outputs);

struct ExecOptions {
  /// Outputs carried over from an earlier round; these nodes are not re-run.
  std::map<std::string, ToolResult> reuse;
  int round{1};
  std::optional<std::chrono::steady_clock::time_point> epoch;
};

struct ExecResult {
  std::optional<json> final_value;  // set only when status == succeeded
  ExecutionTrace trace;
};

/// Runs every dependency-ready node, up to max_parallel in flight (gpu-hinted
/// tools weigh two). Ready nodes dispatch in natural id order. Retryable
/// failures are re-attempted up to max_attempts; a node that exhausts them
/// fails the plan once in-flight nodes drain.
ExecResult execute(const Plan& plan, const ExecPolicy& policy, const ToolRegistry& registry, const ToolContext& ctx,
                   const ExecOptions& opts = {});

}  // namespace orion
