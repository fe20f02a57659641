#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "orion/executor.hpp"
#include "orion/planner.hpp"
#include "orion/schema.hpp"
#include "orion/verdict.hpp"

namespace orion {

enum class JudgeOn { final_only, every_node };

struct ReflectionPolicy {
  int max_rounds{3};
  JudgeOn judge_on{JudgeOn::final_only};
};

/// Throws SchemaShape unless the schema is object-rooted.
std::vector<Violation> check_conformance(const json& value, const json& schema);

/// Sub-schema addressed by a selector over values of `schema`; nullptr when
/// the schema does not describe that path.
const json* schema_at_path(const json& schema, std::string_view path);

struct JudgeRequest {
  std::string instruction;
  std::string node_id;
  std::string tool;
  std::optional<std::string> expect;
  json input;
  json output;
  std::vector<ArtifactRef> artifacts;
  json schema;  // the tool's output schema, null when unknown
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual Verdict judge(const JudgeRequest& req) const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic default: schema violation → retry; expectation (or a synonym)
/// absent from the output's strings → refine with a widened query; otherwise
/// finalize at 1.0.
class MockJudge final : public Judge {
 public:
  Verdict judge(const JudgeRequest& req) const override;
  std::string name() const override { return "mock"; }

  /// "clock" → "clock, watch"; a query that is already widened falls back to "objects".
  static std::optional<std::string> widen(const std::string& expect, const std::string& current_query);
};

/// (system prompt, request JSON) → verdict JSON text. Throws JudgeUnavailable
/// when the backend fails or its reply is not a verdict.
using ModelJudgeFn = std::function<std::string(const std::string& system_prompt, const json& request)>;

class ModelJudge final : public Judge {
 public:
  ModelJudge(ModelJudgeFn fn, std::string name = "model") : fn_(std::move(fn)), name_(std::move(name)) {}
  Verdict judge(const JudgeRequest& req) const override;
  std::string name() const override { return name_; }

 private:
  ModelJudgeFn fn_;
  std::string name_;
};

json to_json(const JudgeRequest& r);

struct ReflectHooks {
  std::function<ExecResult(const Plan&, const ExecOptions&)> execute;
  std::function<Plan(const Plan&, const Verdict&)> refine;
  /// Called once per judged node; `round` is 1-based and `history` holds the
  /// verdicts of earlier rounds, so callers can route to a stronger judge.
  std::function<Verdict(const JudgeRequest&, int round, const std::vector<Verdict>& history)> judge;
};

struct RoundRecord {
  int round{1};
  Verdict verdict;
  TraceStatus exec_status{TraceStatus::succeeded};
  std::vector<std::string> executed;  // node ids that ran this round
  json plan;
};

struct ReflectOutcome {
  TraceStatus status{TraceStatus::succeeded};
  std::optional<json> final_value;  // only ever a conformant value
  Plan plan;                        // plan of the last round
  ExecutionTrace trace;             // steps of every round; outputs of the last
  std::vector<Verdict> history;
  std::vector<RoundRecord> rounds;
};

json reflection_json(const ReflectOutcome& o);

ReflectOutcome reflect_loop(const Plan& plan, const std::string& instruction, const ToolRegistry& registry,
                            const ReflectionPolicy& policy, const ReflectHooks& hooks);

}  // namespace orion
