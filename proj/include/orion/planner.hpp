#pragma once

// Plans are DAGs of tool calls whose inputs are literals, uploaded files or
// selections over upstream outputs. Plans serialize as
//   {"nodes": [{"id", "tool", "inputs": {param: binding}, "expect"?}],
//    "final": binding, "rationale": "..."}
// with bindings {"lit": v} | {"ref": node, "path": "a.b[0]"} | {"file": "file_..."}.

#include <functional>
#include <memory>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "orion/core.hpp"
#include "orion/tool_registry.hpp"
#include "orion/verdict.hpp"

namespace orion {

struct Binding {
  enum class Kind { lit, ref, file };
  Kind kind{Kind::lit};
  json value;           // lit
  std::string node;     // ref
  std::string path;     // ref
  std::string file_id;  // file

  static Binding lit(json v);
  static Binding ref(std::string node, std::string path);
  static Binding file(std::string file_id);
  friend bool operator==(const Binding&, const Binding&) = default;
};

json to_json(const Binding& b);
Binding binding_from_json(const json& j);

struct PlanNode {
  std::string id;
  std::string tool;
  std::map<std::string, Binding> inputs;
  std::optional<std::string> expect;
  friend bool operator==(const PlanNode&, const PlanNode&) = default;
};

struct Plan {
  std::vector<PlanNode> nodes;
  Binding final;
  std::string rationale;

  const PlanNode* node(std::string_view id) const;
  friend bool operator==(const Plan&, const Plan&) = default;
};

json to_json(const Plan& p);
/// Throws InvalidPlan on shape errors.
Plan plan_from_json(const json& j);

/// "n2" < "n10": digit runs compare numerically.
bool natural_less(std::string_view a, std::string_view b);

/// Node ids a node reads from, deduplicated, natural order.
std::vector<std::string> dependencies(const PlanNode& n);
/// The node itself plus everything reachable downstream of it.
std::set<std::string> downstream_closure(const Plan& p, const std::string& id);

struct PlanError {
  std::string kind;  // duplicate_id | unknown_tool | missing_param | unresolved_ref | cycle | lit_schema | empty_path | bad_file_id
  std::string node;  // offending node, empty for plan-level problems
  std::string detail;
  std::vector<std::string> cycle;  // populated for kind == "cycle"
};

json to_json(const PlanError& e);

std::vector<PlanError> validate_plan(const Plan& p, const ToolRegistry& registry);

/// What the planner sees besides the instruction text.
struct PlanRequest {
  std::string instruction;
  std::vector<std::string> files;          // attachments of the current message, in order
  std::vector<std::string> context_files;  // artifacts of retrieved turns, most recent first
  Mode mode{Mode::auto_};
};

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  virtual Plan propose(const PlanRequest& req, const ToolRegistry& registry) const = 0;
  virtual std::string name() const = 0;
};

/// Regex → plan template table. Each regex is matched case-insensitively
/// against the start of the instruction; the longest match wins, earlier
/// entries win ties. Template strings may use:
///   "$N" / "${N}"  capture group N (trimmed), interpolated anywhere in a string
///   "${N:int}"     whole-string capture converted to an integer
///   "${N:ms}"      whole-string capture parsed as a timecode, in milliseconds
///   {"file": "$fileK"}  K-th attached file, falling back to context artifacts
/// Template node ids are renumbered n1..nk in template order.
class RulePlanner final : public PlannerBackend {
 public:
  struct Pattern {
    std::string name;
    std::string regex;
    json plan;  // template
    std::regex compiled;
  };

  static RulePlanner from_json(const json& table);
  /// The table shipped in config/patterns.json.
  static const json& builtin_table();
  static RulePlanner builtin() { return from_json(builtin_table()); }

  Plan propose(const PlanRequest& req, const ToolRegistry& registry) const override;
  std::string name() const override { return "rules"; }

  /// Name of the pattern that would handle `instruction`, if any.
  std::optional<std::string> match(std::string_view instruction) const;
  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }

 private:
  std::vector<Pattern> patterns_;
};

/// (system prompt, instruction, tool catalog JSON) → plan JSON text.
using ModelPlannerFn =
    std::function<std::string(const std::string& system_prompt, const std::string& instruction, const json& catalog)>;

/// Adapter seam for model-backed planning. Unparseable replies surface as
/// BackendUnavailable carrying the raw text.
class ModelPlanner final : public PlannerBackend {
 public:
  ModelPlanner(ModelPlannerFn fn, std::string name = "model") : fn_(std::move(fn)), name_(std::move(name)) {}
  Plan propose(const PlanRequest& req, const ToolRegistry& registry) const override;
  std::string name() const override { return name_; }

  static std::string system_prompt(const PlanRequest& req);

 private:
  ModelPlannerFn fn_;
  std::string name_;
};

/// Delegates to the backend and rejects anything that fails validate_plan.
/// The registry must be frozen.
Plan make_plan(const PlannerBackend& backend, const PlanRequest& req, const ToolRegistry& registry);

/// Applies a refine verdict's hint. Inserted nodes get fresh ids n{k+1}.
Plan refine_plan(const Plan& p, const Verdict& v, const ToolRegistry& registry);

}  // namespace orion
