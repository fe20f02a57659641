#pragma once

// One completion request end to end: context retrieval, planning, the
// reflection loop, answer composition and trace persistence. Transport-free;
// the HTTP layer and the CLI both drive this.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "orion/artifact_store.hpp"
#include "orion/executor.hpp"
#include "orion/planner.hpp"
#include "orion/reflector.hpp"
#include "orion/session.hpp"
#include "orion/structured_output.hpp"
#include "orion/tool_registry.hpp"

namespace orion {

/// Planner and judge per tier. Null pro backends count as unavailable.
struct Backends {
  std::shared_ptr<const PlannerBackend> planner_fast;
  std::shared_ptr<const PlannerBackend> planner_pro;
  std::shared_ptr<const Judge> judge_fast;
  std::shared_ptr<const Judge> judge_pro;

  /// Rule planner and mock judge on the fast tier, no pro tier.
  static Backends defaults();
};

struct AgentConfig {
  ExecPolicy exec;
  ReflectionPolicy reflect;
  ContextBudget budget;
  RetrievalWeights weights;
  int max_repairs{2};
  std::filesystem::path trace_dir;
};

struct AgentRequest {
  ModelId model;
  std::vector<Message> messages;
  std::optional<OutputSchema> schema;
  std::optional<std::string> session_id;
};

struct AgentResponse {
  std::string content;
  bool succeeded{false};
  std::string trace_id;
  json trace;
  std::optional<json> structured;
  std::string session_id;
};

/// One routing event: which backend served a stage and why.
struct RouteEvent {
  std::string stage;  // planner | judge
  int round{0};
  std::string tier;   // fast | pro
  std::string backend;
  std::string event;  // selected | escalated | fallback
  std::string reason;
};

json to_json(const RouteEvent& e);

/// Rendering of a final value as chat text.
std::string render_answer(const json& value);

class Agent {
 public:
  Agent(std::shared_ptr<const ToolRegistry> registry, std::shared_ptr<ArtifactStore> store,
        std::shared_ptr<SessionStore> sessions, Backends backends, AgentConfig cfg);

  /// Throws NotFound for unknown file ids, InvalidValue for malformed requests
  /// and StructuredOutputError when structured mode cannot be satisfied.
  AgentResponse complete(const AgentRequest& req);

  std::optional<json> load_trace(const std::string& trace_id) const;

  const ToolRegistry& registry() const noexcept { return *registry_; }
  ArtifactStore& store() const noexcept { return *store_; }
  const AgentConfig& config() const noexcept { return cfg_; }

 private:
  std::string fresh_id(const std::string& prefix);
  std::mutex& session_lock(const std::string& id);
  void persist_trace(const std::string& id, const json& trace) const;

  std::shared_ptr<const ToolRegistry> registry_;
  std::shared_ptr<ArtifactStore> store_;
  std::shared_ptr<SessionStore> sessions_;
  Backends backends_;
  AgentConfig cfg_;
  std::mutex mu_;
  std::mt19937_64 rng_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
};

}  // namespace orion
