#include "orion/executor.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include "orion/schema.hpp"

namespace orion {

std::string_view trace_status_name(TraceStatus s) noexcept {
  switch (s) {
    case TraceStatus::succeeded: return "succeeded";
    case TraceStatus::failed: return "failed";
    case TraceStatus::budget_exhausted: return "budget_exhausted";
  }
  return "failed";
}

json to_json(const StepRecord& s) {
  return json{{"node_id", s.node_id},   {"tool", s.tool},         {"attempt", s.attempt}, {"round", s.round},
              {"started_us", s.started_us}, {"ended_us", s.ended_us}, {"result", to_json(s.result)}};
}

json to_json(const ExecutionTrace& t) {
  json steps = json::array();
  for (const auto& s : t.steps) steps.push_back(to_json(s));
  json outputs = json::object();
  for (const auto& [id, r] : t.outputs) outputs[id] = to_json(r);
  json j{{"status", trace_status_name(t.status)}, {"steps", steps}, {"outputs", outputs}};
  if (t.failed_node) j["failed_node"] = *t.failed_node;
  if (t.failed_result) j["failed_result"] = to_json(*t.failed_result);
  if (!t.error.empty()) j["error"] = t.error;
  return j;
}

json resolve_binding(const Binding& b, const std::map<std::string, ToolResult>& outputs) {
  switch (b.kind) {
    case Binding::Kind::lit: return b.value;
    case Binding::Kind::file: return json{{"file_id", b.file_id}};
    case Binding::Kind::ref: {
      auto it = outputs.find(b.node);
      if (it == outputs.end() || !it->second.ok()) {
        throw Error(Errc::unready_ref, "node '" + b.node + "' has no successful output yet");
      }
      const json* v = select_path(it->second.output, b.path);
      if (!v) throw Error(Errc::path_miss, "'" + b.path + "' not found in output of node '" + b.node + "'");
      return *v;
    }
  }
  return json();
}

namespace {

enum class NodeState { pending, running, done, failed };

struct Completion {
  std::string node_id;
  int attempt;
  std::int64_t started_us;
  std::int64_t ended_us;
  ToolResult result;
};

}  // namespace

ExecResult execute(const Plan& plan, const ExecPolicy& policy, const ToolRegistry& registry, const ToolContext& ctx,
                   const ExecOptions& opts) {
  if (policy.max_parallel < 1 || policy.max_attempts < 1) {
    throw Error(Errc::invalid_value, "max_parallel and max_attempts must be at least 1");
  }
  const auto epoch = opts.epoch.value_or(std::chrono::steady_clock::now());
  auto micros = [&] {
    return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - epoch).count();
  };

  ExecResult res;
  ExecutionTrace& trace = res.trace;

  std::vector<const PlanNode*> order;
  for (const auto& n : plan.nodes) order.push_back(&n);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return natural_less(a->id, b->id); });

  std::map<std::string, NodeState> state;
  std::map<std::string, int> attempts;
  std::map<std::string, std::vector<std::string>> deps;
  for (const auto* n : order) {
    deps[n->id] = dependencies(*n);
    if (auto it = opts.reuse.find(n->id); it != opts.reuse.end() && it->second.ok()) {
      state[n->id] = NodeState::done;
      trace.outputs[n->id] = it->second;
    } else {
      state[n->id] = NodeState::pending;
    }
  }

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Completion> completed;
  std::vector<std::thread> workers;
  int in_flight_weight = 0;
  std::map<std::string, int> weight_of;
  bool failing = false;

  auto weight = [&](const PlanNode& n) {
    const auto* d = registry.find(n.tool);
    return (d && d->cost_hint == CostHint::gpu) ? std::min(2, policy.max_parallel) : 1;
  };

  auto ready = [&](const PlanNode& n) {
    if (state[n.id] != NodeState::pending) return false;
    return std::all_of(deps[n.id].begin(), deps[n.id].end(),
                       [&](const std::string& d) { return state.count(d) && state[d] == NodeState::done; });
  };

  auto fail_node = [&](const std::string& id, std::string error, std::optional<ToolResult> last) {
    state[id] = NodeState::failed;
    failing = true;
    if (!trace.failed_node) {
      trace.failed_node = id;
      trace.failed_result = std::move(last);
      trace.error = std::move(error);
    }
  };

  while (true) {
    // Dispatch in natural id order; stop at the first ready node that does not fit.
    if (!failing) {
      for (const auto* n : order) {
        if (!ready(*n)) continue;
        const int w = weight(*n);
        if (in_flight_weight + w > policy.max_parallel) break;

        json input = json::object();
        try {
          for (const auto& [param, b] : n->inputs) input[param] = resolve_binding(b, trace.outputs);
        } catch (const Error& e) {
          fail_node(n->id, std::string(errc_name(e.code())) + ": " + e.what(), std::nullopt);
          break;
        }

        state[n->id] = NodeState::running;
        const int attempt = ++attempts[n->id];
        in_flight_weight += w;
        weight_of[n->id] = w;
        workers.emplace_back([&, id = n->id, tool = n->tool, input = std::move(input), attempt] {
          const auto started = micros();
          ToolResult r;
          try {
            r = registry.invoke(tool, input, ctx, policy.node_timeout_ms);
          } catch (const std::exception& e) {
            r.status = ToolStatus::error;
            r.failure = FailureKind::rejected;
            r.error_message = e.what();
          }
          const auto ended = std::max(micros(), started);
          std::lock_guard lock(mu);
          completed.push_back({id, attempt, started, ended, std::move(r)});
          cv.notify_all();
        });
      }
    }

    if (in_flight_weight == 0) break;

    Completion c;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !completed.empty(); });
      c = std::move(completed.front());
      completed.pop_front();
    }
    in_flight_weight -= weight_of[c.node_id];
    const PlanNode* node = plan.node(c.node_id);
    trace.steps.push_back({c.node_id, node->tool, c.attempt, opts.round, c.started_us, c.ended_us, c.result});

    if (c.result.ok()) {
      state[c.node_id] = NodeState::done;
      trace.outputs[c.node_id] = c.result;
    } else if (c.result.retryable() && c.attempt < policy.max_attempts) {
      state[c.node_id] = NodeState::pending;
    } else {
      fail_node(c.node_id, c.result.error_message, c.result);
    }
  }

  for (auto& t : workers) t.join();

  if (failing) {
    trace.status = TraceStatus::failed;
    return res;
  }
  // Anything still pending is unreachable, which only a cyclic or dangling plan allows.
  for (const auto* n : order) {
    if (state[n->id] != NodeState::done) {
      trace.status = TraceStatus::failed;
      trace.failed_node = n->id;
      trace.error = "node '" + n->id + "' never became ready";
      return res;
    }
  }
  try {
    res.final_value = resolve_binding(plan.final, trace.outputs);
    trace.status = TraceStatus::succeeded;
  } catch (const Error& e) {
    trace.status = TraceStatus::failed;
    trace.error = std::string(errc_name(e.code())) + ": " + e.what();
  }
  return res;
}

}  // namespace orion
