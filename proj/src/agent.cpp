#include "orion/agent.hpp"

#include <algorithm>
#include <cstdio>

#include "orion/fixtures.hpp"
#include "orion/util.hpp"

namespace orion {

namespace fs = std::filesystem;

Backends Backends::defaults() {
  Backends b;
  b.planner_fast = std::make_shared<RulePlanner>(RulePlanner::builtin());
  b.judge_fast = std::make_shared<MockJudge>();
  return b;
}

json to_json(const RouteEvent& e) {
  return json{{"stage", e.stage},     {"round", e.round}, {"tier", e.tier},
              {"backend", e.backend}, {"event", e.event}, {"reason", e.reason}};
}

// ---------------------------------------------------------------- rendering

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string box_text(const json& b) {
  if (b.is_object()) {
    return "x=" + num(b.value("x", 0.0)) + ", y=" + num(b.value("y", 0.0)) + ", w=" + num(b.value("w", 0.0)) +
           ", h=" + num(b.value("h", 0.0));
  }
  return b.dump();
}

bool has_strings(const json& v, std::initializer_list<const char*> keys) {
  if (!v.is_object()) return false;
  for (const auto* k : keys) {
    if (!v.contains(k) || !v[k].is_string()) return false;
  }
  return true;
}

std::optional<std::string> render_item(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (!v.is_object()) return std::nullopt;
  if (has_strings(v, {"start", "end", "url"})) {
    return v["start"].get<std::string>() + " - " + v["end"].get<std::string>() + ": " + v["url"].get<std::string>();
  }
  if (has_strings(v, {"id", "url"})) {
    return "[" + v.value("modality", std::string("artifact")) + " " + v["id"].get<std::string>() + "](" +
           v["url"].get<std::string>() + ")";
  }
  if (has_strings(v, {"label"}) && v.contains("bbox")) {
    std::string s = v["label"].get<std::string>();
    if (v.contains("confidence") && v["confidence"].is_number()) s += " (" + num(v["confidence"].get<double>()) + ")";
    return s + " at " + box_text(v["bbox"]);
  }
  if (has_strings(v, {"kind"}) && v.contains("bbox")) {
    std::string s = v["kind"].get<std::string>();
    if (v.contains("text") && v["text"].is_string()) s += " \"" + v["text"].get<std::string>() + "\"";
    return s + " at " + box_text(v["bbox"]);
  }
  if (has_strings(v, {"name", "value"})) {
    std::string s = v["name"].get<std::string>() + ": " + v["value"].get<std::string>();
    if (v.contains("page")) s += " (page " + v["page"].dump() + ")";
    return s;
  }
  if (v.size() == 2 && v.contains("x") && v.contains("y") && v["x"].is_number() && v["y"].is_number()) {
    return "(" + num(v["x"].get<double>()) + ", " + num(v["y"].get<double>()) + ")";
  }
  if (v.contains("artifact") && v["artifact"].is_object()) return render_item(v["artifact"]);
  return std::nullopt;
}

}  // namespace

std::string render_answer(const json& value) {
  if (auto s = render_item(value)) return *s;
  if (value.is_array()) {
    if (value.empty()) return "No results.";
    std::string out;
    bool simple = true;
    for (const auto& e : value) {
      auto s = render_item(e);
      if (!s) {
        simple = false;
        break;
      }
      out += (out.empty() ? "- " : "\n- ") + *s;
    }
    if (simple) return out;
  }
  if (value.is_null()) return "";
  return "```json\n" + value.dump(2) + "\n```";
}

// ---------------------------------------------------------------- agent

Agent::Agent(std::shared_ptr<const ToolRegistry> registry, std::shared_ptr<ArtifactStore> store,
             std::shared_ptr<SessionStore> sessions, Backends backends, AgentConfig cfg)
    : registry_(std::move(registry)),
      store_(std::move(store)),
      sessions_(std::move(sessions)),
      backends_(std::move(backends)),
      cfg_(std::move(cfg)),
      rng_(std::random_device{}()) {
  if (!backends_.planner_fast || !backends_.judge_fast) {
    throw Error(Errc::invalid_value, "fast-tier planner and judge are required");
  }
  if (!cfg_.trace_dir.empty()) fs::create_directories(cfg_.trace_dir);
}

std::string Agent::fresh_id(const std::string& prefix) {
  std::lock_guard lock(mu_);
  return prefix + random_hex(rng_, 24);
}

std::mutex& Agent::session_lock(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& m = session_locks_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void Agent::persist_trace(const std::string& id, const json& trace) const {
  if (cfg_.trace_dir.empty()) return;
  write_file_atomic(cfg_.trace_dir / (id + ".json"), trace.dump(2));
}

std::optional<json> Agent::load_trace(const std::string& trace_id) const {
  if (cfg_.trace_dir.empty() || trace_id.empty() ||
      !std::all_of(trace_id.begin(), trace_id.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; })) {
    return std::nullopt;
  }
  const auto p = cfg_.trace_dir / (trace_id + ".json");
  if (!fs::exists(p)) return std::nullopt;
  return json::parse(read_file(p));
}

namespace {

Modality modality_for_mime(std::string_view mime) {
  if (mime == fixtures::kSceneMime) return Modality::image;
  if (mime == fixtures::kDocumentMime) return Modality::document;
  if (mime == fixtures::kVideoMime) return Modality::video;
  if (mime == fixtures::kMaskMime) return Modality::mask;
  if (mime.rfind("image/", 0) == 0) return Modality::image;
  if (mime.rfind("video/", 0) == 0) return Modality::video;
  if (mime.rfind("audio/", 0) == 0) return Modality::audio;
  if (mime == "application/pdf") return Modality::document;
  return Modality::text;
}

std::vector<std::string> message_files(const Message& m) {
  std::vector<std::string> ids = m.file_ids();
  for (const auto& p : m.parts) {
    if (p.kind == PartKind::artifact && p.artifact) ids.push_back(p.artifact->id);
  }
  return ids;
}

void push_unique(std::vector<std::string>& v, const std::string& s) {
  if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

}  // namespace

AgentResponse Agent::complete(const AgentRequest& req) {
  if (req.messages.empty()) throw Error(Errc::invalid_value, "messages must not be empty");
  for (const auto& m : req.messages) validate_message(m);
  auto last_user = std::find_if(req.messages.rbegin(), req.messages.rend(),
                                [](const Message& m) { return m.role == Role::user; });
  if (last_user == req.messages.rend()) throw Error(Errc::invalid_value, "messages need a user turn");
  const Message& instruction = *last_user;

  PlanRequest preq;
  preq.instruction = instruction.text();
  preq.mode = req.model.mode;
  for (const auto& id : message_files(instruction)) {
    if (!store_->contains(id)) throw Error(Errc::not_found, "unknown file '" + id + "'");
    push_unique(preq.files, id);
  }
  for (auto it = last_user + 1; it != req.messages.rend(); ++it) {
    for (const auto& id : message_files(*it)) {
      if (store_->contains(id)) push_unique(preq.context_files, id);
    }
  }

  std::unique_lock<std::mutex> session_guard;
  std::vector<int> context_turns;
  if (req.session_id) {
    session_guard = std::unique_lock(session_lock(*req.session_id));
    if (!sessions_) throw Error(Errc::unknown_session, "sessions are not enabled");
    if (!sessions_->exists(*req.session_id)) sessions_->create(*req.session_id);
    const auto session = sessions_->load(*req.session_id);
    auto turns = retrieve_context(session, instruction, cfg_.budget, cfg_.weights);
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
      context_turns.push_back(it->index);
      for (const auto& a : it->artifacts) {
        if (store_->contains(a.id)) push_unique(preq.context_files, a.id);
      }
    }
    std::sort(context_turns.begin(), context_turns.end());
  }

  const std::string trace_id = fresh_id("trace_");
  const bool auto_mode = req.model.mode == Mode::auto_;
  std::vector<RouteEvent> routing;
  std::mutex routing_mu;

  json trace{{"id", trace_id},
             {"object", "trace"},
             {"created", store_->now()},
             {"model", req.model.render()},
             {"mode", req.schema ? "structured" : "chat"},
             {"instruction", preq.instruction},
             {"files", preq.files},
             {"context_files", preq.context_files},
             {"context_turns", context_turns}};
  if (req.session_id) trace["session_id"] = *req.session_id;

  AgentResponse resp;
  resp.trace_id = trace_id;
  if (req.session_id) resp.session_id = *req.session_id;

  auto finish = [&](const std::vector<ArtifactRef>& produced) {
    json route = json::array();
    for (const auto& e : routing) route.push_back(to_json(e));
    trace["routing"] = route;
    trace["content"] = resp.content;
    persist_trace(trace_id, trace);
    resp.trace = trace;
    if (req.session_id) {
      std::vector<TurnArtifact> arts;
      auto used = preq.files;
      // context files the plan consumed travel with this turn too
      if (trace.contains("plan")) {
        for (const auto& n : trace["plan"]["nodes"]) {
          for (const auto& [k, b] : n["inputs"].items()) {
            if (b.contains("file") && store_->contains(b["file"].get<std::string>())) push_unique(used, b["file"].get<std::string>());
          }
        }
      }
      for (const auto& id : used) arts.push_back({id, modality_for_mime(store_->stat(id).mime)});
      for (const auto& a : produced) {
        if (std::none_of(arts.begin(), arts.end(), [&](const TurnArtifact& t) { return t.id == a.id; })) {
          arts.push_back({a.id, a.modality});
        }
      }
      Message assistant{Role::assistant, {ContentPart::make_text(resp.content)}};
      sessions_->append_turn(*req.session_id, instruction, assistant, trace_id, std::move(arts));
    }
  };

  // ---- plan
  Plan plan;
  try {
    routing.push_back({"planner", 0, "fast", backends_.planner_fast->name(), "selected", ""});
    try {
      plan = make_plan(*backends_.planner_fast, preq, *registry_);
    } catch (const Error& first) {
      if (!auto_mode) throw;
      if (!backends_.planner_pro) {
        routing.push_back({"planner", 0, "pro", "", "fallback", "pro tier unavailable"});
        throw;
      }
      routing.push_back({"planner", 0, "pro", backends_.planner_pro->name(), "escalated", first.what()});
      try {
        plan = make_plan(*backends_.planner_pro, preq, *registry_);
      } catch (const Error& e) {
        routing.push_back({"planner", 0, "fast", backends_.planner_fast->name(), "fallback", e.what()});
        throw first;
      }
    }
  } catch (const Error& e) {
    trace["status"] = "failed";
    trace["error"] = std::string(errc_name(e.code())) + ": " + e.what();
    resp.succeeded = false;
    resp.content = std::string("I could not plan this request: ") + e.what();
    finish({});
    if (req.schema) throw StructuredOutputError(std::string("planning failed: ") + e.what(), {}, 0);
    return resp;
  }
  trace["initial_plan"] = to_json(plan);

  // ---- execute and reflect
  ToolContext ctx{store_};
  ReflectHooks hooks;
  hooks.execute = [&](const Plan& p, const ExecOptions& opts) { return execute(p, cfg_.exec, *registry_, ctx, opts); };
  hooks.refine = [&](const Plan& p, const Verdict& v) { return refine_plan(p, v, *registry_); };
  hooks.judge = [&](const JudgeRequest& jr, int round, const std::vector<Verdict>& history) {
    const bool escalate = auto_mode && std::any_of(history.begin(), history.end(), [](const Verdict& v) {
                            return v.action != VerdictAction::finalize;
                          });
    auto note = [&](RouteEvent e) {
      std::lock_guard lock(routing_mu);
      const bool seen = std::any_of(routing.begin(), routing.end(), [&](const RouteEvent& r) {
        return r.stage == e.stage && r.round == e.round && r.event == e.event && r.tier == e.tier;
      });
      if (!seen) routing.push_back(std::move(e));
    };
    if (escalate) {
      if (backends_.judge_pro) {
        try {
          Verdict v = backends_.judge_pro->judge(jr);
          note({"judge", round, "pro", backends_.judge_pro->name(), "escalated", "earlier round did not finalize"});
          return v;
        } catch (const Error& e) {
          if (e.code() != Errc::judge_unavailable) throw;
          note({"judge", round, "fast", backends_.judge_fast->name(), "fallback", e.what()});
        }
      } else {
        note({"judge", round, "fast", backends_.judge_fast->name(), "fallback", "pro tier unavailable"});
      }
    } else {
      note({"judge", round, "fast", backends_.judge_fast->name(), "selected", ""});
    }
    return backends_.judge_fast->judge(jr);
  };

  const ReflectOutcome outcome = reflect_loop(plan, preq.instruction, *registry_, cfg_.reflect, hooks);
  const json exec = to_json(outcome.trace);
  trace["plan"] = to_json(outcome.plan);
  trace["status"] = trace_status_name(outcome.status);
  trace["steps"] = exec["steps"];
  trace["outputs"] = exec["outputs"];
  if (exec.contains("failed_node")) trace["failed_node"] = exec["failed_node"];
  if (exec.contains("error")) trace["error"] = exec["error"];
  trace["reflection"] = reflection_json(outcome);
  if (outcome.final_value) trace["final_value"] = *outcome.final_value;

  std::vector<ArtifactRef> produced;
  std::vector<std::string> order;
  for (const auto& [id, r] : outcome.trace.outputs) {
    order.push_back(id);
    for (const auto& a : r.artifacts) produced.push_back(a);
  }
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });

  const bool ok = outcome.status == TraceStatus::succeeded && outcome.final_value.has_value();
  const std::string reason = outcome.history.empty() ? std::string("no verdict") : outcome.history.back().reason;

  if (!req.schema) {
    resp.succeeded = ok;
    resp.content = ok ? render_answer(*outcome.final_value)
                      : "I could not complete this request: " + reason + ".";
    finish(produced);
    return resp;
  }

  if (!ok) {
    resp.succeeded = false;
    resp.content = "I could not complete this request: " + reason + ".";
    finish(produced);
    throw StructuredOutputError("agent run did not finish: " + reason, {}, 0);
  }

  // Final node first, then the others newest to oldest.
  std::vector<json> node_outputs;
  if (outcome.plan.final.kind == Binding::Kind::ref && outcome.trace.outputs.count(outcome.plan.final.node)) {
    node_outputs.push_back(outcome.trace.outputs.at(outcome.plan.final.node).output);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (outcome.plan.final.kind == Binding::Kind::ref && *it == outcome.plan.final.node) continue;
    node_outputs.push_back(outcome.trace.outputs.at(*it).output);
  }
  int calls = 0;
  try {
    auto repaired = repair_loop(
        [&](const std::string& feedback) {
          ++calls;
          return compose_structured(*req.schema, *outcome.final_value, node_outputs, feedback);
        },
        *req.schema, cfg_.max_repairs);
    trace["structured"] = {{"calls", repaired.calls}, {"status", "conformant"}};
    resp.structured = repaired.value;
    resp.content = repaired.value.dump();
    resp.succeeded = true;
    finish(produced);
    return resp;
  } catch (const StructuredOutputError& e) {
    trace["structured"] = {{"calls", calls}, {"status", "failed"}, {"violations", violations_to_json(e.violations())}};
    resp.succeeded = false;
    resp.content = e.what();
    finish(produced);
    throw;
  }
}

}  // namespace orion
