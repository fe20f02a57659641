#include "orion/reflector.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "orion/util.hpp"

namespace orion {

std::vector<Violation> check_conformance(const json& value, const json& schema) {
  if (!schema.is_object() || schema.value("type", json()) != "object") {
    throw Error(Errc::schema_shape, "conformance schemas must be object-rooted");
  }
  return validate_schema(value, schema);
}

const json* schema_at_path(const json& schema, std::string_view path) {
  auto steps = parse_path(path);
  if (!steps) return nullptr;
  const json* s = &schema;
  for (const auto& step : *steps) {
    if (!s->is_object()) return nullptr;
    if (const auto* key = std::get_if<std::string>(&step)) {
      auto props = s->find("properties");
      if (props == s->end() || !props->is_object() || !props->contains(*key)) return nullptr;
      s = &(*props)[*key];
    } else {
      auto items = s->find("items");
      if (items == s->end()) return nullptr;
      s = &*items;
    }
  }
  return s;
}

json to_json(const JudgeRequest& r) {
  json arts = json::array();
  for (const auto& a : r.artifacts) arts.push_back(to_json(a));
  json j{{"instruction", r.instruction}, {"node_id", r.node_id}, {"tool", r.tool},
         {"input", r.input},             {"output", r.output},   {"artifacts", arts}};
  if (r.expect) j["expect"] = *r.expect;
  return j;
}

// ---------------------------------------------------------------- mock judge

namespace {

const std::map<std::string, std::vector<std::string>>& synonyms() {
  static const std::map<std::string, std::vector<std::string>> table{
      {"clock", {"watch"}},         {"watch", {"clock"}},
      {"car", {"vehicle", "automobile"}}, {"vehicle", {"car", "truck"}},
      {"person", {"people", "pedestrian"}}, {"people", {"person", "pedestrian"}},
      {"sign", {"signboard", "text"}},  {"phone", {"smartphone"}},
      {"cup", {"mug"}},             {"sofa", {"couch"}},
  };
  return table;
}

void collect_strings(const json& v, std::set<std::string>& tokens) {
  if (v.is_string()) {
    auto t = token_set(v.get_ref<const std::string&>());
    tokens.insert(t.begin(), t.end());
  } else if (v.is_array() || v.is_object()) {
    for (const auto& e : v) collect_strings(e, tokens);
  }
}

Verdict finalize(std::string reason, double score = 1.0) {
  Verdict v;
  v.action = VerdictAction::finalize;
  v.score = score;
  v.reason = std::move(reason);
  return v;
}

Verdict for_node(VerdictAction a, const std::string& node, std::string reason) {
  Verdict v;
  v.action = a;
  v.node_id = node;
  v.reason = std::move(reason);
  return v;
}

}  // namespace

std::optional<std::string> MockJudge::widen(const std::string& expect, const std::string& current_query) {
  std::vector<std::string> terms;
  for (const auto& t : tokenize(expect)) {
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    if (auto it = synonyms().find(t); it != synonyms().end()) {
      for (const auto& s : it->second) {
        if (std::find(terms.begin(), terms.end(), s) == terms.end()) terms.push_back(s);
      }
    }
  }
  std::string widened;
  for (const auto& t : terms) widened += (widened.empty() ? "" : ", ") + t;
  if (terms.size() > tokenize(expect).size() && token_set(widened) != token_set(current_query)) return widened;
  if (!token_set(current_query).count("objects")) return std::string("objects");
  return std::nullopt;
}

Verdict MockJudge::judge(const JudgeRequest& req) const {
  if (req.schema.is_object()) {
    if (auto v = validate_schema(req.output, req.schema); !v.empty()) {
      return for_node(VerdictAction::retry, req.node_id, "output violates its schema: " + describe(v));
    }
  }
  if (req.expect && !req.expect->empty()) {
    std::set<std::string> seen;
    collect_strings(req.output, seen);
    auto wanted = token_set(*req.expect);
    for (const auto& t : token_set(*req.expect)) {
      if (auto it = synonyms().find(t); it != synonyms().end()) wanted.insert(it->second.begin(), it->second.end());
    }
    if (!shares_token(wanted, seen)) {
      const std::string query = req.input.is_object() && req.input.contains("query") && req.input["query"].is_string()
                                    ? req.input["query"].get<std::string>()
                                    : std::string();
      auto widened = widen(*req.expect, query);
      if (!widened) {
        return for_node(VerdictAction::fail, req.node_id, "expected '" + *req.expect + "' and found nothing");
      }
      Verdict v = for_node(VerdictAction::refine, req.node_id, "expected '" + *req.expect + "' in the output");
      v.hint = json{{"widen_query", *widened}};
      return v;
    }
  }
  return finalize("output conforms and meets expectations");
}

// ---------------------------------------------------------------- model judge

Verdict ModelJudge::judge(const JudgeRequest& req) const {
  static const std::string kPrompt =
      "You review one step of a visual agent. Reply with a JSON verdict: {\"action\": "
      "\"finalize\"|\"retry\"|\"refine\"|\"fail\", \"node_id\"?, \"hint\"?, \"score\"?, \"reason\"}.";
  std::string text;
  try {
    text = fn_(kPrompt, to_json(req));
  } catch (const std::exception& e) {
    throw Error(Errc::judge_unavailable, name_ + " judge failed: " + e.what());
  }
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(Errc::judge_unavailable, name_ + " judge reply is not a verdict: " + text);
  }
  try {
    Verdict v = verdict_from_json(json::parse(text.substr(open, close - open + 1)));
    if ((v.action == VerdictAction::retry || v.action == VerdictAction::refine) && !v.node_id) v.node_id = req.node_id;
    if (v.action == VerdictAction::refine && !v.hint) throw Error(Errc::invalid_value, "refine without hint");
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::judge_unavailable, name_ + " judge reply is not a verdict: " + text);
  }
}

// ---------------------------------------------------------------- loop

json reflection_json(const ReflectOutcome& o) {
  json rounds = json::array();
  for (const auto& r : o.rounds) {
    rounds.push_back({{"round", r.round},
                      {"verdict", to_json(r.verdict)},
                      {"exec_status", trace_status_name(r.exec_status)},
                      {"executed", r.executed}});
  }
  return rounds;
}

namespace {

std::optional<std::string> final_node(const Plan& p) {
  if (p.final.kind == Binding::Kind::ref) return p.final.node;
  return std::nullopt;
}

}  // namespace

ReflectOutcome reflect_loop(const Plan& initial, const std::string& instruction, const ToolRegistry& registry,
                            const ReflectionPolicy& policy, const ReflectHooks& hooks) {
  if (policy.max_rounds < 1) throw Error(Errc::invalid_value, "max_rounds must be at least 1");
  ReflectOutcome out;
  out.plan = initial;
  std::map<std::string, ToolResult> reuse;
  const auto epoch = std::chrono::steady_clock::now();

  for (int round = 1; round <= policy.max_rounds; ++round) {
    ExecOptions opts;
    opts.reuse = reuse;
    opts.round = round;
    opts.epoch = epoch;
    ExecResult run = hooks.execute(out.plan, opts);

    RoundRecord rec;
    rec.round = round;
    rec.exec_status = run.trace.status;
    rec.plan = to_json(out.plan);
    for (const auto& s : run.trace.steps) {
      if (std::find(rec.executed.begin(), rec.executed.end(), s.node_id) == rec.executed.end()) {
        rec.executed.push_back(s.node_id);
      }
      out.trace.steps.push_back(s);
    }
    out.trace.outputs = run.trace.outputs;
    out.trace.status = run.trace.status;
    out.trace.failed_node = run.trace.failed_node;
    out.trace.failed_result = run.trace.failed_result;
    out.trace.error = run.trace.error;

    // Which successful nodes to judge, in the order they are asked.
    std::vector<std::string> judged;
    std::vector<const PlanNode*> nodes;
    for (const auto& n : out.plan.nodes) nodes.push_back(&n);
    std::sort(nodes.begin(), nodes.end(), [](const auto* a, const auto* b) { return natural_less(a->id, b->id); });
    const auto fin = final_node(out.plan);
    for (const auto* n : nodes) {
      if (!run.trace.outputs.count(n->id)) continue;
      if (policy.judge_on == JudgeOn::every_node || n->expect) {
        if (!fin || n->id != *fin) judged.push_back(n->id);
      }
    }
    if (run.trace.status == TraceStatus::succeeded && fin && run.trace.outputs.count(*fin)) judged.push_back(*fin);

    auto ask = [&](const std::string& id) {
      const PlanNode* n = out.plan.node(id);
      const auto& result = run.trace.outputs.at(id);
      JudgeRequest req;
      req.instruction = instruction;
      req.node_id = id;
      req.tool = n->tool;
      req.expect = n->expect;
      for (const auto& [param, b] : n->inputs) {
        try {
          req.input[param] = resolve_binding(b, run.trace.outputs);
        } catch (const Error&) {
        }
      }
      req.output = result.output;
      req.artifacts = result.artifacts;
      if (const auto* d = registry.find(n->tool)) req.schema = d->output_schema;
      Verdict v = hooks.judge(req, round, out.history);
      if (v.action == VerdictAction::finalize && v.score && *v.score < 0.5) {
        v = for_node(VerdictAction::retry, id, "judge score below 0.5: " + v.reason);
      }
      if ((v.action == VerdictAction::retry || v.action == VerdictAction::refine) && !v.node_id) v.node_id = id;
      return v;
    };

    Verdict verdict = finalize("all judged outputs accepted");
    bool decided = false;
    if (run.trace.status != TraceStatus::succeeded && run.trace.failed_node && run.trace.failed_result &&
        run.trace.failed_result->retryable()) {
      verdict = for_node(VerdictAction::retry, *run.trace.failed_node, "node failed: " + run.trace.error);
      decided = true;
    }
    if (!decided) {
      try {
        for (const auto& id : judged) {
          Verdict v = ask(id);
          if (v.action != VerdictAction::finalize) {
            verdict = v;
            decided = true;
            break;
          }
        }
      } catch (const Error& e) {
        verdict = Verdict{VerdictAction::fail, std::nullopt, std::nullopt, std::nullopt,
                          std::string(errc_name(e.code())) + ": " + e.what()};
        decided = true;
      }
    }
    if (!decided && run.trace.status != TraceStatus::succeeded) {
      verdict = Verdict{VerdictAction::fail, run.trace.failed_node, std::nullopt, std::nullopt,
                        "execution failed: " + run.trace.error};
      decided = true;
    }

    // The delivered value must conform to whatever the final node's schema says about it.
    std::optional<json> value;
    if (run.trace.status == TraceStatus::succeeded && run.final_value) {
      bool conformant = true;
      if (fin) {
        const auto* d = registry.find(out.plan.node(*fin)->tool);
        const json* sub = d ? schema_at_path(d->output_schema, out.plan.final.path) : nullptr;
        conformant = !sub || validate_schema(*run.final_value, *sub).empty();
      }
      if (conformant) {
        value = run.final_value;
      } else if (verdict.action == VerdictAction::finalize) {
        verdict = for_node(VerdictAction::retry, *fin, "final value violates its schema");
      }
    }

    if (verdict.action != VerdictAction::finalize && verdict.action != VerdictAction::fail &&
        round == policy.max_rounds) {
      verdict = Verdict{VerdictAction::fail, verdict.node_id, std::nullopt, std::nullopt, "budget_exhausted"};
    }
    rec.verdict = verdict;
    out.history.push_back(verdict);
    out.rounds.push_back(rec);

    if (verdict.action == VerdictAction::finalize) {
      out.status = TraceStatus::succeeded;
      out.final_value = value;
      out.trace.status = TraceStatus::succeeded;
      return out;
    }
    if (verdict.action == VerdictAction::fail) {
      out.status = verdict.reason == "budget_exhausted" ? TraceStatus::budget_exhausted : TraceStatus::failed;
      out.trace.status = out.status;
      out.final_value = value;  // best effort, conformant or absent
      return out;
    }

    // Next round re-runs the named node and everything downstream of it.
    Plan next = out.plan;
    if (verdict.action == VerdictAction::refine) {
      try {
        next = hooks.refine(out.plan, verdict);
      } catch (const Error& e) {
        Verdict failed{VerdictAction::fail, verdict.node_id, std::nullopt, std::nullopt,
                       std::string(errc_name(e.code())) + ": " + e.what()};
        out.history.back() = failed;
        out.rounds.back().verdict = failed;
        out.status = TraceStatus::failed;
        out.trace.status = TraceStatus::failed;
        out.final_value = value;
        return out;
      }
    }
    const auto stale = downstream_closure(next, *verdict.node_id);
    reuse.clear();
    for (const auto& [id, r] : run.trace.outputs) {
      if (!stale.count(id) && next.node(id)) reuse[id] = r;
    }
    out.plan = std::move(next);
  }
  return out;  // unreachable: the last round always returns
}

}  // namespace orion
