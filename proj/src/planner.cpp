#include "orion/planner.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "orion/builtin_config.hpp"
#include "orion/schema.hpp"

namespace orion {

// ---------------------------------------------------------------- verdicts

std::string_view action_name(VerdictAction a) noexcept {
  switch (a) {
    case VerdictAction::finalize: return "finalize";
    case VerdictAction::retry: return "retry";
    case VerdictAction::refine: return "refine";
    case VerdictAction::fail: return "fail";
  }
  return "fail";
}

VerdictAction parse_action(std::string_view s) {
  for (auto a : {VerdictAction::finalize, VerdictAction::retry, VerdictAction::refine, VerdictAction::fail}) {
    if (action_name(a) == s) return a;
  }
  throw Error(Errc::invalid_value, "unknown verdict action '" + std::string(s) + "'");
}

json to_json(const Verdict& v) {
  json j{{"action", action_name(v.action)}, {"reason", v.reason}};
  if (v.node_id) j["node_id"] = *v.node_id;
  if (v.hint) j["hint"] = *v.hint;
  if (v.score) j["score"] = *v.score;
  return j;
}

Verdict verdict_from_json(const json& j) {
  Verdict v;
  v.action = parse_action(j.at("action").get<std::string>());
  v.reason = j.value("reason", std::string());
  if (j.contains("node_id")) v.node_id = j["node_id"].get<std::string>();
  if (j.contains("hint")) v.hint = j["hint"];
  if (j.contains("score")) v.score = j["score"].get<double>();
  return v;
}

// ---------------------------------------------------------------- bindings and plans

Binding Binding::lit(json v) {
  Binding b;
  b.kind = Kind::lit;
  b.value = std::move(v);
  return b;
}

Binding Binding::ref(std::string node, std::string path) {
  Binding b;
  b.kind = Kind::ref;
  b.node = std::move(node);
  b.path = std::move(path);
  return b;
}

Binding Binding::file(std::string file_id) {
  Binding b;
  b.kind = Kind::file;
  b.file_id = std::move(file_id);
  return b;
}

json to_json(const Binding& b) {
  switch (b.kind) {
    case Binding::Kind::lit: return json{{"lit", b.value}};
    case Binding::Kind::ref: return json{{"ref", b.node}, {"path", b.path}};
    case Binding::Kind::file: return json{{"file", b.file_id}};
  }
  return json();
}

Binding binding_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_plan, "binding must be an object");
  if (j.contains("lit")) return Binding::lit(j["lit"]);
  if (j.contains("ref")) {
    if (!j["ref"].is_string()) throw Error(Errc::invalid_plan, "ref must name a node");
    const auto path = j.value("path", json(""));
    if (!path.is_string()) throw Error(Errc::invalid_plan, "ref path must be a string");
    return Binding::ref(j["ref"].get<std::string>(), path.get<std::string>());
  }
  if (j.contains("file")) {
    if (!j["file"].is_string()) throw Error(Errc::invalid_plan, "file binding must be a file id");
    return Binding::file(j["file"].get<std::string>());
  }
  throw Error(Errc::invalid_plan, "binding needs one of lit, ref or file: " + j.dump());
}

const PlanNode* Plan::node(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

json to_json(const Plan& p) {
  json nodes = json::array();
  for (const auto& n : p.nodes) {
    json inputs = json::object();
    for (const auto& [k, b] : n.inputs) inputs[k] = to_json(b);
    json jn{{"id", n.id}, {"tool", n.tool}, {"inputs", inputs}};
    if (n.expect) jn["expect"] = *n.expect;
    nodes.push_back(std::move(jn));
  }
  return json{{"nodes", nodes}, {"final", to_json(p.final)}, {"rationale", p.rationale}};
}

Plan plan_from_json(const json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array() || !j.contains("final")) {
    throw Error(Errc::invalid_plan, "plan must be an object with nodes and final");
  }
  Plan p;
  for (const auto& jn : j["nodes"]) {
    if (!jn.is_object() || !jn.contains("id") || !jn["id"].is_string() || !jn.contains("tool") ||
        !jn["tool"].is_string()) {
      throw Error(Errc::invalid_plan, "plan node needs string id and tool");
    }
    PlanNode n;
    n.id = jn["id"].get<std::string>();
    n.tool = jn["tool"].get<std::string>();
    if (jn.contains("inputs")) {
      if (!jn["inputs"].is_object()) throw Error(Errc::invalid_plan, "node '" + n.id + "' inputs must be an object");
      for (const auto& [k, b] : jn["inputs"].items()) n.inputs.emplace(k, binding_from_json(b));
    }
    if (jn.contains("expect") && jn["expect"].is_string()) n.expect = jn["expect"].get<std::string>();
    p.nodes.push_back(std::move(n));
  }
  p.final = binding_from_json(j["final"]);
  if (j.contains("rationale") && j["rationale"].is_string()) p.rationale = j["rationale"].get<std::string>();
  return p;
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, k = 0;
  while (i < a.size() && k < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[k]));
    if (da && db) {
      std::size_t ie = i, ke = k;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (ke < b.size() && std::isdigit(static_cast<unsigned char>(b[ke]))) ++ke;
      auto ra = a.substr(i, ie - i), rb = b.substr(k, ke - k);
      while (ra.size() > 1 && ra.front() == '0') ra.remove_prefix(1);
      while (rb.size() > 1 && rb.front() == '0') rb.remove_prefix(1);
      if (ra.size() != rb.size()) return ra.size() < rb.size();
      if (ra != rb) return ra < rb;
      i = ie;
      k = ke;
    } else {
      if (a[i] != b[k]) return a[i] < b[k];
      ++i;
      ++k;
    }
  }
  if ((a.size() - i) != (b.size() - k)) return (a.size() - i) < (b.size() - k);
  return a < b;
}

std::vector<std::string> dependencies(const PlanNode& n) {
  std::vector<std::string> deps;
  for (const auto& [k, b] : n.inputs) {
    if (b.kind == Binding::Kind::ref && std::find(deps.begin(), deps.end(), b.node) == deps.end()) {
      deps.push_back(b.node);
    }
  }
  std::sort(deps.begin(), deps.end(), [](const auto& x, const auto& y) { return natural_less(x, y); });
  return deps;
}

std::set<std::string> downstream_closure(const Plan& p, const std::string& id) {
  std::set<std::string> out{id};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& n : p.nodes) {
      if (out.count(n.id)) continue;
      for (const auto& d : dependencies(n)) {
        if (out.count(d)) {
          out.insert(n.id);
          grew = true;
          break;
        }
      }
    }
  }
  return out;
}

json to_json(const PlanError& e) {
  json j{{"kind", e.kind}, {"node", e.node}, {"detail", e.detail}};
  if (!e.cycle.empty()) j["cycle"] = e.cycle;
  return j;
}

namespace {

void check_binding(const Binding& b, const std::string& node, const std::set<std::string>& ids,
                   std::vector<PlanError>& errors) {
  if (b.kind == Binding::Kind::ref) {
    if (!ids.count(b.node)) errors.push_back({"unresolved_ref", node, b.node, {}});
    if (b.path.empty()) errors.push_back({"empty_path", node, "reference to '" + b.node + "' has an empty path", {}});
    else if (!parse_path(b.path)) errors.push_back({"empty_path", node, "unparseable path '" + b.path + "'", {}});
  } else if (b.kind == Binding::Kind::file && !is_file_id(b.file_id)) {
    errors.push_back({"bad_file_id", node, "'" + b.file_id + "' is not a file id", {}});
  }
}

}  // namespace

std::vector<PlanError> validate_plan(const Plan& p, const ToolRegistry& registry) {
  std::vector<PlanError> errors;
  std::set<std::string> ids;
  for (const auto& n : p.nodes) {
    if (!ids.insert(n.id).second) errors.push_back({"duplicate_id", n.id, "node id '" + n.id + "' repeats", {}});
  }

  for (const auto& n : p.nodes) {
    const auto* desc = registry.find(n.tool);
    if (!desc) {
      errors.push_back({"unknown_tool", n.id, n.tool, {}});
    } else {
      for (const auto& r : desc->input_schema.value("required", json::array())) {
        if (!n.inputs.count(r.get<std::string>())) {
          errors.push_back({"missing_param", n.id, n.tool + " requires '" + r.get<std::string>() + "'", {}});
        }
      }
      const auto& props = desc->input_schema.value("properties", json::object());
      for (const auto& [param, b] : n.inputs) {
        if (b.kind != Binding::Kind::lit || !props.contains(param)) continue;
        if (auto v = validate_schema(b.value, props[param]); !v.empty()) {
          errors.push_back({"lit_schema", n.id, param + ": " + describe(v), {}});
        }
      }
    }
    for (const auto& [param, b] : n.inputs) check_binding(b, n.id, ids, errors);
  }
  check_binding(p.final, "", ids, errors);

  // Cycle search over resolvable edges, visiting nodes in declaration order.
  std::map<std::string, int> color;  // 0 white, 1 on stack, 2 done
  std::vector<std::string> stack;
  bool found = false;
  std::function<void(const std::string&)> visit = [&](const std::string& id) {
    if (found) return;
    color[id] = 1;
    stack.push_back(id);
    const auto* n = p.node(id);
    for (const auto& d : dependencies(*n)) {
      if (!ids.count(d) || found) continue;
      if (color[d] == 1) {
        auto at = std::find(stack.begin(), stack.end(), d);
        std::vector<std::string> cycle(at, stack.end());
        std::string detail;
        for (const auto& c : cycle) detail += c + " -> ";
        errors.push_back({"cycle", d, detail + d, cycle});
        found = true;
        return;
      }
      if (color[d] == 0) visit(d);
    }
    stack.pop_back();
    color[id] = 2;
  };
  for (const auto& n : p.nodes) {
    if (!found && color[n.id] == 0) visit(n.id);
  }
  return errors;
}

// ---------------------------------------------------------------- rule planner

namespace {

constexpr const char* kLead = R"(\s*(?:please\s+|can you\s+|could you\s+)?)";

std::string trim_capture(std::string s) {
  auto is_junk = [](unsigned char c) { return std::isspace(c) || c == '?' || c == '.' || c == '!' || c == ','; };
  while (!s.empty() && is_junk(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

struct Substitution {
  const std::smatch& m;
  const PlanRequest& req;

  // Template group N lives at regex group N+1 because the pattern is wrapped.
  std::string group(std::size_t n) const {
    const std::size_t g = n + 1;
    if (g >= m.size() || !m[g].matched) return "";
    return trim_capture(m[g].str());
  }

  std::string file(std::size_t k) const {
    if (k < req.files.size()) return req.files[k];
    const std::size_t spill = k - req.files.size();
    if (spill < req.context_files.size()) return req.context_files[spill];
    throw Error(Errc::no_applicable_pattern, "instruction needs an attached file but none was provided");
  }

  std::string interpolate(const std::string& s) const {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != '$' || i + 1 >= s.size()) {
        out += s[i];
        continue;
      }
      std::size_t j = i + 1;
      const bool braced = s[j] == '{';
      if (braced) ++j;
      std::size_t k = j;
      while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
      if (k == j || (braced && (k >= s.size() || s[k] != '}'))) {
        out += s[i];
        continue;
      }
      out += group(std::stoul(s.substr(j, k - j)));
      i = braced ? k : k - 1;
    }
    return out;
  }

  json apply(const json& t) const {
    if (t.is_string()) {
      const auto& s = t.get_ref<const std::string&>();
      static const std::regex typed(R"(^\$\{(\d+):(int|ms)\}$)");
      std::smatch tm;
      if (std::regex_match(s, tm, typed)) {
        const auto value = group(std::stoul(tm[1].str()));
        if (tm[2] == "ms") return parse_timecode(value);
        try {
          return std::stoll(value);
        } catch (const std::logic_error&) {
          throw Error(Errc::no_applicable_pattern, "'" + value + "' is not an integer");
        }
      }
      return interpolate(s);
    }
    if (t.is_array()) {
      json out = json::array();
      for (const auto& e : t) out.push_back(apply(e));
      return out;
    }
    if (t.is_object()) {
      json out = json::object();
      for (const auto& [k, v] : t.items()) out[k] = apply(v);
      return out;
    }
    return t;
  }

  json apply_binding(const json& b) const {
    if (b.is_object() && b.contains("file") && b["file"].is_string()) {
      const auto& f = b["file"].get_ref<const std::string&>();
      if (f.rfind("$file", 0) == 0) return json{{"file", file(std::stoul(f.substr(5)))}};
    }
    return apply(b);
  }
};

}  // namespace

RulePlanner RulePlanner::from_json(const json& table) {
  if (!table.is_object() || !table.contains("patterns") || !table["patterns"].is_array()) {
    throw Error(Errc::invalid_value, "pattern table must be {\"patterns\": [...]}");
  }
  RulePlanner rp;
  for (const auto& jp : table["patterns"]) {
    Pattern p;
    p.name = jp.at("name").get<std::string>();
    p.regex = jp.at("regex").get<std::string>();
    p.plan = jp.at("plan");
    try {
      p.compiled = std::regex(std::string(kLead) + "(" + p.regex + ")", std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw Error(Errc::invalid_value, "pattern '" + p.name + "' has a bad regex: " + e.what());
    }
    plan_from_json(p.plan);  // shape check only; tools are checked when planning
    rp.patterns_.push_back(std::move(p));
  }
  return rp;
}

const json& RulePlanner::builtin_table() {
  static const json table = json::parse(builtin::kPatternsJson);
  return table;
}

namespace {

// Index of the longest prefix match, earliest entry on ties.
std::optional<std::pair<std::size_t, std::smatch>> best_match(const std::vector<RulePlanner::Pattern>& patterns,
                                                              const std::string& text) {
  std::optional<std::pair<std::size_t, std::smatch>> best;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    std::smatch m;
    if (!std::regex_search(text, m, patterns[i].compiled, std::regex_constants::match_continuous)) continue;
    if (!best || m.length(0) > best->second.length(0)) best.emplace(i, m);
  }
  return best;
}

}  // namespace

std::optional<std::string> RulePlanner::match(std::string_view instruction) const {
  const std::string text(instruction);
  auto best = best_match(patterns_, text);
  if (!best) return std::nullopt;
  return patterns_[best->first].name;
}

Plan RulePlanner::propose(const PlanRequest& req, const ToolRegistry&) const {
  const std::string text = req.instruction;
  auto best = best_match(patterns_, text);
  if (!best) throw Error(Errc::no_applicable_pattern, "no planning pattern matches '" + text + "'");
  const auto& pattern = patterns_[best->first];
  const Substitution sub{best->second, req};

  // Renumber template ids n1..nk in template order.
  std::map<std::string, std::string> rename;
  const auto& tnodes = pattern.plan["nodes"];
  for (std::size_t i = 0; i < tnodes.size(); ++i) {
    rename[tnodes[i]["id"].get<std::string>()] = "n" + std::to_string(i + 1);
  }
  auto rebind = [&](const json& tb) {
    json b = sub.apply_binding(tb);
    if (b.contains("ref")) {
      auto it = rename.find(b["ref"].get<std::string>());
      if (it != rename.end()) b["ref"] = it->second;
    }
    return b;
  };

  json plan{{"nodes", json::array()}, {"rationale", sub.interpolate(pattern.plan.value("rationale", std::string()))}};
  for (const auto& tn : tnodes) {
    json node{{"id", rename[tn["id"].get<std::string>()]}, {"tool", tn["tool"]}, {"inputs", json::object()}};
    const auto inputs = tn.value("inputs", json::object());
    for (const auto& [k, b] : inputs.items()) node["inputs"][k] = rebind(b);
    if (tn.contains("expect")) node["expect"] = sub.interpolate(tn["expect"].get<std::string>());
    plan["nodes"].push_back(std::move(node));
  }
  plan["final"] = rebind(pattern.plan["final"]);
  return plan_from_json(plan);
}

// ---------------------------------------------------------------- model planner

std::string ModelPlanner::system_prompt(const PlanRequest& req) {
  std::string s =
      "You are the planning stage of a visual agent. Reply with one JSON plan: "
      "{\"nodes\": [{\"id\", \"tool\", \"inputs\": {param: binding}, \"expect\"?}], \"final\": binding, "
      "\"rationale\": string}. A binding is {\"lit\": value}, {\"ref\": node_id, \"path\": selector} or "
      "{\"file\": file_id}. Use only tools from the catalog and keep the graph acyclic.";
  std::vector<std::string> files = req.files;
  files.insert(files.end(), req.context_files.begin(), req.context_files.end());
  if (!files.empty()) {
    s += " Available files:";
    for (const auto& f : files) s += " " + f;
    s += ".";
  }
  s += std::string(" Mode: ") + std::string(mode_name(req.mode)) + ".";
  return s;
}

Plan ModelPlanner::propose(const PlanRequest& req, const ToolRegistry& registry) const {
  std::string text;
  try {
    text = fn_(system_prompt(req), req.instruction, registry.catalog_json());
  } catch (const Error& e) {
    if (e.code() == Errc::backend_unavailable) throw;
    throw Error(Errc::backend_unavailable, std::string("planner backend failed: ") + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::backend_unavailable, std::string("planner backend failed: ") + e.what());
  }
  // Tolerate prose or code fences around the JSON object.
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    auto parsed = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (!parsed.is_discarded()) {
      try {
        return plan_from_json(parsed);
      } catch (const Error&) {
      }
    }
  }
  throw Error(Errc::backend_unavailable, "planner reply is not a plan: " + text);
}

Plan make_plan(const PlannerBackend& backend, const PlanRequest& req, const ToolRegistry& registry) {
  if (!registry.frozen()) throw Error(Errc::invalid_value, "registry must be frozen before planning");
  Plan p = backend.propose(req, registry);
  if (auto errors = validate_plan(p, registry); !errors.empty()) {
    json list = json::array();
    for (const auto& e : errors) list.push_back(to_json(e));
    throw Error(Errc::invalid_plan, backend.name() + " produced an invalid plan: " + list.dump());
  }
  return p;
}

// ---------------------------------------------------------------- refinement

Plan refine_plan(const Plan& p, const Verdict& v, const ToolRegistry& registry) {
  if (v.action != VerdictAction::refine) {
    throw Error(Errc::unknown_hint, std::string("cannot refine on a '") + std::string(action_name(v.action)) + "' verdict");
  }
  if (!v.node_id || !v.hint || !v.hint->is_object() || v.hint->size() != 1) {
    throw Error(Errc::unknown_hint, "refine needs a node and exactly one hint");
  }
  Plan out = p;
  auto target = std::find_if(out.nodes.begin(), out.nodes.end(), [&](const PlanNode& n) { return n.id == *v.node_id; });
  if (target == out.nodes.end()) throw Error(Errc::unknown_hint, "refine names unknown node '" + *v.node_id + "'");

  const auto hint = v.hint->begin();
  const std::string kind = hint.key();
  const json& payload = hint.value();
  if (kind == "widen_query") {
    auto q = target->inputs.find("query");
    if (q == target->inputs.end() || q->second.kind != Binding::Kind::lit || !payload.is_string()) {
      throw Error(Errc::unknown_hint, "widen_query needs a literal query on node '" + target->id + "'");
    }
    q->second = Binding::lit(payload);
  } else if (kind == "insert_before") {
    if (!payload.is_object() || !payload.contains("tool") || !payload.contains("rebind") || !payload.contains("output")) {
      throw Error(Errc::unknown_hint, "insert_before needs tool, inputs, rebind and output");
    }
    const auto param = payload["rebind"].get<std::string>();
    if (!target->inputs.count(param)) {
      throw Error(Errc::unknown_hint, "node '" + target->id + "' has no input '" + param + "' to rebind");
    }
    long long max_n = 0;
    for (const auto& n : out.nodes) {
      if (n.id.size() > 1 && n.id[0] == 'n' &&
          std::all_of(n.id.begin() + 1, n.id.end(), [](unsigned char c) { return std::isdigit(c); })) {
        max_n = std::max(max_n, std::stoll(n.id.substr(1)));
      }
    }
    PlanNode inserted;
    inserted.id = "n" + std::to_string(max_n + 1);
    inserted.tool = payload["tool"].get<std::string>();
    const auto inputs = payload.value("inputs", json::object());
    for (const auto& [k, b] : inputs.items()) {
      inserted.inputs.emplace(k, binding_from_json(b));
    }
    target->inputs[param] = Binding::ref(inserted.id, payload["output"].get<std::string>());
    out.nodes.insert(target, std::move(inserted));
  } else {
    throw Error(Errc::unknown_hint, "unknown refine hint '" + kind + "'");
  }

  if (auto errors = validate_plan(out, registry); !errors.empty()) {
    json list = json::array();
    for (const auto& e : errors) list.push_back(to_json(e));
    throw Error(Errc::invalid_plan, "refined plan is invalid: " + list.dump());
  }
  return out;
}

}  // namespace orion
