#include "orion/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "orion/benchmark.hpp"
#include "orion/eval.hpp"
#include "orion/fixture_tools.hpp"
#include "orion/util.hpp"

namespace orion {

// ---------------------------------------------------------------- config

RuntimeConfig RuntimeConfig::load(const std::filesystem::path& path) {
  const auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::invalid_value, path.string() + ": config must be a JSON object");
  RuntimeConfig c;
  const auto base = path.parent_path();
  auto rel = [&](const json& v) {
    std::filesystem::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "data_dir") c.data_dir = rel(v);
      else if (k == "signing_key_env") {
        if (const char* s = std::getenv(v.get<std::string>().c_str())) c.signing_key = s;
      } else if (k == "api_keys") c.api_keys = v.get<std::vector<std::string>>();
      else if (k == "catalog") c.catalog = rel(v);
      else if (k == "patterns") c.patterns = rel(v);
      else if (k == "host") c.host = v.get<std::string>();
      else if (k == "port") c.port = v.get<int>();
      else if (k == "base_url") c.base_url = v.get<std::string>();
      else if (k == "url_ttl_s") c.url_ttl_s = v.get<std::int64_t>();
      else if (k == "max_upload_bytes") c.max_upload_bytes = v.get<std::size_t>();
      else if (k == "max_repairs") c.agent.max_repairs = v.get<int>();
      else if (k == "exec") {
        c.agent.exec.max_parallel = v.value("max_parallel", c.agent.exec.max_parallel);
        c.agent.exec.node_timeout_ms = v.value("node_timeout_ms", c.agent.exec.node_timeout_ms);
        c.agent.exec.max_attempts = v.value("max_attempts", c.agent.exec.max_attempts);
      } else if (k == "reflect") {
        c.agent.reflect.max_rounds = v.value("max_rounds", c.agent.reflect.max_rounds);
        const auto on = v.value("judge_on", std::string("final_only"));
        if (on == "final_only") c.agent.reflect.judge_on = JudgeOn::final_only;
        else if (on == "every_node") c.agent.reflect.judge_on = JudgeOn::every_node;
        else throw Error(Errc::invalid_value, "reflect.judge_on must be final_only or every_node");
      } else if (k == "context") {
        c.agent.budget.max_turns = v.value("max_turns", c.agent.budget.max_turns);
        c.agent.budget.max_chars = v.value("max_chars", c.agent.budget.max_chars);
      } else {
        throw Error(Errc::invalid_value, path.string() + ": unknown config key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_value, path.string() + ": " + e.what());
  }
  return c;
}

void RuntimeConfig::apply_env() {
  if (const char* d = std::getenv("ORION_DATA_DIR"); d && *d) data_dir = d;
  if (const char* k = std::getenv("ORION_SIGNING_KEY"); k && *k) signing_key = k;
  if (const char* a = std::getenv("ORION_API_KEYS"); a && *a) {
    api_keys.clear();
    std::stringstream ss(a);
    std::string key;
    while (std::getline(ss, key, ',')) {
      if (!key.empty()) api_keys.push_back(key);
    }
  }
}

ApiConfig Runtime::api_config(const RuntimeConfig& cfg) const {
  ApiConfig a;
  a.api_keys = cfg.api_keys;
  a.max_upload_bytes = cfg.max_upload_bytes;
  return a;
}

Runtime build_runtime(const RuntimeConfig& cfg, std::function<std::int64_t()> clock) {
  Runtime rt;
  StoreConfig sc;
  sc.root = cfg.data_dir / "objects";
  sc.signing_key = cfg.signing_key;
  if (sc.signing_key.empty()) {
    std::mt19937_64 rng(std::random_device{}());
    sc.signing_key = random_hex(rng, 64);
  }
  sc.default_ttl_s = cfg.url_ttl_s;
  sc.base_url = cfg.base_url;
  sc.clock = clock;
  rt.store = std::make_shared<ArtifactStore>(sc);

  rt.registry = std::make_shared<ToolRegistry>();
  if (cfg.catalog) {
    const auto catalog = json::parse(read_file(*cfg.catalog), nullptr, false);
    if (catalog.is_discarded()) throw Error(Errc::invalid_value, cfg.catalog->string() + " is not valid JSON");
    rt.registry->load_catalog(catalog, fixtures::resolve_backend);
  } else {
    fixtures::register_fixture_tools(*rt.registry);
  }
  rt.registry->freeze();

  rt.sessions = std::make_shared<SessionStore>(cfg.data_dir / "sessions", clock);

  auto backends = Backends::defaults();
  if (cfg.patterns) {
    const auto table = json::parse(read_file(*cfg.patterns), nullptr, false);
    if (table.is_discarded()) throw Error(Errc::invalid_value, cfg.patterns->string() + " is not valid JSON");
    backends.planner_fast = std::make_shared<RulePlanner>(RulePlanner::from_json(table));
  }
  auto agent_cfg = cfg.agent;
  agent_cfg.trace_dir = cfg.data_dir / "traces";
  rt.agent = std::make_shared<Agent>(rt.registry, rt.store, rt.sessions, std::move(backends), agent_cfg);
  return rt;
}

namespace cli {

namespace {

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool internal(Errc c) { return c == Errc::io_error || c == Errc::storage_full; }

json read_json_file(const std::string& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw UserError(path + ": not valid JSON");
  return j;
}

void write_output(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::string node_summary(const json& plan) {
  std::string s;
  for (const auto& n : plan.value("nodes", json::array())) {
    if (!s.empty()) s += " -> ";
    s += n.value("id", std::string()) + ":" + n.value("tool", std::string());
  }
  return s;
}

std::string binding_text(const json& b) {
  if (b.contains("ref")) return "<- " + b["ref"].get<std::string>() + "." + b.value("path", std::string());
  if (b.contains("file")) return "file " + b["file"].get<std::string>();
  if (b.contains("lit")) return b["lit"].dump();
  return b.dump();
}

void print_trace(const json& t, std::ostream& out) {
  out << "trace " << t.value("id", std::string()) << "  status=" << t.value("status", std::string())
      << "  mode=" << t.value("mode", std::string()) << "\n";
  out << "instruction: " << t.value("instruction", std::string()) << "\n\nplan:\n";
  const auto plan = t.value("plan", json::object());
  std::map<std::string, std::string> last_status;
  std::map<std::string, int> attempts;
  for (const auto& s : t.value("steps", json::array())) {
    const auto id = s.value("node_id", std::string());
    last_status[id] = s.contains("result") ? s["result"].value("status", std::string()) : "";
    attempts[id] += 1;
  }
  for (const auto& n : plan.value("nodes", json::array())) {
    const auto id = n.value("id", std::string());
    const auto st = last_status.count(id) ? last_status[id] : std::string("not run");
    out << "  [" << st << "] " << id << " " << n.value("tool", std::string());
    if (attempts[id] > 1) out << " (" << attempts[id] << " runs)";
    out << "\n";
    const auto inputs = n.value("inputs", json::object());
    for (const auto& [k, b] : inputs.items()) out << "      " << k << ": " << binding_text(b) << "\n";
  }
  if (plan.contains("final")) out << "  final " << binding_text(plan["final"]) << "\n";
  const auto rounds = t.value("reflection", json::array());
  if (!rounds.empty()) {
    out << "\nreflection:\n";
    for (const auto& r : rounds) {
      const auto v = r.value("verdict", json::object());
      out << "  round " << r.value("round", 0) << ": " << v.value("action", std::string());
      if (v.contains("node_id")) out << " " << v["node_id"].get<std::string>();
      if (v.contains("hint")) out << " " << v["hint"].dump();
      const auto reason = v.value("reason", std::string());
      if (!reason.empty()) out << " (" << reason << ")";
      out << "\n";
    }
  }
  if (t.contains("error") && t["error"].is_string() && !t["error"].get<std::string>().empty()) {
    out << "\nerror: " << t["error"].get<std::string>() << "\n";
  }
}

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Orion visual agent"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  std::string config_path;
  bool as_json = false;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--data-dir", "Data directory (overrides config and ORION_DATA_DIR)");
  app.add_flag("--json", as_json, "Machine-readable output");

  std::string data_dir;
  app.get_option("--data-dir")->each([&](const std::string& s) { data_dir = s; });

  auto load_cfg = [&] {
    RuntimeConfig c = config_path.empty() ? RuntimeConfig{} : RuntimeConfig::load(config_path);
    c.apply_env();
    if (!data_dir.empty()) c.data_dir = data_dir;
    return c;
  };

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API");
  std::string host;
  int port = -1;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  // run
  auto* run = app.add_subcommand("run", "One-shot completion against local files");
  std::string instruction, schema_path, mode = "auto", session_id;
  std::vector<std::string> files;
  run->add_option("instruction", instruction)->required();
  run->add_option("files", files)->check(CLI::ExistingFile);
  run->add_option("--schema", schema_path, "JSON schema for structured output")->check(CLI::ExistingFile);
  run->add_option("--mode", mode)->check(CLI::IsMember({"auto", "fast"}));
  run->add_option("--session", session_id);

  // trace show
  auto* trace = app.add_subcommand("trace", "Inspect traces");
  trace->require_subcommand(1);
  auto* trace_show = trace->add_subcommand("show", "Print a trace");
  std::string trace_id;
  trace_show->add_option("trace_id", trace_id)->required();

  // tools list
  auto* tools = app.add_subcommand("tools", "Tool catalog");
  tools->require_subcommand(1);
  auto* tools_list = tools->add_subcommand("list", "List registered tools");

  // fixtures
  auto* fx = app.add_subcommand("fixtures", "Fixture media");
  fx->require_subcommand(1);
  auto* fx_validate = fx->add_subcommand("validate", "Check fixture files");
  std::vector<std::string> fx_paths;
  fx_validate->add_option("paths", fx_paths)->required();
  auto* fx_schema = fx->add_subcommand("schema", "Print the schema of a fixture kind");
  std::string fx_kind;
  fx_schema->add_option("kind", fx_kind)->required()->check(CLI::IsMember({"image", "document", "video"}));

  // eval
  auto* ev = app.add_subcommand("eval", "Human evaluation and benchmarks");
  ev->require_subcommand(1);
  auto* ev_assign = ev->add_subcommand("assign", "Draw blind label assignments");
  std::string tasks_path, out_path;
  std::vector<std::string> task_ids, models, evaluators;
  std::uint64_t seed = 0;
  ev_assign->add_option("--tasks", tasks_path, "JSON list of task ids or {id, category}")->check(CLI::ExistingFile);
  ev_assign->add_option("--task", task_ids, "Task id (repeatable)");
  ev_assign->add_option("--models", models)->required()->delimiter(',');
  ev_assign->add_option("--evaluators", evaluators)->required()->delimiter(',');
  ev_assign->add_option("--seed", seed)->required();
  ev_assign->add_option("-o,--out", out_path);

  auto* ev_ingest = ev->add_subcommand("ingest", "Parse and check a blind score sheet");
  std::string scores_path, assignments_path;
  ev_ingest->add_option("scores", scores_path)->required()->check(CLI::ExistingFile);
  ev_ingest->add_option("-o,--out", out_path);

  auto* ev_report = ev->add_subcommand("report", "Unblind and aggregate scores");
  std::string format = "json";
  ev_report->add_option("scores", scores_path)->required()->check(CLI::ExistingFile);
  ev_report->add_option("assignments", assignments_path)->required()->check(CLI::ExistingFile);
  ev_report->add_option("--format", format)->check(CLI::IsMember({"json", "markdown"}));
  ev_report->add_option("-o,--out", out_path);

  auto* ev_bench = ev->add_subcommand("bench", "Run a benchmark suite");
  std::string suite_path = "fixtures/bench/toy.json", bench_host, api_key, model = "orion:fast";
  int bench_port = 0, concurrency = 4;
  ev_bench->add_option("--suite", suite_path)->check(CLI::ExistingFile);
  ev_bench->add_option("--host", bench_host, "Remote server; in-process when omitted");
  ev_bench->add_option("--port", bench_port);
  ev_bench->add_option("--api-key", api_key);
  ev_bench->add_option("--model", model);
  ev_bench->add_option("--concurrency", concurrency)->check(CLI::Range(1, 64));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*serve) {
      auto cfg = load_cfg();
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      if (cfg.signing_key.empty()) err << "warning: no signing key configured; signed URLs will not survive a restart\n";
      auto rt = build_runtime(cfg);
      ApiService api(rt.agent, rt.api_config(cfg));
      const int bound = api.start(cfg.host, cfg.port);
      if (bound < 0) throw UserError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
      if (as_json) {
        out << json{{"host", cfg.host}, {"port", bound}, {"tools", rt.registry->list().size()}}.dump() << "\n";
      } else {
        out << "listening on http://" << cfg.host << ":" << bound << " (" << rt.registry->list().size() << " tools)\n";
      }
      out.flush();
      g_stop = false;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      api.stop();
      return 0;
    }

    if (*run) {
      auto cfg = load_cfg();
      auto rt = build_runtime(cfg);
      AgentRequest req;
      req.model = parse_model_id("orion:" + mode);
      Message m;
      m.parts.push_back(ContentPart::make_text(instruction));
      for (const auto& f : files) {
        const auto stored = rt.store->put(read_file(f), bench::guess_mime(f), std::filesystem::path(f).filename().string());
        m.parts.push_back(ContentPart::make_file(stored.id));
      }
      req.messages.push_back(std::move(m));
      if (!schema_path.empty()) req.schema = OutputSchema::from_json(read_json_file(schema_path));
      if (!session_id.empty()) req.session_id = session_id;
      const auto resp = rt.agent->complete(req);
      const auto& t = resp.trace;
      if (as_json) {
        json j{{"content", resp.content},
               {"succeeded", resp.succeeded},
               {"trace_id", resp.trace_id},
               {"session_id", resp.session_id},
               {"status", t.value("status", std::string())},
               {"plan", t.value("plan", json::object())},
               {"rounds", t.value("reflection", json::array()).size()}};
        if (resp.structured) j["structured"] = *resp.structured;
        out << j.dump(2) << "\n";
      } else {
        out << resp.content << "\n\n";
        out << "trace " << resp.trace_id << ": " << t.value("status", std::string()) << ", "
            << t.value("steps", json::array()).size() << " steps, " << t.value("reflection", json::array()).size()
            << " round(s)\nplan: " << node_summary(t.value("plan", json::object())) << "\n";
      }
      return resp.succeeded ? 0 : 1;
    }

    if (*trace_show) {
      auto cfg = load_cfg();
      auto rt = build_runtime(cfg);
      const auto t = rt.agent->load_trace(trace_id);
      if (!t) throw UserError("unknown trace '" + trace_id + "'");
      if (as_json) out << t->dump(2) << "\n";
      else print_trace(*t, out);
      return 0;
    }

    if (*tools_list) {
      auto cfg = load_cfg();
      auto rt = build_runtime(cfg);
      if (as_json) {
        out << rt.registry->catalog_json().dump(2) << "\n";
      } else {
        for (const auto& d : rt.registry->list()) {
          char line[256];
          std::snprintf(line, sizeof line, "%-18s %-9s %-7s %-5s ", d.name.c_str(),
                        std::string(category_name(d.category)).c_str(), std::string(cost_hint_name(d.cost_hint)).c_str(),
                        std::string(tier_name(d.tier)).c_str());
          out << line << d.description << "\n";
        }
      }
      return 0;
    }

    if (*fx_validate) {
      json report = json::array();
      bool all_ok = true;
      for (const auto& p : fx_paths) {
        json entry{{"path", p}};
        std::string text;
        try {
          text = read_file(p);
        } catch (const Error& e) {
          entry["ok"] = false;
          entry["violation"] = {{"path", "$"}, {"kind", "io"}, {"detail", e.what()}};
          all_ok = false;
          report.push_back(entry);
          continue;
        }
        const auto doc = json::parse(text, nullptr, false);
        std::vector<Violation> v;
        if (doc.is_discarded()) v.push_back({"$", ViolationKind::parse, "not valid JSON"});
        else v = fixtures::validate_fixture(doc);
        entry["ok"] = v.empty();
        if (!v.empty()) {
          all_ok = false;
          entry["violation"] = {{"path", v[0].path}, {"kind", violation_kind_name(v[0].kind)}, {"detail", v[0].detail}};
          if (!as_json) err << p << ": " << v[0].path << " (" << violation_kind_name(v[0].kind) << "): " << v[0].detail << "\n";
        } else if (!as_json) {
          out << p << ": ok\n";
        }
        report.push_back(entry);
      }
      if (as_json) out << report.dump(2) << "\n";
      return all_ok ? 0 : 1;
    }

    if (*fx_schema) {
      const auto kind = fx_kind == "image"      ? fixtures::FixtureKind::scene
                        : fx_kind == "document" ? fixtures::FixtureKind::document
                                                : fixtures::FixtureKind::video;
      out << fixtures::fixture_schema(kind).dump(2) << "\n";
      return 0;
    }

    if (*ev_assign) {
      std::vector<eval::Task> tasks;
      if (!tasks_path.empty()) {
        const auto j = read_json_file(tasks_path);
        if (!j.is_array()) throw UserError(tasks_path + ": expected a JSON list");
        for (const auto& t : j) {
          if (t.is_string()) tasks.push_back({t.get<std::string>(), ""});
          else if (t.is_object() && t.contains("id") && t["id"].is_string())
            tasks.push_back({t["id"].get<std::string>(), t.value("category", std::string())});
          else throw UserError(tasks_path + ": tasks must be strings or {id, category}");
        }
      }
      for (const auto& id : task_ids) tasks.push_back({id, ""});
      if (tasks.empty()) throw UserError("no tasks given (use --tasks or --task)");
      const auto f = eval::assign_blind(tasks, models, evaluators, seed);
      write_output(eval::to_json(f).dump(2) + "\n", out_path, out);
      return 0;
    }

    if (*ev_ingest) {
      const auto scores = eval::ingest_csv(read_file(scores_path));
      json j = json::array();
      for (const auto& s : scores) {
        json row{{"task_id", s.task_id},
                 {"evaluator_id", s.evaluator_id},
                 {"label", s.label},
                 {"h", s.sheet.helpfulness},
                 {"c", s.sheet.correctness},
                 {"p", s.sheet.presentation ? json(*s.sheet.presentation) : json()},
                 {"i", s.sheet.instruction_following},
                 {"composite", eval::composite(s.sheet)}};
        j.push_back(std::move(row));
      }
      write_output(j.dump(2) + "\n", out_path, out);
      return 0;
    }

    if (*ev_report) {
      const auto scores = eval::ingest_csv(read_file(scores_path));
      const auto f = eval::assignment_file_from_json(read_json_file(assignments_path));
      const auto r = eval::aggregate(scores, f);
      write_output(format == "markdown" ? eval::to_markdown(r) : eval::to_json(r).dump(2) + "\n", out_path, out);
      return 0;
    }

    if (*ev_bench) {
      const auto suite = bench::Suite::load(suite_path);
      bench::Record rec;
      if (bench_host.empty()) {
        auto cfg = load_cfg();
        auto rt = build_runtime(cfg);
        ApiService api(rt.agent, rt.api_config(cfg));
        bench::InProcessEndpoint ep(api, cfg.api_keys.empty() ? "" : cfg.api_keys.front());
        rec = bench::run(suite, ep, model, concurrency);
      } else {
        bench::HttpEndpoint ep(bench_host, bench_port == 0 ? 8080 : bench_port, api_key);
        rec = bench::run(suite, ep, model, concurrency);
      }
      if (as_json) {
        out << bench::to_json(rec).dump(2) << "\n";
      } else {
        for (const auto& r : rec.results) {
          out << (r.correct ? "ok   " : "FAIL ") << r.id;
          if (!r.error.empty()) out << "  error: " << r.error;
          out << "\n";
        }
        char line[128];
        std::snprintf(line, sizeof line, "%s: %d/%d correct (%.1f%%), %d errors\n", rec.suite.c_str(), rec.correct,
                      rec.items, rec.accuracy * 100.0, rec.errors);
        out << line;
      }
      return 0;
    }
  } catch (const UserError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return internal(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cli
}  // namespace orion
