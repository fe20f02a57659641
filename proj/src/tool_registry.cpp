#include "orion/tool_registry.hpp"

#include <chrono>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>

#include "orion/schema.hpp"

namespace orion {

std::string_view category_name(ToolCategory c) noexcept {
  switch (c) {
    case ToolCategory::image: return "image";
    case ToolCategory::document: return "document";
    case ToolCategory::video: return "video";
    case ToolCategory::mixed: return "mixed";
  }
  return "mixed";
}

ToolCategory parse_category(std::string_view s) {
  for (auto c : {ToolCategory::image, ToolCategory::document, ToolCategory::video, ToolCategory::mixed}) {
    if (category_name(c) == s) return c;
  }
  throw Error(Errc::invalid_value, "unknown tool category '" + std::string(s) + "'");
}

std::string_view cost_hint_name(CostHint c) noexcept {
  switch (c) {
    case CostHint::cheap: return "cheap";
    case CostHint::gpu: return "gpu";
    case CostHint::remote: return "remote";
  }
  return "cheap";
}

std::string_view tier_name(Tier t) noexcept {
  switch (t) {
    case Tier::fast: return "fast";
    case Tier::pro: return "pro";
    case Tier::any: return "any";
  }
  return "any";
}

namespace {

CostHint parse_cost_hint(std::string_view s) {
  for (auto c : {CostHint::cheap, CostHint::gpu, CostHint::remote}) {
    if (cost_hint_name(c) == s) return c;
  }
  throw Error(Errc::invalid_value, "unknown cost hint '" + std::string(s) + "'");
}

Tier parse_tier(std::string_view s) {
  for (auto t : {Tier::fast, Tier::pro, Tier::any}) {
    if (tier_name(t) == s) return t;
  }
  throw Error(Errc::invalid_value, "unknown tier '" + std::string(s) + "'");
}

FailureKind parse_failure_kind(std::string_view s) {
  for (auto k : {FailureKind::none, FailureKind::input_schema, FailureKind::output_schema,
                 FailureKind::rejected, FailureKind::backend, FailureKind::timeout}) {
    if (failure_kind_name(k) == s) return k;
  }
  return FailureKind::backend;
}

bool object_rooted(const json& s) { return s.is_object() && s.value("type", json()) == "object"; }

ToolResult failure(FailureKind kind, std::string message, double latency_ms = 0) {
  ToolResult r;
  r.status = ToolStatus::error;
  r.failure = kind;
  r.error_message = std::move(message);
  r.latency_ms = latency_ms;
  return r;
}

}  // namespace

std::string_view failure_kind_name(FailureKind k) noexcept {
  switch (k) {
    case FailureKind::none: return "none";
    case FailureKind::input_schema: return "input_schema";
    case FailureKind::output_schema: return "output_schema";
    case FailureKind::rejected: return "rejected";
    case FailureKind::backend: return "backend";
    case FailureKind::timeout: return "timeout";
  }
  return "backend";
}

json to_json(const ToolDescriptor& d) {
  json j{{"name", d.name},
         {"category", category_name(d.category)},
         {"description", d.description},
         {"input_schema", d.input_schema},
         {"output_schema", d.output_schema},
         {"cost_hint", cost_hint_name(d.cost_hint)},
         {"tier", tier_name(d.tier)},
         {"max_concurrency", d.max_concurrency},
         {"backend", d.backend}};
  if (d.timeout_ms) j["timeout_ms"] = *d.timeout_ms;
  return j;
}

ToolDescriptor descriptor_from_json(const json& j) {
  ToolDescriptor d;
  d.name = j.at("name").get<std::string>();
  d.category = parse_category(j.at("category").get<std::string>());
  d.description = j.value("description", std::string());
  d.input_schema = j.at("input_schema");
  d.output_schema = j.at("output_schema");
  d.cost_hint = parse_cost_hint(j.value("cost_hint", std::string("cheap")));
  d.tier = parse_tier(j.value("tier", std::string("any")));
  if (j.contains("timeout_ms")) d.timeout_ms = j["timeout_ms"].get<std::int64_t>();
  d.max_concurrency = j.value("max_concurrency", 0);
  d.backend = j.value("backend", std::string());
  return d;
}

json to_json(const ToolResult& r) {
  json arts = json::array();
  for (const auto& a : r.artifacts) arts.push_back(to_json(a));
  json j{{"status", r.ok() ? "ok" : "error"}, {"artifacts", arts}, {"latency_ms", r.latency_ms}};
  if (r.ok()) {
    j["output"] = r.output;
  } else {
    j["error_message"] = r.error_message;
    j["failure"] = failure_kind_name(r.failure);
  }
  return j;
}

ToolResult tool_result_from_json(const json& j) {
  ToolResult r;
  r.status = j.value("status", std::string("ok")) == "ok" ? ToolStatus::ok : ToolStatus::error;
  r.output = j.value("output", json());
  if (j.contains("artifacts")) {
    for (const auto& a : j["artifacts"]) r.artifacts.push_back(artifact_from_json(a));
  }
  r.error_message = j.value("error_message", std::string());
  r.failure = r.ok() ? FailureKind::none : parse_failure_kind(j.value("failure", std::string("backend")));
  r.latency_ms = j.value("latency_ms", 0.0);
  return r;
}

void ToolRegistry::add(ToolDescriptor desc, ToolBackend backend) {
  if (frozen_) throw Error(Errc::registry_frozen, "registry is frozen");
  if (desc.name.empty()) throw Error(Errc::invalid_value, "tool name is empty");
  if (!object_rooted(desc.input_schema) || !object_rooted(desc.output_schema)) {
    throw Error(Errc::schema_shape, "tool '" + desc.name + "' schemas must be object-rooted");
  }
  if (!backend) throw Error(Errc::invalid_value, "tool '" + desc.name + "' has no backend");
  if (tools_.count(desc.name)) throw Error(Errc::duplicate_name, "tool '" + desc.name + "' already registered");
  auto serial = desc.max_concurrency == 1 ? std::make_shared<std::mutex>() : nullptr;
  std::string name = desc.name;
  tools_.emplace(std::move(name), Entry{std::move(desc), std::move(backend), std::move(serial)});
}

const ToolDescriptor* ToolRegistry::find(std::string_view name) const {
  auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : &it->second.desc;
}

const ToolDescriptor& ToolRegistry::descriptor(std::string_view name) const {
  if (const auto* d = find(name)) return *d;
  throw Error(Errc::unknown_tool, "unknown tool '" + std::string(name) + "'");
}

std::vector<ToolDescriptor> ToolRegistry::list(std::optional<ToolCategory> category) const {
  std::vector<ToolDescriptor> out;
  for (const auto& [name, entry] : tools_) {
    if (!category || entry.desc.category == *category) out.push_back(entry.desc);
  }
  return out;
}

ToolResult ToolRegistry::invoke(std::string_view name, const json& input, const ToolContext& ctx,
                                std::optional<std::int64_t> timeout_ms) const {
  auto it = tools_.find(name);
  if (it == tools_.end()) throw Error(Errc::unknown_tool, "unknown tool '" + std::string(name) + "'");
  const Entry& entry = it->second;

  if (auto v = validate_schema(input, entry.desc.input_schema); !v.empty()) {
    return failure(FailureKind::input_schema, "input schema violation: " + describe(v));
  }

  const std::int64_t deadline_ms =
      timeout_ms.value_or(entry.desc.timeout_ms.value_or(kDefaultTimeoutMs));

  struct Shared {
    std::mutex m;
    std::condition_variable cv;
    bool done{false};
    std::optional<ToolOutput> out;
    std::exception_ptr err;
  };
  auto shared = std::make_shared<Shared>();

  // Timed-out calls are abandoned, so the worker owns copies of everything it touches.
  std::thread worker([shared, backend = entry.backend, serial = entry.serial, input, ctx] {
    std::optional<ToolOutput> out;
    std::exception_ptr err;
    try {
      std::unique_lock<std::mutex> guard;
      if (serial) guard = std::unique_lock(*serial);
      out = backend(input, ctx);
    } catch (...) {
      err = std::current_exception();
    }
    std::lock_guard lock(shared->m);
    shared->out = std::move(out);
    shared->err = err;
    shared->done = true;
    shared->cv.notify_all();
  });

  const auto start = std::chrono::steady_clock::now();
  bool finished = false;
  {
    std::unique_lock lock(shared->m);
    finished = shared->cv.wait_for(lock, std::chrono::milliseconds(deadline_ms),
                                   [&] { return shared->done; });
  }
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!finished) {
    worker.detach();
    return failure(FailureKind::timeout,
                   "backend timed out after " + std::to_string(deadline_ms) + " ms", latency);
  }
  worker.join();

  if (shared->err) {
    try {
      std::rethrow_exception(shared->err);
    } catch (const Error& e) {
      return failure(FailureKind::rejected, e.what(), latency);
    } catch (const std::exception& e) {
      return failure(FailureKind::backend, e.what(), latency);
    } catch (...) {
      return failure(FailureKind::backend, "backend threw a non-standard exception", latency);
    }
  }

  ToolOutput& out = *shared->out;
  if (auto v = validate_schema(out.output, entry.desc.output_schema); !v.empty()) {
    return failure(FailureKind::output_schema, "output schema violation: " + describe(v), latency);
  }
  if (ctx.store) {
    for (const auto& a : out.artifacts) {
      try {
        ctx.store->verify(a.url);
      } catch (const Error& e) {
        return failure(FailureKind::output_schema,
                       "artifact " + a.id + " has an unverifiable url: " + e.what(), latency);
      }
    }
  }

  ToolResult r;
  r.status = ToolStatus::ok;
  r.output = std::move(out.output);
  r.artifacts = std::move(out.artifacts);
  r.latency_ms = latency;
  return r;
}

json ToolRegistry::catalog_json() const {
  json tools = json::array();
  for (const auto& [name, entry] : tools_) tools.push_back(to_json(entry.desc));
  return json{{"tools", tools}};
}

void ToolRegistry::load_catalog(const json& catalog, const BackendResolver& resolve) {
  if (!catalog.is_object() || !catalog.contains("tools") || !catalog["tools"].is_array()) {
    throw Error(Errc::invalid_value, "tool catalog must be {\"tools\": [...]}");
  }
  for (const auto& item : catalog["tools"]) {
    auto desc = descriptor_from_json(item);
    auto backend = resolve(desc.backend);
    if (!backend) {
      throw Error(Errc::invalid_value, "tool '" + desc.name + "' has unresolvable backend '" +
                                           desc.backend + "'");
    }
    add(std::move(desc), std::move(backend));
  }
}

}  // namespace orion
