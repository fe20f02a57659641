#include <atomic>
#include <thread>

#include "doctest.h"
#include "support.hpp"

using namespace orion;
using namespace orion::test;

namespace {

ToolDescriptor echo_desc(const std::string& name) {
  ToolDescriptor d;
  d.name = name;
  d.description = "echo";
  d.input_schema = json::parse(R"({"type":"object","required":["x"],"properties":{"x":{"type":"integer"}}})");
  d.output_schema = json::parse(R"({"type":"object","required":["y"],"properties":{"y":{"type":"integer"}}})");
  return d;
}

ToolBackend echo() {
  return [](const json& in, const ToolContext&) { return ToolOutput{json{{"y", in["x"]}}, {}}; };
}

}  // namespace

TEST_CASE("registration rules") {
  ToolRegistry r;
  r.add(echo_desc("b"), echo());
  r.add(echo_desc("a"), echo());
  CHECK_THROWS_AS(r.add(echo_desc("a"), echo()), Error);
  auto bad = echo_desc("c");
  bad.input_schema = json{{"type", "array"}};
  try {
    r.add(bad, echo());
    FAIL("expected SchemaShape");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_shape);
  }
  CHECK_THROWS_AS(r.add(echo_desc("d"), nullptr), Error);
  CHECK(r.list().size() == 2);
  CHECK(r.list()[0].name == "a");
  r.freeze();
  try {
    r.add(echo_desc("e"), echo());
    FAIL("expected RegistryFrozen");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::registry_frozen);
  }
  CHECK_THROWS_AS(r.descriptor("zzz"), Error);
  CHECK(r.find("zzz") == nullptr);
}

TEST_CASE("invoke validates both sides of the contract") {
  ToolRegistry r;
  r.add(echo_desc("echo"), echo());
  auto liar = echo_desc("liar");
  r.add(liar, [](const json&, const ToolContext&) { return ToolOutput{json{{"y", "not an int"}}, {}}; });
  r.add(echo_desc("reject"), [](const json&, const ToolContext&) -> ToolOutput {
    throw Error(Errc::no_match, "nothing there");
  });
  r.add(echo_desc("crash"), [](const json&, const ToolContext&) -> ToolOutput { throw std::runtime_error("boom"); });
  ToolContext ctx;

  auto ok = r.invoke("echo", json{{"x", 4}}, ctx);
  CHECK(ok.ok());
  CHECK(ok.output["y"] == 4);

  auto in = r.invoke("echo", json{{"x", "four"}}, ctx);
  CHECK(in.failure == FailureKind::input_schema);
  CHECK_FALSE(in.retryable());

  auto out = r.invoke("liar", json{{"x", 1}}, ctx);
  CHECK(out.failure == FailureKind::output_schema);
  CHECK(out.retryable());

  auto rej = r.invoke("reject", json{{"x", 1}}, ctx);
  CHECK(rej.failure == FailureKind::rejected);
  CHECK_FALSE(rej.retryable());
  CHECK(rej.error_message == "nothing there");

  auto crash = r.invoke("crash", json{{"x", 1}}, ctx);
  CHECK(crash.failure == FailureKind::backend);
  CHECK(crash.retryable());

  CHECK_THROWS_AS(r.invoke("nope", json::object(), ctx), Error);
}

TEST_CASE("timeouts abandon the call") {
  ToolRegistry r;
  r.add(echo_desc("slow"), [](const json& in, const ToolContext&) {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    return ToolOutput{json{{"y", in["x"]}}, {}};
  });
  const auto t0 = std::chrono::steady_clock::now();
  auto res = r.invoke("slow", json{{"x", 1}}, ToolContext{}, 20);
  CHECK(elapsed_s(t0) < 0.25);
  CHECK(res.failure == FailureKind::timeout);
  CHECK(res.retryable());
  std::this_thread::sleep_for(std::chrono::milliseconds(350));  // let the abandoned worker finish
}

TEST_CASE("max_concurrency 1 serializes calls") {
  ToolRegistry r;
  auto d = echo_desc("serial");
  d.max_concurrency = 1;
  std::atomic<int> active{0}, peak{0};
  r.add(d, [&](const json& in, const ToolContext&) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    --active;
    return ToolOutput{json{{"y", in["x"]}}, {}};
  });
  std::vector<std::thread> ts;
  for (int i = 0; i < 6; ++i) ts.emplace_back([&, i] { r.invoke("serial", json{{"x", i}}, ToolContext{}); });
  for (auto& t : ts) t.join();
  CHECK(peak.load() == 1);
}

TEST_CASE("artifacts must carry verifiable urls") {
  TempDir dir;
  auto store = make_store(dir.path());
  ToolRegistry r;
  r.add(echo_desc("forge"), [](const json&, const ToolContext&) {
    ArtifactRef a;
    a.id = "file_0000000000000000";
    a.url = "/v1/artifacts/file_0000000000000000?expires=99999999999&sig=00";
    return ToolOutput{json{{"y", 1}}, {a}};
  });
  auto res = r.invoke("forge", json{{"x", 1}}, ToolContext{store});
  CHECK(res.failure == FailureKind::output_schema);
}

TEST_CASE("results and descriptors round trip through json") {
  ToolResult r;
  r.status = ToolStatus::error;
  r.failure = FailureKind::timeout;
  r.error_message = "late";
  const auto back = tool_result_from_json(to_json(r));
  CHECK(back.failure == FailureKind::timeout);
  CHECK(back.error_message == "late");

  auto d = echo_desc("x");
  d.category = ToolCategory::video;
  d.cost_hint = CostHint::gpu;
  d.tier = Tier::pro;
  d.timeout_ms = 1234;
  d.backend = "fixture:caption";
  const auto d2 = descriptor_from_json(to_json(d));
  CHECK(d2.category == ToolCategory::video);
  CHECK(d2.cost_hint == CostHint::gpu);
  CHECK(d2.tier == Tier::pro);
  CHECK(d2.timeout_ms == 1234);
  CHECK(d2.input_schema == d.input_schema);
}

TEST_CASE("shipped catalog matches the registered fixture tools") {
  const auto shipped = json::parse(read_file(source_dir() / "config" / "tools.json"));
  CHECK(shipped == fixture_registry()->catalog_json());

  ToolRegistry from_catalog;
  from_catalog.load_catalog(shipped, fixtures::resolve_backend);
  CHECK(from_catalog.list().size() == fixture_registry()->list().size());
  CHECK_THROWS_AS(ToolRegistry().load_catalog(json::parse(R"({"tools":[{"name":"x","category":"image","description":"",
      "input_schema":{"type":"object"},"output_schema":{"type":"object"},"backend":"nowhere:x"}]})"),
                                              fixtures::resolve_backend),
                  Error);
}
