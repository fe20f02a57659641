// Acceptance gate: one PASS/FAIL line per criterion.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <regex>
#include <set>

#include "orion/benchmark.hpp"
#include "orion/eval.hpp"
#include "orion/reflector.hpp"
#include "orion/structured_output.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace orion;
using namespace orion::test;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

int g_failed = 0;

void criterion(const char* name, double limit_s, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail, error;
  try {
    detail = body();
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double s = elapsed_s(t0);
  if (error.empty() && limit_s > 0 && s >= limit_s) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "took %.3fs, limit %.1fs", s, limit_s);
    error = buf;
  }
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.3fs", s);
  if (error.empty()) {
    std::cout << "PASS  " << name << "  (" << timing << (detail.empty() ? "" : "; " + detail) << ")\n";
  } else {
    ++g_failed;
    std::cout << "FAIL  " << name << "  (" << timing << "; " << error << ")\n";
  }
  std::cout.flush();
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

NormBBox random_box(std::mt19937_64& rng) {
  const double x = uniform01(rng), y = uniform01(rng);
  return {x, y, uniform01(rng) * (1.0 - x), uniform01(rng) * (1.0 - y)};
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------- geometry

std::string geometry() {
  std::mt19937_64 rng(101);
  for (int i = 0; i < 10000; ++i) {
    const auto b = random_box(rng);
    expect(b.valid(), "generated box invalid");
    const auto p = NormPoint{uniform01(rng), uniform01(rng)};

    if (b.w > 0 && b.h > 0) {
      const auto id = rebase_into_crop(b, kFullFrame);
      expect(id && *id == b, "full-frame rebase is not the identity");
    }
    expect(rebase_point_into_crop(p, kFullFrame) == p, "full-frame point rebase is not the identity");

    auto r = b;
    auto q = p;
    for (int k = 0; k < 4; ++k) {
      r = rotate90ccw_bbox(r);
      q = rotate90ccw_point(q);
      expect(r.valid() && q.valid(), "rotation left the unit square");
    }
    expect(near(r.x, b.x, 1e-12) && near(r.y, b.y, 1e-12) && near(r.w, b.w, 1e-12) && near(r.h, b.h, 1e-12),
           "four box rotations are not the identity");
    expect(near(q.x, p.x, 1e-12) && near(q.y, p.y, 1e-12), "four point rotations are not the identity");

    const auto crop = random_box(rng);
    if (crop.w <= 1e-6 || crop.h <= 1e-6) continue;
    // per-point oracle: map each corner of the clipped box independently
    const double ix0 = std::max(b.x, crop.x), iy0 = std::max(b.y, crop.y);
    const double ix1 = std::min(b.x + b.w, crop.x + crop.w), iy1 = std::min(b.y + b.h, crop.y + crop.h);
    const auto rb = rebase_into_crop(b, crop);
    if (ix1 - ix0 <= 0 || iy1 - iy0 <= 0) {
      expect(!rb || rb->area() <= 1e-12, "disjoint boxes produced a rebase");
      continue;
    }
    if (!rb) continue;
    expect(rb->valid(), "rebased box out of range");
    const auto c0 = rebase_point_into_crop({ix0, iy0}, crop);
    const auto c1 = rebase_point_into_crop({ix1, iy1}, crop);
    expect(c0 && c1, "clipped corners fell outside the crop");
    expect(near(rb->x, c0->x, 1e-9) && near(rb->y, c0->y, 1e-9) && near(rb->x + rb->w, c1->x, 1e-9) &&
               near(rb->y + rb->h, c1->y, 1e-9),
           "crop rebase disagrees with the per-point oracle");
    if (const auto pr = rebase_point_into_crop(p, crop)) {
      expect(near(crop.x + pr->x * crop.w, p.x, 1e-9) && near(crop.y + pr->y * crop.h, p.y, 1e-9),
             "point rebase does not invert");
    }
  }
  return "10000 boxes";
}

// ---------------------------------------------------------------- timecode

std::string timecode() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<std::int64_t> ms(0, 99LL * 3600 * 1000 + 999);
  for (int i = 0; i < 10000; ++i) {
    const auto v = ms(rng);
    expect(parse_timecode(format_timecode(v)) == v, "round trip failed for " + std::to_string(v));
  }
  const auto start = parse_timecode("00:23");
  expect(start == 23000, "00:23 did not parse to 23000");
  expect(format_timecode(start) == "00:00:23", "23000 did not format to 00:00:23");
  expect(format_timecode(parse_timecode("00:28")) == "00:00:28", "segment end mismatch");
  return "10000 values; 00:23 -> 23000 -> 00:00:23";
}

// ---------------------------------------------------------------- executor

std::string executor_equivalence() {
  std::mt19937_64 rng(107);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const auto plan = random_dag(rng, 1 + static_cast<int>(rng() % 12));
    std::optional<std::map<std::string, json>> reference;
    std::optional<json> reference_final;
    for (int parallel : {1, 2, 8}) {
      SyntheticTools tools;
      tools.max_parallel = parallel;
      tools.work = std::chrono::microseconds(50);
      auto reg = tools.registry();
      ExecPolicy pol;
      pol.max_parallel = parallel;
      const auto res = execute(plan, pol, *reg, {});
      expect(res.trace.status == TraceStatus::succeeded, "run failed: " + res.trace.error);
      expect(respects_dependencies(plan, *tools.log), "dependency order violated");
      expect(tools.log->peak.load() <= parallel, "parallel budget exceeded");
      std::map<std::string, json> outs;
      for (const auto& [id, r] : res.trace.outputs) outs[id] = r.output;
      if (!reference) {
        reference = outs;
        reference_final = res.final_value;
      } else {
        expect(outs == *reference, "outputs differ across parallelism");
        expect(res.final_value == reference_final, "final value differs across parallelism");
      }
    }
    ++checked;
  }
  return std::to_string(checked) + " DAGs x {1,2,8}";
}

// ---------------------------------------------------------------- reflection

class ScriptedJudge final : public Judge {
 public:
  explicit ScriptedJudge(std::vector<Verdict> script) : script_(std::move(script)) {}
  Verdict judge(const JudgeRequest&) const override {
    const auto i = std::min(calls_++, script_.size() - 1);
    return script_[i];
  }
  std::string name() const override { return "scripted"; }

 private:
  std::vector<Verdict> script_;
  mutable std::size_t calls_{0};
};

std::string reflection() {
  std::mt19937_64 rng(109);
  int succeeded = 0;
  const json final_schema{{"type", "object"}, {"required", {"n"}}, {"properties", {{"n", *schema_at_path(synthetic_out(), "n")}}}};
  for (int i = 0; i < 200; ++i) {
    SyntheticTools tools;
    tools.work = std::chrono::microseconds(20);
    tools.flaky_failures = static_cast<int>(rng() % 3);
    *tools.bad_left = static_cast<int>(rng() % 4);
    auto reg = tools.registry();
    const auto plan = random_dag(rng, 1 + static_cast<int>(rng() % 8), {"cpu", "gpu", "flaky", "bad"});
    std::vector<Verdict> script;
    for (int k = 0; k < 4; ++k) {
      const auto& n = plan.nodes[rng() % plan.nodes.size()];
      switch (rng() % 5) {
        case 0: script.push_back({VerdictAction::finalize, std::nullopt, std::nullopt, std::nullopt, "ok"}); break;
        case 1: script.push_back({VerdictAction::retry, n.id, std::nullopt, std::nullopt, "again"}); break;
        case 2: script.push_back({VerdictAction::finalize, std::nullopt, std::nullopt, 0.1, "weak"}); break;
        case 3: script.push_back({VerdictAction::refine, n.id, json{{"op", "bogus"}}, std::nullopt, "odd"}); break;
        default: script.push_back({VerdictAction::fail, std::nullopt, std::nullopt, std::nullopt, "no"}); break;
      }
    }
    ScriptedJudge scripted(script);
    MockJudge mock;
    const Judge& judge = rng() % 2 ? static_cast<const Judge&>(scripted) : static_cast<const Judge&>(mock);

    ReflectionPolicy rp;  // default budget of three rounds
    ExecPolicy ep;
    ep.max_attempts = 1;
    ReflectHooks h;
    h.execute = [&](const Plan& p, const ExecOptions& o) { return execute(p, ep, *reg, {}, o); };
    h.refine = [&](const Plan& p, const Verdict& v) { return refine_plan(p, v, *reg); };
    h.judge = [&](const JudgeRequest& r, int, const std::vector<Verdict>&) { return judge.judge(r); };
    const auto out = reflect_loop(plan, "compute n", *reg, rp, h);

    expect(out.rounds.size() <= 3, "more than three rounds");
    expect(out.history.size() <= 3, "verdict history longer than three");
    if (out.status == TraceStatus::succeeded) {
      expect(out.final_value.has_value(), "success without a value");
      ++succeeded;
    }
    if (out.final_value) {
      expect(check_conformance(json{{"n", *out.final_value}}, final_schema).empty(), "schema-violating final value delivered");
    }
  }
  return "200 scenarios, " + std::to_string(succeeded) + " finalized";
}

// ---------------------------------------------------------------- streaming

struct Canned {
  std::string text;
  std::string fixture;
  json response_format;
};

std::vector<Canned> canned_requests() {
  const auto time_fmt = json::parse(R"({"type":"json_schema","json_schema":{"name":"t","schema":
      {"type":"object","required":["time"],"properties":{"time":{"type":"string"}}}}})");
  return {
      {"Crop into the clock in the image and extract the time shown", "street.scene.json", nullptr},
      {"What is in this image?", "street.scene.json", nullptr},
      {"Describe this image", "street.scene.json", nullptr},
      {"Detect all the cars in the image", "street.scene.json", nullptr},
      {"How many persons are there?", "street.scene.json", nullptr},
      {"What color is the car?", "street.scene.json", nullptr},
      {"Read the text in this image", "street.scene.json", nullptr},
      {"Point to the traffic light in the image", "street.scene.json", nullptr},
      {"Crop the clock in the image", "street.scene.json", nullptr},
      {"Rotate the image 90 degrees counterclockwise", "street.scene.json", nullptr},
      {"Detect all the UI elements in this screenshot", "login.scene.json", nullptr},
      {"Which page mentions penicillin?", "form.doc.json", nullptr},
      {"Extract all the form fields", "form.doc.json", nullptr},
      {"Analyze the document layout", "form.doc.json", nullptr},
      {"Redact all mentions of John A. Smith from the document", "form.doc.json", nullptr},
      {"When does the finale happen?", "fireworks.video.json", nullptr},
      {"Summarize this video", "fireworks.video.json", nullptr},
      {"Trim the video from 00:23 to 00:28", "fireworks.video.json", nullptr},
      {"sing me a song", "street.scene.json", nullptr},
      {"Crop into the clock in the image and extract the time shown", "street.scene.json", time_fmt},
  };
}

std::string normalize_frame(std::string f) {
  static const std::regex chatcmpl(R"(chatcmpl_[0-9a-f]+)"), trace(R"(trace_[0-9a-f]+)"),
      created(R"("created":[0-9]+)"), expires(R"(expires=[0-9]+)"), sig(R"(sig=[0-9a-f]+)");
  f = std::regex_replace(f, chatcmpl, "chatcmpl_ID");
  f = std::regex_replace(f, trace, "trace_ID");
  f = std::regex_replace(f, created, "\"created\":0");
  f = std::regex_replace(f, expires, "expires=0");
  return std::regex_replace(f, sig, "sig=SIG");
}

std::string content_of(const std::vector<std::string>& frames) {
  std::string out;
  for (const auto& f : frames) {
    const auto payload = f.substr(6, f.size() - 8);
    if (payload == "[DONE]") continue;
    const auto c = json::parse(payload);
    const auto& d = c["choices"][0]["delta"];
    if (d.contains("content")) out += d["content"].get<std::string>();
  }
  return out;
}

std::string streaming() {
  TempDir dir;
  FakeClock clock;
  auto rt = fixed_runtime(dir.path(), clock);
  ApiService api(rt.agent, ApiConfig{});
  const bool update = std::getenv("ORION_UPDATE_GOLDEN") && std::string(std::getenv("ORION_UPDATE_GOLDEN")) == "1";
  const auto golden_dir = source_dir() / "tests" / "golden";
  int k = 0, goldens = 0;
  for (const auto& c : canned_requests()) {
    ++k;
    const auto id = rt.store->put(fixture_bytes(c.fixture), bench::guess_mime(c.fixture), c.fixture).id;
    json body{{"model", "orion:fast"}, {"messages", json::array({user_turn(c.text, {id})})}};
    if (!c.response_format.is_null()) body["response_format"] = c.response_format;
    const auto batch = api.completion(body.dump(), false, "");
    body["stream"] = true;
    const auto stream = api.completion(body.dump(), false, "");
    expect(batch.status == 200 && stream.status == 200, "request " + std::to_string(k) + " failed");
    const auto want = json::parse(batch.body)["choices"][0]["message"]["content"].get<std::string>();
    expect(content_of(stream.frames) == want, "request " + std::to_string(k) + ": stream differs from batch");

    // framing: role first, stop second to last, [DONE] last
    const auto& fr = stream.frames;
    expect(fr.size() >= 3, "too few frames");
    expect(json::parse(fr.front().substr(6))["choices"][0]["delta"] == json{{"role", "assistant"}}, "role not first");
    expect(json::parse(fr[fr.size() - 2].substr(6))["choices"][0]["finish_reason"] == "stop", "stop not last");
    expect(fr.back() == "data: [DONE]\n\n", "[DONE] not last");

    std::string transcript;
    for (const auto& f : fr) transcript += normalize_frame(f);
    char name[32];
    std::snprintf(name, sizeof name, "stream_%02d.sse", k);
    const auto path = golden_dir / name;
    if (update) {
      std::filesystem::create_directories(golden_dir);
      write_file_atomic(path, transcript);
    } else {
      expect(std::filesystem::exists(path), std::string("missing golden ") + name);
      expect(read_file(path) == transcript, std::string("transcript differs from ") + name);
    }
    ++goldens;
  }
  return std::to_string(k) + " requests, " + std::to_string(goldens) + (update ? " goldens written" : " goldens matched");
}

// ---------------------------------------------------------------- clock workflow

std::string clock_workflow() {
  TempDir dir;
  FakeClock clock;
  auto rt = fixed_runtime(dir.path(), clock);
  const auto t0 = std::chrono::steady_clock::now();
  const auto id = rt.store->put(fixture_bytes("street.scene.json"), fixtures::kSceneMime, "street.scene.json").id;
  AgentRequest req;
  req.model = parse_model_id("orion:fast");
  req.messages.push_back(message_from_json(user_turn("Crop into the clock in the image and extract the time shown", {id})));
  const auto resp = rt.agent->complete(req);
  const double s = elapsed_s(t0);
  std::vector<std::string> tools;
  for (const auto& n : resp.trace["plan"]["nodes"]) tools.push_back(n["tool"].get<std::string>());
  expect(tools == std::vector<std::string>{"detect", "crop", "ocr_image"}, "plan is not detect -> crop -> ocr");
  expect(resp.content.find("10:09") != std::string::npos, "answer was '" + resp.content + "'");
  expect(s < 1.0, "request took too long");
  return "answer " + resp.content;
}

// ---------------------------------------------------------------- structured outputs

std::string structured_outputs() {
  TempDir dir;
  FakeClock clock;
  auto rt = fixed_runtime(dir.path(), clock);
  auto put = [&](const std::string& f) { return rt.store->put(fixture_bytes(f), bench::guess_mime(f), f).id; };
  const auto street = put("street.scene.json"), form = put("form.doc.json"), video = put("fireworks.video.json"),
             login = put("login.scene.json");
  struct Case {
    std::string text, file, schema;
  };
  const std::vector<Case> cases{
      {"Crop into the clock in the image and extract the time shown", street,
       R"({"type":"object","required":["time"],"properties":{"time":{"type":"string"}}})"},
      {"Crop into the clock in the image and extract the time shown", street,
       R"({"type":"object","required":["text"],"properties":{"text":{"type":"string"}}})"},
      {"What is in this image?", street,
       R"({"type":"object","required":["caption"],"properties":{"caption":{"type":"string"}}})"},
      {"What is in this image?", street,
       R"({"type":"object","required":["summary","objects"],"properties":{"summary":{"type":"string"},"objects":{"type":"integer","minimum":0}}})"},
      {"How many persons are there?", street,
       R"({"type":"object","required":["count"],"properties":{"count":{"type":"integer","minimum":0}}})"},
      {"Detect all the cars in the image", street,
       R"({"type":"object","required":["detections"],"properties":{"detections":{"type":"array","items":{"type":"object"}}}})"},
      {"Detect all the cars in the image", street,
       R"({"type":"object","required":["found"],"properties":{"found":{"type":"boolean"}}})"},
      {"What color is the car?", street,
       R"({"type":"object","required":["answer"],"properties":{"answer":{"type":"string"}}})"},
      {"What color is the car?", street,
       R"({"type":"object","required":["color"],"properties":{"color":{"enum":["red","blue","green"]}}})"},
      {"Read the text in this image", street,
       R"({"type":"object","required":["text"],"properties":{"text":{"type":"string"}}})"},
      {"Point to the traffic light in the image", street,
       R"({"type":"object","required":["points"],"properties":{"points":{"type":"array"}}})"},
      {"Detect all the UI elements in this screenshot", login,
       R"({"type":"object","required":["elements"],"properties":{"elements":{"type":"array","maxItems":10}}})"},
      {"Which page mentions penicillin?", form,
       R"({"type":"object","required":["pages"],"properties":{"pages":{"type":"array","items":{"type":"integer"}}}})"},
      {"Extract all the form fields", form,
       R"({"type":"object","required":["fields"],"properties":{"fields":{"type":"array","items":{"type":"object"}}}})"},
      {"Analyze the document layout", form,
       R"({"type":"object","required":["blocks"],"properties":{"blocks":{"type":"array"}}})"},
      {"When does the finale happen?", video,
       R"({"type":"object","required":["start","end"],"properties":{"start":{"type":"string"},"end":{"type":"string"}}})"},
      {"Summarize this video", video,
       R"({"type":"object","required":["summary"],"properties":{"summary":{"type":"string"}}})"},
      {"Trim the video from 00:23 to 00:28", video,
       R"({"type":"object","required":["video"],"properties":{"video":{"type":"object"}}})"},
      {"Crop the clock in the image", street,
       R"({"type":"object","required":["image","score"],"properties":{"image":{"type":"object"},"score":{"type":"number","minimum":0,"maximum":1}}})"},
      {"Rotate the image 90 degrees counterclockwise", street,
       R"({"type":"object","required":["rotated","degrees"],"properties":{"rotated":{"type":"object"},"degrees":{"type":"integer","minimum":90,"maximum":90}}})"},
  };
  int valid = 0;
  for (const auto& c : cases) {
    AgentRequest req;
    req.model = parse_model_id("orion:fast");
    req.messages.push_back(message_from_json(user_turn(c.text, {c.file})));
    const auto schema = OutputSchema::from_json(json::parse(c.schema));
    req.schema = schema;
    try {
      const auto resp = rt.agent->complete(req);
      if (resp.structured && validate_final(resp.content, schema).ok()) ++valid;
    } catch (const StructuredOutputError&) {
    }
  }
  expect(valid == 20, std::to_string(valid) + "/20 structured bodies validated");

  // a generator that drops one required key until it sees feedback
  std::mt19937_64 rng(113);
  int worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int keys = 2 + static_cast<int>(rng() % 4);
    json props = json::object(), required = json::array(), full = json::object();
    for (int i = 0; i < keys; ++i) {
      const auto k = "k" + std::to_string(i);
      props[k] = {{"type", "string"}};
      required.push_back(k);
      full[k] = "v";
    }
    const auto schema = OutputSchema::from_json({{"type", "object"}, {"required", required}, {"properties", props}});
    json first = full;
    first.erase("k" + std::to_string(rng() % keys));
    const auto r = repair_loop([&](const std::string& fb) { return fb.empty() ? first.dump() : full.dump(); }, schema);
    expect(r.calls - 1 <= 2, "missing key needed more than two repairs");
    worst = std::max(worst, r.calls - 1);
  }

  int calls = 0;
  bool threw = false;
  try {
    repair_loop(
        [&](const std::string&) {
          ++calls;
          return std::string(R"({"nope":1})");
        },
        OutputSchema::from_json(json::parse(R"({"type":"object","required":["time"],"properties":{"time":{"type":"string"}}})")));
  } catch (const StructuredOutputError& e) {
    threw = e.calls() == 3;
  }
  expect(threw && calls == 3, "never-conformant generator made " + std::to_string(calls) + " calls");
  return "20/20 valid; missing key repaired within " + std::to_string(worst) + "; never-conformant stopped at 3 calls";
}

// ---------------------------------------------------------------- composite

std::string composite_scoring() {
  using eval::ScoreSheet;
  const double a = eval::composite(ScoreSheet{10, 10, 10.0, 10});
  const double b = eval::composite(ScoreSheet{8, 6, 9.0, 7});
  const double c = eval::composite(ScoreSheet{8, 6, std::nullopt, 7});
  expect(std::abs(a - 10.0) <= 1e-9, "unanimous 10s gave " + std::to_string(a));
  expect(std::abs(b - 7.35) <= 1e-9, "(8,6,9,7) gave " + std::to_string(b));
  expect(std::abs(c - 6.9375) <= 1e-9, "(8,6,-,7) gave " + std::to_string(c));
  auto all = [](double v) { return ScoreSheet{v, v, v, v}; };
  expect(eval::flag_disagreement({all(9.0), all(6.5)}), "25 pp spread not flagged");
  expect(!eval::flag_disagreement({all(8.0), all(6.0)}), "20 pp spread flagged");
  expect(!eval::flag_disagreement({all(7.0), all(7.0), all(7.0)}), "identical sheets flagged");
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f / %.4f / %.4f", a, b, c);
  return buf;
}

// ---------------------------------------------------------------- blind assignment

std::string blind_assignment() {
  std::vector<eval::Task> tasks;
  for (int i = 0; i < 2500; ++i) tasks.push_back({"t" + std::to_string(i), "image"});
  const std::vector<std::string> models{"m1", "m2", "m3", "m4"}, evals{"e1", "e2", "e3", "e4"};
  const auto f1 = eval::to_json(eval::assign_blind(tasks, models, evals, 2024)).dump(2);
  const auto f2 = eval::to_json(eval::assign_blind(tasks, models, evals, 2024)).dump(2);
  expect(f1 == f2, "same seed produced different files");

  const auto f = eval::assign_blind(tasks, models, evals, 2024);
  expect(f.assignments.size() == 10000, "expected 10000 draws");
  std::set<std::string> perms;
  for (const auto& a : f.assignments) {
    std::string key;
    for (const auto& m : models) key += a.label_of.at(m);
    perms.insert(key);
  }
  expect(perms.size() == 24, std::to_string(perms.size()) + " of 24 permutations observed");

  bool rejected = false;
  try {
    eval::assign_blind(tasks, models, {"e1", "e2"}, 1);
  } catch (const Error& e) {
    rejected = e.code() == Errc::too_few_evaluators;
  }
  expect(rejected, "two evaluators were accepted");
  return "byte-exact; 24/24 permutations; 2 evaluators rejected";
}

// ---------------------------------------------------------------- session soak

std::string session_soak() {
  TempDir dir;
  FakeClock clock;
  const std::string sid = "soak";
  std::vector<std::string> expected_users;
  {
    auto rt = fixed_runtime(dir.path(), clock);
    const auto street = rt.store->put(fixture_bytes("street.scene.json"), fixtures::kSceneMime, "s").id;
    const auto form = rt.store->put(fixture_bytes("form.doc.json"), fixtures::kDocumentMime, "f").id;
    const std::vector<std::pair<std::string, std::string>> script{
        {"What is in this image?", street},
        {"What color is the car?", ""},
        {"How many persons are there in the image?", ""},
        {"Which page mentions penicillin?", form},
        {"Extract all the form fields", ""},
    };
    for (int i = 0; i < 40; ++i) {
      const auto& [text, file] = script[i % script.size()];
      AgentRequest req;
      req.model = parse_model_id("orion:fast");
      req.messages.push_back(message_from_json(user_turn(text, file.empty() ? std::vector<std::string>{} : std::vector{file})));
      req.session_id = sid;
      const auto resp = rt.agent->complete(req);
      expect(resp.succeeded, "turn " + std::to_string(i) + " failed: " + resp.content);
      const auto ctx = resp.trace["context_turns"];
      expect(ctx.size() <= rt.agent->config().budget.max_turns, "context over turn budget");
      expected_users.push_back(text);
      clock.advance(1);
    }
  }
  auto rt = fixed_runtime(dir.path(), clock);
  const auto s = rt.sessions->load(sid);
  expect(s.turns.size() == 40, std::to_string(s.turns.size()) + " turns after restart");
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    expect(s.turns[i].index == static_cast<int>(i), "turn index gap");
    expect(s.turns[i].user.text() == expected_users[i], "turn text changed");
  }
  Message q;
  q.role = Role::user;
  q.parts.push_back(ContentPart::make_text("what color was the car in the image"));
  const auto budget = rt.agent->config().budget;
  const auto a = retrieve_context(s, q, budget);
  const auto b = retrieve_context(rt.sessions->load(sid), q, budget);
  expect(a.size() == b.size(), "retrieval not deterministic");
  std::size_t chars = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    expect(a[i].index == b[i].index, "retrieval not deterministic");
    chars += turn_chars(a[i]);
  }
  expect(a.size() <= budget.max_turns, "retrieval over turn budget");
  expect(a.size() == 1 || chars <= budget.max_chars, "retrieval over char budget");
  expect(!a.empty() && a.back().index == 39, "newest turn not retrieved");
  return "40 turns persisted and restored; " + std::to_string(a.size()) + " turns retrieved";
}

// ---------------------------------------------------------------- artifact store

std::string artifact_store() {
  TempDir dir;
  FakeClock clock;
  auto store = make_store(dir.path(), &clock);
  const auto a = store->put("same bytes", "text/plain", "a");
  const auto b = store->put("same bytes", "text/plain", "b");
  expect(a.id == b.id, "identical content got two ids");
  expect(a.id == "file_" + sha256_hex("same bytes").substr(0, 16), "id is not content derived");

  const auto s = store->sign(a.id, 30);
  expect(store->verify(s.url) == a.id, "fresh url rejected");
  auto code_of = [&](const std::string& url) {
    try {
      store->verify(url);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::invalid_value;
  };
  auto tampered = s.url;
  tampered.back() = tampered.back() == 'a' ? 'b' : 'a';
  expect(code_of(tampered) == Errc::bad_signature, "tampered url accepted");
  clock.advance(31);
  expect(code_of(s.url) == Errc::expired, "expired url accepted");

  std::mt19937_64 rng(127);
  for (int i = 0; i < 10000; ++i) {
    std::string bytes(1 + rng() % 48, '\0');
    for (auto& ch : bytes) ch = static_cast<char>(rng() & 0xff);
    const auto f = store->put(bytes, "application/octet-stream", "");
    expect(store->put(bytes, "application/octet-stream", "").id == f.id, "put not idempotent");
    expect(store->get(f.id).bytes == bytes, "bytes changed");
    const auto u = store->sign(f.id, 1 + static_cast<std::int64_t>(rng() % 100)).url;
    expect(store->verify(u) == f.id, "signed url rejected");
    auto t = u;
    const auto pos = t.size() - 1 - rng() % 16;
    t[pos] = t[pos] == '0' ? '1' : '0';
    expect(code_of(t) == Errc::bad_signature, "mutated signature accepted");
  }
  return "idempotent; verify/expiry/tamper; 10000 fuzz iterations";
}

}  // namespace

int main() {
  criterion("geometry suite", 5.0, geometry);
  criterion("timecode round trip", 1.0, timecode);
  criterion("executor oracle equivalence", 30.0, executor_equivalence);
  criterion("reflection loop budget", 10.0, reflection);
  criterion("streaming equivalence", 0, streaming);
  criterion("end-to-end clock workflow", 0, clock_workflow);
  criterion("structured outputs", 0, structured_outputs);
  criterion("composite scoring", 0, composite_scoring);
  criterion("blind assignment", 0, blind_assignment);
  criterion("session soak", 0, session_soak);
  criterion("artifact store", 0, artifact_store);
  std::cout << (g_failed == 0 ? "ALL PASS" : std::to_string(g_failed) + " FAILED") << "\n";
  return g_failed == 0 ? 0 : 1;
}
