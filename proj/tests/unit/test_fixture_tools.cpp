#include <random>

#include "doctest.h"
#include "support.hpp"

using namespace orion;
using namespace orion::fixtures;
using namespace orion::test;

namespace {

SceneFixture street() { return parse_scene(json::parse(fixture_bytes("street.scene.json"))); }
SceneFixture login() { return parse_scene(json::parse(fixture_bytes("login.scene.json"))); }
DocFixture form() { return parse_document(json::parse(fixture_bytes("form.doc.json"))); }
VideoFixture fireworks() { return parse_video(json::parse(fixture_bytes("fireworks.video.json"))); }

// Pixels whose centers fall in [x, x+w) x [y, y+h), counted one by one.
std::size_t center_count(const NormBBox& b, int W, int H) {
  std::size_t n = 0;
  for (int py = 0; py < H; ++py) {
    const double cy = (py + 0.5) / H;
    if (cy < b.y || cy >= b.y + b.h) continue;
    for (int px = 0; px < W; ++px) {
      const double cx = (px + 0.5) / W;
      if (cx >= b.x && cx < b.x + b.w) ++n;
    }
  }
  return n;
}

struct Env {
  TempDir dir;
  std::shared_ptr<ArtifactStore> store = make_store(dir.path() / "objects");
  std::shared_ptr<ToolRegistry> reg = fixture_registry();
  ToolContext ctx{store};

  json upload(const std::string& name, std::string_view mime) {
    return json{{"file_id", store->put(fixture_bytes(name), mime, name).id}};
  }
  ToolResult call(const std::string& tool, const json& in) { return reg->invoke(tool, in, ctx); }
};

}  // namespace

TEST_CASE("label matching") {
  CHECK(label_matches("car", "the red car"));
  CHECK(label_matches("traffic light", "lights? no, light"));
  CHECK(label_matches("person", "persons"));
  CHECK(label_matches("woman", "people"));
  CHECK(label_matches("anything", "all objects"));
  CHECK_FALSE(label_matches("car", "truck"));
}

TEST_CASE("caption orders labels by area") {
  const auto c = caption(street());
  CHECK(c["caption"] == "A scene with car, person, clock, traffic light. Visible text: \"10:09\", \"MAIN ST\".");
  CHECK(c["tags"] == json::array({"car", "clock", "person", "traffic light"}));
  CHECK(caption(parse_scene(json::parse(fixture_bytes("empty.scene.json"))))["caption"] == "An empty scene.");
}

TEST_CASE("vqa answer forms") {
  CHECK(vqa(street(), "What color is the car?", false)["answer"] == "The car's color is red.");
  CHECK(vqa(street(), "What time does the clock show?", false)["answer"] == "The clock shows 10:09.");
  CHECK(vqa(street(), "How many persons are there?", false)["answer"] == "1");
  CHECK(vqa(street(), "Is there a dog?", false)["answer"] == "not present");
  const auto g = vqa(street(), "Where is the car?", true);
  CHECK(g["answer"] == "There is a car at (0.10, 0.20, 0.30, 0.40).");
  REQUIRE(g["regions"].size() == 1);
  CHECK(g["regions"][0]["label"] == "car");
}

TEST_CASE("detect sorts by confidence") {
  const auto d = detect(street(), "objects");
  REQUIRE(d.size() == 4);
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d[i - 1].confidence >= d[i].confidence);
  CHECK(d[0].label == "car");
  CHECK(detect(street(), "clock").size() == 1);
  CHECK(detect(street(), "zebra").empty());
}

TEST_CASE("segment pixels agree with a per-pixel center test") {
  const auto s = street();
  const auto r = segment(s, "objects", SegmentMode::instance);
  CHECK(r.num_labels == 5);
  REQUIRE(r.classes.size() == 4);
  // instance ids follow object order; later objects overwrite earlier ones
  std::vector<std::size_t> counted(5, 0);
  for (auto p : r.pixels) ++counted[p];
  std::vector<std::uint8_t> expect(static_cast<std::size_t>(s.width) * s.height, 0);
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& b = s.objects[i].bbox;
    for (int py = 0; py < s.height; ++py) {
      for (int px = 0; px < s.width; ++px) {
        const double cx = (px + 0.5) / s.width, cy = (py + 0.5) / s.height;
        if (cx >= b.x && cx < b.x + b.w && cy >= b.y && cy < b.y + b.h) {
          expect[static_cast<std::size_t>(py) * s.width + px] = static_cast<std::uint8_t>(i + 1);
        }
      }
    }
  }
  CHECK(r.pixels == expect);
  CHECK(counted[1] == center_count(s.objects[0].bbox, s.width, s.height));
  CHECK(counted[1] == 192u * 192u);
}

TEST_CASE("property: segment area matches the center oracle on random scenes") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 97);
  for (int i = 0; i < 200; ++i) {
    SceneFixture s;
    s.width = dim(rng);
    s.height = dim(rng);
    const double x = u(rng), y = u(rng);
    const NormBBox b{x, y, u(rng) * (1 - x), u(rng) * (1 - y)};
    s.objects.push_back({"thing", b, 1.0, {}, {}, {}});
    const auto r = segment(s, "thing", SegmentMode::semantic);
    std::size_t n = 0;
    for (auto p : r.pixels) n += p == 1;
    REQUIRE(n == center_count(b, s.width, s.height));
  }
}

TEST_CASE("semantic mode shares ids per class") {
  SceneFixture s;
  s.width = 10;
  s.height = 10;
  s.objects.push_back({"person", {0, 0, 0.2, 0.2}, 1.0, {}, {}, {}});
  s.objects.push_back({"person", {0.5, 0.5, 0.2, 0.2}, 1.0, {}, {}, {}});
  CHECK(segment(s, "persons", SegmentMode::semantic).num_labels == 2);
  CHECK(segment(s, "persons", SegmentMode::instance).num_labels == 3);
}

TEST_CASE("pgm round trip") {
  const auto r = segment(street(), "car", SegmentMode::instance);
  const auto bytes = encode_pgm(r);
  CHECK(bytes.rfind("P5\n640 480\n255\n", 0) == 0);
  const auto back = decode_pgm(bytes);
  CHECK(back.width == 640);
  CHECK(back.height == 480);
  CHECK(back.pixels == r.pixels);
  CHECK(back.num_labels == 2);
  CHECK_THROWS_AS(decode_pgm("P2\n1 1\n255\n\x01"), Error);
  CHECK_THROWS_AS(decode_pgm("P5\n2 2\n255\n\x01"), Error);
}

TEST_CASE("point and ocr") {
  const auto p = point(street(), "person");
  CHECK(p["count"] == 1);
  CHECK(p["points"][0]["x"] == doctest::Approx(0.81));
  const auto c = point(street(), "car");
  CHECK(c["points"][0]["x"] == doctest::Approx(0.25));
  CHECK(c["points"][0]["y"] == doctest::Approx(0.40));
  const auto o = ocr_image(street());
  CHECK(o["text"] == "10:09\nMAIN ST");
  CHECK(o["words"].size() == 3);
}

TEST_CASE("ui parse excludes kinds") {
  CHECK(ui_parse(login(), {})["elements"].size() == 5);
  const auto only_text = ui_parse(login(), {"button", "link", "icon"});
  REQUIRE(only_text["elements"].size() == 2);
  CHECK(only_text["elements"][0]["kind"] == "text_field");
}

TEST_CASE("crop keeps only intersecting content, rebased") {
  const auto s = street();
  const NormBBox clock = s.objects[1].bbox;
  const auto c = crop_scene(s, clock);
  CHECK(c.width == 64);
  CHECK(c.height == 48);
  REQUIRE(c.text_blocks.size() == 1);
  CHECK(c.text_blocks[0].text == "10:09");
  CHECK(c.text_blocks[0].bbox.x == doctest::Approx(0.2));
  CHECK(c.text_blocks[0].bbox.w == doctest::Approx(0.6));
  CHECK(ocr_image(c)["text"] == "10:09");
  CHECK_THROWS_AS(crop_scene(s, {0.1, 0.1, 0.0, 0.2}), Error);
  CHECK_THROWS_AS(crop_scene(s, {0.1, 0.1, 0.0005, 0.2}), Error);
}

TEST_CASE("rotate swaps dims and returns after four turns") {
  const auto s = street();
  const auto r = rotate_scene(s, 1);
  CHECK(r.width == 480);
  CHECK(r.height == 640);
  CHECK(serialize(rotate_scene(r, 3)) != "");
  const auto full = rotate_scene(rotate_scene(s, 2), 2);
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    CHECK(full.objects[i].bbox.x == doctest::Approx(s.objects[i].bbox.x));
    CHECK(full.objects[i].bbox.h == doctest::Approx(s.objects[i].bbox.h));
  }
}

TEST_CASE("document tools") {
  const auto d = form();
  const auto page2 = doc_layout(d, 2)["blocks"];
  REQUIRE(page2.size() == 3);
  CHECK(page2[0]["type"] == "header");
  CHECK(page2[0]["order"] == 0);
  CHECK(page2[2]["type"] == "table");
  for (const auto& b : page2) CHECK(b["page"] == 2);
  CHECK(doc_layout(d, std::nullopt)["blocks"].size() >= 8);
  try {
    doc_layout(d, 4);
    FAIL("expected PageOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::page_out_of_range);
  }
  CHECK_THROWS_AS(doc_layout(d, 0), Error);

  const auto fields = doc_form_extract(d)["fields"];
  json name;
  for (const auto& f : fields) {
    if (f["name"] == "Name") name = f;
  }
  CHECK(name["value"] == "John A. Smith");
  CHECK(name["page"] == 3);
  CHECK(name["pages"] == json::array({1, 3}));

  CHECK(doc_paginate(d, "penicillin")["pages"] == json::array({2}));
  CHECK(doc_paginate(d, "nothing matches this")["pages"].empty());
}

TEST_CASE("redaction masks each code point") {
  const auto r = redact_document(form(), {"penicillin"});
  CHECK(r.replacements == 2);
  const std::string mask = [] {
    std::string m;
    for (int i = 0; i < 10; ++i) m += "\xE2\x96\x88";
    return m;
  }();
  CHECK(r.document.pages[1].fields[0].value == mask);
  CHECK(serialize(r.document).find("penicillin") == std::string::npos);
  CHECK(redact_document(form(), {"PENICILLIN"}).replacements == 2);
  CHECK(redact_document(form(), {""}).replacements == 0);
}

TEST_CASE("video tools") {
  const auto v = fireworks();
  const auto cap = video_caption(v);
  REQUIRE(cap["entries"].size() == 4);
  CHECK(cap["entries"][2]["start"] == "00:00:23");
  CHECK(cap["markdown"].get<std::string>().rfind("- **00:00:00 - 00:00:10** ", 0) == 0);

  const auto finale = temporal_ground(v, "the finale");
  CHECK(finale.start_ms == 23000);
  CHECK(finale.end_ms == 28000);
  CHECK(format_timecode(finale.start_ms) == "00:00:23");
  CHECK_THROWS_AS(temporal_ground(v, "penguins"), Error);

  CHECK(sample_instants(v, 10000) == std::vector<std::int64_t>{0, 10000, 20000, 30000});
  CHECK(sample_instants(v, std::vector<std::int64_t>{40000, 25000, -1, 0}) == std::vector<std::int64_t>{25000, 0});
  CHECK_THROWS_AS(sample_instants(v, 0), Error);
  CHECK(frame_at(v, 25000).objects.size() >= 1);
  CHECK(frame_at(v, 25000).timestamp_ms == 25000);
  CHECK(frame_at(v, 15000).objects.empty());

  CHECK(top_segments(v, 2) == std::vector<std::size_t>{2, 1});
  CHECK(top_segments(v, 10).size() == 4);

  const auto t = trim_video(v, {20000, 30000});
  CHECK(t.duration_ms == 10000);
  REQUIRE(t.segments.size() == 3);
  CHECK(t.segments[0].seg == TimeSegment{0, 3000});
  CHECK(t.segments[1].seg == TimeSegment{3000, 8000});
  CHECK(t.segments[2].seg == TimeSegment{8000, 10000});
  CHECK_THROWS_AS(trim_video(v, {30000, 41000}), Error);
  CHECK_THROWS_AS(trim_video(v, {3000, 1000}), Error);
}

TEST_CASE("registry: clock workflow through stored artifacts") {
  Env env;
  const auto img = env.upload("street.scene.json", kSceneMime);
  const auto det = env.call("detect", {{"image", img}, {"query", "clock"}});
  REQUIRE(det.ok());
  const auto box = det.output["detections"][0]["bbox"];
  const auto crop = env.call("crop", {{"image", img}, {"bbox", box}});
  REQUIRE(crop.ok());
  REQUIRE(crop.artifacts.size() == 1);
  CHECK(crop.artifacts[0].meta.at("width") == "64");
  const auto ocr = env.call("ocr_image", {{"image", crop.output["image"]}});
  REQUIRE(ocr.ok());
  CHECK(ocr.output["text"] == "10:09");
}

TEST_CASE("registry: artifact emitting tools") {
  Env env;
  const auto img = env.upload("street.scene.json", kSceneMime);
  const auto seg = env.call("segment", {{"image", img}, {"query", "car"}});
  REQUIRE(seg.ok());
  CHECK(seg.output["mask"]["num_labels"] == 2);
  const auto mask = decode_pgm(env.store->get(seg.artifacts[0].id).bytes);
  CHECK(mask.width == 640);

  const auto rot = env.call("rotate", {{"image", img}, {"quarter_turns_ccw", 1}});
  REQUIRE(rot.ok());
  CHECK(rot.artifacts[0].meta.at("width") == "480");
  CHECK_FALSE(env.call("rotate", {{"image", img}, {"quarter_turns_ccw", 4}}).ok());

  const auto vid = env.upload("fireworks.video.json", kVideoMime);
  const auto hl = env.call("highlight_extract", {{"video", vid}, {"k", 2}});
  REQUIRE(hl.ok());
  REQUIRE(hl.output["highlights"].size() == 2);
  CHECK(hl.output["highlights"][0]["start"] == "00:00:23");
  CHECK(env.store->verify(hl.output["highlights"][0]["url"].get<std::string>()) == hl.output["highlights"][0]["id"]);

  const auto frames = env.call("frame_sample", {{"video", vid}, {"at", {{"interval_ms", 15000}}}});
  REQUIRE(frames.ok());
  CHECK(frames.output["timestamps_ms"] == json::array({0, 15000, 30000}));
  CHECK(frames.artifacts.size() == 3);

  const auto trim = env.call("trim", {{"video", vid}, {"seg", {{"start_ms", 30000}, {"end_ms", 50000}}}});
  CHECK_FALSE(trim.ok());
  CHECK(trim.failure == FailureKind::rejected);

  const auto doc = env.upload("form.doc.json", kDocumentMime);
  const auto red = env.call("doc_redact", {{"document", doc}, {"targets", {"John"}}});
  REQUIRE(red.ok());
  CHECK(red.output["replacements"] == 2);
  CHECK(env.call("doc_paginate", {{"document", doc}, {"query", "penicillin"}}).output["pages"] == json::array({2}));
}

TEST_CASE("registry: kind mismatch and generate stub") {
  Env env;
  const auto doc = env.upload("form.doc.json", kDocumentMime);
  const auto wrong = env.call("caption", {{"image", doc}});
  CHECK_FALSE(wrong.ok());
  CHECK(wrong.failure == FailureKind::rejected);
  CHECK_FALSE(wrong.retryable());

  const auto t2i = env.call("generate", {{"mode", "t2i"}, {"prompt", "a red car"}});
  REQUIRE(t2i.ok());
  CHECK(t2i.output["artifact"]["modality"] == "image");
  const auto missing = env.call("generate", {{"mode", "inpaint"}, {"prompt", "x"}});
  CHECK_FALSE(missing.ok());
  CHECK(missing.error_message.find("reference") != std::string::npos);
}

TEST_CASE("backend bindings") {
  CHECK(resolve_backend("fixture:caption"));
  CHECK(resolve_backend("stub:generate"));
  CHECK_FALSE(resolve_backend("remote:caption"));
  CHECK(fixture_descriptors().size() == 19);
}
