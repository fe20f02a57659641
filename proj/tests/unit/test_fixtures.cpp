#include "doctest.h"
#include "orion/fixtures.hpp"
#include "support.hpp"

using namespace orion;
using namespace orion::fixtures;
using orion::test::fixture_bytes;
using orion::test::fixture_path;

namespace {

json load(const std::string& name) { return json::parse(fixture_bytes(name)); }

std::string first_path(const json& doc) {
  auto v = validate_fixture(doc);
  return v.empty() ? "" : v.front().path;
}

}  // namespace

TEST_CASE("shipped fixtures validate and round trip") {
  for (const char* name : {"street.scene.json", "login.scene.json", "empty.scene.json"}) {
    CAPTURE(name);
    const auto j = load(name);
    CHECK(validate_fixture(j).empty());
    const auto s = parse_scene(j);
    CHECK(parse_scene(to_json(s)).objects.size() == s.objects.size());
    CHECK(serialize(parse_scene(json::parse(serialize(s)))) == serialize(s));
  }
  const auto d = parse_document(load("form.doc.json"));
  CHECK(d.pages.size() == 3);
  CHECK(serialize(parse_document(json::parse(serialize(d)))) == serialize(d));
  const auto v = parse_video(load("fireworks.video.json"));
  CHECK(v.duration_ms == 40000);
  CHECK(v.segments.size() == 4);
  CHECK(serialize(parse_video(json::parse(serialize(v)))) == serialize(v));
}

TEST_CASE("street scene content") {
  const auto s = parse_scene(load("street.scene.json"));
  CHECK(s.width == 640);
  CHECK(s.height == 480);
  REQUIRE(s.objects.size() == 4);
  CHECK(s.objects[1].label == "clock");
  CHECK(s.objects[1].text == "10:09");
  CHECK(s.objects[0].attributes.at("color") == "red");
  CHECK(s.text_blocks.at(0).words.at(0).confidence == doctest::Approx(0.95));
}

TEST_CASE("kind mismatches use dedicated errors") {
  auto expect = [](auto fn, Errc code) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == code);
    }
  };
  expect([] { parse_scene(load("form.doc.json")); }, Errc::not_a_scene);
  expect([] { parse_document(load("street.scene.json")); }, Errc::not_a_document);
  expect([] { parse_video(load("street.scene.json")); }, Errc::not_a_video);
}

TEST_CASE("semantic violations name the offending path") {
  auto scene = load("street.scene.json");
  scene["objects"][0]["bbox"] = {{"x", 0.9}, {"y", 0.1}, {"w", 0.2}, {"h", 0.1}};
  CHECK(first_path(scene) == "objects[0].bbox");
  CHECK_THROWS_AS(parse_scene(scene), Error);

  auto attrs = load("street.scene.json");
  attrs["objects"][0]["attributes"]["color"] = 3;
  CHECK(first_path(attrs) == "objects[0].attributes.color");

  auto doc = load("form.doc.json");
  doc["pages"][1]["blocks"][0]["order"] = 0;  // duplicate order on page 2
  CHECK(first_path(doc).rfind("pages[1].blocks[", 0) == 0);

  auto video = load("fireworks.video.json");
  video["segments"][3]["seg"]["end_ms"] = 41000;
  CHECK(first_path(video) == "segments[3].seg");

  auto backwards = load("fireworks.video.json");
  backwards["segments"][0]["seg"] = {{"start_ms", 5000}, {"end_ms", 1000}};
  CHECK(first_path(backwards) == "segments[0].seg");

  auto nested = load("fireworks.video.json");
  nested["segments"][2]["scene"]["objects"][0]["bbox"]["w"] = 2.0;
  CHECK(first_path(nested).rfind("segments[2].scene", 0) == 0);
}

TEST_CASE("missing or unknown kind") {
  auto v = validate_fixture(json::object());
  REQUIRE(v.size() == 1);
  CHECK(v[0].path == "kind");
  CHECK(v[0].kind == ViolationKind::missing);
  v = validate_fixture(json{{"kind", "audio"}});
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::enum_);
}

TEST_CASE("published schemas match the built-in ones") {
  CHECK(load("schemas/image.schema.json") == fixture_schema(FixtureKind::scene));
  CHECK(load("schemas/document.schema.json") == fixture_schema(FixtureKind::document));
  CHECK(load("schemas/video.schema.json") == fixture_schema(FixtureKind::video));
  CHECK(kind_tag(FixtureKind::scene) == "image");
}
