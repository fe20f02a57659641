#pragma once

// Structured stand-ins for media. Scene, document and video fixtures are JSON
// documents discriminated by `kind`; all geometry is normalized top-left xywh.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orion/core.hpp"
#include "orion/schema.hpp"

namespace orion::fixtures {

inline constexpr std::string_view kSceneMime = "application/vnd.orion.scene+json";
inline constexpr std::string_view kDocumentMime = "application/vnd.orion.document+json";
inline constexpr std::string_view kVideoMime = "application/vnd.orion.video+json";
inline constexpr std::string_view kMaskMime = "image/x-portable-graymap";
inline constexpr std::string_view kGeneratedMime = "application/vnd.orion.generated+json";

struct Word {
  std::string text;
  NormBBox bbox;
  double confidence{1.0};
};

struct TextBlock {
  std::string text;
  NormBBox bbox;
  std::vector<Word> words;
};

struct SceneObject {
  std::string label;
  NormBBox bbox;
  double confidence{1.0};
  std::vector<NormPoint> points;
  std::map<std::string, std::string> attributes;
  std::optional<std::string> text;
};

struct UiElement {
  std::string kind;  // button | text_field | link | icon | card
  NormBBox bbox;
  std::optional<std::string> text;
};

struct SceneFixture {
  int width{1};
  int height{1};
  std::vector<SceneObject> objects;
  std::vector<TextBlock> text_blocks;
  std::vector<UiElement> ui_elements;
  std::optional<std::int64_t> timestamp_ms;  // set on sampled video frames
};

struct DocBlock {
  std::string type;  // header | paragraph | table | footnote | figure
  std::string text;
  NormBBox bbox;
  int order{0};
};

struct FormField {
  std::string name;
  std::string value;
  NormBBox name_bbox;
  NormBBox value_bbox;
  bool handwritten{false};
};

struct DocPage {
  std::vector<DocBlock> blocks;
  std::vector<FormField> fields;
};

struct DocFixture {
  std::vector<DocPage> pages;
};

struct VideoSegment {
  TimeSegment seg;
  std::vector<std::string> tags;
  std::string caption;
  double salience{0};
  std::optional<SceneFixture> scene;
};

struct VideoFixture {
  std::int64_t duration_ms{0};
  double fps{30};
  int width{640};
  int height{360};
  std::vector<VideoSegment> segments;
};

enum class FixtureKind { scene, document, video };

std::string_view kind_tag(FixtureKind k) noexcept;  // "image" | "document" | "video"

/// Structural schema for each fixture kind.
const json& fixture_schema(FixtureKind k);

/// Schema plus semantic checks (geometry ranges, reading-order permutations,
/// segment bounds). Empty when valid; otherwise the first problem found.
std::vector<Violation> validate_fixture(const json& doc);

// Parsers throw Error(invalid_fixture, "<path>: <detail>") on any violation and
// Error(not_a_scene | not_a_document | not_a_video) on a kind mismatch.
SceneFixture parse_scene(const json& j);
DocFixture parse_document(const json& j);
VideoFixture parse_video(const json& j);

json to_json(const SceneFixture& s);
json to_json(const DocFixture& d);
json to_json(const VideoFixture& v);

/// Canonical serialized bytes, used as artifact content.
std::string serialize(const SceneFixture& s);
std::string serialize(const DocFixture& d);
std::string serialize(const VideoFixture& v);

}  // namespace orion::fixtures
