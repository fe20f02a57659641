#pragma once

// Shared domain types for messages, media references and normalized geometry,
// plus the pure coordinate and timecode math used throughout the agent.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "orion/error.hpp"

namespace orion {

using json = nlohmann::json;

// ---------------------------------------------------------------- geometry

/// Tolerance absorbed by range checks on x+w and y+h.
inline constexpr double kBoxSlack = 1e-9;

/// Normalized top-left + size box, each component a fraction of the image extent.
struct NormBBox {
  double x{0}, y{0}, w{0}, h{0};

  bool valid() const noexcept;
  double area() const noexcept { return w * h; }
  friend bool operator==(const NormBBox&, const NormBBox&) = default;
};

inline constexpr NormBBox kFullFrame{0.0, 0.0, 1.0, 1.0};

struct NormPoint {
  double x{0}, y{0};

  bool valid() const noexcept;
  friend bool operator==(const NormPoint&, const NormPoint&) = default;
};

/// Intersection of `box` with `crop`, re-expressed in crop-relative coordinates.
/// Returns nullopt when the intersection has zero area.
std::optional<NormBBox> rebase_into_crop(const NormBBox& box, const NormBBox& crop);

/// Crop-relative image of a point, or nullopt when the point lies outside the crop.
std::optional<NormPoint> rebase_point_into_crop(const NormPoint& p, const NormBBox& crop);

/// Quarter turn counterclockwise: (x, y) -> (y, 1 - x).
NormPoint rotate90ccw_point(const NormPoint& p) noexcept;

/// (x, y, w, h) -> (y, 1 - x - w, h, w), clamped into the unit square.
NormBBox rotate90ccw_bbox(const NormBBox& b) noexcept;

NormPoint bbox_center(const NormBBox& b) noexcept;

json to_json(const NormBBox& b);
json to_json(const NormPoint& p);
NormBBox bbox_from_json(const json& j);
NormPoint point_from_json(const json& j);

// ---------------------------------------------------------------- time

/// Millisecond interval [start_ms, end_ms].
struct TimeSegment {
  std::int64_t start_ms{0};
  std::int64_t end_ms{0};

  bool valid() const noexcept { return start_ms >= 0 && start_ms <= end_ms; }
  std::int64_t length() const noexcept { return end_ms - start_ms; }
  friend bool operator==(const TimeSegment&, const TimeSegment&) = default;
};

/// Accepts HH:MM:SS, HH:MM:SS.mmm and MM:SS.
std::int64_t parse_timecode(std::string_view s);

/// Canonical HH:MM:SS with a .mmm suffix only when the sub-second part is nonzero.
std::string format_timecode(std::int64_t ms);

json to_json(const TimeSegment& s);
TimeSegment segment_from_json(const json& j);

// ---------------------------------------------------------------- model ids

enum class Mode { auto_, fast };

struct ModelId {
  std::string family;
  Mode mode{Mode::auto_};

  std::string render() const;
  friend bool operator==(const ModelId&, const ModelId&) = default;
};

ModelId parse_model_id(std::string_view s);
std::string_view mode_name(Mode m) noexcept;

// ---------------------------------------------------------------- artifacts

enum class Modality { image, video, document, audio, text, mask };

std::string_view modality_name(Modality m) noexcept;
Modality parse_modality(std::string_view s);

struct ArtifactRef {
  std::string id;
  Modality modality{Modality::text};
  std::string mime;
  std::string url;
  std::map<std::string, std::string> meta;

  friend bool operator==(const ArtifactRef&, const ArtifactRef&) = default;
};

json to_json(const ArtifactRef& a);
ArtifactRef artifact_from_json(const json& j);

/// Reference to a single-channel 8-bit label raster stored as a P5 graymap.
struct MaskRef {
  ArtifactRef artifact;
  int width{0};
  int height{0};
  int num_labels{1};
};

json to_json(const MaskRef& m);

struct Detection {
  std::string label;
  NormBBox bbox;
  double confidence{0};

  friend bool operator==(const Detection&, const Detection&) = default;
};

json to_json(const Detection& d);
Detection detection_from_json(const json& j);

// ---------------------------------------------------------------- messages

/// Opaque id of an uploaded file: `file_` followed by 16 lowercase hex digits.
bool is_file_id(std::string_view s) noexcept;

enum class PartKind { text, image_url, input_file, artifact };
enum class Detail { auto_, low, high };

struct ContentPart {
  PartKind kind{PartKind::text};
  std::string text;
  std::string url;
  Detail detail{Detail::auto_};
  std::string file_id;
  std::optional<ArtifactRef> artifact;

  static ContentPart make_text(std::string t);
  static ContentPart make_image_url(std::string url, Detail d = Detail::auto_);
  static ContentPart make_file(std::string file_id);
  static ContentPart make_artifact(ArtifactRef a);
};

enum class Role { system, user, assistant, tool };

std::string_view role_name(Role r) noexcept;

struct Message {
  Role role{Role::user};
  std::vector<ContentPart> parts;

  /// Text parts joined by newlines.
  std::string text() const;
  std::vector<std::string> file_ids() const;
};

/// Chat-completions wire shape; `content` may be a string or a list of typed parts.
json to_json(const ContentPart& p);
json to_json(const Message& m);
ContentPart part_from_json(const json& j);
Message message_from_json(const json& j);

/// Throws Errc::invalid_value when the message breaks its invariants.
void validate_message(const Message& m);

// ---------------------------------------------------------------- schemas

/// Object-rooted JSON-schema document.
struct OutputSchema {
  json root;

  static OutputSchema from_json(json root);
  std::vector<std::string> required_keys() const;
};

}  // namespace orion
