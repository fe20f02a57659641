#pragma once

// Deterministic reference tools over fixture media. The free functions are the
// pure cores; register_fixture_tools() wires them into a ToolRegistry with
// media resolution and artifact emission through the artifact store.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orion/fixtures.hpp"
#include "orion/tool_registry.hpp"

namespace orion::fixtures {

// ---------------------------------------------------------------- matching

/// Case-folded token overlap between a query and an object label. The query
/// word "objects" matches everything; "persons", "faces", "logos" and
/// "landmarks" expand to their label classes.
bool label_matches(std::string_view label, std::string_view query);

// ---------------------------------------------------------------- image

json caption(const SceneFixture& s);
json vqa(const SceneFixture& s, std::string_view question, bool ground);
std::vector<Detection> detect(const SceneFixture& s, std::string_view query);

enum class SegmentMode { semantic, instance };

struct LabelRaster {
  int width{0};
  int height{0};
  std::vector<std::uint8_t> pixels;  // row-major, one byte per pixel
  int num_labels{1};
  json classes;  // [{label_id, class}]
};

LabelRaster segment(const SceneFixture& s, std::string_view query, SegmentMode mode);

/// Binary portable graymap (P5, maxval 255).
std::string encode_pgm(const LabelRaster& r);
LabelRaster decode_pgm(std::string_view bytes);

json point(const SceneFixture& s, std::string_view query);
json ocr_image(const SceneFixture& s);
json ui_parse(const SceneFixture& s, const std::vector<std::string>& exclude);

/// Pixel dims use round-half-up; a crop smaller than one pixel is rejected.
SceneFixture crop_scene(const SceneFixture& s, const NormBBox& box);
SceneFixture rotate_scene(const SceneFixture& s, int quarter_turns_ccw);

// ---------------------------------------------------------------- document

/// Pages are 1-based. No page means every page in page order.
json doc_layout(const DocFixture& d, std::optional<int> page);
json doc_form_extract(const DocFixture& d);
json doc_paginate(const DocFixture& d, std::string_view query);

struct RedactionResult {
  DocFixture document;
  int replacements{0};
};

RedactionResult redact_document(const DocFixture& d, const std::vector<std::string>& targets);

// ---------------------------------------------------------------- video

json video_caption(const VideoFixture& v);
TimeSegment temporal_ground(const VideoFixture& v, std::string_view query);

/// 0, interval, 2*interval, ... strictly before the end.
std::vector<std::int64_t> sample_instants(const VideoFixture& v, std::int64_t interval_ms);
/// Requested instants inside [0, duration), in request order.
std::vector<std::int64_t> sample_instants(const VideoFixture& v, const std::vector<std::int64_t>& at_ms);
SceneFixture frame_at(const VideoFixture& v, std::int64_t t_ms);

/// Segment indices, salience descending, earliest start on ties.
std::vector<std::size_t> top_segments(const VideoFixture& v, std::size_t k);

VideoFixture trim_video(const VideoFixture& v, const TimeSegment& window);

// ---------------------------------------------------------------- registry wiring

std::vector<ToolDescriptor> fixture_descriptors();

/// Resolves "fixture:<name>" and "stub:<name>" bindings; empty function otherwise.
ToolBackend resolve_backend(std::string_view binding);

void register_fixture_tools(ToolRegistry& registry);

}  // namespace orion::fixtures
