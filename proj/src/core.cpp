#include "orion/core.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace orion {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_mode: return "UnknownMode";
    case Errc::malformed_model_id: return "MalformedModelId";
    case Errc::malformed_timecode: return "MalformedTimecode";
    case Errc::degenerate_crop: return "DegenerateCrop";
    case Errc::invalid_value: return "InvalidValue";
    case Errc::empty_payload: return "EmptyPayload";
    case Errc::payload_too_large: return "PayloadTooLarge";
    case Errc::storage_full: return "StorageFull";
    case Errc::not_found: return "NotFound";
    case Errc::bad_signature: return "BadSignature";
    case Errc::expired: return "Expired";
    case Errc::malformed_url: return "Malformed";
    case Errc::io_error: return "IoError";
    case Errc::duplicate_name: return "DuplicateName";
    case Errc::schema_shape: return "SchemaShape";
    case Errc::unknown_tool: return "UnknownTool";
    case Errc::registry_frozen: return "RegistryFrozen";
    case Errc::not_a_scene: return "NotAScene";
    case Errc::not_a_document: return "NotADocument";
    case Errc::not_a_video: return "NotAVideo";
    case Errc::invalid_fixture: return "InvalidFixture";
    case Errc::missing_refs: return "MissingRefs";
    case Errc::page_out_of_range: return "PageOutOfRange";
    case Errc::no_match: return "NoMatch";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::no_applicable_pattern: return "NoApplicablePattern";
    case Errc::backend_unavailable: return "BackendUnavailable";
    case Errc::invalid_plan: return "InvalidPlan";
    case Errc::unknown_hint: return "UnknownHint";
    case Errc::path_miss: return "PathMiss";
    case Errc::unready_ref: return "UnreadyRef";
    case Errc::judge_unavailable: return "JudgeUnavailable";
    case Errc::unknown_session: return "UnknownSession";
    case Errc::unsupported_response_format: return "UnsupportedResponseFormat";
    case Errc::structured_output_failure: return "StructuredOutputFailure";
    case Errc::too_few_evaluators: return "TooFewEvaluators";
    case Errc::too_many_models: return "TooManyModels";
    case Errc::score_out_of_range: return "OutOfRange";
    case Errc::malformed_csv: return "MalformedCsv";
  }
  return "Unknown";
}

// ---------------------------------------------------------------- geometry

namespace {

bool unit(double v) noexcept { return v >= 0.0 && v <= 1.0; }

double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

struct AxisSpan {
  double offset;
  double length;
};

// One axis of rebase_into_crop. A span fully inside the crop keeps its length
// untouched so that rebasing into the full frame is exact.
std::optional<AxisSpan> rebase_axis(double p, double len, double c, double clen) {
  const double lo = std::max(p, c);
  const double hi = std::min(p + len, c + clen);
  const bool inside = p >= c && p + len <= c + clen + kBoxSlack;
  const double inter = inside ? len : hi - lo;
  if (!(inter > 0.0)) return std::nullopt;
  double offset = clamp01((lo - c) / clen);
  double rel = std::min(inter / clen, 1.0);
  if (offset + rel > 1.0 + kBoxSlack) rel = 1.0 - offset;
  return AxisSpan{offset, rel};
}

}  // namespace

bool NormBBox::valid() const noexcept {
  return unit(x) && unit(y) && unit(w) && unit(h) && x + w <= 1.0 + kBoxSlack &&
         y + h <= 1.0 + kBoxSlack;
}

bool NormPoint::valid() const noexcept { return unit(x) && unit(y); }

std::optional<NormBBox> rebase_into_crop(const NormBBox& box, const NormBBox& crop) {
  if (!(crop.w > 0.0) || !(crop.h > 0.0)) {
    throw Error(Errc::degenerate_crop, "crop has zero width or height");
  }
  auto ax = rebase_axis(box.x, box.w, crop.x, crop.w);
  if (!ax) return std::nullopt;
  auto ay = rebase_axis(box.y, box.h, crop.y, crop.h);
  if (!ay) return std::nullopt;
  return NormBBox{ax->offset, ay->offset, ax->length, ay->length};
}

std::optional<NormPoint> rebase_point_into_crop(const NormPoint& p, const NormBBox& crop) {
  if (!(crop.w > 0.0) || !(crop.h > 0.0)) {
    throw Error(Errc::degenerate_crop, "crop has zero width or height");
  }
  if (p.x < crop.x || p.y < crop.y || p.x > crop.x + crop.w + kBoxSlack ||
      p.y > crop.y + crop.h + kBoxSlack) {
    return std::nullopt;
  }
  return NormPoint{clamp01((p.x - crop.x) / crop.w), clamp01((p.y - crop.y) / crop.h)};
}

NormPoint rotate90ccw_point(const NormPoint& p) noexcept { return {p.y, 1.0 - p.x}; }

NormBBox rotate90ccw_bbox(const NormBBox& b) noexcept {
  return {clamp01(b.y), clamp01(1.0 - b.x - b.w), b.h, b.w};
}

NormPoint bbox_center(const NormBBox& b) noexcept { return {b.x + b.w / 2.0, b.y + b.h / 2.0}; }

json to_json(const NormBBox& b) { return json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

json to_json(const NormPoint& p) { return json{{"x", p.x}, {"y", p.y}}; }

NormBBox bbox_from_json(const json& j) {
  NormBBox b;
  if (j.is_array() && j.size() == 4) {
    b = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  } else if (j.is_object()) {
    b = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
         j.at("h").get<double>()};
  } else {
    throw Error(Errc::invalid_value, "bbox must be {x,y,w,h} or a 4-element array");
  }
  if (!b.valid()) throw Error(Errc::invalid_value, "bbox outside the unit square");
  return b;
}

NormPoint point_from_json(const json& j) {
  NormPoint p;
  if (j.is_array() && j.size() == 2) {
    p = {j[0].get<double>(), j[1].get<double>()};
  } else if (j.is_object()) {
    p = {j.at("x").get<double>(), j.at("y").get<double>()};
  } else {
    throw Error(Errc::invalid_value, "point must be {x,y} or a 2-element array");
  }
  if (!p.valid()) throw Error(Errc::invalid_value, "point outside the unit square");
  return p;
}

// ---------------------------------------------------------------- time

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::int64_t to_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(Errc::malformed_timecode, "timecode field out of range");
  }
  return v;
}

[[noreturn]] void bad_timecode(std::string_view s) {
  throw Error(Errc::malformed_timecode, "malformed timecode '" + std::string(s) + "'");
}

}  // namespace

std::int64_t parse_timecode(std::string_view s) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ':') {
      fields.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (fields.size() != 2 && fields.size() != 3) bad_timecode(s);

  std::string_view sec = fields.back();
  std::int64_t millis = 0;
  if (auto dot = sec.find('.'); dot != std::string_view::npos) {
    // fractional seconds only in the HH:MM:SS.mmm form
    std::string_view frac = sec.substr(dot + 1);
    if (fields.size() != 3 || frac.size() != 3 || !all_digits(frac)) bad_timecode(s);
    millis = to_int(frac);
    sec = sec.substr(0, dot);
  }

  std::int64_t hours = 0;
  std::string_view min = fields[fields.size() - 2];
  if (fields.size() == 3) {
    if (fields[0].size() < 2 || !all_digits(fields[0])) bad_timecode(s);
    hours = to_int(fields[0]);
  }
  if (min.size() != 2 || sec.size() != 2 || !all_digits(min) || !all_digits(sec)) bad_timecode(s);
  const std::int64_t minutes = to_int(min);
  const std::int64_t seconds = to_int(sec);
  if (minutes >= 60 || seconds >= 60) bad_timecode(s);
  return ((hours * 60 + minutes) * 60 + seconds) * 1000 + millis;
}

std::string format_timecode(std::int64_t ms) {
  if (ms < 0) throw Error(Errc::invalid_value, "negative duration");
  const std::int64_t millis = ms % 1000;
  const std::int64_t total_s = ms / 1000;
  char buf[48];
  int n = std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld",
                        static_cast<long long>(total_s / 3600),
                        static_cast<long long>((total_s / 60) % 60),
                        static_cast<long long>(total_s % 60));
  if (millis != 0) std::snprintf(buf + n, sizeof buf - n, ".%03lld", static_cast<long long>(millis));
  return buf;
}

json to_json(const TimeSegment& s) { return json{{"start_ms", s.start_ms}, {"end_ms", s.end_ms}}; }

TimeSegment segment_from_json(const json& j) {
  TimeSegment s{j.at("start_ms").get<std::int64_t>(), j.at("end_ms").get<std::int64_t>()};
  if (!s.valid()) throw Error(Errc::invalid_value, "segment must satisfy 0 <= start_ms <= end_ms");
  return s;
}

// ---------------------------------------------------------------- model ids

std::string_view mode_name(Mode m) noexcept { return m == Mode::fast ? "fast" : "auto"; }

std::string ModelId::render() const { return family + ":" + std::string(mode_name(mode)); }

ModelId parse_model_id(std::string_view s) {
  if (s.empty()) throw Error(Errc::malformed_model_id, "empty model id");
  ModelId id;
  auto colon = s.rfind(':');
  if (colon == std::string_view::npos) {
    id.family = std::string(s);
    return id;
  }
  id.family = std::string(s.substr(0, colon));
  std::string_view mode = s.substr(colon + 1);
  if (id.family.empty()) throw Error(Errc::malformed_model_id, "model id has no family");
  if (mode == "auto") {
    id.mode = Mode::auto_;
  } else if (mode == "fast") {
    id.mode = Mode::fast;
  } else {
    throw Error(Errc::unknown_mode, "unknown model mode '" + std::string(mode) + "'");
  }
  return id;
}

// ---------------------------------------------------------------- artifacts

std::string_view modality_name(Modality m) noexcept {
  switch (m) {
    case Modality::image: return "image";
    case Modality::video: return "video";
    case Modality::document: return "document";
    case Modality::audio: return "audio";
    case Modality::text: return "text";
    case Modality::mask: return "mask";
  }
  return "text";
}

Modality parse_modality(std::string_view s) {
  for (auto m : {Modality::image, Modality::video, Modality::document, Modality::audio,
                 Modality::text, Modality::mask}) {
    if (modality_name(m) == s) return m;
  }
  throw Error(Errc::invalid_value, "unknown modality '" + std::string(s) + "'");
}

json to_json(const ArtifactRef& a) {
  return json{{"id", a.id},
              {"modality", modality_name(a.modality)},
              {"mime", a.mime},
              {"url", a.url},
              {"meta", a.meta}};
}

ArtifactRef artifact_from_json(const json& j) {
  ArtifactRef a;
  a.id = j.at("id").get<std::string>();
  a.modality = parse_modality(j.value("modality", std::string("text")));
  a.mime = j.value("mime", std::string());
  a.url = j.value("url", std::string());
  if (j.contains("meta")) a.meta = j.at("meta").get<std::map<std::string, std::string>>();
  return a;
}

json to_json(const MaskRef& m) {
  return json{{"artifact", to_json(m.artifact)},
              {"width", m.width},
              {"height", m.height},
              {"num_labels", m.num_labels}};
}

json to_json(const Detection& d) {
  return json{{"label", d.label}, {"bbox", to_json(d.bbox)}, {"confidence", d.confidence}};
}

Detection detection_from_json(const json& j) {
  Detection d{j.at("label").get<std::string>(), bbox_from_json(j.at("bbox")),
              j.at("confidence").get<double>()};
  if (!unit(d.confidence)) throw Error(Errc::invalid_value, "confidence outside [0,1]");
  return d;
}

// ---------------------------------------------------------------- messages

bool is_file_id(std::string_view s) noexcept {
  if (s.size() != 21 || s.substr(0, 5) != "file_") return false;
  return std::all_of(s.begin() + 5, s.end(),
                     [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

ContentPart ContentPart::make_text(std::string t) {
  ContentPart p;
  p.kind = PartKind::text;
  p.text = std::move(t);
  return p;
}

ContentPart ContentPart::make_image_url(std::string url, Detail d) {
  ContentPart p;
  p.kind = PartKind::image_url;
  p.url = std::move(url);
  p.detail = d;
  return p;
}

ContentPart ContentPart::make_file(std::string file_id) {
  ContentPart p;
  p.kind = PartKind::input_file;
  p.file_id = std::move(file_id);
  return p;
}

ContentPart ContentPart::make_artifact(ArtifactRef a) {
  ContentPart p;
  p.kind = PartKind::artifact;
  p.artifact = std::move(a);
  return p;
}

std::string_view role_name(Role r) noexcept {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "user";
}

std::string Message::text() const {
  std::string out;
  for (const auto& p : parts) {
    if (p.kind != PartKind::text) continue;
    if (!out.empty()) out += '\n';
    out += p.text;
  }
  return out;
}

std::vector<std::string> Message::file_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : parts) {
    if (p.kind == PartKind::input_file) ids.push_back(p.file_id);
  }
  return ids;
}

namespace {

std::string_view detail_name(Detail d) {
  switch (d) {
    case Detail::low: return "low";
    case Detail::high: return "high";
    case Detail::auto_: break;
  }
  return "auto";
}

Detail parse_detail(std::string_view s) {
  if (s == "auto") return Detail::auto_;
  if (s == "low") return Detail::low;
  if (s == "high") return Detail::high;
  throw Error(Errc::invalid_value, "unknown image detail '" + std::string(s) + "'");
}

Role parse_role(std::string_view s) {
  for (auto r : {Role::system, Role::user, Role::assistant, Role::tool}) {
    if (role_name(r) == s) return r;
  }
  throw Error(Errc::invalid_value, "unknown role '" + std::string(s) + "'");
}

}  // namespace

json to_json(const ContentPart& p) {
  switch (p.kind) {
    case PartKind::text: return json{{"type", "text"}, {"text", p.text}};
    case PartKind::image_url:
      return json{{"type", "image_url"},
                  {"image_url", {{"url", p.url}, {"detail", detail_name(p.detail)}}}};
    case PartKind::input_file: return json{{"type", "input_file"}, {"file_id", p.file_id}};
    case PartKind::artifact:
      return json{{"type", "artifact"}, {"artifact", p.artifact ? to_json(*p.artifact) : json()}};
  }
  return json();
}

json to_json(const Message& m) {
  json parts = json::array();
  for (const auto& p : m.parts) parts.push_back(to_json(p));
  return json{{"role", role_name(m.role)}, {"content", parts}};
}

ContentPart part_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw Error(Errc::invalid_value, "content part must be an object with a string 'type'");
  }
  const auto type = j["type"].get<std::string>();
  if (type == "text") {
    if (!j.contains("text") || !j["text"].is_string()) {
      throw Error(Errc::invalid_value, "text part requires string 'text'");
    }
    return ContentPart::make_text(j["text"].get<std::string>());
  }
  if (type == "image_url") {
    const json& iu = j.value("image_url", json());
    if (iu.is_string()) return ContentPart::make_image_url(iu.get<std::string>());
    if (!iu.is_object() || !iu.contains("url") || !iu["url"].is_string()) {
      throw Error(Errc::invalid_value, "image_url part requires image_url.url");
    }
    return ContentPart::make_image_url(iu["url"].get<std::string>(),
                                       parse_detail(iu.value("detail", std::string("auto"))));
  }
  if (type == "input_file") {
    if (!j.contains("file_id") || !j["file_id"].is_string()) {
      throw Error(Errc::invalid_value, "input_file part requires string 'file_id'");
    }
    return ContentPart::make_file(j["file_id"].get<std::string>());
  }
  if (type == "artifact") return ContentPart::make_artifact(artifact_from_json(j.at("artifact")));
  throw Error(Errc::invalid_value, "unsupported content part type '" + type + "'");
}

Message message_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_value, "message must be an object");
  Message m;
  m.role = parse_role(j.value("role", std::string("user")));
  const json& content = j.value("content", json());
  if (content.is_string()) {
    m.parts.push_back(ContentPart::make_text(content.get<std::string>()));
  } else if (content.is_array()) {
    for (const auto& p : content) m.parts.push_back(part_from_json(p));
  } else {
    throw Error(Errc::invalid_value, "message content must be a string or a list of parts");
  }
  validate_message(m);
  return m;
}

void validate_message(const Message& m) {
  if (m.parts.empty()) throw Error(Errc::invalid_value, "message has no content parts");
  if (m.role == Role::tool) {
    const auto& p = m.parts.front();
    if (m.parts.size() != 1 || (p.kind != PartKind::text && p.kind != PartKind::artifact)) {
      throw Error(Errc::invalid_value, "tool message carries exactly one text or artifact part");
    }
  }
  for (const auto& p : m.parts) {
    if (p.kind == PartKind::input_file && !is_file_id(p.file_id)) {
      throw Error(Errc::invalid_value, "malformed file id '" + p.file_id + "'");
    }
    if (p.kind == PartKind::image_url && p.url.empty()) {
      throw Error(Errc::invalid_value, "image_url part has an empty url");
    }
    if (p.kind == PartKind::artifact && !p.artifact) {
      throw Error(Errc::invalid_value, "artifact part without artifact");
    }
  }
}

// ---------------------------------------------------------------- schemas

OutputSchema OutputSchema::from_json(json root) {
  if (!root.is_object() || root.value("type", json()) != "object") {
    throw Error(Errc::schema_shape, "schema must be a JSON object with \"type\": \"object\"");
  }
  return OutputSchema{std::move(root)};
}

std::vector<std::string> OutputSchema::required_keys() const {
  std::vector<std::string> keys;
  if (auto it = root.find("required"); it != root.end() && it->is_array()) {
    for (const auto& k : *it) {
      if (k.is_string()) keys.push_back(k.get<std::string>());
    }
  }
  return keys;
}

}  // namespace orion
