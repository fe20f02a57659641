#include "orion/fixtures.hpp"

#include <algorithm>

namespace orion::fixtures {

namespace {

json number_unit() { return json{{"type", "number"}, {"minimum", 0}, {"maximum", 1}}; }

json bbox_schema() {
  return json{{"type", "object"},
              {"required", {"x", "y", "w", "h"}},
              {"properties",
               {{"x", number_unit()}, {"y", number_unit()}, {"w", number_unit()}, {"h", number_unit()}}}};
}

json point_schema() {
  return json{{"type", "object"},
              {"required", {"x", "y"}},
              {"properties", {{"x", number_unit()}, {"y", number_unit()}}}};
}

json string_map() { return json{{"type", "object"}}; }

json build_scene_schema() {
  json word{{"type", "object"},
            {"required", {"text", "bbox", "confidence"}},
            {"properties",
             {{"text", {{"type", "string"}}}, {"bbox", bbox_schema()}, {"confidence", number_unit()}}}};
  json block{{"type", "object"},
             {"required", {"text", "bbox"}},
             {"properties",
              {{"text", {{"type", "string"}}},
               {"bbox", bbox_schema()},
               {"words", {{"type", "array"}, {"items", word}}}}}};
  json object{{"type", "object"},
              {"required", {"label", "bbox"}},
              {"properties",
               {{"label", {{"type", "string"}}},
                {"bbox", bbox_schema()},
                {"confidence", number_unit()},
                {"points", {{"type", "array"}, {"items", point_schema()}}},
                {"attributes", string_map()},
                {"text", {{"type", "string"}}}}}};
  json ui{{"type", "object"},
          {"required", {"kind", "bbox"}},
          {"properties",
           {{"kind", {{"enum", {"button", "text_field", "link", "icon", "card"}}}},
            {"bbox", bbox_schema()},
            {"text", {{"type", "string"}}}}}};
  return json{{"title", "SceneFixture"},
              {"type", "object"},
              {"required", {"kind", "width", "height"}},
              {"properties",
               {{"kind", {{"enum", {"image"}}}},
                {"width", {{"type", "integer"}, {"minimum", 1}}},
                {"height", {{"type", "integer"}, {"minimum", 1}}},
                {"timestamp_ms", {{"type", "integer"}, {"minimum", 0}}},
                {"objects", {{"type", "array"}, {"items", object}}},
                {"text_blocks", {{"type", "array"}, {"items", block}}},
                {"ui_elements", {{"type", "array"}, {"items", ui}}}}}};
}

json build_document_schema() {
  json block{{"type", "object"},
             {"required", {"type", "text", "bbox", "order"}},
             {"properties",
              {{"type", {{"enum", {"header", "paragraph", "table", "footnote", "figure"}}}},
               {"text", {{"type", "string"}}},
               {"bbox", bbox_schema()},
               {"order", {{"type", "integer"}, {"minimum", 0}}}}}};
  json field{{"type", "object"},
             {"required", {"name", "value", "name_bbox", "value_bbox"}},
             {"properties",
              {{"name", {{"type", "string"}}},
               {"value", {{"type", "string"}}},
               {"name_bbox", bbox_schema()},
               {"value_bbox", bbox_schema()},
               {"handwritten", {{"type", "boolean"}}}}}};
  json page{{"type", "object"},
            {"properties",
             {{"blocks", {{"type", "array"}, {"items", block}}},
              {"fields", {{"type", "array"}, {"items", field}}}}}};
  return json{{"title", "DocFixture"},
              {"type", "object"},
              {"required", {"kind", "pages"}},
              {"properties", {{"kind", {{"enum", {"document"}}}}, {"pages", {{"type", "array"}, {"items", page}}}}}};
}

json build_video_schema() {
  json seg{{"type", "object"},
           {"required", {"start_ms", "end_ms"}},
           {"properties",
            {{"start_ms", {{"type", "integer"}, {"minimum", 0}}},
             {"end_ms", {{"type", "integer"}, {"minimum", 0}}}}}};
  json segment{{"type", "object"},
               {"required", {"seg", "caption", "salience"}},
               {"properties",
                {{"seg", seg},
                 {"tags", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                 {"caption", {{"type", "string"}}},
                 {"salience", number_unit()},
                 {"scene", {{"type", "object"}}}}}};
  return json{{"title", "VideoFixture"},
              {"type", "object"},
              {"required", {"kind", "duration_ms", "fps"}},
              {"properties",
               {{"kind", {{"enum", {"video"}}}},
                {"duration_ms", {{"type", "integer"}, {"minimum", 0}}},
                {"fps", {{"type", "number"}, {"minimum", 0}}},
                {"width", {{"type", "integer"}, {"minimum", 1}}},
                {"height", {{"type", "integer"}, {"minimum", 1}}},
                {"segments", {{"type", "array"}, {"items", segment}}}}}};
}

[[noreturn]] void fail(const std::string& path, const std::string& detail) {
  throw Error(Errc::invalid_fixture, path + ": " + detail);
}

std::string at(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

std::string idx(const std::string& parent, std::size_t i) {
  return parent + "[" + std::to_string(i) + "]";
}

NormBBox read_bbox(const json& j, const std::string& path) {
  NormBBox b{j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
             j.at("h").get<double>()};
  if (!b.valid()) fail(path, "box extends past the unit square");
  return b;
}

void check_schema(const json& j, FixtureKind kind) {
  auto v = validate_schema(j, fixture_schema(kind));
  if (!v.empty()) fail(v.front().path, v.front().detail);
}

void check_kind(const json& j, FixtureKind kind) {
  const auto tag = j.is_object() ? j.value("kind", std::string()) : std::string();
  if (tag == kind_tag(kind)) return;
  switch (kind) {
    case FixtureKind::scene: throw Error(Errc::not_a_scene, "input is not an image scene fixture");
    case FixtureKind::document: throw Error(Errc::not_a_document, "input is not a document fixture");
    case FixtureKind::video: throw Error(Errc::not_a_video, "input is not a video fixture");
  }
}

SceneFixture read_scene(const json& j, const std::string& base) {
  SceneFixture s;
  s.width = j.at("width").get<int>();
  s.height = j.at("height").get<int>();
  if (j.contains("timestamp_ms")) s.timestamp_ms = j["timestamp_ms"].get<std::int64_t>();
  const json empty = json::array();
  const auto& objects = j.contains("objects") ? j["objects"] : empty;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const auto p = idx(at(base, "objects"), i);
    SceneObject obj;
    obj.label = o.at("label").get<std::string>();
    obj.bbox = read_bbox(o.at("bbox"), at(p, "bbox"));
    obj.confidence = o.value("confidence", 1.0);
    if (o.contains("points")) {
      for (const auto& pt : o["points"]) obj.points.push_back({pt.at("x").get<double>(), pt.at("y").get<double>()});
    }
    if (o.contains("attributes")) {
      for (const auto& [k, v] : o["attributes"].items()) {
        if (!v.is_string()) fail(at(at(p, "attributes"), k), "attribute values must be strings");
        obj.attributes[k] = v.get<std::string>();
      }
    }
    if (o.contains("text")) obj.text = o["text"].get<std::string>();
    s.objects.push_back(std::move(obj));
  }
  const auto& blocks = j.contains("text_blocks") ? j["text_blocks"] : empty;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const auto p = idx(at(base, "text_blocks"), i);
    TextBlock tb;
    tb.text = b.at("text").get<std::string>();
    tb.bbox = read_bbox(b.at("bbox"), at(p, "bbox"));
    if (b.contains("words")) {
      for (std::size_t k = 0; k < b["words"].size(); ++k) {
        const auto& w = b["words"][k];
        tb.words.push_back({w.at("text").get<std::string>(),
                            read_bbox(w.at("bbox"), at(idx(at(p, "words"), k), "bbox")),
                            w.at("confidence").get<double>()});
      }
    }
    s.text_blocks.push_back(std::move(tb));
  }
  const auto& ui = j.contains("ui_elements") ? j["ui_elements"] : empty;
  for (std::size_t i = 0; i < ui.size(); ++i) {
    const auto& u = ui[i];
    UiElement e;
    e.kind = u.at("kind").get<std::string>();
    e.bbox = read_bbox(u.at("bbox"), at(idx(at(base, "ui_elements"), i), "bbox"));
    if (u.contains("text")) e.text = u["text"].get<std::string>();
    s.ui_elements.push_back(std::move(e));
  }
  return s;
}

}  // namespace

std::string_view kind_tag(FixtureKind k) noexcept {
  switch (k) {
    case FixtureKind::scene: return "image";
    case FixtureKind::document: return "document";
    case FixtureKind::video: return "video";
  }
  return "image";
}

const json& fixture_schema(FixtureKind k) {
  static const json scene = build_scene_schema();
  static const json document = build_document_schema();
  static const json video = build_video_schema();
  switch (k) {
    case FixtureKind::scene: return scene;
    case FixtureKind::document: return document;
    case FixtureKind::video: return video;
  }
  return scene;
}

SceneFixture parse_scene(const json& j) {
  check_kind(j, FixtureKind::scene);
  check_schema(j, FixtureKind::scene);
  return read_scene(j, "");
}

DocFixture parse_document(const json& j) {
  check_kind(j, FixtureKind::document);
  check_schema(j, FixtureKind::document);
  DocFixture d;
  const auto& pages = j.at("pages");
  for (std::size_t pi = 0; pi < pages.size(); ++pi) {
    const auto& pj = pages[pi];
    const auto p = idx("pages", pi);
    DocPage page;
    if (pj.contains("blocks")) {
      const auto& blocks = pj["blocks"];
      std::vector<bool> seen(blocks.size(), false);
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        const auto& b = blocks[bi];
        const auto bp = idx(at(p, "blocks"), bi);
        DocBlock blk{b.at("type").get<std::string>(), b.at("text").get<std::string>(),
                     read_bbox(b.at("bbox"), at(bp, "bbox")), b.at("order").get<int>()};
        const auto order = static_cast<std::size_t>(blk.order);
        if (order >= blocks.size() || seen[order]) {
          fail(at(bp, "order"), "block orders must form a permutation of 0..n-1");
        }
        seen[order] = true;
        page.blocks.push_back(std::move(blk));
      }
    }
    if (pj.contains("fields")) {
      for (std::size_t fi = 0; fi < pj["fields"].size(); ++fi) {
        const auto& f = pj["fields"][fi];
        const auto fp = idx(at(p, "fields"), fi);
        page.fields.push_back({f.at("name").get<std::string>(), f.at("value").get<std::string>(),
                               read_bbox(f.at("name_bbox"), at(fp, "name_bbox")),
                               read_bbox(f.at("value_bbox"), at(fp, "value_bbox")),
                               f.value("handwritten", false)});
      }
    }
    d.pages.push_back(std::move(page));
  }
  return d;
}

VideoFixture parse_video(const json& j) {
  check_kind(j, FixtureKind::video);
  check_schema(j, FixtureKind::video);
  VideoFixture v;
  v.duration_ms = j.at("duration_ms").get<std::int64_t>();
  v.fps = j.at("fps").get<double>();
  v.width = j.value("width", 640);
  v.height = j.value("height", 360);
  if (j.contains("segments")) {
    const auto& segs = j["segments"];
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& s = segs[i];
      const auto p = idx("segments", i);
      VideoSegment seg;
      seg.seg = {s.at("seg").at("start_ms").get<std::int64_t>(), s.at("seg").at("end_ms").get<std::int64_t>()};
      if (!seg.seg.valid()) fail(at(p, "seg"), "start_ms must not exceed end_ms");
      if (seg.seg.end_ms > v.duration_ms) fail(at(p, "seg"), "segment ends after the video");
      if (s.contains("tags")) seg.tags = s["tags"].get<std::vector<std::string>>();
      seg.caption = s.at("caption").get<std::string>();
      seg.salience = s.at("salience").get<double>();
      if (s.contains("scene")) {
        const auto& sc = s["scene"];
        const auto sp = at(p, "scene");
        auto v2 = validate_schema(sc, fixture_schema(FixtureKind::scene));
        if (!v2.empty()) fail(v2.front().path == "$" ? sp : at(sp, v2.front().path), v2.front().detail);
        seg.scene = read_scene(sc, sp);
      }
      v.segments.push_back(std::move(seg));
    }
  }
  return v;
}

std::vector<Violation> validate_fixture(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
    return {{"kind", ViolationKind::missing, "fixture needs a string 'kind' discriminator"}};
  }
  const auto tag = doc["kind"].get<std::string>();
  try {
    if (tag == kind_tag(FixtureKind::scene)) {
      parse_scene(doc);
    } else if (tag == kind_tag(FixtureKind::document)) {
      parse_document(doc);
    } else if (tag == kind_tag(FixtureKind::video)) {
      parse_video(doc);
    } else {
      return {{"kind", ViolationKind::enum_, "unknown fixture kind '" + tag + "'"}};
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (colon == std::string::npos) return {{"$", ViolationKind::type, msg}};
    return {{msg.substr(0, colon), ViolationKind::type, msg.substr(colon + 2)}};
  } catch (const json::exception& e) {
    return {{"$", ViolationKind::type, e.what()}};
  }
  return {};
}

// ---------------------------------------------------------------- serialization

json to_json(const SceneFixture& s) {
  json objects = json::array();
  for (const auto& o : s.objects) {
    json pts = json::array();
    for (const auto& p : o.points) pts.push_back(orion::to_json(p));
    json jo{{"label", o.label},
            {"bbox", orion::to_json(o.bbox)},
            {"confidence", o.confidence},
            {"points", pts},
            {"attributes", o.attributes}};
    if (o.text) jo["text"] = *o.text;
    objects.push_back(std::move(jo));
  }
  json blocks = json::array();
  for (const auto& b : s.text_blocks) {
    json words = json::array();
    for (const auto& w : b.words) {
      words.push_back({{"text", w.text}, {"bbox", orion::to_json(w.bbox)}, {"confidence", w.confidence}});
    }
    blocks.push_back({{"text", b.text}, {"bbox", orion::to_json(b.bbox)}, {"words", words}});
  }
  json ui = json::array();
  for (const auto& e : s.ui_elements) {
    json je{{"kind", e.kind}, {"bbox", orion::to_json(e.bbox)}};
    if (e.text) je["text"] = *e.text;
    ui.push_back(std::move(je));
  }
  json j{{"kind", "image"},         {"width", s.width},        {"height", s.height},
         {"objects", objects},      {"text_blocks", blocks},   {"ui_elements", ui}};
  if (s.timestamp_ms) j["timestamp_ms"] = *s.timestamp_ms;
  return j;
}

json to_json(const DocFixture& d) {
  json pages = json::array();
  for (const auto& p : d.pages) {
    json blocks = json::array();
    for (const auto& b : p.blocks) {
      blocks.push_back({{"type", b.type}, {"text", b.text}, {"bbox", orion::to_json(b.bbox)}, {"order", b.order}});
    }
    json fields = json::array();
    for (const auto& f : p.fields) {
      fields.push_back({{"name", f.name},
                        {"value", f.value},
                        {"name_bbox", orion::to_json(f.name_bbox)},
                        {"value_bbox", orion::to_json(f.value_bbox)},
                        {"handwritten", f.handwritten}});
    }
    pages.push_back({{"blocks", blocks}, {"fields", fields}});
  }
  return json{{"kind", "document"}, {"pages", pages}};
}

json to_json(const VideoFixture& v) {
  json segs = json::array();
  for (const auto& s : v.segments) {
    json js{{"seg", orion::to_json(s.seg)}, {"tags", s.tags}, {"caption", s.caption}, {"salience", s.salience}};
    if (s.scene) js["scene"] = to_json(*s.scene);
    segs.push_back(std::move(js));
  }
  return json{{"kind", "video"},       {"duration_ms", v.duration_ms}, {"fps", v.fps},
              {"width", v.width},      {"height", v.height},           {"segments", segs}};
}

std::string serialize(const SceneFixture& s) { return to_json(s).dump(); }
std::string serialize(const DocFixture& d) { return to_json(d).dump(); }
std::string serialize(const VideoFixture& v) { return to_json(v).dump(); }

}  // namespace orion::fixtures
