#include "orion/fixture_tools.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "orion/util.hpp"

namespace orion::fixtures {

namespace {

const std::map<std::string, std::set<std::string>>& label_classes() {
  static const std::map<std::string, std::set<std::string>> classes{
      {"persons", {"person", "people", "man", "woman", "child", "boy", "girl", "pedestrian"}},
      {"person", {"person", "people", "man", "woman", "child", "boy", "girl", "pedestrian"}},
      {"people", {"person", "people", "man", "woman", "child", "boy", "girl", "pedestrian"}},
      {"faces", {"face"}},
      {"logos", {"logo"}},
      {"landmarks", {"landmark"}},
  };
  return classes;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string describe_box(const NormBBox& b) {
  return "(" + fmt2(b.x) + ", " + fmt2(b.y) + ", " + fmt2(b.w) + ", " + fmt2(b.h) + ")";
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::vector<const SceneObject*> matching_objects(const SceneFixture& s, std::string_view query) {
  std::vector<const SceneObject*> out;
  for (const auto& o : s.objects) {
    if (label_matches(o.label, query)) out.push_back(&o);
  }
  return out;
}

// First pixel whose center is at or past `edge` (in pixels), clamped into [0, extent].
int pixel_edge(double edge, int extent) {
  return std::clamp(static_cast<int>(std::ceil(edge - 0.5)), 0, extent);
}

json bbox_words(const std::vector<Word>& words) {
  json out = json::array();
  for (const auto& w : words) {
    out.push_back({{"text", w.text}, {"bbox", to_json(w.bbox)}, {"confidence", w.confidence}});
  }
  return out;
}

}  // namespace

bool label_matches(std::string_view label, std::string_view query) {
  auto q = token_set(query);
  if (q.count("objects")) return true;
  std::set<std::string> expanded = q;
  for (const auto& t : q) {
    if (auto it = label_classes().find(t); it != label_classes().end()) {
      expanded.insert(it->second.begin(), it->second.end());
    }
  }
  return shares_token(expanded, token_set(label));
}

// ---------------------------------------------------------------- image

json caption(const SceneFixture& s) {
  if (s.objects.empty()) return json{{"caption", "An empty scene."}, {"tags", json::array()}};

  std::vector<std::size_t> order(s.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return s.objects[a].bbox.area() > s.objects[b].bbox.area();
  });
  std::vector<std::string> labels;
  std::map<std::string, int> counts;
  for (auto i : order) {
    const auto& label = s.objects[i].label;
    if (counts[label]++ == 0) labels.push_back(label);
  }
  std::string text = "A scene with ";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) text += ", ";
    text += labels[i];
    if (counts[labels[i]] > 1) text += " (x" + std::to_string(counts[labels[i]]) + ")";
  }
  text += ".";
  if (!s.text_blocks.empty()) {
    text += " Visible text:";
    for (std::size_t i = 0; i < s.text_blocks.size(); ++i) {
      text += (i == 0 ? " \"" : ", \"") + s.text_blocks[i].text + "\"";
    }
    text += ".";
  }
  std::set<std::string> tags;
  for (const auto& o : s.objects) tags.insert(o.label);
  return json{{"caption", text}, {"tags", std::vector<std::string>(tags.begin(), tags.end())}};
}

json vqa(const SceneFixture& s, std::string_view question, bool ground) {
  const auto q = token_set(question);
  auto matched = matching_objects(s, question);
  if (matched.empty()) {
    for (const auto& o : s.objects) {
      for (const auto& [k, v] : o.attributes) {
        if (shares_token(q, token_set(v))) {
          matched.push_back(&o);
          break;
        }
      }
    }
  }

  std::string answer;
  if (matched.empty()) {
    answer = "not present";
  } else if (q.count("many") || q.count("count")) {
    answer = std::to_string(matched.size());
  } else {
    std::vector<std::string> facts;
    for (const auto* o : matched) {
      for (const auto& [k, v] : o->attributes) {
        if (shares_token(q, token_set(k))) facts.push_back("The " + o->label + "'s " + k + " is " + v + ".");
      }
      if (o->text && (q.count("time") || q.count("text") || q.count("read") || q.count("say") ||
                      q.count("says") || q.count("written"))) {
        facts.push_back("The " + o->label + " shows " + *o->text + ".");
      }
    }
    if (facts.empty()) {
      for (const auto* o : matched) facts.push_back("There is a " + o->label + " at " + describe_box(o->bbox) + ".");
    }
    for (const auto& f : facts) answer += (answer.empty() ? "" : " ") + f;
  }

  json out{{"answer", answer}};
  if (ground) {
    json regions = json::array();
    for (const auto* o : matched) regions.push_back(to_json(Detection{o->label, o->bbox, o->confidence}));
    out["regions"] = regions;
  }
  return out;
}

std::vector<Detection> detect(const SceneFixture& s, std::string_view query) {
  std::vector<Detection> out;
  for (const auto* o : matching_objects(s, query)) out.push_back({o->label, o->bbox, o->confidence});
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.label < b.label;
  });
  return out;
}

LabelRaster segment(const SceneFixture& s, std::string_view query, SegmentMode mode) {
  LabelRaster r;
  r.width = s.width;
  r.height = s.height;
  r.pixels.assign(static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height), 0);
  r.classes = json::array();

  std::map<std::string, int> class_ids;
  int next_id = 1;
  for (const auto* o : matching_objects(s, query)) {
    int id = 0;
    if (mode == SegmentMode::instance) {
      id = next_id++;
      r.classes.push_back({{"label_id", id}, {"class", o->label}});
    } else if (auto it = class_ids.find(o->label); it != class_ids.end()) {
      id = it->second;
    } else {
      id = next_id++;
      class_ids.emplace(o->label, id);
      r.classes.push_back({{"label_id", id}, {"class", o->label}});
    }
    if (id > 255) throw Error(Errc::invalid_value, "more than 255 segments do not fit an 8-bit mask");
    // pixel (px, py) belongs to the box when its center lies in [x, x+w) x [y, y+h)
    const int x0 = pixel_edge(o->bbox.x * s.width, s.width);
    const int x1 = pixel_edge((o->bbox.x + o->bbox.w) * s.width, s.width);
    const int y0 = pixel_edge(o->bbox.y * s.height, s.height);
    const int y1 = pixel_edge((o->bbox.y + o->bbox.h) * s.height, s.height);
    for (int y = y0; y < y1; ++y) {
      std::fill_n(r.pixels.begin() + static_cast<std::ptrdiff_t>(y) * s.width + x0, std::max(0, x1 - x0),
                  static_cast<std::uint8_t>(id));
    }
  }
  r.num_labels = next_id;
  return r;
}

std::string encode_pgm(const LabelRaster& r) {
  std::string out = "P5\n" + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  return out;
}

LabelRaster decode_pgm(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  if (next_token() != "P5") throw Error(Errc::invalid_value, "not a P5 graymap");
  LabelRaster r;
  try {
    r.width = std::stoi(next_token());
    r.height = std::stoi(next_token());
    if (std::stoi(next_token()) != 255) throw Error(Errc::invalid_value, "graymap maxval must be 255");
  } catch (const std::logic_error&) {
    throw Error(Errc::invalid_value, "malformed graymap header");
  }
  ++pos;  // single whitespace byte before the raster
  const auto n = static_cast<std::size_t>(r.width) * static_cast<std::size_t>(r.height);
  if (bytes.size() - pos != n) throw Error(Errc::invalid_value, "graymap raster size mismatch");
  r.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  int max_label = 0;
  for (auto p : r.pixels) max_label = std::max<int>(max_label, p);
  r.num_labels = max_label + 1;
  return r;
}

json point(const SceneFixture& s, std::string_view query) {
  json points = json::array();
  int count = 0;
  for (const auto* o : matching_objects(s, query)) {
    ++count;
    if (o->points.empty()) {
      points.push_back(to_json(bbox_center(o->bbox)));
    } else {
      for (const auto& p : o->points) points.push_back(to_json(p));
    }
  }
  return json{{"points", points}, {"count", count}};
}

json ocr_image(const SceneFixture& s) {
  std::string text;
  json words = json::array();
  for (std::size_t i = 0; i < s.text_blocks.size(); ++i) {
    if (i > 0) text += "\n";
    text += s.text_blocks[i].text;
    for (const auto& w : bbox_words(s.text_blocks[i].words)) words.push_back(w);
  }
  return json{{"text", text}, {"words", words}};
}

json ui_parse(const SceneFixture& s, const std::vector<std::string>& exclude) {
  json elements = json::array();
  for (const auto& e : s.ui_elements) {
    if (std::find(exclude.begin(), exclude.end(), e.kind) != exclude.end()) continue;
    json je{{"kind", e.kind}, {"bbox", to_json(e.bbox)}};
    if (e.text) je["text"] = *e.text;
    elements.push_back(std::move(je));
  }
  return json{{"elements", elements}};
}

SceneFixture crop_scene(const SceneFixture& s, const NormBBox& box) {
  if (!(box.w > 0.0) || !(box.h > 0.0)) throw Error(Errc::degenerate_crop, "crop has zero width or height");
  SceneFixture out;
  out.width = round_half_up(box.w * s.width);
  out.height = round_half_up(box.h * s.height);
  if (out.width < 1 || out.height < 1) throw Error(Errc::degenerate_crop, "crop is smaller than one pixel");
  out.timestamp_ms = s.timestamp_ms;

  for (const auto& o : s.objects) {
    auto b = rebase_into_crop(o.bbox, box);
    if (!b) continue;
    SceneObject c = o;
    c.bbox = *b;
    c.points.clear();
    for (const auto& p : o.points) {
      if (auto q = rebase_point_into_crop(p, box)) c.points.push_back(*q);
    }
    out.objects.push_back(std::move(c));
  }
  for (const auto& tb : s.text_blocks) {
    auto b = rebase_into_crop(tb.bbox, box);
    if (!b) continue;
    TextBlock c{tb.text, *b, {}};
    for (const auto& w : tb.words) {
      if (auto wb = rebase_into_crop(w.bbox, box)) c.words.push_back({w.text, *wb, w.confidence});
    }
    out.text_blocks.push_back(std::move(c));
  }
  for (const auto& e : s.ui_elements) {
    if (auto b = rebase_into_crop(e.bbox, box)) out.ui_elements.push_back({e.kind, *b, e.text});
  }
  return out;
}

SceneFixture rotate_scene(const SceneFixture& s, int quarter_turns_ccw) {
  SceneFixture out = s;
  const int turns = ((quarter_turns_ccw % 4) + 4) % 4;
  for (int t = 0; t < turns; ++t) {
    std::swap(out.width, out.height);
    for (auto& o : out.objects) {
      o.bbox = rotate90ccw_bbox(o.bbox);
      for (auto& p : o.points) p = rotate90ccw_point(p);
    }
    for (auto& tb : out.text_blocks) {
      tb.bbox = rotate90ccw_bbox(tb.bbox);
      for (auto& w : tb.words) w.bbox = rotate90ccw_bbox(w.bbox);
    }
    for (auto& e : out.ui_elements) e.bbox = rotate90ccw_bbox(e.bbox);
  }
  return out;
}

// ---------------------------------------------------------------- document

json doc_layout(const DocFixture& d, std::optional<int> page) {
  const int n = static_cast<int>(d.pages.size());
  if (page && (*page < 1 || *page > n)) {
    throw Error(Errc::page_out_of_range,
                "page " + std::to_string(*page) + " outside 1.." + std::to_string(n));
  }
  json blocks = json::array();
  for (int p = page.value_or(1); p <= (page ? *page : n); ++p) {
    auto sorted = d.pages[static_cast<std::size_t>(p - 1)].blocks;
    std::sort(sorted.begin(), sorted.end(), [](const DocBlock& a, const DocBlock& b) { return a.order < b.order; });
    for (const auto& b : sorted) {
      blocks.push_back({{"type", b.type}, {"text", b.text}, {"bbox", to_json(b.bbox)}, {"order", b.order}, {"page", p}});
    }
  }
  return json{{"blocks", blocks}};
}

json doc_form_extract(const DocFixture& d) {
  json fields = json::array();
  std::map<std::string, std::size_t> slot;
  for (std::size_t pi = 0; pi < d.pages.size(); ++pi) {
    const int page = static_cast<int>(pi) + 1;
    for (const auto& f : d.pages[pi].fields) {
      json entry{{"name", f.name},
                 {"value", f.value},
                 {"name_bbox", to_json(f.name_bbox)},
                 {"value_bbox", to_json(f.value_bbox)},
                 {"handwritten", f.handwritten},
                 {"page", page}};
      if (auto it = slot.find(f.name); it != slot.end()) {
        // later pages win; provenance accumulates
        json& merged = fields[it->second];
        json pages = merged["pages"];
        pages.push_back(page);
        entry["pages"] = pages;
        merged = std::move(entry);
      } else {
        entry["pages"] = json::array({page});
        slot.emplace(f.name, fields.size());
        fields.push_back(std::move(entry));
      }
    }
  }
  return json{{"fields", fields}};
}

json doc_paginate(const DocFixture& d, std::string_view query) {
  const auto q = token_set(query);
  std::vector<std::pair<int, std::size_t>> scored;  // (page, score)
  for (std::size_t pi = 0; pi < d.pages.size(); ++pi) {
    std::set<std::string> tokens;
    for (const auto& b : d.pages[pi].blocks) {
      auto t = token_set(b.text);
      tokens.insert(t.begin(), t.end());
    }
    std::size_t score = 0;
    for (const auto& t : q) score += tokens.count(t);
    if (score > 0) scored.emplace_back(static_cast<int>(pi) + 1, score);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  json pages = json::array(), scores = json::array();
  for (const auto& [p, s] : scored) {
    pages.push_back(p);
    scores.push_back(s);
  }
  return json{{"pages", pages}, {"scores", scores}};
}

namespace {

int redact_into(std::string& text, const std::string& target) {
  if (target.empty()) return 0;
  static const std::string kBlock = "\xE2\x96\x88";  // U+2588 FULL BLOCK
  std::string mask;
  for (std::size_t i = 0, n = utf8_length(target); i < n; ++i) mask += kBlock;
  const std::string needle = fold(target);
  int hits = 0;
  std::size_t pos = 0;
  std::string folded = fold(text);
  while ((pos = folded.find(needle, pos)) != std::string::npos) {
    text.replace(pos, target.size(), mask);
    folded.replace(pos, target.size(), mask);
    pos += mask.size();
    ++hits;
  }
  return hits;
}

}  // namespace

RedactionResult redact_document(const DocFixture& d, const std::vector<std::string>& targets) {
  RedactionResult r{d, 0};
  for (const auto& target : targets) {
    for (auto& page : r.document.pages) {
      for (auto& b : page.blocks) r.replacements += redact_into(b.text, target);
      for (auto& f : page.fields) r.replacements += redact_into(f.value, target);
    }
  }
  return r;
}

// ---------------------------------------------------------------- video

json video_caption(const VideoFixture& v) {
  std::vector<const VideoSegment*> segs;
  for (const auto& s : v.segments) segs.push_back(&s);
  std::stable_sort(segs.begin(), segs.end(),
                   [](const auto* a, const auto* b) { return a->seg.start_ms < b->seg.start_ms; });
  json entries = json::array();
  std::string markdown;
  for (const auto* s : segs) {
    const auto start = format_timecode(s->seg.start_ms);
    const auto end = format_timecode(s->seg.end_ms);
    entries.push_back({{"seg", to_json(s->seg)}, {"start", start}, {"end", end}, {"caption", s->caption}});
    if (!markdown.empty()) markdown += "\n";
    markdown += "- **" + start + " - " + end + "** " + s->caption;
  }
  return json{{"entries", entries}, {"markdown", markdown}};
}

TimeSegment temporal_ground(const VideoFixture& v, std::string_view query) {
  const auto q = token_set(query);
  const VideoSegment* best = nullptr;
  for (const auto& s : v.segments) {
    auto tokens = token_set(s.caption);
    for (const auto& t : s.tags) {
      auto tt = token_set(t);
      tokens.insert(tt.begin(), tt.end());
    }
    if (!shares_token(q, tokens)) continue;
    if (!best || s.salience > best->salience ||
        (s.salience == best->salience && s.seg.start_ms < best->seg.start_ms)) {
      best = &s;
    }
  }
  if (!best) throw Error(Errc::no_match, "no segment matches '" + std::string(query) + "'");
  return best->seg;
}

std::vector<std::int64_t> sample_instants(const VideoFixture& v, std::int64_t interval_ms) {
  if (interval_ms <= 0) throw Error(Errc::invalid_value, "interval_ms must be positive");
  std::vector<std::int64_t> out;
  for (std::int64_t t = 0; t < v.duration_ms; t += interval_ms) out.push_back(t);
  return out;
}

std::vector<std::int64_t> sample_instants(const VideoFixture& v, const std::vector<std::int64_t>& at_ms) {
  std::vector<std::int64_t> out;
  for (auto t : at_ms) {
    if (t >= 0 && t < v.duration_ms) out.push_back(t);
  }
  return out;
}

SceneFixture frame_at(const VideoFixture& v, std::int64_t t_ms) {
  SceneFixture frame;
  frame.width = v.width;
  frame.height = v.height;
  for (const auto& s : v.segments) {
    if (s.seg.start_ms <= t_ms && t_ms < s.seg.end_ms) {
      if (s.scene) frame = *s.scene;
      break;
    }
  }
  frame.timestamp_ms = t_ms;
  return frame;
}

std::vector<std::size_t> top_segments(const VideoFixture& v, std::size_t k) {
  std::vector<std::size_t> idx(v.segments.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = v.segments[a];
    const auto& sb = v.segments[b];
    if (sa.salience != sb.salience) return sa.salience > sb.salience;
    return sa.seg.start_ms < sb.seg.start_ms;
  });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

VideoFixture trim_video(const VideoFixture& v, const TimeSegment& window) {
  if (!window.valid() || window.end_ms > v.duration_ms) {
    throw Error(Errc::out_of_range, "trim window [" + std::to_string(window.start_ms) + ", " +
                                        std::to_string(window.end_ms) + "] outside [0, " +
                                        std::to_string(v.duration_ms) + "]");
  }
  VideoFixture out = v;
  out.duration_ms = window.length();
  out.segments.clear();
  for (const auto& s : v.segments) {
    const auto lo = std::max(s.seg.start_ms, window.start_ms);
    const auto hi = std::min(s.seg.end_ms, window.end_ms);
    const bool keep = s.seg.length() == 0 ? (window.start_ms <= s.seg.start_ms && s.seg.end_ms <= window.end_ms)
                                          : lo < hi;
    if (!keep) continue;
    VideoSegment c = s;
    c.seg = {lo - window.start_ms, hi - window.start_ms};
    out.segments.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------- registry wiring

namespace {

json str() { return json{{"type", "string"}}; }
json integer(int min) { return json{{"type", "integer"}, {"minimum", min}}; }
json unit() { return json{{"type", "number"}, {"minimum", 0}, {"maximum", 1}}; }
json array_of(json items) { return json{{"type", "array"}, {"items", std::move(items)}}; }

json object_of(json props, std::vector<std::string> required) {
  json j{{"type", "object"}, {"properties", std::move(props)}};
  if (!required.empty()) j["required"] = required;
  return j;
}

json media() {
  return json{{"type", "object"}, {"description", "uploaded file {\"file_id\": ...} or an artifact reference"}};
}

json bbox() {
  return object_of({{"x", unit()}, {"y", unit()}, {"w", unit()}, {"h", unit()}}, {"x", "y", "w", "h"});
}

json npoint() { return object_of({{"x", unit()}, {"y", unit()}}, {"x", "y"}); }

json seg() { return object_of({{"start_ms", integer(0)}, {"end_ms", integer(0)}}, {"start_ms", "end_ms"}); }

json artifact() {
  return object_of({{"id", str()},
                    {"modality", {{"enum", {"image", "video", "document", "audio", "text", "mask"}}}},
                    {"mime", str()},
                    {"url", str()},
                    {"meta", {{"type", "object"}}}},
                   {"id", "modality", "mime", "url"});
}

json detection() {
  return object_of({{"label", str()}, {"bbox", bbox()}, {"confidence", unit()}}, {"label", "bbox", "confidence"});
}

json word() { return object_of({{"text", str()}, {"bbox", bbox()}, {"confidence", unit()}}, {"text", "bbox", "confidence"}); }

ToolDescriptor make(std::string name, ToolCategory cat, std::string description, json in, json out,
                    CostHint cost = CostHint::cheap, Tier tier = Tier::any) {
  ToolDescriptor d;
  d.backend = (name == "generate" ? "stub:" : "fixture:") + name;
  d.name = std::move(name);
  d.category = cat;
  d.description = std::move(description);
  d.input_schema = std::move(in);
  d.output_schema = std::move(out);
  d.cost_hint = cost;
  d.tier = tier;
  return d;
}

json load_media(const json& ref, const ToolContext& ctx) {
  std::string id;
  if (ref.is_string()) {
    id = ref.get<std::string>();
  } else if (ref.is_object() && ref.contains("file_id") && ref["file_id"].is_string()) {
    id = ref["file_id"].get<std::string>();
  } else if (ref.is_object() && ref.contains("id") && ref["id"].is_string()) {
    id = ref["id"].get<std::string>();
  }
  if (id.empty()) throw Error(Errc::invalid_value, "media reference needs a file_id or an artifact id");
  if (!ctx.store) throw Error(Errc::not_found, "no artifact store available");
  const auto blob = ctx.store->get(id);
  auto parsed = json::parse(blob.bytes, nullptr, /*allow_exceptions=*/false);
  return parsed.is_discarded() ? json() : parsed;
}

SceneFixture load_scene(const json& in, const ToolContext& ctx) { return parse_scene(load_media(in.at("image"), ctx)); }
DocFixture load_doc(const json& in, const ToolContext& ctx) { return parse_document(load_media(in.at("document"), ctx)); }
VideoFixture load_video(const json& in, const ToolContext& ctx) { return parse_video(load_media(in.at("video"), ctx)); }

ArtifactRef emit(const ToolContext& ctx, const std::string& bytes, std::string_view mime, Modality modality,
                 const std::string& name, std::map<std::string, std::string> meta = {}) {
  if (!ctx.store) throw Error(Errc::not_found, "no artifact store available");
  const auto stored = ctx.store->put(bytes, mime, name);
  return ctx.store->make_ref(stored, modality, std::move(meta));
}

ArtifactRef emit_scene(const ToolContext& ctx, const SceneFixture& s, const std::string& name) {
  return emit(ctx, serialize(s), kSceneMime, Modality::image, name,
              {{"width", std::to_string(s.width)}, {"height", std::to_string(s.height)}});
}

ArtifactRef emit_video(const ToolContext& ctx, const VideoFixture& v, const std::string& name) {
  return emit(ctx, serialize(v), kVideoMime, Modality::video, name,
              {{"duration_ms", std::to_string(v.duration_ms)}});
}

ToolOutput only(json output) { return ToolOutput{std::move(output), {}}; }

ToolOutput with_artifact(const std::string& key, ArtifactRef a) {
  return ToolOutput{json{{key, to_json(a)}}, {std::move(a)}};
}

std::string ref_id(const json& r) {
  if (r.is_string()) return r.get<std::string>();
  if (r.is_object() && r.contains("id") && r["id"].is_string()) return r["id"].get<std::string>();
  if (r.is_object() && r.contains("file_id") && r["file_id"].is_string()) return r["file_id"].get<std::string>();
  throw Error(Errc::invalid_value, "reference needs an id or file_id");
}

ToolOutput run_fixture(std::string_view tool, const json& in, const ToolContext& ctx) {
  if (tool == "caption") return only(caption(load_scene(in, ctx)));
  if (tool == "vqa") return only(vqa(load_scene(in, ctx), in.at("question").get<std::string>(), in.value("ground", false)));
  if (tool == "detect") {
    json dets = json::array();
    for (const auto& d : detect(load_scene(in, ctx), in.at("query").get<std::string>())) dets.push_back(to_json(d));
    return only(json{{"detections", dets}});
  }
  if (tool == "segment") {
    const auto mode = in.value("mode", std::string("instance")) == "semantic" ? SegmentMode::semantic : SegmentMode::instance;
    const auto raster = segment(load_scene(in, ctx), in.at("query").get<std::string>(), mode);
    auto art = emit(ctx, encode_pgm(raster), kMaskMime, Modality::mask, "mask.pgm",
                    {{"width", std::to_string(raster.width)}, {"height", std::to_string(raster.height)}});
    MaskRef mask{art, raster.width, raster.height, raster.num_labels};
    return ToolOutput{json{{"mask", to_json(mask)}, {"classes", raster.classes}}, {art}};
  }
  if (tool == "point") return only(point(load_scene(in, ctx), in.at("query").get<std::string>()));
  if (tool == "ocr_image") return only(ocr_image(load_scene(in, ctx)));
  if (tool == "ui_parse") {
    return only(ui_parse(load_scene(in, ctx), in.value("exclude", std::vector<std::string>{})));
  }
  if (tool == "crop") {
    const auto box = bbox_from_json(in.at("bbox"));
    return with_artifact("image", emit_scene(ctx, crop_scene(load_scene(in, ctx), box), "crop.scene.json"));
  }
  if (tool == "rotate") {
    const int turns = in.at("quarter_turns_ccw").get<int>();
    return with_artifact("image", emit_scene(ctx, rotate_scene(load_scene(in, ctx), turns), "rotated.scene.json"));
  }
  if (tool == "doc_layout") {
    std::optional<int> page;
    if (in.contains("page")) page = in["page"].get<int>();
    return only(doc_layout(load_doc(in, ctx), page));
  }
  if (tool == "doc_form_extract") return only(doc_form_extract(load_doc(in, ctx)));
  if (tool == "doc_paginate") return only(doc_paginate(load_doc(in, ctx), in.at("query").get<std::string>()));
  if (tool == "doc_redact") {
    auto r = redact_document(load_doc(in, ctx), in.at("targets").get<std::vector<std::string>>());
    auto art = emit(ctx, serialize(r.document), kDocumentMime, Modality::document, "redacted.doc.json");
    return ToolOutput{json{{"document", to_json(art)}, {"replacements", r.replacements}}, {art}};
  }
  if (tool == "video_caption") return only(video_caption(load_video(in, ctx)));
  if (tool == "temporal_ground") {
    const auto v = load_video(in, ctx);
    const auto s = temporal_ground(v, in.at("query").get<std::string>());
    std::string cap;
    for (const auto& vs : v.segments) {
      if (vs.seg == s) {
        cap = vs.caption;
        break;
      }
    }
    return only(json{{"segment", to_json(s)},
                     {"start", format_timecode(s.start_ms)},
                     {"end", format_timecode(s.end_ms)},
                     {"caption", cap}});
  }
  if (tool == "frame_sample") {
    const auto v = load_video(in, ctx);
    const auto& at = in.at("at");
    std::vector<std::int64_t> instants;
    if (at.contains("interval_ms")) {
      instants = sample_instants(v, at["interval_ms"].get<std::int64_t>());
    } else if (at.contains("timestamps_ms")) {
      instants = sample_instants(v, at["timestamps_ms"].get<std::vector<std::int64_t>>());
    } else {
      throw Error(Errc::invalid_value, "'at' needs interval_ms or timestamps_ms");
    }
    ToolOutput out{json{{"frames", json::array()}, {"timestamps_ms", instants}}, {}};
    for (auto t : instants) {
      auto art = emit_scene(ctx, frame_at(v, t), "frame_" + std::to_string(t) + ".scene.json");
      out.output["frames"].push_back(to_json(art));
      out.artifacts.push_back(std::move(art));
    }
    return out;
  }
  if (tool == "highlight_extract") {
    const auto v = load_video(in, ctx);
    ToolOutput out{json{{"highlights", json::array()}}, {}};
    for (auto i : top_segments(v, in.at("k").get<std::size_t>())) {
      const auto& s = v.segments[i].seg;
      auto art = emit_video(ctx, trim_video(v, s), "highlight_" + std::to_string(s.start_ms) + ".video.json");
      out.output["highlights"].push_back({{"seg", to_json(s)},
                                          {"start", format_timecode(s.start_ms)},
                                          {"end", format_timecode(s.end_ms)},
                                          {"id", art.id},
                                          {"url", art.url}});
      out.artifacts.push_back(std::move(art));
    }
    return out;
  }
  if (tool == "trim") {
    const auto v = load_video(in, ctx);
    return with_artifact("video", emit_video(ctx, trim_video(v, segment_from_json(in.at("seg"))), "trim.video.json"));
  }
  throw Error(Errc::unknown_tool, "no fixture backend named '" + std::string(tool) + "'");
}

ToolOutput run_generate(const json& in, const ToolContext& ctx) {
  const auto mode = in.at("mode").get<std::string>();
  std::vector<std::string> refs;
  if (in.contains("refs")) {
    for (const auto& r : in["refs"]) refs.push_back(ref_id(r));
  }
  if (mode != "t2i" && refs.empty()) throw Error(Errc::missing_refs, "mode '" + mode + "' needs reference media");
  json descriptor{{"generator", "stub"}, {"mode", mode}, {"prompt", in.at("prompt")}, {"refs", refs}};
  const auto modality = mode == "video" ? Modality::video : Modality::image;
  return with_artifact("artifact", emit(ctx, descriptor.dump(), kGeneratedMime, modality, "generated.json"));
}

}  // namespace

std::vector<ToolDescriptor> fixture_descriptors() {
  using C = ToolCategory;
  const auto gpu = CostHint::gpu;
  std::vector<ToolDescriptor> d;
  d.push_back(make("caption", C::image, "Dense caption and semantic tags for an image.",
                   object_of({{"image", media()}}, {"image"}),
                   object_of({{"caption", str()}, {"tags", array_of(str())}}, {"caption", "tags"}), gpu));
  d.push_back(make("vqa", C::image, "Answer a question about an image, optionally grounding the answer in regions.",
                   object_of({{"image", media()}, {"question", str()}, {"ground", {{"type", "boolean"}}}},
                             {"image", "question"}),
                   object_of({{"answer", str()}, {"regions", array_of(detection())}}, {"answer"}), gpu));
  d.push_back(make("detect", C::image,
                   "Detect objects, persons, faces, logos or landmarks; boxes are normalized xywh.",
                   object_of({{"image", media()}, {"query", str()}}, {"image", "query"}),
                   object_of({{"detections", array_of(detection())}}, {"detections"}), gpu));
  d.push_back(make("segment", C::image, "Label mask (P5 graymap, 0 = background) for matching objects.",
                   object_of({{"image", media()}, {"query", str()}, {"mode", {{"enum", {"semantic", "instance"}}}}},
                             {"image", "query"}),
                   object_of({{"mask", object_of({{"artifact", artifact()},
                                                   {"width", integer(1)},
                                                   {"height", integer(1)},
                                                   {"num_labels", integer(1)}},
                                                  {"artifact", "width", "height", "num_labels"})},
                              {"classes", array_of(object_of({{"label_id", integer(1)}, {"class", str()}},
                                                             {"label_id", "class"}))}},
                             {"mask", "classes"}),
                   gpu));
  d.push_back(make("point", C::image, "Point at and count matching objects; points are normalized xy.",
                   object_of({{"image", media()}, {"query", str()}}, {"image", "query"}),
                   object_of({{"points", array_of(npoint())}, {"count", integer(0)}}, {"points", "count"}), gpu));
  d.push_back(make("ocr_image", C::image, "Text with word boxes and word-level confidences.",
                   object_of({{"image", media()}}, {"image"}),
                   object_of({{"text", str()}, {"words", array_of(word())}}, {"text", "words"}), gpu));
  d.push_back(make("ui_parse", C::image, "UI elements with normalized boxes, optionally excluding kinds.",
                   object_of({{"image", media()},
                              {"exclude", array_of({{"enum", {"button", "text_field", "link", "icon", "card"}}})}},
                             {"image"}),
                   object_of({{"elements", array_of(object_of({{"kind", str()}, {"bbox", bbox()}, {"text", str()}},
                                                              {"kind", "bbox"}))}},
                             {"elements"}),
                   gpu));
  d.push_back(make("crop", C::image, "Crop an image to a normalized box.",
                   object_of({{"image", media()}, {"bbox", bbox()}}, {"image", "bbox"}),
                   object_of({{"image", artifact()}}, {"image"})));
  d.push_back(make("rotate", C::image, "Rotate an image by quarter turns counterclockwise.",
                   object_of({{"image", media()}, {"quarter_turns_ccw", {{"enum", {1, 2, 3}}}}},
                             {"image", "quarter_turns_ccw"}),
                   object_of({{"image", artifact()}}, {"image"})));
  d.push_back(make("generate", C::mixed,
                   "Image/video generation (echo stub): text-to-image, image-to-image, inpainting, style transfer, video.",
                   object_of({{"mode", {{"enum", {"t2i", "i2i", "inpaint", "style", "video"}}}},
                              {"prompt", str()},
                              {"refs", {{"type", "array"}}}},
                             {"mode", "prompt"}),
                   object_of({{"artifact", artifact()}}, {"artifact"}), CostHint::remote, Tier::pro));
  d.push_back(make("doc_layout", C::document, "Layout blocks in reading order.",
                   object_of({{"document", media()}, {"page", integer(1)}}, {"document"}),
                   object_of({{"blocks", array_of(object_of({{"type", str()},
                                                             {"text", str()},
                                                             {"bbox", bbox()},
                                                             {"order", integer(0)},
                                                             {"page", integer(1)}},
                                                            {"type", "text", "bbox", "order", "page"}))}},
                             {"blocks"}),
                   gpu));
  d.push_back(make("doc_form_extract", C::document, "Form fields with field-value alignment across pages.",
                   object_of({{"document", media()}}, {"document"}),
                   object_of({{"fields", array_of(object_of({{"name", str()},
                                                             {"value", str()},
                                                             {"name_bbox", bbox()},
                                                             {"value_bbox", bbox()},
                                                             {"handwritten", {{"type", "boolean"}}},
                                                             {"page", integer(1)},
                                                             {"pages", array_of(integer(1))}},
                                                            {"name", "value", "page", "pages"}))}},
                             {"fields"}),
                   gpu));
  d.push_back(make("doc_paginate", C::document, "Pages relevant to a query, best first.",
                   object_of({{"document", media()}, {"query", str()}}, {"document", "query"}),
                   object_of({{"pages", array_of(integer(1))}, {"scores", array_of(integer(1))}}, {"pages"})));
  d.push_back(make("doc_redact", C::document, "Redact every case-insensitive occurrence of the targets.",
                   object_of({{"document", media()}, {"targets", array_of(str())}}, {"document", "targets"}),
                   object_of({{"document", artifact()}, {"replacements", integer(0)}}, {"document", "replacements"})));
  d.push_back(make("video_caption", C::video, "Timestamped captions per scene.",
                   object_of({{"video", media()}}, {"video"}),
                   object_of({{"entries", array_of(object_of({{"seg", seg()}, {"start", str()}, {"end", str()}, {"caption", str()}},
                                                             {"seg", "caption"}))},
                              {"markdown", str()}},
                             {"entries", "markdown"}),
                   gpu));
  d.push_back(make("temporal_ground", C::video, "Start and end of the segment best matching a query.",
                   object_of({{"video", media()}, {"query", str()}}, {"video", "query"}),
                   object_of({{"segment", seg()}, {"start", str()}, {"end", str()}, {"caption", str()}},
                             {"segment", "start", "end"}),
                   gpu));
  d.push_back(make("frame_sample", C::video, "Frames at a regular interval or at given timestamps.",
                   object_of({{"video", media()},
                              {"at", object_of({{"interval_ms", integer(1)}, {"timestamps_ms", array_of(integer(0))}}, {})}},
                             {"video", "at"}),
                   object_of({{"frames", array_of(artifact())}, {"timestamps_ms", array_of(integer(0))}},
                             {"frames", "timestamps_ms"})));
  d.push_back(make("highlight_extract", C::video, "Top-k salient segments with signed clip urls.",
                   object_of({{"video", media()}, {"k", integer(0)}}, {"video", "k"}),
                   object_of({{"highlights", array_of(object_of({{"seg", seg()},
                                                                 {"start", str()},
                                                                 {"end", str()},
                                                                 {"id", str()},
                                                                 {"url", str()}},
                                                                {"seg", "url"}))}},
                             {"highlights"})));
  d.push_back(make("trim", C::video, "Trim a video to a millisecond window.",
                   object_of({{"video", media()}, {"seg", seg()}}, {"video", "seg"}),
                   object_of({{"video", artifact()}}, {"video"})));
  return d;
}

ToolBackend resolve_backend(std::string_view binding) {
  if (binding == "stub:generate") {
    return [](const json& in, const ToolContext& ctx) { return run_generate(in, ctx); };
  }
  constexpr std::string_view prefix = "fixture:";
  if (binding.substr(0, prefix.size()) != prefix) return {};
  std::string tool(binding.substr(prefix.size()));
  static const std::set<std::string> known = [] {
    std::set<std::string> s;
    for (const auto& d : fixture_descriptors()) s.insert(d.name);
    return s;
  }();
  if (!known.count(tool) || tool == "generate") return {};
  return [tool](const json& in, const ToolContext& ctx) { return run_fixture(tool, in, ctx); };
}

void register_fixture_tools(ToolRegistry& registry) {
  for (auto& d : fixture_descriptors()) {
    auto backend = resolve_backend(d.backend);
    registry.add(std::move(d), std::move(backend));
  }
}

}  // namespace orion::fixtures
