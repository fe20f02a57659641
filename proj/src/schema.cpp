#include "orion/schema.hpp"

#include <cctype>

namespace orion {

std::string_view violation_kind_name(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::missing: return "missing";
    case ViolationKind::type: return "type";
    case ViolationKind::enum_: return "enum";
    case ViolationKind::parse: return "parse";
    case ViolationKind::range: return "range";
  }
  return "type";
}

namespace {

std::string child(const std::string& parent, const std::string& key) {
  return parent == "$" ? key : parent + "." + key;
}

std::string index(const std::string& parent, std::size_t i) {
  return (parent == "$" ? std::string() : parent) + "[" + std::to_string(i) + "]";
}

bool matches_type(const json& v, std::string_view type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    // 3.0 is an integer in JSON-schema terms
    return v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()));
  }
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return true;
}

std::string type_of(const json& v) {
  switch (v.type()) {
    case json::value_t::object: return "object";
    case json::value_t::array: return "array";
    case json::value_t::string: return "string";
    case json::value_t::boolean: return "boolean";
    case json::value_t::null: return "null";
    case json::value_t::number_integer:
    case json::value_t::number_unsigned: return "integer";
    case json::value_t::number_float: return "number";
    default: return "unknown";
  }
}

void validate_into(const json& v, const json& schema, const std::string& path,
                   std::vector<Violation>& out) {
  if (!schema.is_object()) return;

  if (auto any = schema.find("anyOf"); any != schema.end() && any->is_array()) {
    bool ok = false;
    for (const auto& branch : *any) {
      std::vector<Violation> scratch;
      validate_into(v, branch, path, scratch);
      if (scratch.empty()) {
        ok = true;
        break;
      }
    }
    if (!ok) out.push_back({path, ViolationKind::type, "value matches no anyOf branch"});
    return;
  }

  if (auto t = schema.find("type"); t != schema.end()) {
    bool ok = false;
    std::string expected;
    if (t->is_string()) {
      expected = t->get<std::string>();
      ok = matches_type(v, expected);
    } else if (t->is_array()) {
      for (const auto& alt : *t) {
        if (!alt.is_string()) continue;
        if (!expected.empty()) expected += "|";
        expected += alt.get<std::string>();
        ok = ok || matches_type(v, alt.get<std::string>());
      }
    } else {
      ok = true;
    }
    if (!ok) {
      out.push_back({path, ViolationKind::type, "expected " + expected + ", got " + type_of(v)});
      return;
    }
  }

  if (auto e = schema.find("enum"); e != schema.end() && e->is_array()) {
    bool found = false;
    for (const auto& alt : *e) found = found || alt == v;
    if (!found) out.push_back({path, ViolationKind::enum_, "value " + v.dump() + " not in " + e->dump()});
  }

  if (v.is_number()) {
    const double x = v.get<double>();
    if (auto m = schema.find("minimum"); m != schema.end() && m->is_number() && x < m->get<double>()) {
      out.push_back({path, ViolationKind::range, "below minimum " + m->dump()});
    }
    if (auto m = schema.find("maximum"); m != schema.end() && m->is_number() && x > m->get<double>()) {
      out.push_back({path, ViolationKind::range, "above maximum " + m->dump()});
    }
  }

  if (v.is_object()) {
    if (auto req = schema.find("required"); req != schema.end() && req->is_array()) {
      for (const auto& k : *req) {
        if (k.is_string() && !v.contains(k.get<std::string>())) {
          out.push_back({child(path, k.get<std::string>()), ViolationKind::missing,
                         "required key is missing"});
        }
      }
    }
    if (auto props = schema.find("properties"); props != schema.end() && props->is_object()) {
      for (const auto& [key, sub] : props->items()) {
        if (auto it = v.find(key); it != v.end()) validate_into(*it, sub, child(path, key), out);
      }
    }
  }

  if (v.is_array()) {
    if (auto m = schema.find("minItems"); m != schema.end() && m->is_number_integer() &&
                                          static_cast<long long>(v.size()) < m->get<long long>()) {
      out.push_back({path, ViolationKind::range, "fewer than " + m->dump() + " items"});
    }
    if (auto m = schema.find("maxItems"); m != schema.end() && m->is_number_integer() &&
                                          static_cast<long long>(v.size()) > m->get<long long>()) {
      out.push_back({path, ViolationKind::range, "more than " + m->dump() + " items"});
    }
    if (auto items = schema.find("items"); items != schema.end() && items->is_object()) {
      for (std::size_t i = 0; i < v.size(); ++i) validate_into(v[i], *items, index(path, i), out);
    }
  }
}

}  // namespace

std::vector<Violation> validate_schema(const json& value, const json& schema) {
  std::vector<Violation> out;
  validate_into(value, schema, "$", out);
  return out;
}

json violations_to_json(const std::vector<Violation>& v) {
  json arr = json::array();
  for (const auto& x : v) {
    arr.push_back({{"path", x.path}, {"kind", violation_kind_name(x.kind)}, {"detail", x.detail}});
  }
  return arr;
}

std::string describe(const std::vector<Violation>& v) {
  std::string out;
  for (const auto& x : v) {
    if (!out.empty()) out += "; ";
    out += x.path + ": " + x.detail;
  }
  return out;
}

// ---------------------------------------------------------------- selectors

std::optional<std::vector<PathStep>> parse_path(std::string_view path) {
  if (path.empty()) return std::nullopt;
  std::vector<PathStep> steps;
  std::size_t i = 0;
  bool expect_key = true;
  while (i < path.size()) {
    if (path[i] == '[') {
      auto close = path.find(']', i);
      if (close == std::string_view::npos || close == i + 1) return std::nullopt;
      std::size_t n = 0;
      for (std::size_t k = i + 1; k < close; ++k) {
        if (!std::isdigit(static_cast<unsigned char>(path[k]))) return std::nullopt;
        n = n * 10 + static_cast<std::size_t>(path[k] - '0');
      }
      steps.emplace_back(n);
      i = close + 1;
      expect_key = false;
    } else if (path[i] == '.') {
      if (steps.empty() || expect_key) return std::nullopt;
      ++i;
      expect_key = true;
      if (i == path.size()) return std::nullopt;
    } else {
      if (!expect_key) return std::nullopt;
      std::size_t end = i;
      while (end < path.size() && path[end] != '.' && path[end] != '[') ++end;
      steps.emplace_back(std::string(path.substr(i, end - i)));
      i = end;
      expect_key = false;
    }
  }
  return steps;
}

const json* select_path(const json& value, std::string_view path) {
  auto steps = parse_path(path);
  if (!steps) return nullptr;
  const json* cur = &value;
  for (const auto& step : *steps) {
    if (const auto* key = std::get_if<std::string>(&step)) {
      if (!cur->is_object()) return nullptr;
      auto it = cur->find(*key);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else {
      const auto idx = std::get<std::size_t>(step);
      if (!cur->is_array() || idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    }
  }
  return cur;
}

}  // namespace orion
