#include "orion/structured_output.hpp"

#include <cmath>
#include <cstdlib>

namespace orion {

std::optional<OutputSchema> parse_response_format(const json& value) {
  if (value.is_null()) return std::nullopt;
  if (!value.is_object() || value.value("type", json()) != "json_schema") {
    throw Error(Errc::unsupported_response_format, "response_format must be {\"type\": \"json_schema\", ...}");
  }
  json schema;
  if (value.contains("schema")) {
    schema = value["schema"];
  } else if (value.contains("json_schema") && value["json_schema"].is_object() &&
             value["json_schema"].contains("schema")) {
    schema = value["json_schema"]["schema"];
  } else {
    throw Error(Errc::unsupported_response_format, "response_format has no schema");
  }
  try {
    return OutputSchema::from_json(std::move(schema));
  } catch (const Error& e) {
    throw Error(Errc::unsupported_response_format, e.what());
  }
}

Validated validate_final(std::string_view text, const OutputSchema& schema) {
  Validated out;
  auto parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    out.violations.push_back({"$", ViolationKind::parse, "answer is not valid JSON"});
    return out;
  }
  out.violations = validate_schema(parsed, schema.root);
  if (out.violations.empty()) out.value = std::move(parsed);
  return out;
}

std::string repair_feedback(const std::vector<Violation>& v) {
  std::string s = "The answer does not match the requested schema. Fix these paths:";
  for (const auto& x : v) {
    s += "\n- " + x.path + " (" + std::string(violation_kind_name(x.kind)) + "): " + x.detail;
  }
  return s;
}

Repaired repair_loop(const Generator& generate, const OutputSchema& schema, int max_repairs) {
  if (max_repairs < 0) throw Error(Errc::invalid_value, "max_repairs must be non-negative");
  std::string feedback;
  std::vector<Violation> last;
  for (int call = 1; call <= 1 + max_repairs; ++call) {
    auto v = validate_final(generate(feedback), schema);
    if (v.ok()) return Repaired{std::move(*v.value), call};
    last = std::move(v.violations);
    feedback = repair_feedback(last);
  }
  throw StructuredOutputError("no schema-conformant answer after " + std::to_string(1 + max_repairs) +
                                  " attempts: " + describe(last),
                              last, 1 + max_repairs);
}

// ---------------------------------------------------------------- composer

namespace {

std::string first_type(const json& schema) {
  if (!schema.contains("type")) return "";
  const auto& t = schema["type"];
  if (t.is_string()) return t.get<std::string>();
  if (t.is_array() && !t.empty() && t[0].is_string()) return t[0].get<std::string>();
  return "";
}

bool type_allows(const json& schema, const std::string& type) {
  if (!schema.contains("type")) return true;
  const auto& t = schema["type"];
  if (t.is_string()) return t == type;
  if (t.is_array()) {
    for (const auto& e : t) {
      if (e == type) return true;
    }
  }
  return false;
}

json conform(const json& value, const json& schema);

double clamp_to(const json& schema, double v) {
  if (schema.contains("minimum") && schema["minimum"].is_number()) v = std::max(v, schema["minimum"].get<double>());
  if (schema.contains("maximum") && schema["maximum"].is_number()) v = std::min(v, schema["maximum"].get<double>());
  return v;
}

json as_number(const json& value, const json& schema, bool integer) {
  double v = 0;
  if (value.is_number()) {
    v = value.get<double>();
  } else if (value.is_string()) {
    v = std::strtod(value.get_ref<const std::string&>().c_str(), nullptr);
  } else if (value.is_boolean()) {
    v = value.get<bool>() ? 1 : 0;
  }
  if (!std::isfinite(v)) v = 0;
  v = clamp_to(schema, v);
  if (integer) {
    auto n = static_cast<long long>(std::llround(v));
    if (schema.contains("minimum") && schema["minimum"].is_number() && n < schema["minimum"].get<double>()) ++n;
    if (schema.contains("maximum") && schema["maximum"].is_number() && n > schema["maximum"].get<double>()) --n;
    return n;
  }
  return v;
}

json conform(const json& value, const json& schema) {
  if (!schema.is_object()) return value;
  if (schema.contains("anyOf") && schema["anyOf"].is_array() && !schema["anyOf"].empty()) {
    for (const auto& branch : schema["anyOf"]) {
      if (validate_schema(value, branch).empty()) return value;
    }
    return conform(value, schema["anyOf"][0]);
  }
  if (schema.contains("enum") && schema["enum"].is_array() && !schema["enum"].empty()) {
    for (const auto& e : schema["enum"]) {
      if (e == value) return value;
    }
    return schema["enum"][0];
  }
  if (validate_schema(value, schema).empty()) return value;

  std::string type = first_type(schema);
  // Keep the value's own type when the schema allows it.
  if (value.is_object() && type_allows(schema, "object")) type = "object";
  else if (value.is_array() && type_allows(schema, "array")) type = "array";
  else if (value.is_string() && type_allows(schema, "string")) type = "string";
  if (type.empty() && schema.contains("properties")) type = "object";

  if (type == "object") {
    json out = value.is_object() ? value : json::object();
    const auto props = schema.value("properties", json::object());
    for (const auto& [k, sub] : props.items()) {
      if (out.contains(k)) out[k] = conform(out[k], sub);
    }
    for (const auto& r : schema.value("required", json::array())) {
      const auto key = r.get<std::string>();
      if (!out.contains(key)) out[key] = conform(json(), props.value(key, json::object()));
    }
    return out;
  }
  if (type == "array") {
    json out = value.is_array() ? value : (value.is_null() ? json::array() : json::array({value}));
    const auto items = schema.value("items", json::object());
    for (auto& e : out) e = conform(e, items);
    if (schema.contains("minItems") && schema["minItems"].is_number_integer()) {
      while (static_cast<long long>(out.size()) < schema["minItems"].get<long long>()) out.push_back(conform(json(), items));
    }
    if (schema.contains("maxItems") && schema["maxItems"].is_number_integer()) {
      while (static_cast<long long>(out.size()) > std::max(0LL, schema["maxItems"].get<long long>())) out.erase(out.size() - 1);
    }
    return out;
  }
  if (type == "string") {
    if (value.is_string()) return value;
    if (value.is_null()) return "";
    return value.dump();
  }
  if (type == "number") return as_number(value, schema, false);
  if (type == "integer") return as_number(value, schema, true);
  if (type == "boolean") {
    if (value.is_boolean()) return value;
    if (value.is_string()) return !value.get_ref<const std::string&>().empty();
    if (value.is_number()) return value.get<double>() != 0;
    return false;
  }
  if (type == "null") return nullptr;
  return value;
}

}  // namespace

std::string compose_structured(const OutputSchema& schema, const json& final_value,
                               const std::vector<json>& node_outputs, const std::string& feedback) {
  // A final value that already is the requested object wins outright.
  if (final_value.is_object() && validate_schema(final_value, schema.root).empty()) return final_value.dump();

  json candidate = json::object();
  const auto props = schema.root.value("properties", json::object());
  for (const auto& [key, sub] : props.items()) {
    if (final_value.is_object() && final_value.contains(key)) {
      candidate[key] = final_value[key];
      continue;
    }
    for (const auto& out : node_outputs) {
      if (out.is_object() && out.contains(key)) {
        candidate[key] = out[key];
        break;
      }
    }
    if (!candidate.contains(key) && !feedback.empty() && final_value.is_string() && type_allows(sub, "string") &&
        first_type(sub) == "string") {
      candidate[key] = final_value;
    }
  }
  if (feedback.empty()) return candidate.dump();
  return conform(candidate, schema.root).dump();
}

}  // namespace orion
