#pragma once

// Validation for the JSON-schema subset used by tool contracts and structured
// outputs: type (object, array, string, number, integer, boolean, null),
// properties, required, enum, items, anyOf, minimum/maximum, minItems/maxItems.
// Unknown keywords are ignored.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace orion {

using json = nlohmann::json;

enum class ViolationKind { missing, type, enum_, parse, range };

std::string_view violation_kind_name(ViolationKind k) noexcept;

struct Violation {
  std::string path;  // "$" for the root, otherwise e.g. "detections[0].bbox"
  ViolationKind kind{ViolationKind::type};
  std::string detail;
};

/// Reports every violation, not just the first.
std::vector<Violation> validate_schema(const json& value, const json& schema);

/// [{path, kind, detail}, ...]
json violations_to_json(const std::vector<Violation>& v);

/// "path: detail; path: detail"
std::string describe(const std::vector<Violation>& v);

// ---------------------------------------------------------------- selectors

/// One step of a selector like `detections[0].bbox`.
using PathStep = std::variant<std::string, std::size_t>;

/// Parses a dotted/indexed selector. Returns nullopt on syntax errors or empty input.
std::optional<std::vector<PathStep>> parse_path(std::string_view path);

/// nullptr when any step is missing.
const json* select_path(const json& value, std::string_view path);

}  // namespace orion
