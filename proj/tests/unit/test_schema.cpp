#include <openssl/sha.h>

#include <random>
#include <set>

#include "doctest.h"
#include "orion/schema.hpp"
#include "orion/util.hpp"

using namespace orion;

namespace {

const json kDetections = json::parse(R"({
  "type": "object",
  "required": ["detections"],
  "properties": {
    "detections": {"type": "array", "minItems": 1, "items": {
      "type": "object", "required": ["label", "bbox"],
      "properties": {"label": {"type": "string"},
                     "bbox": {"type": "object", "required": ["x"], "properties": {"x": {"type": "number", "minimum": 0, "maximum": 1}}},
                     "kind": {"enum": ["a", "b"]}}}}}})");

}  // namespace

TEST_CASE("valid document has no violations") {
  CHECK(validate_schema(json::parse(R"({"detections":[{"label":"car","bbox":{"x":0.5}}]})"), kDetections).empty());
}

TEST_CASE("violations carry paths and kinds") {
  auto v = validate_schema(json::parse(R"({"detections":[{"label":3,"bbox":{"x":1.5},"kind":"c"},{"bbox":{}}]})"),
                           kDetections);
  REQUIRE(v.size() == 5);
  std::set<std::string> seen;
  for (const auto& x : v) seen.insert(x.path + "/" + std::string(violation_kind_name(x.kind)));
  CHECK(seen.count("detections[0].label/type"));
  CHECK(seen.count("detections[0].bbox.x/range"));
  CHECK(seen.count("detections[0].kind/enum"));
  CHECK(seen.count("detections[1].label/missing"));
  CHECK(seen.count("detections[1].bbox.x/missing"));

  auto root = validate_schema(json::array(), kDetections);
  REQUIRE(root.size() == 1);
  CHECK(root[0].path == "$");

  auto empty = validate_schema(json::parse(R"({"detections":[]})"), kDetections);
  REQUIRE(empty.size() == 1);
  CHECK(empty[0].kind == ViolationKind::range);
}

TEST_CASE("integer accepts integral floats, anyOf and type lists") {
  CHECK(validate_schema(3.0, json{{"type", "integer"}}).empty());
  CHECK_FALSE(validate_schema(3.5, json{{"type", "integer"}}).empty());
  const json any{{"anyOf", json::array({{{"type", "string"}}, {{"type", "null"}}})}};
  CHECK(validate_schema(nullptr, any).empty());
  CHECK_FALSE(validate_schema(1, any).empty());
  CHECK(validate_schema(nullptr, json{{"type", {"string", "null"}}}).empty());
}

TEST_CASE("violation rendering") {
  std::vector<Violation> v{{"a", ViolationKind::missing, "required key is missing"}, {"b[0]", ViolationKind::type, "x"}};
  CHECK(describe(v) == "a: required key is missing; b[0]: x");
  CHECK(violations_to_json(v)[1]["kind"] == "type");
}

TEST_CASE("selectors") {
  const json doc = json::parse(R"({"detections":[{"bbox":{"x":0.1}},{"bbox":{"x":0.2}}],"text":"hi"})");
  REQUIRE(select_path(doc, "detections[1].bbox.x"));
  CHECK(*select_path(doc, "detections[1].bbox.x") == 0.2);
  CHECK(*select_path(doc, "text") == "hi");
  CHECK(select_path(doc, "detections[2]") == nullptr);
  CHECK(select_path(doc, "missing.key") == nullptr);
  CHECK(select_path(doc, "text[0]") == nullptr);
  for (const char* bad : {"", ".a", "a.", "a..b", "a[]", "a[x]", "a[0]b", "[0"}) {
    CAPTURE(bad);
    CHECK_FALSE(parse_path(bad));
  }
  auto p = parse_path("a[0][1].b");
  REQUIRE(p);
  CHECK(p->size() == 4);
}

// ---------------------------------------------------------------- util

TEST_CASE("text helpers") {
  CHECK(fold("MiXeD 12") == "mixed 12");
  CHECK(tokenize("Red car, 10:09!") == std::vector<std::string>{"red", "car", "10", "09"});
  CHECK(jaccard(token_set("a b"), token_set("b c")) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccard({}, {}) == 0.0);
  CHECK(shares_token(token_set("red car"), token_set("CAR")));
  CHECK(utf8_length("caf\xc3\xa9") == 4);
}

TEST_CASE("digests against known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // RFC 4231 test case 2
  CHECK(hmac_sha256_hex("Jefe", "what do ya want for nothing?") ==
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843");
  CHECK(constant_time_equal("abc", "abc"));
  CHECK_FALSE(constant_time_equal("abc", "abd"));
  CHECK_FALSE(constant_time_equal("abc", "ab"));
}

TEST_CASE("property: base64 round trip and sha256 against the one-shot digest") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    std::string s(rng() % 200, '\0');
    for (auto& c : s) c = static_cast<char>(rng() & 0xff);
    REQUIRE(base64_decode(base64_encode(s)) == s);
    unsigned char md[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(s.data()), s.size(), md);
    char hex[2 * SHA256_DIGEST_LENGTH + 1];
    for (int k = 0; k < SHA256_DIGEST_LENGTH; ++k) std::snprintf(hex + 2 * k, 3, "%02x", md[k]);
    REQUIRE(sha256_hex(s) == hex);
  }
  CHECK(base64_encode("hello") == "aGVsbG8=");
}
