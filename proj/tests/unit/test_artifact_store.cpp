#include <random>
#include <thread>

#include "doctest.h"
#include "support.hpp"

using namespace orion;
using namespace orion::test;

TEST_CASE("content addressing is idempotent") {
  TempDir dir;
  FakeClock clock;
  auto store = make_store(dir.path(), &clock);
  const auto a = store->put("hello", "text/plain", "a.txt");
  clock.advance(10);
  const auto b = store->put("hello", "text/plain", "b.txt");
  CHECK(a.id == b.id);
  CHECK(a.id == "file_" + sha256_hex("hello").substr(0, 16));
  CHECK(b.name == "a.txt");  // first write wins
  CHECK(b.created_at == a.created_at);
  CHECK(store->get(a.id).bytes == "hello");
  CHECK(store->get(a.id).mime == "text/plain");
  CHECK(store->stat(a.id).size == 5);
  CHECK(store->put("world", "text/plain", "").id != a.id);
}

TEST_CASE("put rejects bad payloads") {
  TempDir dir;
  StoreConfig c;
  c.root = dir.path();
  c.signing_key = "k";
  c.max_object_bytes = 8;
  c.capacity_bytes = 12;
  ArtifactStore store(c);
  CHECK_THROWS_AS(store.put("", "text/plain", ""), Error);
  CHECK_THROWS_AS(store.put("x", "", ""), Error);
  try {
    store.put("123456789", "text/plain", "");
    FAIL("expected PayloadTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::payload_too_large);
  }
  store.put("12345678", "text/plain", "");
  store.put("12345678", "text/plain", "");  // already stored, no extra capacity needed
  try {
    store.put("abcdefgh", "text/plain", "");
    FAIL("expected StorageFull");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::storage_full);
  }
}

TEST_CASE("unknown ids") {
  TempDir dir;
  auto store = make_store(dir.path());
  CHECK_FALSE(store->contains("file_0000000000000000"));
  CHECK_THROWS_AS(store->get("file_0000000000000000"), Error);
  CHECK_THROWS_AS(store->sign("file_0000000000000000"), Error);
}

TEST_CASE("signed urls: verify, expiry, tamper") {
  TempDir dir;
  FakeClock clock;
  auto store = make_store(dir.path(), &clock);
  const auto f = store->put("payload", "text/plain", "");
  const auto s = store->sign(f.id, 60);
  CHECK(s.expires == clock.t->load() + 60);
  CHECK(store->verify(s.url) == f.id);

  std::string tampered = s.url;
  tampered[tampered.size() - 1] = tampered.back() == '0' ? '1' : '0';
  try {
    store->verify(tampered);
    FAIL("expected BadSignature");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::bad_signature);
  }
  // extending the expiry invalidates the signature
  auto longer = s.url;
  longer.replace(longer.find("expires=") + 8, std::to_string(s.expires).size(), std::to_string(s.expires + 1000));
  CHECK_THROWS_AS(store->verify(longer), Error);

  clock.advance(59);
  CHECK(store->verify(s.url) == f.id);
  clock.advance(1);
  try {
    store->verify(s.url);
    FAIL("expected Expired");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::expired);
  }
  for (const char* bad : {"", "/v1/files/x", "/v1/artifacts/file_1", "/v1/artifacts/file_1?sig=ab",
                          "/v1/artifacts/file_1?expires=zz&sig=ab"}) {
    CAPTURE(bad);
    try {
      store->verify(bad);
      FAIL("expected Malformed");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_url);
    }
  }
}

TEST_CASE("another key rejects the url") {
  TempDir dir;
  auto a = make_store(dir.path());
  StoreConfig c;
  c.root = dir.path();
  c.signing_key = "other";
  ArtifactStore b(c);
  const auto f = a->put("x", "text/plain", "");
  CHECK_THROWS_AS(b.verify(a->sign(f.id).url), Error);
}

TEST_CASE("index survives a restart and base url is prepended") {
  TempDir dir;
  std::string id;
  {
    auto store = make_store(dir.path());
    id = store->put("persist me", "application/json", "p.json").id;
  }
  StoreConfig c;
  c.root = dir.path();
  c.signing_key = "test-signing-key";
  c.base_url = "http://localhost:8080";
  ArtifactStore again(c);
  CHECK(again.contains(id));
  CHECK(again.stat(id).name == "p.json");
  const auto url = again.sign(id).url;
  CHECK(url.rfind("http://localhost:8080/v1/artifacts/" + id + "?expires=", 0) == 0);
  CHECK(again.verify(url) == id);
}

TEST_CASE("concurrent identical puts converge") {
  TempDir dir;
  auto store = make_store(dir.path());
  std::vector<std::thread> ts;
  std::vector<std::string> ids(8);
  for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { ids[i] = store->put("same bytes", "text/plain", "").id; });
  for (auto& t : ts) t.join();
  for (const auto& id : ids) CHECK(id == ids[0]);
  CHECK(store->get(ids[0]).bytes == "same bytes");
}

TEST_CASE("property: random payloads round trip and sign") {
  TempDir dir;
  FakeClock clock;
  auto store = make_store(dir.path(), &clock);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    std::string s(1 + rng() % 64, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng() & 0xff);
    const auto f = store->put(s, "application/octet-stream", "");
    REQUIRE(store->get(f.id).bytes == s);
    REQUIRE(f.sha256 == sha256_hex(s));
    REQUIRE(store->verify(store->sign(f.id, 1 + static_cast<std::int64_t>(rng() % 1000)).url) == f.id);
  }
}
