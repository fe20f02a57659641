#pragma once

// Shared helpers for the unit and acceptance tests.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "orion/agent.hpp"
#include "orion/api_service.hpp"
#include "orion/artifact_store.hpp"
#include "orion/cli.hpp"
#include "orion/fixture_tools.hpp"
#include "orion/util.hpp"

namespace orion::test {

inline std::filesystem::path source_dir() { return ORION_SOURCE_DIR; }
inline std::filesystem::path fixture_path(const std::string& name) { return source_dir() / "fixtures" / name; }
inline std::string fixture_bytes(const std::string& name) { return read_file(fixture_path(name)); }

/// Fresh directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("orion_test_" + random_hex(rng, 12) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Settable clock in unix seconds.
struct FakeClock {
  std::shared_ptr<std::atomic<std::int64_t>> t = std::make_shared<std::atomic<std::int64_t>>(1700000000);
  std::function<std::int64_t()> fn() const {
    auto p = t;
    return [p] { return p->load(); };
  }
  void advance(std::int64_t s) { *t += s; }
};

inline std::shared_ptr<ArtifactStore> make_store(const std::filesystem::path& root, const FakeClock* clock = nullptr) {
  StoreConfig c;
  c.root = root;
  c.signing_key = "test-signing-key";
  if (clock) c.clock = clock->fn();
  return std::make_shared<ArtifactStore>(c);
}

inline std::shared_ptr<ToolRegistry> fixture_registry(bool freeze = true) {
  auto r = std::make_shared<ToolRegistry>();
  fixtures::register_fixture_tools(*r);
  if (freeze) r->freeze();
  return r;
}

/// Full runtime on a fixed clock and signing key, so signed urls are reproducible.
inline Runtime fixed_runtime(const std::filesystem::path& dir, const FakeClock& clock) {
  RuntimeConfig cfg;
  cfg.data_dir = dir;
  cfg.signing_key = "test-signing-key";
  return build_runtime(cfg, clock.fn());
}

inline double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json user_turn(const std::string& text, const std::vector<std::string>& file_ids = {}) {
  json content = json::array({{{"type", "text"}, {"text", text}}});
  for (const auto& id : file_ids) content.push_back({{"type", "input_file"}, {"file_id", id}});
  return json{{"role", "user"}, {"content", content}};
}

}  // namespace orion::test
