#pragma once

// Operator entry points and the wiring shared by the server, the one-shot
// runner and the tests.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "orion/agent.hpp"
#include "orion/api_service.hpp"

namespace orion {

struct RuntimeConfig {
  std::filesystem::path data_dir{"orion-data"};
  std::string signing_key;  // random per process when empty
  std::vector<std::string> api_keys;
  std::optional<std::filesystem::path> catalog;   // tool catalog; the built-in fixture tools otherwise
  std::optional<std::filesystem::path> patterns;  // planner pattern table; the built-in table otherwise
  std::string host{"127.0.0.1"};
  int port{8080};
  std::string base_url;
  std::int64_t url_ttl_s{3600};
  std::size_t max_upload_bytes{32u << 20};
  AgentConfig agent;

  /// Reads a JSON config file. Unknown keys are rejected.
  static RuntimeConfig load(const std::filesystem::path& path);
  /// ORION_DATA_DIR, ORION_SIGNING_KEY and ORION_API_KEYS (comma separated).
  void apply_env();
};

struct Runtime {
  std::shared_ptr<ArtifactStore> store;
  std::shared_ptr<ToolRegistry> registry;
  std::shared_ptr<SessionStore> sessions;
  std::shared_ptr<Agent> agent;

  ApiConfig api_config(const RuntimeConfig& cfg) const;
};

/// Store, frozen registry, sessions and agent under cfg.data_dir.
Runtime build_runtime(const RuntimeConfig& cfg, std::function<std::int64_t()> clock = {});

namespace cli {

/// Exit codes: 0 success, 1 user error, 2 internal error.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cli
}  // namespace orion
