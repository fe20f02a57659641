#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orion/artifact_store.hpp"
#include "orion/core.hpp"

namespace orion {

enum class ToolCategory { image, document, video, mixed };
enum class CostHint { cheap, gpu, remote };
enum class Tier { fast, pro, any };

std::string_view category_name(ToolCategory c) noexcept;
ToolCategory parse_category(std::string_view s);
std::string_view cost_hint_name(CostHint c) noexcept;
std::string_view tier_name(Tier t) noexcept;

struct ToolDescriptor {
  std::string name;
  ToolCategory category{ToolCategory::image};
  std::string description;
  json input_schema;
  json output_schema;
  CostHint cost_hint{CostHint::cheap};
  Tier tier{Tier::any};
  std::optional<std::int64_t> timeout_ms;  // overrides the registry default
  int max_concurrency{0};                  // 0 = unlimited, 1 = serialized
  std::string backend;                     // "fixture:<name>" or "stub:<name>"
};

json to_json(const ToolDescriptor& d);
ToolDescriptor descriptor_from_json(const json& j);

/// Everything a backend may touch besides its input.
struct ToolContext {
  std::shared_ptr<ArtifactStore> store;
};

struct ToolOutput {
  json output;
  std::vector<ArtifactRef> artifacts;
};

/// Backends signal deterministic rejections by throwing orion::Error; any other
/// exception is treated as a transient backend failure.
using ToolBackend = std::function<ToolOutput(const json& input, const ToolContext& ctx)>;

enum class ToolStatus { ok, error };
enum class FailureKind { none, input_schema, output_schema, rejected, backend, timeout };

std::string_view failure_kind_name(FailureKind k) noexcept;

struct ToolResult {
  ToolStatus status{ToolStatus::ok};
  json output;
  std::vector<ArtifactRef> artifacts;
  std::string error_message;
  FailureKind failure{FailureKind::none};
  double latency_ms{0};

  bool ok() const noexcept { return status == ToolStatus::ok; }
  /// Only nondeterministic failures are worth another attempt.
  bool retryable() const noexcept {
    return status == ToolStatus::error && (failure == FailureKind::output_schema ||
                                           failure == FailureKind::backend ||
                                           failure == FailureKind::timeout);
  }
};

json to_json(const ToolResult& r);
ToolResult tool_result_from_json(const json& j);

using BackendResolver = std::function<ToolBackend(std::string_view binding)>;

class ToolRegistry {
 public:
  static constexpr std::int64_t kDefaultTimeoutMs = 30000;

  /// Throws DuplicateName, SchemaShape or RegistryFrozen.
  void add(ToolDescriptor desc, ToolBackend backend);

  /// Registration is closed once the service starts handling requests.
  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  const ToolDescriptor* find(std::string_view name) const;
  const ToolDescriptor& descriptor(std::string_view name) const;

  /// Name-sorted; filtered by category when given.
  std::vector<ToolDescriptor> list(std::optional<ToolCategory> category = std::nullopt) const;

  /// Validates input, runs the backend under a deadline, validates the output.
  /// Contract violations come back as status=error results; only an unknown
  /// tool name throws.
  ToolResult invoke(std::string_view name, const json& input, const ToolContext& ctx,
                    std::optional<std::int64_t> timeout_ms = std::nullopt) const;

  /// {"tools": [descriptor, ...]}
  json catalog_json() const;

  /// Registers every descriptor of a catalog document, binding backends through `resolve`.
  void load_catalog(const json& catalog, const BackendResolver& resolve);

 private:
  struct Entry {
    ToolDescriptor desc;
    ToolBackend backend;
    std::shared_ptr<std::mutex> serial;  // set when max_concurrency == 1
  };

  std::map<std::string, Entry, std::less<>> tools_;
  bool frozen_{false};
};

}  // namespace orion
