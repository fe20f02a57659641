#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

#include "orion/core.hpp"

namespace orion {

struct StoredFile {
  std::string id;      // "file_" + first 16 hex digits of sha256
  std::string sha256;  // full hex digest
  std::string mime;
  std::size_t size{0};
  std::string name;
  std::int64_t created_at{0};  // unix seconds
};

json to_json(const StoredFile& f);

struct Blob {
  std::string bytes;
  std::string mime;
};

struct SignedUrl {
  std::string url;
  std::string id;
  std::int64_t expires{0};
};

struct StoreConfig {
  std::filesystem::path root;
  std::string signing_key;
  std::int64_t default_ttl_s{3600};
  std::size_t max_object_bytes{64u << 20};
  std::size_t capacity_bytes{0};  // 0 means unlimited
  std::string base_url;           // prepended to /v1/artifacts/{id}
  std::function<std::int64_t()> clock;  // unix seconds; system clock when empty
};

/// Content-addressed file store. Objects live at `{root}/{sha[0:2]}/{sha}` with a
/// `{sha}.meta` JSON sidecar; user uploads and tool outputs share one namespace.
class ArtifactStore {
 public:
  explicit ArtifactStore(StoreConfig cfg);

  StoredFile put(std::string_view bytes, std::string_view mime, std::string_view name);
  Blob get(std::string_view id) const;
  StoredFile stat(std::string_view id) const;
  bool contains(std::string_view id) const;

  SignedUrl sign(std::string_view id, std::optional<std::int64_t> ttl_s = std::nullopt) const;

  /// Returns the artifact id. Throws BadSignature, Expired or Malformed.
  std::string verify(std::string_view url) const;

  /// Signed reference for a stored object.
  ArtifactRef make_ref(const StoredFile& f, Modality modality,
                       std::map<std::string, std::string> meta = {}) const;

  std::int64_t now() const;
  const StoreConfig& config() const noexcept { return cfg_; }

 private:
  std::optional<std::string> find_sha(std::string_view id) const;
  std::filesystem::path data_path(const std::string& sha) const;

  StoreConfig cfg_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::string, std::less<>> index_;  // id -> sha256
  std::size_t used_bytes_{0};
};

}  // namespace orion
