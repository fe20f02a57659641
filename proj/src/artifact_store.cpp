#include "orion/artifact_store.hpp"

#include <algorithm>
#include <charconv>

#include "orion/util.hpp"

namespace fs = std::filesystem;

namespace orion {

namespace {

constexpr std::string_view kArtifactPath = "/v1/artifacts/";

std::string id_for(const std::string& sha) { return "file_" + sha.substr(0, 16); }

bool is_hex_digest(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

StoredFile stored_from_meta(const json& meta, const std::string& sha) {
  StoredFile f;
  f.id = id_for(sha);
  f.sha256 = sha;
  f.mime = meta.value("mime", std::string("application/octet-stream"));
  f.name = meta.value("name", std::string());
  f.size = meta.value("size", std::size_t{0});
  f.created_at = meta.value("created_at", std::int64_t{0});
  return f;
}

std::optional<std::string> query_param(std::string_view query, std::string_view key) {
  std::size_t pos = 0;
  while (pos <= query.size()) {
    auto amp = query.find('&', pos);
    if (amp == std::string_view::npos) amp = query.size();
    auto pair = query.substr(pos, amp - pos);
    auto eq = pair.find('=');
    if (eq != std::string_view::npos && pair.substr(0, eq) == key) {
      return std::string(pair.substr(eq + 1));
    }
    pos = amp + 1;
  }
  return std::nullopt;
}

}  // namespace

json to_json(const StoredFile& f) {
  return json{{"id", f.id},   {"sha256", f.sha256}, {"mime", f.mime},
              {"size", f.size}, {"name", f.name},   {"created_at", f.created_at}};
}

ArtifactStore::ArtifactStore(StoreConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.signing_key.empty()) throw Error(Errc::invalid_value, "artifact store needs a signing key");
  if (cfg_.default_ttl_s <= 0) throw Error(Errc::invalid_value, "default ttl must be positive");
  fs::create_directories(cfg_.root);
  for (const auto& shard : fs::directory_iterator(cfg_.root)) {
    if (!shard.is_directory()) continue;
    for (const auto& entry : fs::directory_iterator(shard.path())) {
      const auto name = entry.path().filename().string();
      if (!entry.is_regular_file() || !is_hex_digest(name)) continue;
      index_.emplace(id_for(name), name);
      used_bytes_ += static_cast<std::size_t>(entry.file_size());
    }
  }
}

std::int64_t ArtifactStore::now() const { return cfg_.clock ? cfg_.clock() : unix_now_seconds(); }

fs::path ArtifactStore::data_path(const std::string& sha) const {
  return cfg_.root / sha.substr(0, 2) / sha;
}

std::optional<std::string> ArtifactStore::find_sha(std::string_view id) const {
  std::shared_lock lock(mu_);
  if (auto it = index_.find(id); it != index_.end()) return it->second;
  return std::nullopt;
}

StoredFile ArtifactStore::put(std::string_view bytes, std::string_view mime, std::string_view name) {
  if (bytes.empty()) throw Error(Errc::empty_payload, "refusing to store an empty payload");
  if (mime.empty()) throw Error(Errc::invalid_value, "mime type is required");
  if (bytes.size() > cfg_.max_object_bytes) {
    throw Error(Errc::payload_too_large, "payload of " + std::to_string(bytes.size()) +
                                             " bytes exceeds the " +
                                             std::to_string(cfg_.max_object_bytes) + " byte limit");
  }
  const std::string sha = sha256_hex(bytes);
  const auto path = data_path(sha);
  auto meta_path = path;
  meta_path += ".meta";

  if (auto existing = find_sha(id_for(sha)); existing && *existing == sha && fs::exists(meta_path)) {
    return stored_from_meta(json::parse(read_file(meta_path)), sha);
  }

  {
    std::unique_lock lock(mu_);
    if (cfg_.capacity_bytes != 0 && !index_.count(id_for(sha)) &&
        used_bytes_ + bytes.size() > cfg_.capacity_bytes) {
      throw Error(Errc::storage_full, "artifact store capacity exhausted");
    }
  }

  fs::create_directories(path.parent_path());
  StoredFile f{id_for(sha), sha, std::string(mime), bytes.size(), std::string(name), now()};
  // Concurrent writers of identical content converge: both renames land the same bytes.
  write_file_atomic(path, bytes);
  json meta{{"mime", f.mime}, {"name", f.name}, {"size", f.size}, {"created_at", f.created_at}};
  write_file_atomic(meta_path, meta.dump());

  std::unique_lock lock(mu_);
  if (index_.emplace(f.id, sha).second) used_bytes_ += bytes.size();
  return f;
}

StoredFile ArtifactStore::stat(std::string_view id) const {
  auto sha = find_sha(id);
  if (!sha) throw Error(Errc::not_found, "no such file '" + std::string(id) + "'");
  auto meta_path = data_path(*sha);
  meta_path += ".meta";
  return stored_from_meta(json::parse(read_file(meta_path)), *sha);
}

Blob ArtifactStore::get(std::string_view id) const {
  const auto f = stat(id);
  return Blob{read_file(data_path(f.sha256)), f.mime};
}

bool ArtifactStore::contains(std::string_view id) const { return find_sha(id).has_value(); }

SignedUrl ArtifactStore::sign(std::string_view id, std::optional<std::int64_t> ttl_s) const {
  if (!contains(id)) throw Error(Errc::not_found, "no such file '" + std::string(id) + "'");
  const std::int64_t ttl = ttl_s.value_or(cfg_.default_ttl_s);
  if (ttl <= 0) throw Error(Errc::invalid_value, "ttl must be positive");
  const std::int64_t expires = now() + ttl;
  const std::string payload = std::string(id) + "|" + std::to_string(expires);
  SignedUrl s;
  s.id = std::string(id);
  s.expires = expires;
  s.url = cfg_.base_url + std::string(kArtifactPath) + s.id + "?expires=" + std::to_string(expires) +
          "&sig=" + hmac_sha256_hex(cfg_.signing_key, payload);
  return s;
}

std::string ArtifactStore::verify(std::string_view url) const {
  const auto at = url.find(kArtifactPath);
  if (at == std::string_view::npos) throw Error(Errc::malformed_url, "not an artifact url");
  auto rest = url.substr(at + kArtifactPath.size());
  const auto q = rest.find('?');
  if (q == std::string_view::npos) throw Error(Errc::malformed_url, "artifact url has no query");
  const std::string id(rest.substr(0, q));
  const auto query = rest.substr(q + 1);
  const auto expires_s = query_param(query, "expires");
  const auto sig = query_param(query, "sig");
  if (id.empty() || !expires_s || !sig) {
    throw Error(Errc::malformed_url, "artifact url needs an id, expires and sig");
  }
  std::int64_t expires = 0;
  auto [ptr, ec] = std::from_chars(expires_s->data(), expires_s->data() + expires_s->size(), expires);
  if (ec != std::errc{} || ptr != expires_s->data() + expires_s->size()) {
    throw Error(Errc::malformed_url, "expires is not an integer");
  }
  const auto expected = hmac_sha256_hex(cfg_.signing_key, id + "|" + *expires_s);
  if (!constant_time_equal(expected, *sig)) throw Error(Errc::bad_signature, "signature mismatch");
  if (now() >= expires) throw Error(Errc::expired, "signed url expired");
  return id;
}

ArtifactRef ArtifactStore::make_ref(const StoredFile& f, Modality modality,
                                    std::map<std::string, std::string> meta) const {
  ArtifactRef a;
  a.id = f.id;
  a.modality = modality;
  a.mime = f.mime;
  a.url = sign(f.id).url;
  a.meta = std::move(meta);
  return a;
}

}  // namespace orion
