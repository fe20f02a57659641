#pragma once

// HTTP surface over the agent. Handlers are transport-free functions returning
// HttpReply so they can be exercised without sockets; start() mounts them on
// an embedded server.
//
//   POST /v1/agent/completions          native completions (stream=true → SSE)
//   POST /v1/openai/chat/completions    OpenAI-compatible alias
//   POST /v1/files                      multipart upload, field "file"
//   GET  /v1/files/{id}                 file metadata plus a signed url
//   GET  /v1/artifacts/{id}?expires&sig signed download, no bearer needed
//   GET  /v1/traces/{id}                execution trace JSON
//   GET  /healthz

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "orion/agent.hpp"

namespace httplib {
class Server;
}

namespace orion {

struct ApiConfig {
  std::vector<std::string> api_keys;  // empty disables bearer auth
  std::size_t max_upload_bytes{32u << 20};
  std::vector<std::string> upload_types{default_upload_types()};

  static std::vector<std::string> default_upload_types();
};

struct HttpReply {
  int status{200};
  std::string content_type{"application/json"};
  std::string body;
  std::vector<std::string> frames;  // SSE frames when content_type is text/event-stream
};

/// {"error": {"message", "type", "code"}}
json error_body(std::string_view message, std::string_view type, std::string_view code);

/// Splits text after each whitespace run; concatenating the pieces gives the input back.
std::vector<std::string> split_fragments(std::string_view text);

/// ceil(chars / 4)
std::int64_t approx_tokens(std::size_t chars);

class ApiService {
 public:
  ApiService(std::shared_ptr<Agent> agent, ApiConfig cfg);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  bool authorized(std::string_view authorization_header) const;

  HttpReply completion(const std::string& body, bool openai_path, std::string_view authorization);
  HttpReply upload(std::string_view filename, std::string_view content_type, const std::string& bytes,
                   std::string_view authorization);
  HttpReply file_info(const std::string& id, std::string_view authorization) const;
  /// `target` is the request path plus query string.
  HttpReply artifact(std::string_view target) const;
  HttpReply trace(const std::string& id, std::string_view authorization) const;
  HttpReply health() const;

  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port, or -1 when binding fails.
  int start(const std::string& host, int port);
  /// Blocks until the server stops.
  void wait();
  void stop();

  Agent& agent() noexcept { return *agent_; }

 private:
  void mount();

  std::shared_ptr<Agent> agent_;
  ApiConfig cfg_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace orion
