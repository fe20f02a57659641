#pragma once

// Benchmark runner: sends suite items to a completions endpoint and grades
// the answers. Ships with a toy suite over the fixture tools.

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "orion/core.hpp"

namespace orion {

class ApiService;

namespace bench {

struct Grader {
  std::string kind{"contains"};  // contains | equals | regex
  std::string expected;

  bool grade(const std::string& answer) const;
};

struct Item {
  std::string id;
  std::string prompt;
  std::vector<std::filesystem::path> files;
  Grader grader;
};

struct Suite {
  std::string name;
  std::vector<Item> items;

  /// Relative file paths resolve against the suite file's directory.
  static Suite load(const std::filesystem::path& path);
};

/// Where completions come from.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// Returns the file id.
  virtual std::string upload(const std::string& filename, const std::string& mime, const std::string& bytes) = 0;
  /// Returns the completion response body.
  virtual json complete(const json& request) = 0;
};

/// Calls the service handlers directly.
class InProcessEndpoint : public Endpoint {
 public:
  InProcessEndpoint(ApiService& api, std::string api_key = "");
  std::string upload(const std::string& filename, const std::string& mime, const std::string& bytes) override;
  json complete(const json& request) override;

 private:
  ApiService& api_;
  std::string auth_;
};

/// Talks to a running server over HTTP.
class HttpEndpoint : public Endpoint {
 public:
  HttpEndpoint(std::string host, int port, std::string api_key = "", int timeout_s = 60);
  std::string upload(const std::string& filename, const std::string& mime, const std::string& bytes) override;
  json complete(const json& request) override;

 private:
  std::string host_;
  int port_;
  std::string api_key_;
  int timeout_s_;
};

struct ItemResult {
  std::string id;
  bool correct{false};
  std::string answer;
  std::string error;  // empty when the call succeeded
  double latency_ms{0};
};

struct Record {
  std::string suite;
  std::string model;
  int items{0};
  int correct{0};
  int errors{0};
  double accuracy{0};  // 0 for an empty suite
  std::vector<ItemResult> results;
};

json to_json(const Record& r);

/// Mime from the file name: *.scene.json, *.doc.json, *.video.json, else by extension.
std::string guess_mime(const std::filesystem::path& p);

Record run(const Suite& suite, Endpoint& endpoint, const std::string& model = "orion:fast", int concurrency = 4);

}  // namespace bench
}  // namespace orion
