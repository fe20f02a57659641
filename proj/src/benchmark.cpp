#include "orion/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <regex>
#include <thread>

#include "httplib.h"
#include "orion/api_service.hpp"
#include "orion/error.hpp"
#include "orion/fixtures.hpp"
#include "orion/util.hpp"

namespace orion::bench {

bool Grader::grade(const std::string& answer) const {
  if (kind == "contains") return fold(answer).find(fold(expected)) != std::string::npos;
  if (kind == "equals") return answer == expected;
  if (kind == "regex") return std::regex_search(answer, std::regex(expected, std::regex::ECMAScript | std::regex::icase));
  throw Error(Errc::invalid_value, "unknown grader '" + kind + "'");
}

Suite Suite::load(const std::filesystem::path& path) {
  const auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::invalid_value, "suite " + path.string() + " is not a JSON object");
  try {
    Suite s;
    s.name = j.value("name", path.stem().string());
    const auto base = path.parent_path();
    for (const auto& ji : j.at("items")) {
      Item it;
      it.id = ji.at("id").get<std::string>();
      it.prompt = ji.at("prompt").get<std::string>();
      for (const auto& f : ji.value("files", json::array())) {
        std::filesystem::path p = f.get<std::string>();
        it.files.push_back(p.is_absolute() ? p : base / p);
      }
      const auto& g = ji.at("grader");
      it.grader.kind = g.value("kind", std::string("contains"));
      it.grader.expected = g.at("expected").get<std::string>();
      s.items.push_back(std::move(it));
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_value, "suite " + path.string() + ": " + e.what());
  }
}

std::string guess_mime(const std::filesystem::path& p) {
  const auto name = fold(p.filename().string());
  auto ends = [&](std::string_view suf) {
    return name.size() >= suf.size() && name.compare(name.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends(".scene.json")) return std::string(fixtures::kSceneMime);
  if (ends(".doc.json")) return std::string(fixtures::kDocumentMime);
  if (ends(".video.json")) return std::string(fixtures::kVideoMime);
  if (ends(".json")) return "application/json";
  if (ends(".png")) return "image/png";
  if (ends(".jpg") || ends(".jpeg")) return "image/jpeg";
  if (ends(".pdf")) return "application/pdf";
  if (ends(".mp4")) return "video/mp4";
  if (ends(".pgm")) return std::string(fixtures::kMaskMime);
  return "text/plain";
}

// ---------------------------------------------------------------- endpoints

namespace {

std::string reply_error(int status, const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.contains("error") && j["error"].is_object()) {
    return "HTTP " + std::to_string(status) + ": " + j["error"].value("message", std::string());
  }
  return "HTTP " + std::to_string(status);
}

}  // namespace

InProcessEndpoint::InProcessEndpoint(ApiService& api, std::string api_key)
    : api_(api), auth_(api_key.empty() ? "" : "Bearer " + api_key) {}

std::string InProcessEndpoint::upload(const std::string& filename, const std::string& mime, const std::string& bytes) {
  const auto r = api_.upload(filename, mime, bytes, auth_);
  if (r.status != 200) throw Error(Errc::io_error, reply_error(r.status, r.body));
  return json::parse(r.body).at("id").get<std::string>();
}

json InProcessEndpoint::complete(const json& request) {
  const auto r = api_.completion(request.dump(), false, auth_);
  if (r.status != 200) throw Error(Errc::io_error, reply_error(r.status, r.body));
  return json::parse(r.body);
}

HttpEndpoint::HttpEndpoint(std::string host, int port, std::string api_key, int timeout_s)
    : host_(std::move(host)), port_(port), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

std::string HttpEndpoint::upload(const std::string& filename, const std::string& mime, const std::string& bytes) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(timeout_s_);
  cli.set_read_timeout(timeout_s_);
  if (!api_key_.empty()) cli.set_bearer_token_auth(api_key_);
  httplib::MultipartFormDataItems items{{"file", bytes, filename, mime}};
  auto res = cli.Post("/v1/files", items);
  if (!res) throw Error(Errc::io_error, "upload failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::io_error, reply_error(res->status, res->body));
  return json::parse(res->body).at("id").get<std::string>();
}

json HttpEndpoint::complete(const json& request) {
  httplib::Client cli(host_, port_);
  cli.set_connection_timeout(timeout_s_);
  cli.set_read_timeout(timeout_s_);
  if (!api_key_.empty()) cli.set_bearer_token_auth(api_key_);
  auto res = cli.Post("/v1/agent/completions", request.dump(), "application/json");
  if (!res) throw Error(Errc::io_error, "completion failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::io_error, reply_error(res->status, res->body));
  return json::parse(res->body);
}

// ---------------------------------------------------------------- runner

json to_json(const Record& r) {
  json results = json::array();
  for (const auto& x : r.results) {
    json jx{{"id", x.id}, {"correct", x.correct}, {"answer", x.answer}, {"latency_ms", x.latency_ms}};
    if (!x.error.empty()) jx["error"] = x.error;
    results.push_back(std::move(jx));
  }
  return json{{"suite", r.suite},     {"model", r.model},       {"items", r.items},
              {"correct", r.correct}, {"errors", r.errors},     {"accuracy", r.accuracy},
              {"results", results}};
}

Record run(const Suite& suite, Endpoint& endpoint, const std::string& model, int concurrency) {
  Record rec;
  rec.suite = suite.name;
  rec.model = model;
  rec.items = static_cast<int>(suite.items.size());
  rec.results.resize(suite.items.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const auto k = next.fetch_add(1);
      if (k >= suite.items.size()) return;
      const auto& item = suite.items[k];
      auto& out = rec.results[k];
      out.id = item.id;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        json content = json::array({{{"type", "text"}, {"text", item.prompt}}});
        for (const auto& f : item.files) {
          const auto id = endpoint.upload(f.filename().string(), guess_mime(f), read_file(f));
          content.push_back({{"type", "input_file"}, {"file_id", id}});
        }
        const auto resp = endpoint.complete(
            json{{"model", model}, {"messages", json::array({{{"role", "user"}, {"content", content}}})}});
        out.answer = resp.at("choices").at(0).at("message").at("content").get<std::string>();
        out.correct = item.grader.grade(out.answer);
      } catch (const std::exception& e) {
        out.error = e.what();
        out.correct = false;
      }
      out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  const auto n = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, concurrency)),
                                                                suite.items.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n && !suite.items.empty(); ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (const auto& r : rec.results) {
    rec.correct += r.correct ? 1 : 0;
    rec.errors += r.error.empty() ? 0 : 1;
  }
  rec.accuracy = rec.items == 0 ? 0.0 : static_cast<double>(rec.correct) / rec.items;
  return rec;
}

}  // namespace orion::bench
