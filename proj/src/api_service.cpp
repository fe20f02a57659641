#include "orion/api_service.hpp"

#include <algorithm>
#include <cctype>

#include "httplib.h"
#include "orion/fixtures.hpp"
#include "orion/util.hpp"

namespace orion {

std::vector<std::string> ApiConfig::default_upload_types() {
  return {"application/json",
          std::string(fixtures::kSceneMime),
          std::string(fixtures::kDocumentMime),
          std::string(fixtures::kVideoMime),
          std::string(fixtures::kMaskMime),
          "image/png",
          "image/jpeg",
          "image/webp",
          "application/pdf",
          "video/mp4",
          "text/plain"};
}

json error_body(std::string_view message, std::string_view type, std::string_view code) {
  return json{{"error", {{"message", message}, {"type", type}, {"code", code}}}};
}

std::vector<std::string> split_fragments(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0, i = 0;
  auto ws = [&](std::size_t k) { return std::isspace(static_cast<unsigned char>(text[k])) != 0; };
  while (i < text.size()) {
    while (i < text.size() && ws(i)) ++i;   // leading whitespace stays with the first piece
    while (i < text.size() && !ws(i)) ++i;
    while (i < text.size() && ws(i)) ++i;
    out.emplace_back(text.substr(start, i - start));
    start = i;
  }
  return out;
}

std::int64_t approx_tokens(std::size_t chars) { return static_cast<std::int64_t>((chars + 3) / 4); }

namespace {

HttpReply json_reply(int status, const json& body) {
  HttpReply r;
  r.status = status;
  r.body = body.dump();
  return r;
}

HttpReply error_reply(int status, std::string_view message, std::string_view code) {
  std::string_view type = "invalid_request_error";
  if (status == 401) type = "authentication_error";
  else if (status == 403) type = "permission_error";
  else if (status == 404) type = "not_found_error";
  else if (status == 422) type = "structured_output_error";
  else if (status >= 500) type = "server_error";
  return json_reply(status, error_body(message, type, code));
}

int status_for(Errc c) {
  switch (c) {
    case Errc::not_found:
    case Errc::unknown_session: return 404;
    case Errc::payload_too_large: return 413;
    case Errc::bad_signature:
    case Errc::expired: return 403;
    case Errc::structured_output_failure: return 422;
    case Errc::storage_full:
    case Errc::io_error: return 507;
    case Errc::unknown_mode:
    case Errc::malformed_model_id:
    case Errc::invalid_value:
    case Errc::malformed_url:
    case Errc::empty_payload:
    case Errc::unsupported_response_format:
    case Errc::malformed_timecode:
    case Errc::duplicate_name: return 400;
    default: return 500;
  }
}

HttpReply from_error(const Error& e) { return error_reply(status_for(e.code()), e.what(), errc_name(e.code())); }

struct Prepared {
  AgentRequest req;
  bool stream{false};
  std::string model;
  std::size_t prompt_chars{0};
};

std::string fold_mime(std::string_view mime) {
  auto semi = mime.find(';');
  auto base = fold(mime.substr(0, semi));
  while (!base.empty() && std::isspace(static_cast<unsigned char>(base.back()))) base.pop_back();
  return base;
}

}  // namespace

ApiService::ApiService(std::shared_ptr<Agent> agent, ApiConfig cfg) : agent_(std::move(agent)), cfg_(std::move(cfg)) {}

ApiService::~ApiService() { stop(); }

bool ApiService::authorized(std::string_view header) const {
  if (cfg_.api_keys.empty()) return true;
  constexpr std::string_view prefix = "Bearer ";
  if (header.size() <= prefix.size() || header.substr(0, prefix.size()) != prefix) return false;
  const auto key = header.substr(prefix.size());
  bool ok = false;
  for (const auto& k : cfg_.api_keys) ok = constant_time_equal(k, key) || ok;
  return ok;
}

HttpReply ApiService::completion(const std::string& body, bool openai_path, std::string_view authorization) {
  if (!authorized(authorization)) return error_reply(401, "missing or invalid bearer token", "Unauthorized");

  Prepared prep;
  try {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return error_reply(400, "request body must be a JSON object", "MalformedBody");
    if (!j.contains("model") || !j["model"].is_string()) return error_reply(400, "model is required", "MalformedBody");
    prep.model = j["model"].get<std::string>();
    prep.req.model = parse_model_id(prep.model);
    if (!j.contains("messages") || !j["messages"].is_array() || j["messages"].empty()) {
      return error_reply(400, "messages must be a non-empty list", "MalformedBody");
    }
    for (const auto& jm : j["messages"]) {
      Message m = message_from_json(jm);
      for (auto& part : m.parts) {
        if (part.kind != PartKind::image_url) continue;
        if (part.url.rfind("data:", 0) == 0) {
          // data:<mime>;base64,<payload>
          const auto comma = part.url.find(',');
          const auto header = part.url.substr(5, comma == std::string::npos ? 0 : comma - 5);
          if (comma == std::string::npos || header.find(";base64") == std::string::npos) {
            throw Error(Errc::malformed_url, "image_url data URIs must be base64 encoded");
          }
          const auto mime = fold_mime(header.substr(0, header.find(';')));
          if (std::find(cfg_.upload_types.begin(), cfg_.upload_types.end(), mime) == cfg_.upload_types.end()) {
            return error_reply(415, "unsupported media type '" + mime + "'", "UnsupportedMediaType");
          }
          const auto bytes = base64_decode(std::string_view(part.url).substr(comma + 1));
          const auto stored = agent_->store().put(bytes, mime, "inline");
          part = ContentPart::make_file(stored.id);
        } else {
          // Signed urls minted by this service stand for their artifact.
          part = ContentPart::make_file(agent_->store().verify(part.url));
        }
      }
      prep.prompt_chars += m.text().size();
      prep.req.messages.push_back(std::move(m));
    }
    prep.req.schema = parse_response_format(j.value("response_format", json()));
    prep.stream = j.value("stream", false);
    if (j.contains("session_id") && !j["session_id"].is_null()) {
      if (!j["session_id"].is_string()) return error_reply(400, "session_id must be a string", "MalformedBody");
      prep.req.session_id = j["session_id"].get<std::string>();
    }
  } catch (const Error& e) {
    return from_error(e);
  } catch (const json::exception& e) {
    return error_reply(400, e.what(), "MalformedBody");
  }
  (void)openai_path;  // both paths share one pipeline

  AgentResponse resp;
  try {
    resp = agent_->complete(prep.req);
  } catch (const StructuredOutputError& e) {
    auto reply = error_reply(422, e.what(), errc_name(e.code()));
    auto body_json = json::parse(reply.body);
    body_json["error"]["violations"] = violations_to_json(e.violations());
    reply.body = body_json.dump();
    return reply;
  } catch (const Error& e) {
    return from_error(e);
  } catch (const std::exception& e) {
    return error_reply(500, e.what(), "InternalError");
  }

  const std::string id = "chatcmpl_" + resp.trace_id.substr(std::string("trace_").size());
  const auto created = agent_->store().now();

  if (!prep.stream) {
    const auto prompt = approx_tokens(prep.prompt_chars);
    const auto completion = approx_tokens(resp.content.size());
    json out{{"id", id},
             {"object", "chat.completion"},
             {"created", created},
             {"model", prep.model},
             {"choices",
              json::array({{{"index", 0},
                            {"message", {{"role", "assistant"}, {"content", resp.content}}},
                            {"finish_reason", "stop"}}})},
             {"usage", {{"prompt_tokens", prompt}, {"completion_tokens", completion}, {"total_tokens", prompt + completion}}},
             {"trace_id", resp.trace_id}};
    if (!resp.session_id.empty()) out["session_id"] = resp.session_id;
    return json_reply(200, out);
  }

  HttpReply r;
  r.content_type = "text/event-stream";
  auto chunk = [&](json delta, json finish) {
    json c{{"id", id},
           {"object", "chat.completion.chunk"},
           {"created", created},
           {"model", prep.model},
           {"choices", json::array({{{"index", 0}, {"delta", std::move(delta)}, {"finish_reason", std::move(finish)}}})},
           {"trace_id", resp.trace_id}};
    return "data: " + c.dump() + "\n\n";
  };
  r.frames.push_back(chunk({{"role", "assistant"}}, nullptr));
  for (const auto& piece : split_fragments(resp.content)) r.frames.push_back(chunk({{"content", piece}}, nullptr));
  r.frames.push_back(chunk(json::object(), "stop"));
  r.frames.push_back("data: [DONE]\n\n");
  for (const auto& f : r.frames) r.body += f;
  return r;
}

HttpReply ApiService::upload(std::string_view filename, std::string_view content_type, const std::string& bytes,
                             std::string_view authorization) {
  if (!authorized(authorization)) return error_reply(401, "missing or invalid bearer token", "Unauthorized");
  if (bytes.size() > cfg_.max_upload_bytes) {
    return error_reply(413, "upload exceeds " + std::to_string(cfg_.max_upload_bytes) + " bytes", "PayloadTooLarge");
  }
  const auto mime = fold_mime(content_type.empty() ? std::string_view("application/octet-stream") : content_type);
  if (std::find(cfg_.upload_types.begin(), cfg_.upload_types.end(), mime) == cfg_.upload_types.end()) {
    return error_reply(415, "unsupported media type '" + mime + "'", "UnsupportedMediaType");
  }
  try {
    const auto f = agent_->store().put(bytes, mime, filename);
    return json_reply(200, json{{"id", f.id},
                                {"object", "file"},
                                {"filename", f.name},
                                {"bytes", f.size},
                                {"mime", f.mime},
                                {"created_at", f.created_at}});
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpReply ApiService::file_info(const std::string& id, std::string_view authorization) const {
  if (!authorized(authorization)) return error_reply(401, "missing or invalid bearer token", "Unauthorized");
  try {
    auto j = to_json(agent_->store().stat(id));
    j["url"] = agent_->store().sign(id).url;
    return json_reply(200, j);
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpReply ApiService::artifact(std::string_view target) const {
  try {
    const auto id = agent_->store().verify(target);
    auto blob = agent_->store().get(id);
    HttpReply r;
    r.content_type = blob.mime;
    r.body = std::move(blob.bytes);
    return r;
  } catch (const Error& e) {
    return from_error(e);
  }
}

HttpReply ApiService::trace(const std::string& id, std::string_view authorization) const {
  if (!authorized(authorization)) return error_reply(401, "missing or invalid bearer token", "Unauthorized");
  auto t = agent_->load_trace(id);
  if (!t) return error_reply(404, "unknown trace '" + id + "'", "NotFound");
  return json_reply(200, *t);
}

HttpReply ApiService::health() const {
  return json_reply(200, json{{"status", "ok"}, {"tools", agent_->registry().list().size()}});
}

// ---------------------------------------------------------------- transport

namespace {

void send(httplib::Response& res, const HttpReply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

std::string auth_header(const httplib::Request& req) { return req.get_header_value("Authorization"); }

}  // namespace

void ApiService::mount() {
  auto& s = *server_;
  s.set_payload_max_length(cfg_.max_upload_bytes + (1u << 20));
  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    const auto code = res.status == 413 ? "PayloadTooLarge" : res.status == 404 ? "NotFound" : "HttpError";
    send(res, error_reply(res.status, httplib::status_message(res.status), code));
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, what, "InternalError"));
  });

  auto completions = [this](bool openai) {
    return [this, openai](const httplib::Request& req, httplib::Response& res) {
      auto reply = completion(req.body, openai, auth_header(req));
      if (reply.content_type != "text/event-stream") {
        send(res, reply);
        return;
      }
      res.status = 200;
      res.set_header("Cache-Control", "no-cache");
      auto frames = std::make_shared<std::vector<std::string>>(std::move(reply.frames));
      res.set_chunked_content_provider("text/event-stream", [frames, next = std::size_t{0}](
                                                                std::size_t, httplib::DataSink& sink) mutable {
        if (next < frames->size()) {
          const auto& f = (*frames)[next++];
          return sink.write(f.data(), f.size());
        }
        sink.done();
        return true;
      });
    };
  };
  s.Post("/v1/agent/completions", completions(false));
  s.Post("/v1/openai/chat/completions", completions(true));

  s.Post("/v1/files", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_file("file")) {
      if (!authorized(auth_header(req))) {
        send(res, error_reply(401, "missing or invalid bearer token", "Unauthorized"));
        return;
      }
      send(res, error_reply(400, "multipart field 'file' is required", "MalformedBody"));
      return;
    }
    const auto f = req.get_file_value("file");
    send(res, upload(f.filename, f.content_type, f.content, auth_header(req)));
  });
  s.Get(R"(/v1/files/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, file_info(req.matches[1].str(), auth_header(req)));
  });
  s.Get(R"(/v1/artifacts/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
    std::string target = req.path + "?";
    bool first = true;
    for (const auto& [k, v] : req.params) {
      target += (first ? "" : "&") + k + "=" + v;
      first = false;
    }
    send(res, artifact(target));
  });
  s.Get(R"(/v1/traces/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send(res, trace(req.matches[1].str(), auth_header(req)));
  });
  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, health()); });
}

int ApiService::start(const std::string& host, int port) {
  stop();
  server_ = std::make_unique<httplib::Server>();
  mount();
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    server_.reset();
    return -1;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ApiService::wait() {
  if (thread_.joinable()) thread_.join();
}

void ApiService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
  server_.reset();
}

}  // namespace orion
