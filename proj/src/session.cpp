#include "orion/session.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "orion/util.hpp"

namespace orion {

namespace fs = std::filesystem;

json to_json(const Turn& t) {
  json arts = json::array();
  for (const auto& a : t.artifacts) arts.push_back({{"id", a.id}, {"modality", modality_name(a.modality)}});
  json j{{"index", t.index},
         {"user", to_json(t.user)},
         {"assistant", to_json(t.assistant)},
         {"at", t.at},
         {"artifacts", arts}};
  if (t.trace_ref) j["trace_ref"] = *t.trace_ref;
  return j;
}

Turn turn_from_json(const json& j) {
  Turn t;
  t.index = j.at("index").get<int>();
  t.user = message_from_json(j.at("user"));
  t.assistant = message_from_json(j.at("assistant"));
  t.at = j.value("at", std::int64_t{0});
  if (j.contains("trace_ref") && j["trace_ref"].is_string()) t.trace_ref = j["trace_ref"].get<std::string>();
  for (const auto& a : j.value("artifacts", json::array())) {
    t.artifacts.push_back({a.at("id").get<std::string>(), parse_modality(a.at("modality").get<std::string>())});
  }
  return t;
}

std::size_t turn_chars(const Turn& t) { return t.user.text().size() + t.assistant.text().size(); }

std::vector<Modality> referenced_modalities(const Message& m) {
  static const std::map<std::string, Modality> words{
      {"image", Modality::image},     {"images", Modality::image},       {"picture", Modality::image},
      {"photo", Modality::image},     {"screenshot", Modality::image},   {"video", Modality::video},
      {"videos", Modality::video},    {"clip", Modality::video},         {"footage", Modality::video},
      {"document", Modality::document}, {"documents", Modality::document}, {"page", Modality::document},
      {"pages", Modality::document},  {"pdf", Modality::document},       {"form", Modality::document},
      {"audio", Modality::audio},     {"mask", Modality::mask},          {"segmentation", Modality::mask},
  };
  std::vector<Modality> out;
  for (const auto& t : token_set(m.text())) {
    auto it = words.find(t);
    if (it != words.end() && std::find(out.begin(), out.end(), it->second) == out.end()) out.push_back(it->second);
  }
  return out;
}

double relevance(const Turn& t, const Message& instruction, int age, const RetrievalWeights& w) {
  const auto q = token_set(instruction.text());
  const auto turn_tokens = token_set(t.user.text() + "\n" + t.assistant.text());
  double s = w.lexical * jaccard(q, turn_tokens);
  for (auto m : referenced_modalities(instruction)) {
    if (std::any_of(t.artifacts.begin(), t.artifacts.end(), [&](const TurnArtifact& a) { return a.modality == m; })) {
      s += w.modality;
      break;
    }
  }
  return s + w.recency / (1.0 + age);
}

std::vector<Turn> retrieve_context(const Session& s, const Message& instruction, const ContextBudget& budget,
                                   const RetrievalWeights& w) {
  if (s.turns.empty() || budget.max_turns == 0) return {};
  const std::size_t n = s.turns.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = relevance(s.turns[i], instruction, static_cast<int>(n - 1 - i), w);

  std::vector<std::size_t> rank(n - 1);
  std::iota(rank.begin(), rank.end(), 0);
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a > b;
  });

  std::vector<std::size_t> picked{n - 1};
  std::size_t chars = turn_chars(s.turns[n - 1]);
  for (auto i : rank) {
    if (picked.size() >= budget.max_turns) break;
    const auto c = turn_chars(s.turns[i]);
    if (chars + c > budget.max_chars) continue;
    picked.push_back(i);
    chars += c;
  }
  std::sort(picked.begin(), picked.end());
  std::vector<Turn> out;
  for (auto i : picked) out.push_back(s.turns[i]);
  return out;
}

// ---------------------------------------------------------------- store

namespace {

bool valid_session_id(const std::string& id) {
  return !id.empty() && id.size() <= 64 && std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

// Reads the valid prefix of a session file and cuts off anything after it, such
// as a torn line left by an interrupted append.
Session read_session(const fs::path& file) {
  const std::string data = read_file(file);
  Session s;
  bool header = true;
  std::size_t pos = 0, valid = 0;
  while (pos < data.size()) {
    const auto nl = data.find('\n', pos);
    if (nl == std::string::npos) break;
    const std::string line = data.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) {
      valid = pos;
      continue;
    }
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) break;
    valid = pos;
    if (header) {
      s.id = j.at("session").get<std::string>();
      s.created_at = j.value("created_at", std::int64_t{0});
      header = false;
      continue;
    }
    Turn t = turn_from_json(j);
    if (t.index != static_cast<int>(s.turns.size())) {
      valid = pos - line.size() - 1;
      break;
    }
    s.turns.push_back(std::move(t));
  }
  if (header) throw Error(Errc::io_error, "session file " + file.string() + " has no header");
  if (valid < data.size()) fs::resize_file(file, valid);
  return s;
}

void append_line(const fs::path& file, const std::string& line) {
  std::ofstream out(file, std::ios::binary | std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) throw Error(Errc::io_error, "cannot append to " + file.string());
}

}  // namespace

SessionStore::SessionStore(fs::path dir, std::function<std::int64_t()> clock)
    : dir_(std::move(dir)), clock_(std::move(clock)), rng_(std::random_device{}()) {
  fs::create_directories(dir_);
  const auto index = dir_ / "index.json";
  if (!fs::exists(index)) return;
  const auto doc = json::parse(read_file(index), nullptr, false);
  if (!doc.is_object()) throw Error(Errc::io_error, "session index is corrupt");
  for (const auto& [id, name] : doc.items()) {
    auto e = std::make_shared<Entry>();
    e->file = dir_ / name.get<std::string>();
    e->session = read_session(e->file);
    sessions_.emplace(id, std::move(e));
  }
}

std::int64_t SessionStore::now() const { return clock_ ? clock_() : unix_now_seconds(); }

void SessionStore::write_index() const {
  json idx = json::object();
  for (const auto& [id, e] : sessions_) idx[id] = e->file.filename().string();
  write_file_atomic(dir_ / "index.json", idx.dump(2));
}

std::string SessionStore::create(std::optional<std::string> id) {
  std::lock_guard lock(mu_);
  std::string sid;
  if (id) {
    if (!valid_session_id(*id)) throw Error(Errc::invalid_value, "session ids are 1-64 of [A-Za-z0-9_-]");
    if (sessions_.count(*id)) throw Error(Errc::duplicate_name, "session '" + *id + "' already exists");
    sid = *id;
  } else {
    do {
      sid = "sess_" + random_hex(rng_, 16);
    } while (sessions_.count(sid));
  }
  auto e = std::make_shared<Entry>();
  e->file = dir_ / (sid + ".jsonl");
  e->session.id = sid;
  e->session.created_at = now();
  write_file_atomic(e->file, json{{"session", sid}, {"created_at", e->session.created_at}}.dump() + "\n");
  sessions_.emplace(sid, e);
  write_index();
  return sid;
}

std::shared_ptr<SessionStore::Entry> SessionStore::entry(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(Errc::unknown_session, "unknown session '" + id + "'");
  return it->second;
}

bool SessionStore::exists(const std::string& id) const {
  std::lock_guard lock(mu_);
  return sessions_.count(id) > 0;
}

Session SessionStore::load(const std::string& id) const {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  return e->session;
}

Turn SessionStore::append_turn(const std::string& id, const Message& user, const Message& assistant,
                               std::optional<std::string> trace_ref, std::vector<TurnArtifact> artifacts) {
  auto e = entry(id);
  std::lock_guard lock(e->mu);
  Turn t;
  t.index = static_cast<int>(e->session.turns.size());
  t.user = user;
  t.assistant = assistant;
  t.trace_ref = std::move(trace_ref);
  t.at = now();
  t.artifacts = std::move(artifacts);
  append_line(e->file, to_json(t).dump());
  e->session.turns.push_back(t);
  return t;
}

std::vector<std::string> SessionStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : sessions_) ids.push_back(id);
  return ids;
}

}  // namespace orion
