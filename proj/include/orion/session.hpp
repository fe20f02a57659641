#pragma once

// Multi-turn sessions persisted as one JSON-lines file per session
// (`{dir}/{id}.jsonl`, a header line then one turn per line) plus `index.json`
// mapping session ids to file names.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "orion/core.hpp"

namespace orion {

struct TurnArtifact {
  std::string id;
  Modality modality{Modality::image};
  friend bool operator==(const TurnArtifact&, const TurnArtifact&) = default;
};

struct Turn {
  int index{0};
  Message user;
  Message assistant;
  std::optional<std::string> trace_ref;
  std::int64_t at{0};
  std::vector<TurnArtifact> artifacts;
};

json to_json(const Turn& t);
Turn turn_from_json(const json& j);

struct Session {
  std::string id;
  std::vector<Turn> turns;
  std::int64_t created_at{0};
};

struct ContextBudget {
  std::size_t max_turns{8};
  std::size_t max_chars{16000};
};

struct RetrievalWeights {
  double lexical{1.0};
  double modality{0.2};
  double recency{1.0};
};

/// Characters counted against the budget: user text plus assistant text.
std::size_t turn_chars(const Turn& t);

/// Modalities a message's text talks about ("image", "video", "page", ...).
std::vector<Modality> referenced_modalities(const Message& m);

/// lexical·jaccard + modality·[shared modality] + recency/(1 + age). Picks the
/// most recent turn first, then the best-scoring turns (newer wins ties) that
/// fit both limits; returns them in chronological order.
double relevance(const Turn& t, const Message& instruction, int age, const RetrievalWeights& w = {});
std::vector<Turn> retrieve_context(const Session& s, const Message& instruction, const ContextBudget& budget,
                                   const RetrievalWeights& w = {});

class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path dir, std::function<std::int64_t()> clock = {});

  /// New session; a caller-chosen id is accepted once.
  std::string create(std::optional<std::string> id = std::nullopt);
  bool exists(const std::string& id) const;
  /// Throws UnknownSession.
  Session load(const std::string& id) const;
  Turn append_turn(const std::string& id, const Message& user, const Message& assistant,
                   std::optional<std::string> trace_ref, std::vector<TurnArtifact> artifacts = {});
  std::vector<std::string> list() const;

 private:
  struct Entry {
    std::mutex mu;
    Session session;
    std::filesystem::path file;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const;
  void write_index() const;
  std::int64_t now() const;

  std::filesystem::path dir_;
  std::function<std::int64_t()> clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::mt19937_64 rng_;
};

}  // namespace orion
