#pragma once

// Double-blind human evaluation: label assignment, score ingest, composite
// scoring and the aggregate report.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "orion/core.hpp"

namespace orion::eval {

struct CompositeWeights {
  double helpfulness{0.30};
  double correctness{0.35};
  double presentation{0.20};
  double instruction_following{0.15};
};

/// Component scores on 0-10. Presentation is absent when not applicable.
struct ScoreSheet {
  double helpfulness{0};
  double correctness{0};
  std::optional<double> presentation;
  double instruction_following{0};
};

/// Weighted sum; without presentation the other weights are renormalized.
/// Throws ScoreOutOfRange for values outside [0, 10].
double composite(const ScoreSheet& s, const CompositeWeights& w = {});

/// max - min of the composites in percentage points (composite x 10).
double spread_pp(const std::vector<double>& composites);

/// True when the spread exceeds 20 pp. Needs at least two sheets.
bool flag_disagreement(const std::vector<ScoreSheet>& sheets, const CompositeWeights& w = {});

inline constexpr double kDisagreementPp = 20.0;

// ---------------------------------------------------------------- blinding

struct Task {
  std::string id;
  std::string category;
};

struct Assignment {
  std::string task_id;
  std::string evaluator_id;
  std::map<std::string, std::string> label_of;  // model -> label
  std::vector<std::string> order;               // labels in presentation order
  std::uint64_t seed{0};
};

struct AssignmentFile {
  std::uint64_t seed{0};
  std::vector<Task> tasks;
  std::vector<std::string> models;
  std::vector<std::string> evaluators;
  std::vector<Assignment> assignments;
};

json to_json(const Assignment& a);
json to_json(const AssignmentFile& f);
AssignmentFile assignment_file_from_json(const json& j);

/// Uniform integer in [0, n) by rejection sampling over the raw engine output.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Fisher-Yates shuffle drawn from `rng`.
void shuffle(std::vector<std::string>& v, std::mt19937_64& rng);

/// One independent label permutation and presentation order per
/// (task, evaluator), in task-major order. Throws TooFewEvaluators and
/// TooManyModels.
AssignmentFile assign_blind(const std::vector<Task>& tasks, const std::vector<std::string>& models,
                            const std::vector<std::string>& evaluators, std::uint64_t seed);

// ---------------------------------------------------------------- ingest

/// A score as the evaluator saw it: labels only, never model names.
struct BlindScore {
  std::string task_id;
  std::string evaluator_id;
  std::string label;
  ScoreSheet sheet;
};

/// Columns task_id, evaluator_id, label, h, c, p, i (long names and the
/// appendix aliases are accepted). A blank p means not applicable.
/// Throws MalformedCsv and ScoreOutOfRange.
std::vector<BlindScore> ingest_csv(std::string_view text);

// ---------------------------------------------------------------- report

struct Cell {
  double mean{0};
  int sheets{0};
  double spread_pp{0};
  bool flagged{false};
};

struct Report {
  std::vector<std::string> models;
  std::vector<Task> tasks;
  std::map<std::string, std::map<std::string, Cell>> cells;                  // task -> model -> cell
  std::map<std::string, std::map<std::string, double>> by_category;          // category -> model -> mean
  std::map<std::string, double> overall;                                      // model -> mean
};

/// Unblinds through the assignment file and averages per task, category and overall.
Report aggregate(const std::vector<BlindScore>& scores, const AssignmentFile& assignments,
                 const CompositeWeights& w = {});

json to_json(const Report& r);
std::string to_markdown(const Report& r);

}  // namespace orion::eval
