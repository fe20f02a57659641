#include "orion/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <tuple>

#include "orion/error.hpp"
#include "orion/util.hpp"

namespace orion::eval {

namespace {

void check_score(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0 || v > 10.0) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s score %g outside [0, 10]", name, v);
    throw Error(Errc::score_out_of_range, buf);
  }
}

std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

double composite(const ScoreSheet& s, const CompositeWeights& w) {
  check_score(s.helpfulness, "helpfulness");
  check_score(s.correctness, "correctness");
  check_score(s.instruction_following, "instruction_following");
  const double base = w.helpfulness * s.helpfulness + w.correctness * s.correctness +
                      w.instruction_following * s.instruction_following;
  if (s.presentation) {
    check_score(*s.presentation, "presentation");
    return base + w.presentation * *s.presentation;
  }
  return base / (w.helpfulness + w.correctness + w.instruction_following);
}

double spread_pp(const std::vector<double>& composites) {
  if (composites.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(composites.begin(), composites.end());
  return (*hi - *lo) * 10.0;
}

bool flag_disagreement(const std::vector<ScoreSheet>& sheets, const CompositeWeights& w) {
  if (sheets.size() < 2) throw Error(Errc::invalid_value, "disagreement needs at least two sheets");
  std::vector<double> c;
  c.reserve(sheets.size());
  for (const auto& s : sheets) c.push_back(composite(s, w));
  return spread_pp(c) - kDisagreementPp > 1e-9;
}

// ---------------------------------------------------------------- blinding

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  if (n == 0) throw Error(Errc::invalid_value, "uniform_below(0)");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;  // largest multiple of n, minus one
  for (;;) {
    const std::uint64_t x = rng();
    if (x <= limit) return x % n;
  }
}

void shuffle(std::vector<std::string>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_below(rng, i)]);
  }
}

json to_json(const Assignment& a) {
  json labels = json::object();
  for (const auto& [m, l] : a.label_of) labels[m] = l;
  return json{{"task_id", a.task_id},
              {"evaluator_id", a.evaluator_id},
              {"labels", labels},
              {"order", a.order},
              {"seed", a.seed}};
}

json to_json(const AssignmentFile& f) {
  json tasks = json::array();
  for (const auto& t : f.tasks) tasks.push_back({{"id", t.id}, {"category", t.category}});
  json as = json::array();
  for (const auto& a : f.assignments) as.push_back(to_json(a));
  return json{{"seed", f.seed},
              {"tasks", tasks},
              {"models", f.models},
              {"evaluators", f.evaluators},
              {"assignments", as}};
}

AssignmentFile assignment_file_from_json(const json& j) {
  try {
    AssignmentFile f;
    f.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("tasks")) {
      if (t.is_string()) f.tasks.push_back({t.get<std::string>(), ""});
      else f.tasks.push_back({t.at("id").get<std::string>(), t.value("category", std::string())});
    }
    f.models = j.at("models").get<std::vector<std::string>>();
    f.evaluators = j.at("evaluators").get<std::vector<std::string>>();
    for (const auto& ja : j.at("assignments")) {
      Assignment a;
      a.task_id = ja.at("task_id").get<std::string>();
      a.evaluator_id = ja.at("evaluator_id").get<std::string>();
      a.label_of = ja.at("labels").get<std::map<std::string, std::string>>();
      a.order = ja.at("order").get<std::vector<std::string>>();
      a.seed = ja.value("seed", f.seed);
      f.assignments.push_back(std::move(a));
    }
    return f;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_value, std::string("malformed assignment file: ") + e.what());
  }
}

AssignmentFile assign_blind(const std::vector<Task>& tasks, const std::vector<std::string>& models,
                            const std::vector<std::string>& evaluators, std::uint64_t seed) {
  if (std::set<std::string>(evaluators.begin(), evaluators.end()).size() < 3) {
    throw Error(Errc::too_few_evaluators,
                "need at least 3 distinct evaluators, got " + std::to_string(evaluators.size()));
  }
  if (models.size() > 4) throw Error(Errc::too_many_models, "at most 4 models can be blinded with labels A-D");
  if (models.empty()) throw Error(Errc::invalid_value, "no models to assign");
  if (std::set<std::string>(models.begin(), models.end()).size() != models.size()) {
    throw Error(Errc::invalid_value, "model names must be distinct");
  }

  static const std::vector<std::string> kLabels{"A", "B", "C", "D"};
  const std::vector<std::string> labels(kLabels.begin(), kLabels.begin() + static_cast<long>(models.size()));

  AssignmentFile f{seed, tasks, models, evaluators, {}};
  std::mt19937_64 rng(seed);
  for (const auto& t : tasks) {
    for (const auto& e : evaluators) {
      Assignment a;
      a.task_id = t.id;
      a.evaluator_id = e;
      a.seed = seed;
      auto perm = labels;
      shuffle(perm, rng);
      for (std::size_t k = 0; k < models.size(); ++k) a.label_of[models[k]] = perm[k];
      a.order = labels;
      shuffle(a.order, rng);
      f.assignments.push_back(std::move(a));
    }
  }
  return f;
}

// ---------------------------------------------------------------- ingest

namespace {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
      ++line;
    } else {
      field += ch;
      any = true;
    }
  }
  if (quoted) throw Error(Errc::malformed_csv, "unterminated quote near line " + std::to_string(line));
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && sp(s.back())) s.pop_back();
  std::size_t k = 0;
  while (k < s.size() && sp(s[k])) ++k;
  return s.substr(k);
}

std::string canonical_column(const std::string& raw) {
  static const std::map<std::string, std::string> kAliases{
      {"task_id", "task_id"},
      {"task", "task_id"},
      {"evaluator_id", "evaluator_id"},
      {"evaluator", "evaluator_id"},
      {"label", "label"},
      {"h", "h"},
      {"helpfulness", "h"},
      {"task_completion", "h"},
      {"c", "c"},
      {"correctness", "c"},
      {"output_accuracy", "c"},
      {"p", "p"},
      {"presentation", "p"},
      {"visual_quality", "p"},
      {"i", "i"},
      {"instruction_following", "i"},
      {"task_appropriateness", "i"},
      {"model", "model"},
      {"model_name", "model"},
  };
  auto key = fold(trim(raw));
  std::replace(key.begin(), key.end(), ' ', '_');
  auto it = kAliases.find(key);
  return it == kAliases.end() ? "" : it->second;
}

double parse_score(const std::string& s, std::size_t row, const char* col) {
  const auto v = trim(s);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) {
    throw Error(Errc::malformed_csv, "row " + std::to_string(row) + ": column " + col + " is not a number");
  }
  check_score(d, col);
  return d;
}

}  // namespace

std::vector<BlindScore> ingest_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(Errc::malformed_csv, "empty CSV");

  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < rows[0].size(); ++k) {
    const auto c = canonical_column(rows[0][k]);
    if (c == "model") throw Error(Errc::malformed_csv, "score sheets must not carry model names");
    if (c.empty()) continue;
    if (!col.emplace(c, k).second) throw Error(Errc::malformed_csv, "duplicate column '" + rows[0][k] + "'");
  }
  for (const char* need : {"task_id", "evaluator_id", "label", "h", "c", "p", "i"}) {
    if (!col.count(need)) throw Error(Errc::malformed_csv, std::string("missing column '") + need + "'");
  }

  std::vector<BlindScore> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](const char* name) -> std::string {
      const auto k = col.at(name);
      return k < row.size() ? row[k] : std::string();
    };
    BlindScore s;
    s.task_id = trim(cell("task_id"));
    s.evaluator_id = trim(cell("evaluator_id"));
    s.label = trim(cell("label"));
    if (s.task_id.empty() || s.evaluator_id.empty() || s.label.empty()) {
      throw Error(Errc::malformed_csv, "row " + std::to_string(r) + ": task_id, evaluator_id and label are required");
    }
    s.sheet.helpfulness = parse_score(cell("h"), r, "h");
    s.sheet.correctness = parse_score(cell("c"), r, "c");
    const auto p = trim(cell("p"));
    if (!p.empty() && fold(p) != "n/a" && fold(p) != "na") s.sheet.presentation = parse_score(p, r, "p");
    s.sheet.instruction_following = parse_score(cell("i"), r, "i");
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------- report

Report aggregate(const std::vector<BlindScore>& scores, const AssignmentFile& f, const CompositeWeights& w) {
  // (task, evaluator, label) -> model
  std::map<std::tuple<std::string, std::string, std::string>, std::string> unblind;
  for (const auto& a : f.assignments) {
    for (const auto& [model, label] : a.label_of) unblind[{a.task_id, a.evaluator_id, label}] = model;
  }

  Report r;
  r.models = f.models;
  r.tasks = f.tasks;
  std::map<std::string, std::map<std::string, std::vector<double>>> composites;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& s : scores) {
    const auto key = std::make_tuple(s.task_id, s.evaluator_id, s.label);
    auto it = unblind.find(key);
    if (it == unblind.end()) {
      throw Error(Errc::invalid_value, "no assignment for task '" + s.task_id + "', evaluator '" + s.evaluator_id +
                                           "', label '" + s.label + "'");
    }
    if (!seen.insert(key).second) {
      throw Error(Errc::invalid_value, "duplicate score for task '" + s.task_id + "', evaluator '" + s.evaluator_id +
                                           "', label '" + s.label + "'");
    }
    composites[s.task_id][it->second].push_back(composite(s.sheet, w));
  }

  std::map<std::string, std::string> category_of;
  for (const auto& t : f.tasks) category_of[t.id] = t.category.empty() ? "uncategorized" : t.category;

  std::map<std::string, std::map<std::string, std::vector<double>>> cat_means;
  std::map<std::string, std::vector<double>> overall;
  for (const auto& [task, per_model] : composites) {
    for (const auto& [model, cs] : per_model) {
      Cell c;
      c.sheets = static_cast<int>(cs.size());
      double sum = 0;
      for (double v : cs) sum += v;
      c.mean = sum / static_cast<double>(cs.size());
      c.spread_pp = spread_pp(cs);
      c.flagged = cs.size() >= 2 && c.spread_pp - kDisagreementPp > 1e-9;
      r.cells[task][model] = c;
      cat_means[category_of.count(task) ? category_of[task] : "uncategorized"][model].push_back(c.mean);
      overall[model].push_back(c.mean);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const auto& [cat, per_model] : cat_means) {
    for (const auto& [model, v] : per_model) r.by_category[cat][model] = mean(v);
  }
  for (const auto& [model, v] : overall) r.overall[model] = mean(v);
  return r;
}

json to_json(const Report& r) {
  json tasks = json::array();
  json flagged = json::array();
  auto emit_task = [&](const std::string& id, const std::string& category) {
    auto it = r.cells.find(id);
    if (it == r.cells.end()) return;
    json scores = json::object(), spreads = json::object(), flags = json::object(), counts = json::object();
    for (const auto& [model, c] : it->second) {
      scores[model] = c.mean;
      spreads[model] = c.spread_pp;
      flags[model] = c.flagged;
      counts[model] = c.sheets;
      if (c.flagged) flagged.push_back({{"task_id", id}, {"model", model}, {"spread_pp", c.spread_pp}});
    }
    tasks.push_back({{"task_id", id},
                     {"category", category.empty() ? "uncategorized" : category},
                     {"scores", scores},
                     {"sheets", counts},
                     {"spread_pp", spreads},
                     {"flagged", flags}});
  };
  std::set<std::string> listed;
  for (const auto& t : r.tasks) {
    emit_task(t.id, t.category);
    listed.insert(t.id);
  }
  for (const auto& [id, _] : r.cells) {
    if (!listed.count(id)) emit_task(id, "");
  }
  return json{{"models", r.models},
              {"tasks", tasks},
              {"categories", r.by_category},
              {"overall", r.overall},
              {"flags", flagged},
              {"flag_threshold_pp", kDisagreementPp}};
}

std::string to_markdown(const Report& r) {
  auto row = [&](const std::string& head, const std::map<std::string, double>& vals, const std::string& tail) {
    std::string s = "| " + head + " |";
    for (const auto& m : r.models) {
      auto it = vals.find(m);
      s += " " + (it == vals.end() ? std::string("-") : fmt(it->second, 2)) + " |";
    }
    return s + tail + "\n";
  };
  std::string header = "| Task |";
  std::string rule = "|---|";
  for (const auto& m : r.models) {
    header += " " + m + " |";
    rule += "---|";
  }

  std::string out = "# Evaluation report\n\n## Per task\n\n" + header + " Flags |\n" + rule + "---|\n";
  const auto j = to_json(r);
  for (const auto& t : j["tasks"]) {
    std::map<std::string, double> vals;
    std::string flags;
    for (const auto& [m, v] : t["scores"].items()) vals[m] = v.get<double>();
    for (const auto& [m, v] : t["flagged"].items()) {
      if (v.get<bool>()) flags += (flags.empty() ? "" : ", ") + m + " (" + fmt(t["spread_pp"][m].get<double>(), 1) + " pp)";
    }
    out += row(t["task_id"].get<std::string>(), vals, " " + (flags.empty() ? std::string("-") : flags) + " |");
  }
  out += "\n## Per category\n\n| Category |";
  for (const auto& m : r.models) out += " " + m + " |";
  out += "\n" + rule + "\n";
  for (const auto& [cat, vals] : r.by_category) out += row(cat, vals, "");
  out += "\n## Overall\n\n" + header + "\n" + rule + "\n" + row("all", r.overall, "");
  return out;
}

}  // namespace orion::eval
