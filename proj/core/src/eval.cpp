#include "navqa/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "navqa/error.hpp"
#include "navqa/serialization.hpp"
#include "navqa/training.hpp"

namespace navqa {

Json result_to_json(const EpisodeResult& r) {
  std::string actions;
  for (Action a : r.actions) actions.push_back(action_code(a));
  Json j{{"episode_id", r.episode_id}, {"variant", r.variant}, {"split", r.split},
         {"success", r.success},       {"d_start", r.d_start}, {"d_T", r.d_T},
         {"d_min", r.d_min},           {"steps", r.steps},     {"actions", actions}};
  j["answer"] = r.answer ? Json(std::string(answer_name(*r.answer))) : Json(nullptr);
  j["answer_correct"] = r.answer_correct ? Json(*r.answer_correct) : Json(nullptr);
  return j;
}

EpisodeResult result_from_json(const Json& j) {
  EpisodeResult r;
  try {
    r.episode_id = j.at("episode_id").get<int>();
    r.variant = j.at("variant").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.success = j.at("success").get<bool>();
    r.d_start = j.at("d_start").get<int>();
    r.d_T = j.at("d_T").get<int>();
    r.d_min = j.at("d_min").get<int>();
    r.steps = j.at("steps").get<int>();
    for (char c : j.at("actions").get<std::string>()) {
      auto a = parse_action(std::string_view(&c, 1));
      require(a.has_value(), ErrorCode::FormatError, std::string("bad action code ") + c);
      r.actions.push_back(*a);
    }
    if (!j.at("answer").is_null()) {
      auto a = parse_answer(j.at("answer").get<std::string>());
      require(a.has_value(), ErrorCode::FormatError, "bad answer " + j.at("answer").dump());
      r.answer = *a;
    }
    if (!j.at("answer_correct").is_null()) r.answer_correct = j.at("answer_correct").get<bool>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, std::string("result record: ") + e.what());
  }
  return r;
}

EpisodeResult rollout(NavAgent& agent, const GridWorld& world, const Episode& episode, Rng& rng,
                      const RolloutOptions& options) {
  require(episode.goal.has_value(), ErrorCode::FormatError,
          "episode " + std::to_string(episode.episode_id) + " has no goal");
  const auto field = distance_field(world, *episode.goal);
  auto dist = [&](const AgentState& s) {
    const int d = field[world.index(s.position)];
    require(d >= 0, ErrorCode::Unreachable, "goal unreachable from the agent");
    return d;
  };
  EpisodeResult r;
  r.episode_id = episode.episode_id;
  r.variant = agent.name();
  agent.begin(world, episode, rng);
  AgentState s = episode.start;
  r.d_start = r.d_min = r.d_T = dist(s);
  const int budget = std::max(options.max_steps, agent.min_step_budget());
  for (int t = 0; t < budget; ++t) {
    const Action a = agent.act(world, s);
    s = step(world, s, a);
    r.actions.push_back(a);
    r.d_T = dist(s);
    r.d_min = std::min(r.d_min, r.d_T);
    if (a == Action::End) break;
  }
  r.steps = static_cast<int>(r.actions.size());
  r.success = r.d_T <= options.success_radius;
  return r;
}

std::vector<EpisodeResult> evaluate_nav(const AgentFactory& factory, std::span<const GridWorld> worlds,
                                        std::span<const Episode> episodes, std::string_view split,
                                        const RolloutOptions& options, std::uint64_t seed, int jobs) {
  WorldIndex index(worlds);
  std::vector<EpisodeResult> out(episodes.size());
  parallel_for(static_cast<int>(episodes.size()), jobs, [&](int i) {
    const auto& e = episodes[i];
    auto agent = factory();
    Rng rng = Rng::stream(seed, "rollout", {static_cast<std::uint64_t>(e.episode_id)});
    out[i] = rollout(*agent, index.at(e.world_id), e, rng, options);
    out[i].split = std::string(split);
  });
  return out;
}

std::vector<EpisodeResult> qa_evaluate(const AblatedModel& model, std::span<const GridWorld> worlds,
                                       std::span<const Episode> episodes, std::string_view split,
                                       int jobs) {
  require(!episodes.empty(), ErrorCode::EmptyDataset, "no QA episodes to evaluate");
  WorldIndex index(worlds);
  std::vector<EpisodeResult> out(episodes.size());
  parallel_for(static_cast<int>(episodes.size()), jobs, [&](int i) {
    const auto& e = episodes[i];
    require(e.answer.has_value(), ErrorCode::FormatError,
            "episode " + std::to_string(e.episode_id) + " has no answer");
    const auto logits = qa_logits(*model.model, model.spec.masks(), index.at(e.world_id), e);
    EpisodeResult r;
    r.episode_id = e.episode_id;
    r.variant = std::string(to_string(model.spec.variant));
    r.split = std::string(split);
    r.answer = argmax(logits);
    r.answer_correct = *r.answer == *e.answer;
    r.success = *r.answer_correct;
    out[i] = std::move(r);
  });
  return out;
}

std::vector<EpisodeResult> qa_evaluate(const MajorityBaseline& baseline,
                                       std::span<const Episode> episodes, std::string_view split) {
  require(!episodes.empty(), ErrorCode::EmptyDataset, "no QA episodes to evaluate");
  std::vector<EpisodeResult> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) {
    require(e.answer.has_value(), ErrorCode::FormatError,
            "episode " + std::to_string(e.episode_id) + " has no answer");
    EpisodeResult r;
    r.episode_id = e.episode_id;
    r.variant = std::string(kMajority);
    r.split = std::string(split);
    r.answer = baseline.answer(e);
    r.answer_correct = *r.answer == *e.answer;
    r.success = *r.answer_correct;
    out.push_back(std::move(r));
  }
  return out;
}

double accuracy(std::span<const EpisodeResult> results) {
  if (results.empty()) return 0.0;
  long n = 0;
  for (const auto& r : results) n += r.answer_correct.value_or(false);
  return static_cast<double>(n) / static_cast<double>(results.size());
}

double success_rate(std::span<const EpisodeResult> results) {
  if (results.empty()) return 0.0;
  long n = 0;
  for (const auto& r : results) n += r.success;
  return static_cast<double>(n) / static_cast<double>(results.size());
}

// --------------------------------------------------------------------------

std::optional<TableCell> ResultTable::cell(const std::string& row, const std::string& column) const {
  auto it = cells.find({row, column});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

std::string column_name(std::string_view metric, std::string_view split) {
  std::string s(split);
  if (s.rfind("val_", 0) == 0) s = s.substr(4);
  return std::string(metric) + "_" + s;
}

namespace {

struct Metric {
  std::string_view name;
  bool higher_is_better;
  double (*value)(const EpisodeResult&);
};

const std::vector<Metric>& metrics_for(TableKind kind) {
  static const std::vector<Metric> nav = {
      {"success_pct", true, [](const EpisodeResult& r) { return r.success ? 100.0 : 0.0; }},
      {"d_T_cells", false, [](const EpisodeResult& r) { return static_cast<double>(r.d_T); }},
      {"d_min_cells", false, [](const EpisodeResult& r) { return static_cast<double>(r.d_min); }},
  };
  static const std::vector<Metric> qa = {
      {"accuracy_pct", true,
       [](const EpisodeResult& r) { return r.answer_correct.value_or(false) ? 100.0 : 0.0; }},
  };
  return kind == TableKind::Nav ? nav : qa;
}

std::string row_label(std::string_view variant, std::string_view baseline) {
  if (variant == baseline) return std::string(kBaselineRow);
  if (auto v = parse_variant(variant)) return std::string(table_label(*v));
  return {};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

ResultTable aggregate(std::span<const EpisodeResult> results, TableKind kind,
                      std::string_view baseline) {
  ResultTable t;
  t.kind = kind;
  t.baseline = std::string(baseline);
  t.rows = {"Full", std::string(kBaselineRow), "A", "A_V", "A_L", std::string(kDeltaRow)};
  std::set<std::string> splits;
  for (const auto& r : results) splits.insert(r.split);
  const auto& metrics = metrics_for(kind);
  for (const auto& m : metrics)
    for (const auto& s : splits) t.columns.push_back(column_name(m.name, s));

  // Metric values are integers, so these sums are exact in any order.
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> sums;
  for (const auto& r : results) {
    const auto row = row_label(r.variant, baseline);
    if (row.empty()) continue;
    for (const auto& m : metrics) {
      auto& [sum, n] = sums[{row, column_name(m.name, r.split)}];
      sum += m.value(r);
      ++n;
    }
  }
  for (const auto& [key, sn] : sums) t.cells[key] = TableCell{sn.first / sn.second, sn.second};

  const std::vector<std::string> unimodal = {"A", "A_V", "A_L"};
  for (const auto& m : metrics)
    for (const auto& s : splits) {
      const auto col = column_name(m.name, s);
      auto better = [&](double a, double b) { return m.higher_is_better ? a > b : a < b; };
      std::optional<TableCell> best;
      for (const auto& row : unimodal) {
        auto c = t.cell(row, col);
        if (!c) continue;
        if (!best || better(c->value, best->value)) best = c;
        if (auto full = t.cell("Full", col); full && better(c->value, full->value))
          t.better_than_full[row].push_back(col);
      }
      auto base = t.cell(std::string(kBaselineRow), col);
      if (best && base) {
        t.cells[{std::string(kDeltaRow), col}] = TableCell{best->value - base->value, 0};
        if (better(best->value, base->value)) t.best_unimodal_beats_baseline.push_back(col);
      }
    }
  return t;
}

std::string table_to_csv(const ResultTable& t) {
  std::string out = "row";
  for (const auto& c : t.columns) out += "," + c;
  for (const auto& c : t.columns) out += ",n_" + c;
  out += ",flags\n";
  for (const auto& row : t.rows) {
    out += row == kBaselineRow ? std::string(kBaselineRow) + " (" + t.baseline + ")" : row;
    for (const auto& c : t.columns) {
      auto cell = t.cell(row, c);
      out += "," + (cell ? fmt(cell->value) : std::string());
    }
    for (const auto& c : t.columns) {
      auto cell = t.cell(row, c);
      out += "," + (cell && row != kDeltaRow ? std::to_string(cell->count) : std::string());
    }
    std::string flags;
    if (auto it = t.better_than_full.find(row); it != t.better_than_full.end())
      for (const auto& c : it->second) flags += (flags.empty() ? "better_than_full:" : ";") + c;
    if (row == kDeltaRow)
      for (const auto& c : t.best_unimodal_beats_baseline)
        flags += (flags.empty() ? "best_unimodal_beats_baseline:" : ";") + c;
    out += "," + flags + "\n";
  }
  return out;
}

Json table_to_json(const ResultTable& t) {
  Json rows = Json::object();
  for (const auto& row : t.rows) {
    Json r = Json::object();
    for (const auto& c : t.columns)
      if (auto cell = t.cell(row, c)) r[c] = {{"value", cell->value}, {"count", cell->count}};
    rows[row] = r;
  }
  return Json{{"kind", t.kind == TableKind::Nav ? "nav" : "qa"},
              {"baseline", t.baseline},
              {"columns", t.columns},
              {"rows", rows},
              {"better_than_full", t.better_than_full},
              {"best_unimodal_beats_baseline", t.best_unimodal_beats_baseline}};
}

std::string results_to_json_text(std::span<const EpisodeResult> results) {
  Json arr = Json::array();
  for (const auto& r : results) arr.push_back(result_to_json(r));
  return arr.dump(1) + "\n";
}

}  // namespace navqa
