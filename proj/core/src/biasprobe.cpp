#include "navqa/biasprobe.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "navqa/error.hpp"
#include "navqa/serialization.hpp"
#include "navqa/vocabulary.hpp"

namespace navqa {

TransitionMatrix transition_matrix(std::span<const std::vector<Action>> trajectories) {
  std::array<std::array<long, kNumActions>, kNumActions> counts{};
  std::array<long, kNumActions> next_counts{};
  TransitionMatrix m;
  for (const auto& t : trajectories)
    for (std::size_t i = 1; i < t.size(); ++i) {
      ++counts[index_of(t[i - 1])][index_of(t[i])];
      ++next_counts[index_of(t[i])];
      ++m.samples;
    }
  require(m.samples > 0, ErrorCode::EmptyDataset, "no action transitions");
  for (int r = 0; r < kNumActions; ++r) {
    for (int c = 0; c < kNumActions; ++c) m.row_counts[r] += counts[r][c];
    if (m.row_counts[r] == 0) continue;
    for (int c = 0; c < kNumActions; ++c)
      m.p[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(m.row_counts[r]);
  }
  for (int c = 0; c < kNumActions; ++c)
    m.marginals[c] = static_cast<double>(next_counts[c]) / static_cast<double>(m.samples);
  return m;
}

std::vector<std::vector<Action>> gold_trajectories(std::span<const Episode> dataset) {
  std::vector<std::vector<Action>> out;
  for (const auto& e : dataset)
    if (e.task == TaskKind::Nav && !e.gold_actions.empty()) out.push_back(e.gold_actions);
  return out;
}

namespace {

void finish_group(AnswerGroup& g) {
  for (int a = 0; a < kNumAnswers; ++a)
    if (g.counts[a] > g.counts[g.majority_answer]) g.majority_answer = a;
  g.majority_proportion =
      g.total ? static_cast<double>(g.counts[g.majority_answer]) / static_cast<double>(g.total) : 0.0;
}

}  // namespace

AnswerDistribution answer_distribution(std::span<const Episode> dataset) {
  std::map<std::pair<int, std::string>, AnswerGroup> by_template;
  std::map<std::pair<std::string, int>, AnswerGroup> by_target;
  std::map<int, std::array<long, kNumAnswers>> by_type;
  long total = 0;
  for (const auto& e : dataset) {
    if (!e.answer) continue;
    ++total;
    const int qt = e.question_type ? static_cast<int>(*e.question_type) : -1;
    auto& g = by_template[{qt, e.template_name}];
    g.template_name = e.template_name;
    g.question_type = e.question_type;
    ++g.counts[*e.answer];
    ++g.total;
    auto& h = by_target[{e.template_name, e.target_type ? static_cast<int>(*e.target_type) : -1}];
    h.template_name = e.template_name;
    h.question_type = e.question_type;
    h.target_type = e.target_type;
    ++h.counts[*e.answer];
    ++h.total;
    ++by_type[qt][*e.answer];
  }
  require(total > 0, ErrorCode::EmptyDataset, "no answered questions");
  AnswerDistribution out;
  for (auto& [k, g] : by_template) {
    finish_group(g);
    out.by_template.push_back(g);
  }
  for (auto& [k, g] : by_target) {
    finish_group(g);
    out.by_target.push_back(g);
  }
  long hits = 0;
  for (const auto& [qt, c] : by_type) {
    long best = 0;
    for (long n : c) best = std::max(best, n);
    hits += best;
  }
  out.majority_rate = static_cast<double>(hits) / static_cast<double>(total);
  return out;
}

BiasReport report_bias(std::span<const Episode> dataset,
                       std::span<const std::vector<Action>> trajectories) {
  BiasReport r;
  bool any_pair = false;
  for (const auto& t : trajectories) any_pair = any_pair || t.size() > 1;
  if (any_pair) r.nav = transition_matrix(trajectories);
  bool any_answer = false;
  for (const auto& e : dataset) any_answer = any_answer || e.answer.has_value();
  if (any_answer) r.answers = answer_distribution(dataset);
  return r;
}

Json transition_to_json(const TransitionMatrix& m) {
  Json rows = Json::array();
  for (const auto& row : m.p) rows.push_back(row);
  std::vector<std::string> names;
  for (int i = 0; i < kNumActions; ++i) names.emplace_back(to_string(action_at(i)));
  return Json{{"actions", names},
              {"p", rows},
              {"row_counts", m.row_counts},
              {"marginals", m.marginals},
              {"samples", m.samples}};
}

TransitionMatrix transition_from_json(const Json& j) {
  TransitionMatrix m;
  try {
    const auto& rows = j.at("p");
    require(rows.size() == kNumActions, ErrorCode::FormatError, "transition matrix must be 6x6");
    for (int r = 0; r < kNumActions; ++r) {
      require(rows[r].size() == kNumActions, ErrorCode::FormatError, "transition matrix must be 6x6");
      for (int c = 0; c < kNumActions; ++c) m.p[r][c] = rows[r][c].get<double>();
      m.row_counts[r] = j.at("row_counts")[r].get<long>();
      m.marginals[r] = j.at("marginals")[r].get<double>();
    }
    m.samples = j.at("samples").get<long>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, std::string("transition matrix: ") + e.what());
  }
  return m;
}

namespace {

Json group_to_json(const AnswerGroup& g) {
  Json counts = Json::object();
  for (int a = 0; a < kNumAnswers; ++a)
    if (g.counts[a]) counts[std::string(answer_name(a))] = g.counts[a];
  return Json{
      {"template", g.template_name},
      {"question_type", g.question_type ? Json(std::string(to_string(*g.question_type))) : Json()},
      {"target_type", g.target_type ? Json(std::string(to_string(*g.target_type))) : Json()},
      {"counts", counts},
      {"total", g.total},
      {"majority_answer", std::string(answer_name(g.majority_answer))},
      {"majority_proportion", g.majority_proportion},
      {"chance", g.question_type ? Json(chance_rate(*g.question_type)) : Json()}};
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Json report_to_json(const BiasReport& r) {
  Json j = Json::object();
  if (r.nav) j["nav"] = transition_to_json(*r.nav);
  else j["nav"] = Json{{"absent", true}};
  if (r.answers) {
    Json by_template = Json::array(), by_target = Json::array();
    for (const auto& g : r.answers->by_template) by_template.push_back(group_to_json(g));
    for (const auto& g : r.answers->by_target) by_target.push_back(group_to_json(g));
    j["answers"] = Json{{"by_template", by_template},
                        {"by_target", by_target},
                        {"majority_rate", r.answers->majority_rate}};
  } else {
    j["answers"] = Json{{"absent", true}};
  }
  return j;
}

std::string transition_to_csv(const TransitionMatrix& m) {
  std::string out = "prev";
  for (int c = 0; c < kNumActions; ++c) out += "," + std::string(to_string(action_at(c)));
  out += ",count\n";
  for (int r = 0; r < kNumActions; ++r) {
    out += std::string(to_string(action_at(r)));
    for (int c = 0; c < kNumActions; ++c) out += "," + exact(m.p[r][c]);
    out += "," + std::to_string(m.row_counts[r]) + "\n";
  }
  out += "marginal";
  for (int c = 0; c < kNumActions; ++c) out += "," + exact(m.marginals[c]);
  out += "," + std::to_string(m.samples) + "\n";
  return out;
}

std::string answers_to_csv(const AnswerDistribution& a) {
  std::string out = "template,question_type,target_type";
  for (int k = 0; k < kNumAnswers; ++k) out += "," + std::string(answer_name(k));
  out += ",total,majority_answer,majority_proportion,chance\n";
  auto emit = [&](const AnswerGroup& g) {
    out += g.template_name + "," +
           (g.question_type ? std::string(to_string(*g.question_type)) : std::string()) + "," +
           (g.target_type ? std::string(to_string(*g.target_type)) : std::string());
    for (long n : g.counts) out += "," + std::to_string(n);
    out += "," + std::to_string(g.total) + "," + std::string(answer_name(g.majority_answer)) + "," +
           exact(g.majority_proportion) + "," +
           (g.question_type ? exact(chance_rate(*g.question_type)) : std::string()) + "\n";
  };
  for (const auto& g : a.by_template) emit(g);
  for (const auto& g : a.by_target) emit(g);
  return out;
}

}  // namespace navqa
