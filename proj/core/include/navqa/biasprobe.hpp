#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navqa/episodegen.hpp"

namespace navqa {

/// P(next = col | prev = row) over consecutive action pairs.
struct TransitionMatrix {
  std::array<std::array<double, kNumActions>, kNumActions> p{};
  std::array<long, kNumActions> row_counts{};
  /// Distribution of the next action over all pairs.
  std::array<double, kNumActions> marginals{};
  long samples = 0;

  bool row_empty(int row) const { return row_counts[row] == 0; }
};

/// Throws EmptyDataset when no trajectory has two actions.
TransitionMatrix transition_matrix(std::span<const std::vector<Action>> trajectories);

/// Gold action sequences of the navigation episodes in `dataset`.
std::vector<std::vector<Action>> gold_trajectories(std::span<const Episode> dataset);

struct AnswerGroup {
  std::string template_name;
  std::optional<QuestionType> question_type;
  std::optional<ObjectType> target_type;
  std::array<long, kNumAnswers> counts{};
  long total = 0;
  int majority_answer = 0;
  double majority_proportion = 0.0;
};

struct AnswerDistribution {
  /// One group per (question type, template).
  std::vector<AnswerGroup> by_template;
  /// One group per (template, target type): the entropy-filter grouping.
  std::vector<AnswerGroup> by_target;
  /// Share of questions answered by the per-type majority answer.
  double majority_rate = 0.0;
};

/// Throws EmptyDataset when no episode carries an answer.
AnswerDistribution answer_distribution(std::span<const Episode> dataset);

struct BiasReport {
  std::optional<TransitionMatrix> nav;
  std::optional<AnswerDistribution> answers;
};

BiasReport report_bias(std::span<const Episode> dataset,
                       std::span<const std::vector<Action>> trajectories);

nlohmann::json transition_to_json(const TransitionMatrix& m);
TransitionMatrix transition_from_json(const nlohmann::json& j);
nlohmann::json report_to_json(const BiasReport& r);
/// Header "prev,Forward,...,End,count"; values printed round-trip exact.
std::string transition_to_csv(const TransitionMatrix& m);
std::string answers_to_csv(const AnswerDistribution& a);

}  // namespace navqa
