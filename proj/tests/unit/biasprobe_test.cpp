#include <gtest/gtest.h>

#include "navqa/biasprobe.hpp"
#include "navqa/error.hpp"

using namespace navqa;

namespace {

constexpr int F = 0, E = 5;

std::vector<Episode> generated(GenSpec spec) {
  auto d = generate_dataset(spec);
  std::vector<Episode> all = d.splits.train;
  all.insert(all.end(), d.splits.val_seen.begin(), d.splits.val_seen.end());
  all.insert(all.end(), d.splits.val_unseen.begin(), d.splits.val_unseen.end());
  return all;
}

}  // namespace

TEST(Transitions, ForwardForwardEnd) {
  std::vector<std::vector<Action>> t = {{Action::Forward, Action::Forward, Action::End}};
  auto m = transition_matrix(t);
  EXPECT_DOUBLE_EQ(m.p[F][F], 0.5);
  EXPECT_DOUBLE_EQ(m.p[F][E], 0.5);
  EXPECT_EQ(m.samples, 2);
  EXPECT_EQ(m.row_counts[F], 2);
  EXPECT_TRUE(m.row_empty(E));
  EXPECT_DOUBLE_EQ(m.marginals[F], 0.5);
  EXPECT_DOUBLE_EQ(m.marginals[E], 0.5);
}

TEST(Transitions, EmptyThrows) {
  std::vector<std::vector<Action>> t = {{Action::End}, {}};
  EXPECT_THROW(transition_matrix(t), Error);
  auto r = report_bias({}, t);
  EXPECT_FALSE(r.nav);
  EXPECT_FALSE(r.answers);
}

TEST(Transitions, GoldRoutesHaveStructuralZeros) {
  GenSpec spec;
  spec.seen_worlds = 100;
  spec.unseen_worlds = 0;
  spec.episodes_per_world = 100;
  auto eps = generated(spec);
  auto traj = gold_trajectories(eps);
  ASSERT_GE(traj.size(), 10000u);
  auto m = transition_matrix(traj);
  for (int r = 0; r < kNumActions; ++r) {
    if (m.row_empty(r)) continue;
    double s = 0;
    for (double p : m.p[r]) s += p;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_LT(m.p[index_of(Action::Right)][index_of(Action::Left)], 0.02);
  EXPECT_LT(m.p[index_of(Action::Left)][index_of(Action::Right)], 0.02);
  // Marginal of the next action is the count-weighted mix of the rows.
  for (int c = 0; c < kNumActions; ++c) {
    double mix = 0;
    for (int r = 0; r < kNumActions; ++r) mix += m.p[r][c] * m.row_counts[r];
    EXPECT_NEAR(mix / m.samples, m.marginals[c], 1e-12);
  }
}

TEST(Transitions, JsonRoundTripIsExact) {
  std::vector<std::vector<Action>> t = {{Action::Left, Action::Forward, Action::Forward, Action::Right,
                                         Action::Forward, Action::End},
                                        {Action::Right, Action::Right, Action::Forward, Action::End}};
  auto m = transition_matrix(t);
  auto back = transition_from_json(transition_to_json(m));
  EXPECT_EQ(back.p, m.p);
  EXPECT_EQ(back.marginals, m.marginals);
  EXPECT_EQ(back.row_counts, m.row_counts);
  EXPECT_EQ(back.samples, m.samples);
  auto csv = transition_to_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "prev,forward,left,right,tilt_up,tilt_down,end,count");
}

TEST(Answers, SingleQuestionMajorityIsOne) {
  Episode e;
  e.task = TaskKind::QA;
  e.question_type = QuestionType::Counting;
  e.template_name = "counting";
  e.answer = answer_for_count(2);
  auto a = answer_distribution(std::vector<Episode>{e});
  EXPECT_DOUBLE_EQ(a.majority_rate, 1.0);
  ASSERT_EQ(a.by_template.size(), 1u);
  EXPECT_EQ(a.by_template[0].majority_answer, answer_for_count(2));
  EXPECT_THROW(answer_distribution(std::vector<Episode>{Episode{}}), Error);
}

TEST(Answers, RandomizedMajorityIsChance) {
  GenSpec spec;
  spec.task = GenTask::QaTopDown;
  spec.seen_worlds = 60;
  spec.unseen_worlds = 30;
  spec.episodes_per_world = 24;
  auto eps = generated(spec);
  auto a = answer_distribution(eps);
  double chance = 0;
  for (const auto& e : eps) chance += chance_rate(*e.question_type);
  chance /= static_cast<double>(eps.size());
  EXPECT_NEAR(a.majority_rate, chance, 0.02);
  for (const auto& g : a.by_template)
    EXPECT_NEAR(g.majority_proportion, chance_rate(*g.question_type), 0.02) << g.template_name;
}

TEST(Answers, BiasedColorMajorityTracksBias) {
  GenSpec spec;
  spec.task = GenTask::QaTopDown;
  spec.balance_mode = BalanceMode::Natural;
  spec.bias = 0.8;
  spec.question_types = {QuestionType::Color};
  spec.seen_worlds = 20000;
  spec.unseen_worlds = 0;
  spec.episodes_per_world = 1;
  auto a = answer_distribution(generated(spec));
  int groups = 0;
  for (const auto& g : a.by_target) {
    if (g.total < 1500) continue;
    ++groups;
    EXPECT_EQ(g.majority_answer, answer_for_color(spec.canonical_colors[static_cast<int>(*g.target_type)]));
    EXPECT_NEAR(g.majority_proportion, 0.8, 0.03) << to_string(*g.target_type);
  }
  EXPECT_GE(groups, 2);
}

TEST(Report, JsonHasBothSections) {
  GenSpec spec;
  spec.task = GenTask::QaTopDown;
  spec.seen_worlds = 20;
  spec.unseen_worlds = 10;
  auto eps = generated(spec);
  std::vector<std::vector<Action>> t = {{Action::Forward, Action::End}};
  auto j = report_to_json(report_bias(eps, t));
  EXPECT_EQ(j["nav"]["samples"], 1);
  EXPECT_TRUE(j["answers"].contains("majority_rate"));
  auto none = report_to_json(report_bias(eps, std::vector<std::vector<Action>>{}));
  EXPECT_EQ(none["nav"]["absent"], true);
  auto csv = answers_to_csv(*report_bias(eps, t).answers);
  EXPECT_NE(csv.find("counting"), std::string::npos);
}
