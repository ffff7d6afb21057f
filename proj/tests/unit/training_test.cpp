#include <gtest/gtest.h>

#include <cmath>

#include "../support/fixtures.hpp"
#include "navqa/ablation.hpp"
#include "navqa/error.hpp"
#include "navqa/training.hpp"

using namespace navqa;
using fixtures::at;

namespace {

Model model_of(ModelKind kind, std::uint64_t seed = 1) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = Vocabulary::builtin().size();
  return make_model(c, seed);
}

GeneratedData nav_data(std::uint64_t seed = 0, int worlds = 4, int per_world = 10) {
  GenSpec spec;
  spec.seed = seed;
  spec.seen_worlds = worlds;
  spec.unseen_worlds = 0;
  spec.val_seen_fraction = 0.0;
  spec.episodes_per_world = per_world;
  return generate_dataset(spec);
}

/// QA episodes on one open room, answers forced to `answer`.
std::pair<std::vector<GridWorld>, std::vector<Episode>> constant_qa(int n, int answer) {
  std::vector<GridWorld> worlds = {fixtures::open_room(4, 4)};
  std::vector<Episode> eps;
  Rng rng(5);
  for (int i = 0; i < n; ++i) {
    Episode e;
    e.episode_id = i;
    e.task = TaskKind::QA;
    e.question_type = QuestionType::Existence;
    e.template_name = "existence";
    auto t = static_cast<ObjectType>(rng.uniform_index(kNumObjectTypes));
    e.target_type = t;
    e.language = question_tokens({QuestionType::Existence, t, t});
    e.answer = answer;
    e.start = at(2, 2);
    eps.push_back(e);
  }
  return {worlds, eps};
}

}  // namespace

TEST(TeacherForcing, CertainGoldHasZeroLoss) {
  auto m = model_of(ModelKind::Nav);
  for (double& v : m.params.values(m.nav.head.w)) v = 0.0;
  auto b = m.params.values(m.nav.head.b);
  std::fill(b.begin(), b.end(), 0.0);
  b[index_of(Action::End)] = 1000.0;
  auto w = fixtures::open_room(3, 3);
  Episode e;
  e.start = at(2, 2);
  e.goal = Cell{2, 2};
  e.gold_actions = {Action::End};
  auto l = teacher_forcing_episode(m, ModalityEncoder{}, w, e, {});
  ASSERT_EQ(l.losses.size(), 1u);
  EXPECT_EQ(l.losses[0], 0.0);
  EXPECT_EQ(l.correct, 1);
}

TEST(TeacherForcing, OneTermPerGoldAction) {
  auto data = nav_data();
  auto m = model_of(ModelKind::Nav);
  WorldIndex idx(data.worlds);
  for (const auto& e : data.splits.train) {
    auto l = teacher_forcing_episode(m, ModalityEncoder{}, idx.at(e.world_id), e, {});
    EXPECT_EQ(l.losses.size(), e.gold_actions.size());
    EXPECT_EQ(l.steps, static_cast<int>(e.gold_actions.size()));
  }
}

TEST(TeacherForcing, InitialLossNearLogAvailable) {
  auto data = nav_data(1, 6, 20);
  WorldIndex idx(data.worlds);
  double measured = 0, expected = 0;
  long n = 0;
  for (int seed = 0; seed < 3; ++seed) {
    auto m = model_of(ModelKind::Nav, 100 + seed);
    for (const auto& e : data.splits.train) {
      const auto& w = idx.at(e.world_id);
      auto l = teacher_forcing_episode(m, ModalityEncoder{}, w, e, {});
      auto states = replay(w, e.start, e.gold_actions);
      for (std::size_t t = 0; t < e.gold_actions.size(); ++t) {
        int k = 0;
        for (bool b : available_actions(w, states[t])) k += b;
        expected += std::log(static_cast<double>(k));
        measured += l.losses[t];
        ++n;
      }
    }
  }
  EXPECT_NEAR(measured / n, expected / n, 0.1 * expected / n);
}

TEST(TeacherForcing, UnavailableGoldThrows) {
  auto m = model_of(ModelKind::Nav);
  auto w = fixtures::open_room(3, 3);
  Episode e;
  e.start = at(1, 1, 0);
  e.goal = Cell{1, 1};
  e.gold_actions = {Action::Forward, Action::End};
  try {
    teacher_forcing_episode(m, ModalityEncoder{}, w, e, {});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::GoldReplayFailure);
  }
}

TEST(StudentTarget, AdjacentFacingGoal) {
  auto w = fixtures::corridor(4);
  AgentState s = at(2, 1, 1);
  EXPECT_EQ(shortest_path_action(w, s, {3, 1}), Action::Forward);
  EXPECT_EQ(shortest_path_action(w, step(w, s, Action::Forward), {3, 1}), Action::End);
  EXPECT_EQ(shortest_path_action(w, at(2, 1, 1, 1), {3, 1}), Action::TiltDown);
  EXPECT_EQ(shortest_path_action(w, at(2, 1, 3), {3, 1}), Action::Right);
}

TEST(StudentTarget, AlwaysAvailableAndReachesGoal) {
  auto data = nav_data(2, 10, 10);
  WorldIndex idx(data.worlds);
  Rng rng(7);
  int rollouts = 0;
  for (int r = 0; r < 1000; ++r) {
    const auto& e = data.splits.train[rng.uniform_index(data.splits.train.size())];
    const auto& w = idx.at(e.world_id);
    // Random walk to an arbitrary visited state, then follow the targets.
    AgentState s = e.start;
    for (int k = rng.uniform_int(0, 15); k > 0; --k) {
      auto m = available_actions(w, s);
      std::vector<Action> ok;
      for (int a = 0; a < kNumActions - 1; ++a)
        if (m[a]) ok.push_back(action_at(a));
      s = step(w, s, ok[rng.uniform_index(ok.size())]);
    }
    const int budget = geodesic_distance(w, s.position, *e.goal) * 3 + 4;
    bool ended = false;
    for (int t = 0; t < budget && !ended; ++t) {
      Action a = shortest_path_action(w, s, *e.goal);
      ASSERT_TRUE(available_actions(w, s)[index_of(a)]);
      s = step(w, s, a);
      ended = a == Action::End;
    }
    ASSERT_TRUE(ended);
    EXPECT_EQ(s.position, *e.goal);
    ++rollouts;
  }
  EXPECT_EQ(rollouts, 1000);
}

TEST(StudentForcing, VisitsAtLeastGoldStatesAndIsSeeded) {
  auto data = nav_data(3);
  WorldIndex idx(data.worlds);
  auto m = model_of(ModelKind::Nav);
  const auto& e = data.splits.train.front();
  Rng a(1), b(1);
  VisitedLog va, vb;
  auto la = student_forcing_episode(m, ModalityEncoder{}, idx.at(e.world_id), e, a, 60, {}, &va);
  auto lb = student_forcing_episode(m, ModalityEncoder{}, idx.at(e.world_id), e, b, 60, {}, &vb);
  EXPECT_EQ(la.losses, lb.losses);
  EXPECT_EQ(va.states, vb.states);
  EXPECT_LE(la.steps, 60);
  EXPECT_FALSE(va.states.empty());
}

TEST(TrainQa, AllYesReachesFullTrainAccuracy) {
  auto [worlds, eps] = constant_qa(64, kAnswerYes);
  auto m = model_of(ModelKind::QaTopDown);
  TrainConfig c;
  c.epochs = 5;
  c.learning_rate = 0.01;
  auto r = train_qa(m, {}, worlds, eps, c);
  EXPECT_GE(r.log.back()["metric"].get<double>(), 0.99);
}

TEST(TrainQa, LossDecreasesWithSmallLearningRate) {
  auto [worlds, eps] = constant_qa(32, kAnswerNo);
  auto m = model_of(ModelKind::QaAttention);
  TrainConfig c;
  c.epochs = 12;
  c.learning_rate = 1e-3;
  c.batch_size = 8;
  auto r = train_qa(m, {}, worlds, eps, c);
  int bumps = 0;
  for (std::size_t i = 1; i < r.log.size(); ++i)
    bumps += r.log[i]["loss"].get<double>() > r.log[i - 1]["loss"].get<double>();
  EXPECT_LE(bumps, 2);
  EXPECT_LT(r.log.back()["loss"].get<double>(), r.log.front()["loss"].get<double>());
}

TEST(TrainQa, SameSeedSameCurve) {
  GenSpec spec;
  spec.task = GenTask::QaTopDown;
  spec.seen_worlds = 12;
  spec.unseen_worlds = 0;
  spec.room_count = {1, 2};
  spec.room_size = {3, 4};
  spec.episodes_per_world = 4;
  auto data = generate_dataset(spec);
  TrainConfig c;
  c.epochs = 3;
  auto m1 = model_of(ModelKind::QaTopDown), m2 = model_of(ModelKind::QaTopDown);
  auto r1 = train_qa(m1, {}, data.worlds, data.splits.train, c);
  c.jobs = 3;
  auto r2 = train_qa(m2, {}, data.worlds, data.splits.train, c);
  EXPECT_EQ(r1.log, r2.log);
  EXPECT_EQ(m1.params.flat_values(), m2.params.flat_values());
}

TEST(TrainNav, ThreadCountDoesNotChangeResult) {
  auto data = nav_data(4, 3, 8);
  for (auto forcing : {Forcing::Teacher, Forcing::Student}) {
    TrainConfig c;
    c.forcing = forcing;
    c.epochs = 2;
    auto m1 = model_of(ModelKind::Hier), m2 = model_of(ModelKind::Hier);
    auto r1 = train_nav(m1, ModalityEncoder{}, data.worlds, data.splits.train, c);
    c.jobs = 4;
    auto r2 = train_nav(m2, ModalityEncoder{}, data.worlds, data.splits.train, c);
    EXPECT_EQ(r1.log, r2.log);
    EXPECT_EQ(r1.visited.states, r2.visited.states);
    EXPECT_EQ(m1.params.flat_values(), m2.params.flat_values());
  }
}

TEST(TrainNav, RejectsQaModel) {
  auto data = nav_data();
  auto m = model_of(ModelKind::QaTopDown);
  EXPECT_THROW(train_nav(m, ModalityEncoder{}, data.worlds, data.splits.train, TrainConfig{}), Error);
}

TEST(TrainConfig, StudentDefaultsToLongerRun) {
  EXPECT_EQ(train_config_from_json({{"forcing", "student"}}).epochs, kDefaultStudentEpochs);
  EXPECT_EQ(train_config_from_json({{"forcing", "student"}, {"epochs", 3}}).epochs, 3);
  EXPECT_EQ(train_config_from_json(nlohmann::json::object()).epochs, TrainConfig{}.epochs);
  EXPECT_THROW(train_config_from_json({{"epoch", 3}}), Error);
}

TEST(Optimizer, ZeroGradientLeavesParams) {
  for (auto kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    auto m = model_of(ModelKind::Nav);
    auto before = m.params.flat_values();
    Optimizer opt(kind, 0.1);
    m.params.zero_grad();
    optimize_step(m.params, opt);
    EXPECT_EQ(m.params.flat_values(), before);
  }
}

TEST(Optimizer, SgdUnitStep) {
  ParamStore ps;
  ps.add("w", {4});
  Rng rng(1);
  ps.init_uniform(rng, -1, 1);
  auto before = ps.flat_values();
  ps.flat_grads()[0] = 1.0;
  Optimizer opt(OptimizerKind::Sgd, 1.0);
  optimize_step(ps, opt);
  EXPECT_EQ(ps.flat_values()[0], ParamStore::to_storage(before[0] - 1.0));
  for (int i = 1; i < 4; ++i) EXPECT_EQ(ps.flat_values()[i], before[i]);
  for (double g : ps.flat_grads()) EXPECT_EQ(g, 0.0);
}

TEST(Optimizer, AdamConstantGradientStepsMinusLr) {
  ParamStore ps;
  ps.add("w", {2});
  const double lr = 1e-2;
  Optimizer opt(OptimizerKind::Adam, lr);
  double prev = 0, delta = 0;
  for (int t = 0; t < 3000; ++t) {
    ps.flat_grads()[0] = 0.3;
    ps.flat_grads()[1] = -2.0;
    prev = ps.flat_values()[0];
    optimize_step(ps, opt);
    delta = ps.flat_values()[0] - prev;
  }
  EXPECT_NEAR(delta, -lr, 1e-3 * lr);
  EXPECT_EQ(opt.steps(), 3000);
}

TEST(Optimizer, NonFiniteGradientNamesTensor) {
  ParamStore ps;
  ps.add("a", {2});
  ps.add("b.weights", {2});
  ps.flat_grads()[3] = std::nan("");
  Optimizer opt(OptimizerKind::Adam, 0.1);
  try {
    optimize_step(ps, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
    EXPECT_NE(std::string(e.what()).find("b.weights"), std::string::npos);
  }
}

TEST(Optimizer, ClipScalesToMaxNorm) {
  ParamStore ps;
  ps.add("w", {2});
  ps.flat_grads() = {3.0, 4.0};
  EXPECT_DOUBLE_EQ(clip_gradients(ps, 1.0), 5.0);
  EXPECT_NEAR(ps.flat_grads()[0], 0.6, 1e-12);
  EXPECT_NEAR(ps.flat_grads()[1], 0.8, 1e-12);
}
