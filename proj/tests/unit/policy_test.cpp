#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "../support/fixtures.hpp"
#include "../support/gradcheck.hpp"
#include "navqa/autodiff.hpp"
#include "navqa/encoders.hpp"
#include "navqa/error.hpp"
#include "navqa/policy.hpp"

using namespace navqa;
using fixtures::at;

namespace {

Model model_of(ModelKind kind, std::uint64_t seed = 1) {
  ModelConfig c;
  c.kind = kind;
  c.vocab_size = Vocabulary::builtin().size();
  return make_model(c, seed);
}

std::vector<double> values_of(const Graph& g, Var v) {
  auto s = g.value(v);
  return {s.begin(), s.end()};
}

std::vector<double> nav_logits(const Model& m, const GridWorld& w, const AgentState& s,
                               const std::vector<int>& tokens, std::optional<Action> prev,
                               ModalityMasks masks) {
  Graph g(m.params);
  auto b = encode_step(w, s, tokens, prev, masks);
  auto lang = lang_encode(g, m.nav.lang, b.language, b.mask_language);
  auto out = nav_forward(g, m.nav, b, initial_hidden(lang), lang);
  return values_of(g, out.action_logits);
}

}  // namespace

TEST(Autodiff, ElementaryOpsMatchFiniteDifferences) {
  ParamStore ps;
  auto w = ps.add("w", {3, 4});
  auto b = ps.add("b", {3});
  auto k = ps.add("k", {2, 3, 3, 2});
  auto kb = ps.add("kb", {2});
  Rng rng(4);
  ps.init_uniform(rng, -0.5, 0.5);
  const std::vector<double> x = {0.3, -0.2, 0.7, 0.1};
  std::vector<double> grid(3 * 3 * 2);
  for (auto& v : grid) v = rng.uniform(-1, 1);
  auto loss = [&](std::span<double> grads) {
    Graph g(ps, grads);
    Var h = g.tanh(g.affine(g.param(w), g.constant(x), g.param(b)));
    Var s = g.sigmoid(h);
    Var c = g.conv3x3(g.constant(grid), 3, 3, 2, g.param(k), g.param(kb), 2);
    Var pooled = g.spatial_sum(g.tanh(c), 9, 2);
    Var keys[3] = {h, s, g.mul(h, s)};
    Var att = g.attention_weights(h, keys);
    Var sum = g.weighted_sum(att, keys);
    Var logits = g.concat({sum, pooled, g.one_minus(s)});
    Var l = g.cross_entropy(logits, 2);
    Var l2 = g.binary_cross_entropy(g.dot(h, s), 1.0);
    Var parts[2] = {l, l2};
    Var total = g.sum_scalars(parts);
    if (g.grad_enabled()) g.backward(total);
    return g.scalar(total);
  };
  std::vector<double> grads(ps.total_count(), 0.0);
  loss(grads);
  auto r = fixtures::finite_difference_check(ps.flat_values(), grads, [&] { return loss({}); }, 60, rng);
  EXPECT_GE(r.checked, 60);
  EXPECT_LT(r.worst, 1e-6);
}

TEST(Autodiff, CrossEntropyOfCertainTargetIsZero) {
  ParamStore ps;
  Graph g(ps);
  const double inf = std::numeric_limits<double>::infinity();
  Var l = g.cross_entropy(g.constant(std::vector<double>{-inf, 0.0, -inf}), 1);
  EXPECT_EQ(g.scalar(l), 0.0);
  EXPECT_THROW(g.cross_entropy(g.constant(std::vector<double>{-inf, 0.0}), 0), Error);
}

TEST(NavForward, OnlyEndAvailableGivesProbabilityOne) {
  auto m = model_of(ModelKind::Nav);
  auto w = fixtures::open_room(3, 3);
  Graph g(m.params);
  auto b = encode_step(w, at(2, 2), {}, std::nullopt, {});
  b.availability.fill(false);
  b.availability[index_of(Action::End)] = true;
  auto lang = lang_encode(g, m.nav.lang, b.language, false);
  auto out = nav_forward(g, m.nav, b, initial_hidden(lang), lang);
  auto logits = values_of(g, out.action_logits);
  auto p = softmax(logits);
  for (int a = 0; a < kNumActions; ++a) EXPECT_EQ(p[a], a == index_of(Action::End) ? 1.0 : 0.0);
  EXPECT_EQ(argmax(logits), index_of(Action::End));
}

TEST(NavForward, ActionOnlyIgnoresWorldAndText) {
  auto m = model_of(ModelKind::Nav);
  auto w1 = fixtures::open_room(3, 3);
  auto w2 = fixtures::open_room(6, 4);
  w2.add_object({ObjectType::Sofa, Color::Red, {2, 1}, std::nullopt});
  const auto& v = Vocabulary::builtin();
  auto a = nav_logits(m, w1, at(2, 2), v.encode({"turn", "left"}), Action::Forward, {true, true});
  auto b = nav_logits(m, w2, at(2, 2), v.encode({"go", "to", "the", "sofa"}), Action::Forward, {true, true});
  EXPECT_EQ(a, b);
  auto c = nav_logits(m, w2, at(2, 2), v.encode({"go", "to", "the", "sofa"}), Action::Forward, {});
  EXPECT_NE(a, c);
}

TEST(NavForward, GradientsMatchFiniteDifferences) {
  auto r = fixtures::grad_check_model(ModelKind::Nav, 2, 40, 3);
  EXPECT_GE(r.checked, 80);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(LangEncode, MaskedEqualsZeroInputTrajectory) {
  auto m = model_of(ModelKind::Nav);
  const auto& v = Vocabulary::builtin();
  Graph g(m.params);
  auto a = lang_encode(g, m.nav.lang, pad_language(v.encode({"turn", "left"})), true);
  auto b = lang_encode(g, m.nav.lang, pad_language(v.encode({"go", "forward", "3"})), true);
  auto z = lang_encode(g, m.nav.lang, std::vector<int>(kMaxLanguageTokens, kPadId), false);
  ASSERT_EQ(a.size(), z.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(values_of(g, a[i]), values_of(g, z[i]));
    EXPECT_EQ(values_of(g, b[i]), values_of(g, z[i]));
  }
}

TEST(LangEncode, EmptySequenceGivesOneState) {
  auto m = model_of(ModelKind::Nav);
  Graph g(m.params);
  auto s = lang_encode(g, m.nav.lang, {}, false);
  ASSERT_EQ(s.size(), 1u);
  auto z = lang_encode(g, m.nav.lang, std::vector<int>{kPadId}, false);
  EXPECT_EQ(values_of(g, s[0]), values_of(g, z[0]));
}

TEST(LangEncode, FiniteOnRandomSequences) {
  auto m = model_of(ModelKind::Nav, 9);
  Rng rng(2);
  const int V = Vocabulary::builtin().size();
  for (int n = 0; n < 10000; ++n) {
    std::vector<int> t(rng.uniform_int(0, kMaxLanguageTokens));
    for (auto& id : t) id = rng.uniform_int(0, V - 1);
    Graph g(m.params);
    auto s = lang_encode(g, m.nav.lang, t, false);
    for (double x : g.value(s.back())) ASSERT_TRUE(std::isfinite(x));
  }
}

TEST(Hier, ControllerTargetsAreRunLengths) {
  using A = Action;
  std::vector<A> gold = {A::Forward, A::Forward, A::Forward, A::Right, A::Forward, A::Left, A::Left, A::End};
  EXPECT_EQ(controller_targets(gold), (std::vector<bool>{true, true, false, false, false, true, false}));
  std::vector<A> single = {A::Forward, A::Right, A::Forward, A::Left, A::Forward, A::End};
  for (bool b : controller_targets(single)) EXPECT_FALSE(b);
}

TEST(Hier, PlannerOrControllerActs) {
  auto m = model_of(ModelKind::Hier);
  auto w = fixtures::open_room(3, 3);
  Graph g(m.params);
  auto b = encode_step(w, at(2, 2), {}, std::nullopt, {});
  auto lang = lang_encode(g, m.nav.lang, b.language, false);
  auto h = initial_hidden(lang);
  auto planner = hier_forward(g, m, b, h, g.zeros(m.config.hidden_dim), lang, std::nullopt);
  EXPECT_TRUE(planner.planner && !planner.controller);
  auto ctrl = hier_forward(g, m, b, h, g.zeros(m.config.hidden_dim), lang, Action::Forward);
  EXPECT_TRUE(ctrl.controller && !ctrl.planner);
  EXPECT_EQ(g.size(ctrl.controller->repeat_logit), 1u);
}

TEST(Hier, GradientsMatchFiniteDifferences) {
  auto r = fixtures::grad_check_model(ModelKind::Hier, 2, 40, 4);
  EXPECT_GE(r.checked, 80);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(TopDown, SwappingEmptyRowsKeepsLogits) {
  auto m = model_of(ModelKind::QaTopDown);
  auto w = fixtures::open_room(4, 4);
  auto map = render_topdown(w);
  auto swapped = map;
  for (int x = 0; x < map.width; ++x)
    for (int c = 0; c < kCellChannels; ++c) {
      std::swap(swapped.data[(1 * map.width + x) * kCellChannels + c],
                swapped.data[(3 * map.width + x) * kCellChannels + c]);
    }
  auto q = question_tokens({QuestionType::Existence, ObjectType::Lamp, ObjectType::Lamp});
  Graph g(m.params);
  auto a = values_of(g, qa_topdown_forward(g, m.topdown, map, q, {}));
  auto b = values_of(g, qa_topdown_forward(g, m.topdown, swapped, q, {}));
  EXPECT_EQ(a, b);
}

TEST(TopDown, ZeroInputsUseBiasPathOnly) {
  auto m = model_of(ModelKind::QaTopDown);
  TopDownMap zero{5, 5, std::vector<double>(5 * 5 * kCellChannels, 0.0)};
  auto q = question_tokens({QuestionType::Counting, ObjectType::Sofa, ObjectType::Sofa});
  Graph g(m.params);
  auto before = values_of(g, qa_topdown_forward(g, m.topdown, zero, q, {false, true}));
  // Kernel weights that read map channels cannot matter on a zero map.
  auto k1 = m.params.values(m.topdown.k1);
  const int in = kCellChannels + m.config.hidden_dim;
  for (std::size_t i = 0; i < k1.size(); ++i)
    if (static_cast<int>(i % in) < kCellChannels) k1[i] = 0.5;
  Graph g2(m.params);
  auto after = values_of(g2, qa_topdown_forward(g2, m.topdown, zero, q, {false, true}));
  EXPECT_EQ(before, after);
}

TEST(TopDown, GradientsMatchFiniteDifferences) {
  auto r = fixtures::grad_check_model(ModelKind::QaTopDown, 2, 40, 5);
  EXPECT_GE(r.checked, 80);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(Attention, IdenticalFramesGiveExactFifths) {
  auto m = model_of(ModelKind::QaAttention);
  auto w = fixtures::open_room(3, 3);
  w.add_object({ObjectType::Lamp, Color::Blue, {2, 1}, std::nullopt});
  std::vector<VisionFeature> frames(kQaFrames, render_egocentric(w, at(2, 2)));
  Graph g(m.params);
  auto out = qa_attention_forward(g, m.attention, frames, {}, {});
  for (double v : g.value(out.weights)) EXPECT_EQ(v, 0.2);
}

TEST(Attention, WeightsSumToOne) {
  auto m = model_of(ModelKind::QaAttention, 3);
  Rng rng(8);
  for (int n = 0; n < 200; ++n) {
    std::vector<VisionFeature> frames(kQaFrames);
    for (auto& f : frames)
      for (auto& v : f) v = rng.bernoulli(0.2) ? 1.0 : 0.0;
    Graph g(m.params);
    auto out = qa_attention_forward(g, m.attention, frames, {}, {});
    double s = 0;
    for (double v : g.value(out.weights)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  auto r = fixtures::grad_check_model(ModelKind::QaAttention, 2, 40, 6);
  EXPECT_GE(r.checked, 80);
  EXPECT_LT(r.worst, 1e-4);
}

TEST(CountParams, SumOfTensorSizes) {
  for (auto kind : {ModelKind::Nav, ModelKind::Hier, ModelKind::QaTopDown, ModelKind::QaAttention}) {
    auto m = model_of(kind);
    std::size_t s = 0;
    for (const auto& t : m.params.tensors()) {
      std::size_t n = 1;
      for (int d : t.shape) n *= d;
      EXPECT_EQ(n, t.size);
      s += n;
    }
    EXPECT_EQ(count_params(m), s);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto dir = std::filesystem::temp_directory_path() / "navqa_ckpt_test";
  for (auto kind : {ModelKind::Nav, ModelKind::Hier, ModelKind::QaTopDown, ModelKind::QaAttention}) {
    auto m = model_of(kind, 17);
    save_model(dir / "m.json", m, "av");
    auto loaded = load_model(dir / "m.json");
    EXPECT_EQ(loaded.variant, "av");
    EXPECT_EQ(count_params(loaded.model), count_params(m));
    EXPECT_EQ(loaded.model.params.flat_values(), m.params.flat_values());
  }
  std::filesystem::remove_all(dir);
}

TEST(Checkpoint, LayoutMismatchThrows) {
  auto dir = std::filesystem::temp_directory_path() / "navqa_ckpt_bad";
  auto m = model_of(ModelKind::Nav);
  save_model(dir / "m.json", m, "full");
  ModelConfig c = m.config;
  c.hidden_dim = 16;
  auto other = make_model(c, 0);
  EXPECT_THROW(load_into(read_checkpoint(dir / "m.json"), other.params), Error);
  std::filesystem::remove_all(dir);
}

TEST(ModelConfig, RejectsUnknownKey) {
  nlohmann::json j = {{"kind", "nav"}, {"hidden", 3}};
  EXPECT_THROW(model_config_from_json(j), Error);
}
