#include <gtest/gtest.h>

#include <filesystem>

#include "../support/fixtures.hpp"
#include "navqa/encoders.hpp"
#include "navqa/error.hpp"
#include "navqa/vocabulary.hpp"

using namespace navqa;
using fixtures::at;

namespace {

std::vector<int> tokens(std::initializer_list<std::string_view> words) {
  return Vocabulary::builtin().encode(words);
}

}  // namespace

TEST(Vocabulary, PadIsZeroAndAnswersResolve) {
  const auto& v = Vocabulary::builtin();
  EXPECT_EQ(v.token(kPadId), "<pad>");
  EXPECT_EQ(static_cast<int>(v.answer_token_ids().size()), kNumAnswers);
  for (int a = 0; a < kNumAnswers; ++a) {
    EXPECT_EQ(v.token(v.answer_token_ids()[a]), answer_name(a));
    EXPECT_EQ(parse_answer(answer_name(a)), a);
  }
  EXPECT_THROW(v.id("zebra"), Error);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "navqa_vocab_test.txt";
  Vocabulary::builtin().save(path);
  EXPECT_EQ(Vocabulary::load(path), Vocabulary::builtin());
  std::filesystem::remove(path);
}

TEST(Vocabulary, PadLanguageLeftPadsAndTruncates) {
  std::vector<int> ids = {5, 6, 7};
  auto p = pad_language(ids);
  ASSERT_EQ(static_cast<int>(p.size()), kMaxLanguageTokens);
  for (int i = 0; i < kMaxLanguageTokens - 3; ++i) EXPECT_EQ(p[i], kPadId);
  EXPECT_EQ(p[kMaxLanguageTokens - 3], 5);
  EXPECT_EQ(p.back(), 7);
  std::vector<int> longer(30);
  for (int i = 0; i < 30; ++i) longer[i] = i + 1;
  auto t = pad_language(longer);
  ASSERT_EQ(static_cast<int>(t.size()), kMaxLanguageTokens);
  EXPECT_EQ(t.front(), 1);
  EXPECT_EQ(t.back(), kMaxLanguageTokens);
}

TEST(EncodeStep, MaskVisionZeroesVision) {
  auto w = fixtures::open_room(3, 3);
  w.add_object({ObjectType::Sofa, Color::Red, {2, 1}, std::nullopt});
  auto b = encode_step(w, at(2, 2), tokens({"go", "forward", "2"}), std::nullopt, {true, false});
  for (double v : b.vision) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(b.mask_vision);
}

TEST(EncodeStep, StartSentinelAtFirstStep) {
  auto w = fixtures::open_room(3, 3);
  auto b = encode_step(w, at(2, 2), {}, std::nullopt, {});
  for (int i = 0; i < kPrevActionDim; ++i) EXPECT_EQ(b.prev_action[i], i == kStartSentinel ? 1.0 : 0.0);
  auto c = encode_step(w, at(2, 2), {}, Action::Left, {});
  EXPECT_EQ(c.prev_action[index_of(Action::Left)], 1.0);
  EXPECT_EQ(c.prev_action[kStartSentinel], 0.0);
}

TEST(EncodeStep, BothMasksLeaveActionInputsOnly) {
  auto w1 = fixtures::open_room(3, 3);
  auto w2 = fixtures::open_room(5, 4);
  w2.add_object({ObjectType::Lamp, Color::Blue, {2, 1}, std::nullopt});
  auto a = encode_step(w1, at(2, 2), tokens({"turn", "left"}), Action::Right, {true, true});
  auto b = encode_step(w2, at(2, 2), tokens({"go", "to", "the", "lamp"}), Action::Right, {true, true});
  EXPECT_EQ(a.vision, b.vision);
  EXPECT_EQ(a.prev_action, b.prev_action);
  EXPECT_EQ(a.availability, b.availability);
  EXPECT_TRUE(a.mask_language && b.mask_language);
  // Token ids still travel with the bundle; models must not read them.
  EXPECT_NE(a.language, b.language);
}

TEST(EncodeStep, UnknownTokenThrows) {
  auto w = fixtures::open_room(3, 3);
  std::vector<int> bad = {Vocabulary::builtin().size()};
  try {
    encode_step(w, at(2, 2), bad, std::nullopt, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownToken);
  }
}

TEST(Encoder, ObserverSeesEveryBundle) {
  auto w = fixtures::open_room(3, 3);
  ModalityEncoder enc({true, false});
  int seen = 0;
  enc.set_observer([&](const ModalityBundle& b) {
    ++seen;
    double s = 0;
    for (double v : b.vision) s += std::abs(v);
    EXPECT_EQ(s, 0.0);
  });
  for (int i = 0; i < 4; ++i) enc.encode(w, at(2, 2), {}, std::nullopt);
  EXPECT_EQ(seen, 4);
}

TEST(QaFrames, StopOneCellShortFacingTarget) {
  auto w = fixtures::corridor(8);
  w.add_object({ObjectType::Fridge, Color::White, {8, 1}, std::nullopt});
  Episode e;
  e.start = at(1, 1, 1);
  e.goal = Cell{8, 1};
  e.gold_actions = std::vector<Action>(7, Action::Forward);
  e.gold_actions.push_back(Action::End);
  auto frames = qa_frames(w, e);
  // Last frame from (7,1) facing east: fridge in the centre near cell.
  EXPECT_EQ(frames[4][cone_offset(0, 1) + kChannelTypeBase + static_cast<int>(ObjectType::Fridge)], 1.0);
  EXPECT_EQ(frames[4], render_egocentric(w, at(7, 1, 1)));
  EXPECT_EQ(frames[0], render_egocentric(w, at(3, 1, 1)));
}

TEST(QaFrames, ShortPathRepeatsEarliest) {
  auto w = fixtures::corridor(3);
  Episode e;
  e.start = at(1, 1, 1);
  e.gold_actions = {Action::Forward, Action::End};
  auto frames = qa_frames(w, e);
  for (const auto& f : frames) EXPECT_EQ(f, render_egocentric(w, e.start));
}
