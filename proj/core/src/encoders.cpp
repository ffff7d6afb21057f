#include "navqa/encoders.hpp"

#include <algorithm>

#include "navqa/error.hpp"

namespace navqa {

std::array<double, kPrevActionDim> prev_action_one_hot(std::optional<Action> prev) {
  std::array<double, kPrevActionDim> out{};
  out[prev ? index_of(*prev) : kStartSentinel] = 1.0;
  return out;
}

void check_tokens(std::span<const int> tokens, const Vocabulary& vocab) {
  for (int t : tokens)
    if (!vocab.contains_id(t)) fail(ErrorCode::UnknownToken, "token id " + std::to_string(t));
}

ModalityBundle encode_step(const GridWorld& world, const AgentState& state,
                           std::span<const int> language_tokens, std::optional<Action> prev_action,
                           ModalityMasks masks) {
  check_tokens(language_tokens);
  ModalityBundle b;
  if (!masks.vision) b.vision = render_egocentric(world, state);
  b.language = pad_language(language_tokens);
  b.prev_action = prev_action_one_hot(prev_action);
  b.availability = available_actions(world, state);
  b.mask_vision = masks.vision;
  b.mask_language = masks.language;
  return b;
}

ModalityBundle ModalityEncoder::encode(const GridWorld& world, const AgentState& state,
                                       std::span<const int> language_tokens,
                                       std::optional<Action> prev_action) const {
  auto b = encode_step(world, state, language_tokens, prev_action, masks_);
  if (observer_) observer_(b);
  return b;
}

VisionFeature ModalityEncoder::vision(const VisionFeature& raw) const {
  if (masks_.vision) return VisionFeature{};
  return raw;
}

std::array<VisionFeature, 5> qa_frames(const GridWorld& world, const Episode& episode) {
  const auto states = replay(world, episode.start, episode.gold_actions);
  // Drop the End and the final Forward onto the target.
  std::size_t last = states.size() - 1;
  const auto& gold = episode.gold_actions;
  std::size_t n = gold.size();
  if (n > 0 && gold[n - 1] == Action::End) --n;
  if (n > 0 && gold[n - 1] == Action::Forward) --n;
  last = std::min(last, n);
  std::array<VisionFeature, 5> frames;
  for (int k = 0; k < 5; ++k) {
    const long idx = static_cast<long>(last) - (4 - k);
    frames[k] = render_egocentric(world, states[static_cast<std::size_t>(std::max(0L, idx))]);
  }
  return frames;
}

}  // namespace navqa
