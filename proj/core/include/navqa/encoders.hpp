#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "navqa/episodegen.hpp"
#include "navqa/gridworld.hpp"
#include "navqa/vocabulary.hpp"

namespace navqa {

/// Six actions plus the Start sentinel used at t = 0.
inline constexpr int kPrevActionDim = kNumActions + 1;
inline constexpr int kStartSentinel = kNumActions;

struct ModalityMasks {
  bool vision = false;
  bool language = false;
  friend bool operator==(const ModalityMasks&, const ModalityMasks&) = default;
};

/// Per-step model input (vision, language, previous action, availability).
/// Models must zero per-token language embeddings when mask_language is set;
/// the vision vector is already zero when mask_vision is set.
struct ModalityBundle {
  VisionFeature vision{};
  /// Exactly kMaxLanguageTokens ids.
  std::vector<int> language;
  std::array<double, kPrevActionDim> prev_action{};
  AvailabilityMask availability{};
  bool mask_vision = false;
  bool mask_language = false;
};

std::array<double, kPrevActionDim> prev_action_one_hot(std::optional<Action> prev);

/// Throws UnknownToken for ids outside the vocabulary.
void check_tokens(std::span<const int> tokens, const Vocabulary& vocab = Vocabulary::builtin());

ModalityBundle encode_step(const GridWorld& world, const AgentState& state,
                           std::span<const int> language_tokens, std::optional<Action> prev_action,
                           ModalityMasks masks);

/// encode_step with fixed masks and an optional observer that sees every
/// bundle produced (used to audit what an ablated agent was shown).
class ModalityEncoder {
 public:
  using Observer = std::function<void(const ModalityBundle&)>;

  explicit ModalityEncoder(ModalityMasks masks = {}) : masks_(masks) {}

  ModalityMasks masks() const { return masks_; }
  void set_observer(Observer obs) { observer_ = std::move(obs); }

  ModalityBundle encode(const GridWorld& world, const AgentState& state,
                        std::span<const int> language_tokens,
                        std::optional<Action> prev_action) const;

  /// Applies the vision mask to a raw frame.
  VisionFeature vision(const VisionFeature& raw) const;

 private:
  ModalityMasks masks_;
  Observer observer_;
};

/// The last five egocentric views along the gold trajectory that end one
/// cell short of the target, facing it. Shorter paths repeat the earliest.
std::array<VisionFeature, 5> qa_frames(const GridWorld& world, const Episode& episode);

}  // namespace navqa
