#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navqa/encoders.hpp"
#include "navqa/episodegen.hpp"
#include "navqa/policy.hpp"

namespace navqa {

/// The four trained input conditions: full, action only, action + vision,
/// action + language.
enum class Variant : std::uint8_t { Full, A, AV, AL };
inline constexpr std::array<Variant, 4> kAllVariants = {Variant::Full, Variant::A, Variant::AV,
                                                        Variant::AL};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);

/// Row label used in result tables: Full, A, A_V, A_L.
std::string_view table_label(Variant v);

inline constexpr std::string_view kRandomForward = "random_forward";
inline constexpr std::string_view kRandom100 = "random_100";
inline constexpr std::string_view kMajority = "majority";

struct AblationSpec {
  Variant variant = Variant::Full;
  ModalityMasks masks() const;
};

/// A model seen through the masks of one variant. Training and evaluation
/// both go through `encoder`, so the masked inputs are never delivered.
struct AblatedModel {
  const Model* model = nullptr;
  AblationSpec spec;
  ModalityEncoder encoder;

  std::size_t param_count() const { return count_params(*model); }
};

AblatedModel apply_ablation(const Model& model, AblationSpec spec);

// --------------------------------------------------------------------------
// Navigation agents
// --------------------------------------------------------------------------

class NavAgent {
 public:
  virtual ~NavAgent() = default;
  virtual std::string name() const = 0;
  virtual void begin(const GridWorld& world, const Episode& episode, Rng& rng) = 0;
  virtual Action act(const GridWorld& world, const AgentState& state) = 0;
  /// Steps the agent needs regardless of the rollout cap.
  virtual int min_step_budget() const { return 0; }
};

/// Greedy (argmax) policy over masked logits; handles flat and hierarchical models.
std::unique_ptr<NavAgent> make_policy_agent(const AblatedModel& model);

/// Random direction (0-3 right turns), then up to five Forwards, turning
/// Right whenever Forward is blocked; End after the fifth Forward.
std::unique_ptr<NavAgent> make_random_forward_agent();

/// 100 uniform draws over available non-End actions, then End.
std::unique_ptr<NavAgent> make_random_100_agent();

/// Trajectory of the random-forward rule, capped at max_steps actions.
std::vector<Action> random_forward_baseline(const GridWorld& world, const AgentState& start,
                                            Rng& rng, int max_steps = 60);

std::vector<Action> random_100_baseline(const GridWorld& world, const AgentState& start, Rng& rng);

// --------------------------------------------------------------------------
// QA baselines
// --------------------------------------------------------------------------

/// Constant answerer per question type: the most frequent training answer,
/// ties to the lower answer index.
class MajorityBaseline {
 public:
  /// Throws EmptyDataset.
  static MajorityBaseline fit(std::span<const Episode> train);

  /// Falls back to the overall majority for unseen question types.
  int answer(const Episode& e) const;
  int answer(QuestionType q) const;
  const std::map<QuestionType, int>& table() const { return by_type_; }

 private:
  std::map<QuestionType, int> by_type_;
  int overall_ = 0;
};

MajorityBaseline majority_baseline(std::span<const Episode> train);

}  // namespace navqa
