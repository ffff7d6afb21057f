#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "navqa/gridworld.hpp"
#include "navqa/rng.hpp"
#include "navqa/vocabulary.hpp"

namespace navqa {

enum class TaskKind : std::uint8_t { Nav, QA };

/// Color questions carry the EQA-style "what color is the X" template.
enum class QuestionType : std::uint8_t { Existence, Counting, Spatial, Color };
inline constexpr int kNumQuestionTypes = 4;

std::string_view to_string(QuestionType q);
std::optional<QuestionType> parse_question_type(std::string_view s);

/// Candidate answers for a question type, in answer-index order.
std::vector<int> answer_candidates(QuestionType q);
/// 1 / |candidates|.
double chance_rate(QuestionType q);

struct Episode {
  int episode_id = 0;
  int world_id = 0;
  TaskKind task = TaskKind::Nav;
  AgentState start;
  /// Nav target cell, or the QA target object's cell when the question names one.
  std::optional<Cell> goal;
  /// Answer index (QA only).
  std::optional<int> answer;
  /// Nav: gold route ending in End. QA: gold approach trajectory, possibly empty.
  std::vector<Action> gold_actions;
  std::vector<int> language;
  std::optional<QuestionType> question_type;
  std::string template_name;
  std::optional<ObjectType> target_type;
  Split split = Split::Seen;
  /// EQA-style start offset in gold actions; 0 when not applicable.
  int t_offset = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

enum class BalanceMode : std::uint8_t { Randomized, Natural };

enum class GenTask : std::uint8_t { Nav, EqaNav, QaTopDown, QaEgocentric };
std::string_view to_string(GenTask t);
std::optional<GenTask> parse_gen_task(std::string_view s);

struct IntRange {
  int min = 0;
  int max = 0;
};

struct GenSpec {
  std::uint64_t seed = 0;
  GenTask task = GenTask::Nav;
  int seen_worlds = 8;
  int unseen_worlds = 4;
  IntRange room_count{1, 4};
  /// Interior width/height of each room in cells.
  IntRange room_size{3, 5};
  /// Randomized mode only; Natural mode draws per-type counts from built-in profiles.
  IntRange object_count{4, 12};
  /// Probability that an object takes its canonical color (Natural mode).
  double bias = 0.0;
  BalanceMode balance_mode = BalanceMode::Randomized;
  double entropy_threshold = 1.0;
  int episodes_per_world = 10;
  double val_seen_fraction = 0.2;
  std::vector<int> t_offsets = {10, 30, 50};
  std::vector<ObjectType> goal_types = {ObjectType::Fridge, ObjectType::GarbageCan,
                                        ObjectType::Microwave};
  int min_goal_distance = 4;
  /// Probability that a nav start pose already faces its first gold move.
  double start_heading_bias = 0.0;
  /// Probability that an object is placed inside another object of its room.
  double container_probability = 0.3;
  std::vector<QuestionType> question_types = {QuestionType::Existence, QuestionType::Counting,
                                              QuestionType::Spatial};
  std::array<Color, kNumObjectTypes> canonical_colors = default_canonical_colors();

  static std::array<Color, kNumObjectTypes> default_canonical_colors();
  /// Throws ConfigError.
  void validate() const;
};

/// Natural-mode per-type scene statistics: probability the type is present,
/// and the distribution of its count over {1, 2, 3} given presence.
struct TypeProfile {
  double presence = 0.0;
  std::array<double, 3> count_given_present{};
  bool against_wall = false;
};
const std::array<TypeProfile, kNumObjectTypes>& natural_profiles();

// --------------------------------------------------------------------------

/// Deterministic in (spec.seed, index). Throws GenerationFailure.
GridWorld gen_world(const GenSpec& spec, int index, Split split = Split::Seen,
                    bool ensure_goal_object = false);

/// Turns between path cells plus Forward per cell, then End. Heading ties for
/// a 180 degree turn resolve to two Rights.
std::vector<Action> compile_gold_actions(int start_heading, std::span<const Cell> path);

Episode gen_nav_episode(const GridWorld& world, const GenSpec& spec, Rng& rng, int episode_id = 0);

Episode gen_eqa_episode(const GridWorld& world, const GenSpec& spec, Rng& rng, int t_offset,
                        int episode_id = 0);

std::vector<int> gen_instruction(const GridWorld& world, std::span<const Action> gold_actions,
                                 const AgentState& start);

struct QuestionParams {
  QuestionType type = QuestionType::Existence;
  ObjectType subject = ObjectType::Fridge;
  ObjectType container = ObjectType::Fridge;
};

/// Ground-truth answer index, or nullopt when the question is not askable
/// in this world (counts above 3, ambiguous color subjects).
std::optional<int> question_answer(const GridWorld& world, const QuestionParams& q);
std::vector<int> question_tokens(const QuestionParams& q);

/// Top-down QA episode. With `target_answer`, rejection-samples (world,
/// question) pairs from `worlds` until the ground truth equals it.
Episode gen_question(std::span<const GridWorld> worlds, const GenSpec& spec, Rng& rng,
                     QuestionType qtype, std::optional<int> target_answer = std::nullopt,
                     int episode_id = 0);
Episode gen_question(const GridWorld& world, const GenSpec& spec, Rng& rng, QuestionType qtype);

/// QA episode whose question names an object reached by the gold trajectory.
Episode gen_egocentric_question(std::span<const GridWorld> worlds, const GenSpec& spec, Rng& rng,
                                QuestionType qtype, int episode_id = 0);

/// Drops every (template, target type) group whose majority-answer share is
/// above `threshold`. Throws EmptyDataset if nothing survives.
std::vector<Episode> entropy_filter(std::span<const Episode> dataset, double threshold);

struct DatasetSplits {
  std::vector<Episode> train;
  std::vector<Episode> val_seen;
  std::vector<Episode> val_unseen;
};

/// Seen-world episodes are divided into train / val_seen; unseen-world
/// episodes all go to val_unseen.
DatasetSplits split_dataset(std::span<const GridWorld> worlds, std::span<const Episode> episodes,
                            double val_seen_fraction, std::uint64_t seed);

struct GeneratedData {
  std::vector<GridWorld> worlds;
  DatasetSplits splits;
};

/// Full pipeline for one GenSpec. Identical specs give identical output.
GeneratedData generate_dataset(const GenSpec& spec);

/// Replays actions and returns every visited state, starting with `start`.
std::vector<AgentState> replay(const GridWorld& world, const AgentState& start,
                               std::span<const Action> actions);

}  // namespace navqa
