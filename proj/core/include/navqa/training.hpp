#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "navqa/encoders.hpp"
#include "navqa/episodegen.hpp"
#include "navqa/policy.hpp"

namespace navqa {

enum class Forcing : std::uint8_t { Teacher, Student };
enum class OptimizerKind : std::uint8_t { Sgd, Adam };

std::string_view to_string(Forcing f);
std::optional<Forcing> parse_forcing(std::string_view s);
std::string_view to_string(OptimizerKind o);
std::optional<OptimizerKind> parse_optimizer(std::string_view s);

struct TrainConfig {
  Forcing forcing = Forcing::Teacher;
  int epochs = 10;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int batch_size = 16;
  int max_episode_steps = 60;
  /// Validation (and checkpoint) period in epochs; 0 disables.
  int eval_every = 0;
  std::uint64_t seed = 0;
  /// Global gradient-norm clip applied before each update; 0 disables.
  double clip_norm = 5.0;
  /// Worker threads for per-episode gradients. Results do not depend on it.
  int jobs = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// Student forcing runs longer by default.
inline constexpr int kDefaultStudentEpochs = 30;

nlohmann::json train_config_to_json(const TrainConfig& c);
/// Unset "epochs" defaults by forcing mode. Throws ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// (world_id, x, y, heading, tilt)
using StateKey = std::tuple<int, int, int, int, int>;
StateKey state_key(const GridWorld& world, const AgentState& s);

/// Distinct states touched while computing losses.
struct VisitedLog {
  std::set<StateKey> states;
  void add(const GridWorld& world, const AgentState& s) { states.insert(state_key(world, s)); }
  void merge(const VisitedLog& o) { states.insert(o.states.begin(), o.states.end()); }
};

struct EpisodeLosses {
  std::vector<double> losses;
  /// Steps whose argmax matched the supervision target.
  int correct = 0;
  int steps = 0;
  double mean() const;
};

/// First action of the current shortest path to `goal`: level the tilt,
/// then align the heading (ties turn Right), then Forward; End on the goal.
Action shortest_path_action(const GridWorld& world, const AgentState& state, Cell goal);

/// One teacher-forced pass over the gold actions. Gradients of the mean step
/// loss are added to `grads` (forward only when empty).
/// Throws GoldReplayFailure if a gold action is unavailable.
EpisodeLosses teacher_forcing_episode(const Model& model, const ModalityEncoder& encoder,
                                      const GridWorld& world, const Episode& episode,
                                      std::span<double> grads, VisitedLog* visited = nullptr);

/// Sampled rollout supervised by shortest_path_action at every step.
EpisodeLosses student_forcing_episode(const Model& model, const ModalityEncoder& encoder,
                                      const GridWorld& world, const Episode& episode, Rng& rng,
                                      int max_steps, std::span<double> grads,
                                      VisitedLog* visited = nullptr);

/// Answer logits for a QA episode (top-down or attention model).
std::vector<double> qa_logits(const Model& model, ModalityMasks masks, const GridWorld& world,
                              const Episode& episode);

/// Cross-entropy of one QA episode; gradients added to `grads` when non-empty.
EpisodeLosses qa_episode_loss(const Model& model, ModalityMasks masks, const GridWorld& world,
                              const Episode& episode, std::span<double> grads);

/// SGD or bias-corrected Adam.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }
  long steps() const { return t_; }

  /// Applies params.flat_grads(), rounds to float storage, then zeroes the
  /// gradient buffer. Throws NonFiniteGradient naming the first bad tensor.
  void step(ParamStore& params);

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

void optimize_step(ParamStore& params, Optimizer& optimizer);

/// Scales the gradient buffer so its L2 norm is at most max_norm; returns the
/// original norm.
double clip_gradients(ParamStore& params, double max_norm);

/// World lookup by world_id.
class WorldIndex {
 public:
  explicit WorldIndex(std::span<const GridWorld> worlds);
  const GridWorld& at(int world_id) const;

 private:
  std::map<int, const GridWorld*> by_id_;
};

struct TrainResult {
  /// JSONL rows: {"epoch", "split", "loss", "metric"}.
  std::vector<nlohmann::json> log;
  VisitedLog visited;
};

/// Called every eval_every epochs and after the last one; returns extra log rows.
using EpochHook = std::function<std::vector<nlohmann::json>(int epoch, const Model& model)>;

TrainResult train_nav(Model& model, const ModalityEncoder& encoder, std::span<const GridWorld> worlds,
                      std::span<const Episode> train, const TrainConfig& config,
                      const EpochHook& hook = {});

/// Minibatch training of a QA model. QA models take no action inputs.
/// Throws EmptyDataset.
TrainResult train_qa(Model& model, ModalityMasks masks, std::span<const GridWorld> worlds,
                     std::span<const Episode> train, const TrainConfig& config,
                     const EpochHook& hook = {});

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace navqa
