#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navqa/autodiff.hpp"
#include "navqa/encoders.hpp"
#include "navqa/gridworld.hpp"
#include "navqa/params.hpp"
#include "navqa/vocabulary.hpp"

namespace navqa {

enum class ModelKind : std::uint8_t { Nav, Hier, QaTopDown, QaAttention };
std::string_view to_string(ModelKind k);
std::optional<ModelKind> parse_model_kind(std::string_view s);
inline bool is_nav_model(ModelKind k) { return k == ModelKind::Nav || k == ModelKind::Hier; }

struct ModelConfig {
  ModelKind kind = ModelKind::Nav;
  int vocab_size = 0;
  int embed_dim = 16;
  int hidden_dim = 32;
  int vision_proj_dim = 32;
  /// Channels of both 3x3 layers in the top-down QA model.
  int conv_channels = 16;
  double init_scale = 0.08;

  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

inline constexpr int kQaFrames = 5;

// --------------------------------------------------------------------------
// Parameter groups
// --------------------------------------------------------------------------

struct LangEncoderParams {
  ParamId embed = -1;
  GruParams gru;
};

/// Flat policy, also the planner of the hierarchical policy.
struct NavParams {
  LangEncoderParams lang;
  ParamId wv = -1, bv = -1;
  GruParams decoder;
  DenseParams head;
};

struct ControllerParams {
  GruParams gru;
  DenseParams head;
};

struct QaTopDownParams {
  LangEncoderParams lang;
  ParamId k1 = -1, b1 = -1, k2 = -1, b2 = -1;
  DenseParams head;
};

struct QaAttentionParams {
  LangEncoderParams lang;
  ParamId wf = -1, bf = -1;
  DenseParams head;
};

/// A trainable model: configuration plus its parameter store and handles.
struct Model {
  ModelConfig config;
  ParamStore params;
  NavParams nav;
  ControllerParams controller;
  QaTopDownParams topdown;
  QaAttentionParams attention;
};

/// Builds and seeds a model of `config.kind`.
Model make_model(const ModelConfig& config, std::uint64_t seed);

/// Total scalar parameter count.
inline std::size_t count_params(const ParamStore& params) { return params.total_count(); }
inline std::size_t count_params(const Model& m) { return m.params.total_count(); }

// --------------------------------------------------------------------------
// Forward passes
// --------------------------------------------------------------------------

/// Gated recurrent pass over token embeddings. Pad tokens and masked inputs
/// feed zero vectors. An empty sequence yields one zero-input state.
std::vector<Var> lang_encode(Graph& g, const LangEncoderParams& p, std::span<const int> tokens,
                             bool masked);

struct PolicyOutput {
  /// Availability-masked logits (-infinity where unavailable).
  Var action_logits;
  Var next_hidden;
};

/// Initial decoder state for an episode: the last language encoder state.
Var initial_hidden(std::span<const Var> lang_states);

PolicyOutput nav_forward(Graph& g, const NavParams& p, const ModalityBundle& bundle, Var hidden,
                         std::span<const Var> lang_states);

struct ControllerOutput {
  /// Logit of "repeat the current action".
  Var repeat_logit;
  Var next_hidden;
};

/// Controller step: consumes the new frame and the action being repeated.
ControllerOutput controller_forward(Graph& g, const NavParams& planner, const ControllerParams& p,
                                    const ModalityBundle& bundle, Action current, Var hidden);

struct HierOutput {
  /// Planner output when the planner held control this step.
  std::optional<PolicyOutput> planner;
  /// Controller output when it held control this step.
  std::optional<ControllerOutput> controller;
};

/// One hierarchical step. With `current` unset the planner acts; otherwise
/// the controller decides whether to repeat `current`.
HierOutput hier_forward(Graph& g, const Model& m, const ModalityBundle& bundle, Var planner_hidden,
                        Var controller_hidden, std::span<const Var> lang_states,
                        std::optional<Action> current);

/// Controller supervision: for each non-End gold action, true when the next
/// gold action repeats it (run-length encoding of the sequence).
std::vector<bool> controller_targets(std::span<const Action> gold);

Var qa_topdown_forward(Graph& g, const QaTopDownParams& p, const TopDownMap& map,
                       std::span<const int> tokens, ModalityMasks masks);

struct AttentionOutput {
  Var logits;
  Var weights;
  Var summary;
};

AttentionOutput qa_attention_forward(Graph& g, const QaAttentionParams& p,
                                     std::span<const VisionFeature> frames,
                                     std::span<const int> tokens, ModalityMasks masks);

/// Softmax over finite logits; -infinity entries get exactly 0.
std::vector<double> softmax(std::span<const double> logits);
/// Index of the largest finite logit, lowest index on ties.
int argmax(std::span<const double> logits);

// --------------------------------------------------------------------------
// Checkpoints
// --------------------------------------------------------------------------

void save_model(const std::filesystem::path& manifest_path, const Model& model,
                std::string_view variant);

struct LoadedModel {
  Model model;
  std::string variant;
};

LoadedModel load_model(const std::filesystem::path& manifest_path);

}  // namespace navqa
