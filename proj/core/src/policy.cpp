#include "navqa/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "navqa/error.hpp"
#include "navqa/serialization.hpp"

namespace navqa {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Nav: return "nav";
    case ModelKind::Hier: return "hier";
    case ModelKind::QaTopDown: return "qa_topdown";
    case ModelKind::QaAttention: return "qa_attention";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::Nav, ModelKind::Hier, ModelKind::QaTopDown, ModelKind::QaAttention})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  check(vocab_size > 0, "model vocab_size must be positive");
  check(embed_dim > 0 && hidden_dim > 0 && vision_proj_dim > 0 && conv_channels > 0,
        "model dimensions must be positive");
  check(init_scale > 0, "model init_scale must be positive");
}

Json model_config_to_json(const ModelConfig& c) {
  return Json{{"kind", to_string(c.kind)},
              {"vocab_size", c.vocab_size},
              {"embed_dim", c.embed_dim},
              {"hidden_dim", c.hidden_dim},
              {"vision_proj_dim", c.vision_proj_dim},
              {"conv_channels", c.conv_channels},
              {"init_scale", c.init_scale}};
}

ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.vocab_size = Vocabulary::builtin().size();
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "kind") {
        auto k = parse_model_kind(value.get<std::string>());
        require(k.has_value(), ErrorCode::ConfigError, "unknown model kind " + value.dump());
        c.kind = *k;
      } else if (key == "vocab_size") {
        c.vocab_size = value.get<int>();
      } else if (key == "embed_dim") {
        c.embed_dim = value.get<int>();
      } else if (key == "hidden_dim") {
        c.hidden_dim = value.get<int>();
      } else if (key == "vision_proj_dim") {
        c.vision_proj_dim = value.get<int>();
      } else if (key == "conv_channels") {
        c.conv_channels = value.get<int>();
      } else if (key == "init_scale") {
        c.init_scale = value.get<double>();
      } else {
        fail(ErrorCode::ConfigError, "unknown model key \"" + key + "\"");
      }
    } catch (const Json::exception& e) {
      fail(ErrorCode::ConfigError, "model key \"" + key + "\": " + e.what());
    }
  }
  c.validate();
  return c;
}

namespace {

LangEncoderParams make_lang(ParamStore& s, const std::string& prefix, const ModelConfig& c) {
  LangEncoderParams p;
  p.embed = s.add(prefix + ".embed", {c.vocab_size, c.embed_dim});
  p.gru = GruParams::create(s, prefix + ".gru", c.embed_dim, c.hidden_dim);
  return p;
}

NavParams make_nav(ParamStore& s, const std::string& prefix, const ModelConfig& c) {
  NavParams p;
  p.lang = make_lang(s, prefix + ".lang", c);
  p.wv = s.add(prefix + ".vision.w", {c.vision_proj_dim, kVisionDim});
  p.bv = s.add(prefix + ".vision.b", {c.vision_proj_dim});
  const int in = c.vision_proj_dim + kPrevActionDim + kNumActions + c.hidden_dim;
  p.decoder = GruParams::create(s, prefix + ".decoder", in, c.hidden_dim);
  p.head = DenseParams::create(s, prefix + ".head", c.hidden_dim, kNumActions);
  return p;
}

std::vector<double> availability_vector(const AvailabilityMask& a) {
  std::vector<double> v(kNumActions);
  for (int i = 0; i < kNumActions; ++i) v[i] = a[i] ? 1.0 : 0.0;
  return v;
}

Var project_vision(Graph& g, const NavParams& p, const ModalityBundle& b) {
  Var v = b.mask_vision ? g.zeros(kVisionDim) : g.constant(std::span<const double>(b.vision));
  return g.tanh(g.affine(g.param(p.wv), v, g.param(p.bv)));
}

}  // namespace

Model make_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  auto& s = m.params;
  switch (config.kind) {
    case ModelKind::Nav:
      m.nav = make_nav(s, "nav", config);
      break;
    case ModelKind::Hier:
      m.nav = make_nav(s, "planner", config);
      m.controller.gru = GruParams::create(s, "controller.gru",
                                           config.vision_proj_dim + 2 * kNumActions, config.hidden_dim);
      m.controller.head = DenseParams::create(s, "controller.head", config.hidden_dim, 1);
      break;
    case ModelKind::QaTopDown:
      m.topdown.lang = make_lang(s, "question", config);
      m.topdown.k1 = s.add("conv1.kernel",
                           {config.conv_channels, 3, 3, kCellChannels + config.hidden_dim});
      m.topdown.b1 = s.add("conv1.bias", {config.conv_channels});
      m.topdown.k2 = s.add("conv2.kernel", {config.conv_channels, 3, 3, config.conv_channels});
      m.topdown.b2 = s.add("conv2.bias", {config.conv_channels});
      m.topdown.head = DenseParams::create(s, "answer", config.conv_channels, kNumAnswers);
      break;
    case ModelKind::QaAttention:
      m.attention.lang = make_lang(s, "question", config);
      m.attention.wf = s.add("frame.w", {config.hidden_dim, kVisionDim});
      m.attention.bf = s.add("frame.b", {config.hidden_dim});
      m.attention.head = DenseParams::create(s, "answer", 2 * config.hidden_dim, kNumAnswers);
      break;
  }
  Rng rng = Rng::stream(seed, "init", {static_cast<std::uint64_t>(config.kind)});
  s.init_uniform(rng, -config.init_scale, config.init_scale);
  return m;
}

std::vector<Var> lang_encode(Graph& g, const LangEncoderParams& p, std::span<const int> tokens,
                             bool masked) {
  const int hidden = p.gru.hidden_dim;
  const int embed = p.gru.input_dim;
  Var table = g.param(p.embed);
  Var h = g.zeros(static_cast<std::size_t>(hidden));
  std::vector<Var> states;
  if (tokens.empty()) {
    states.push_back(gru_step(g, p.gru, g.zeros(static_cast<std::size_t>(embed)), h));
    return states;
  }
  states.reserve(tokens.size());
  for (int t : tokens) {
    Var x = g.embedding(table, t, masked || t == kPadId);
    h = gru_step(g, p.gru, x, h);
    states.push_back(h);
  }
  return states;
}

Var initial_hidden(std::span<const Var> lang_states) {
  require(!lang_states.empty(), ErrorCode::DimensionMismatch, "no language states");
  return lang_states.back();
}

PolicyOutput nav_forward(Graph& g, const NavParams& p, const ModalityBundle& bundle, Var hidden,
                         std::span<const Var> lang_states) {
  require(g.size(hidden) == static_cast<std::size_t>(p.decoder.hidden_dim),
          ErrorCode::DimensionMismatch, "nav_forward: hidden width");
  Var vproj = project_vision(g, p, bundle);
  Var prev = g.constant(std::span<const double>(bundle.prev_action));
  Var avail = g.constant(availability_vector(bundle.availability));
  Var weights = g.attention_weights(hidden, lang_states);
  Var ctx = g.weighted_sum(weights, lang_states);
  Var x = g.concat({vproj, prev, avail, ctx});
  Var h = gru_step(g, p.decoder, x, hidden);
  Var logits = g.mask_logits(dense(g, p.head, h), bundle.availability);
  return {logits, h};
}

ControllerOutput controller_forward(Graph& g, const NavParams& planner, const ControllerParams& p,
                                    const ModalityBundle& bundle, Action current, Var hidden) {
  Var vproj = project_vision(g, planner, bundle);
  std::vector<double> onehot(kNumActions, 0.0);
  onehot[index_of(current)] = 1.0;
  Var x = g.concat({vproj, g.constant(std::move(onehot)),
                    g.constant(availability_vector(bundle.availability))});
  Var h = gru_step(g, p.gru, x, hidden);
  return {dense(g, p.head, h), h};
}

HierOutput hier_forward(Graph& g, const Model& m, const ModalityBundle& bundle, Var planner_hidden,
                        Var controller_hidden, std::span<const Var> lang_states,
                        std::optional<Action> current) {
  require(m.config.kind == ModelKind::Hier, ErrorCode::DimensionMismatch,
          "hier_forward on a non-hierarchical model");
  HierOutput out;
  if (!current) {
    out.planner = nav_forward(g, m.nav, bundle, planner_hidden, lang_states);
  } else {
    out.controller = controller_forward(g, m.nav, m.controller, bundle, *current, controller_hidden);
  }
  return out;
}

std::vector<bool> controller_targets(std::span<const Action> gold) {
  std::vector<bool> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == Action::End) break;
    out.push_back(i + 1 < gold.size() && gold[i + 1] == gold[i]);
  }
  return out;
}

Var qa_topdown_forward(Graph& g, const QaTopDownParams& p, const TopDownMap& map,
                       std::span<const int> tokens, ModalityMasks masks) {
  const int cells = map.width * map.height;
  require(map.width > 0 && map.height > 0 &&
              map.data.size() == static_cast<std::size_t>(cells) * kCellChannels,
          ErrorCode::DimensionMismatch, "qa_topdown_forward: map size");
  auto states = lang_encode(g, p.lang, tokens, masks.language);
  Var q = states.back();
  Var grid = masks.vision ? g.zeros(map.data.size()) : g.constant(std::span<const double>(map.data));
  const int qd = static_cast<int>(g.size(q));
  const int conv = static_cast<int>(g.size(g.param(p.b1)));
  Var x = g.tile_concat(grid, cells, kCellChannels, q);
  Var h1 = g.tanh(g.conv3x3(x, map.height, map.width, kCellChannels + qd, g.param(p.k1),
                            g.param(p.b1), conv));
  Var h2 = g.tanh(g.conv3x3(h1, map.height, map.width, conv, g.param(p.k2), g.param(p.b2), conv));
  return dense(g, p.head, g.spatial_sum(h2, cells, conv));
}

AttentionOutput qa_attention_forward(Graph& g, const QaAttentionParams& p,
                                     std::span<const VisionFeature> frames,
                                     std::span<const int> tokens, ModalityMasks masks) {
  require(frames.size() == kQaFrames, ErrorCode::DimensionMismatch,
          "qa_attention_forward: expected 5 frames");
  auto states = lang_encode(g, p.lang, tokens, masks.language);
  Var q = states.back();
  std::vector<Var> proj;
  proj.reserve(frames.size());
  for (const auto& f : frames) {
    Var v = masks.vision ? g.zeros(kVisionDim) : g.constant(std::span<const double>(f));
    proj.push_back(g.tanh(g.affine(g.param(p.wf), v, g.param(p.bf))));
  }
  Var w = g.attention_weights(q, proj);
  Var summary = g.weighted_sum(w, proj);
  Var logits = dense(g, p.head, g.concat({summary, q}));
  return {logits, w, summary};
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double l : logits)
    if (std::isfinite(l)) m = std::max(m, l);
  std::vector<double> p(logits.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (std::isfinite(logits[i])) total += (p[i] = std::exp(logits[i] - m));
  for (auto& v : p) v /= total;
  return p;
}

int argmax(std::span<const double> logits) {
  int best = -1;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) continue;
    if (best < 0 || logits[i] > logits[best]) best = static_cast<int>(i);
  }
  return best;
}

void save_model(const std::filesystem::path& manifest_path, const Model& model,
                std::string_view variant) {
  CheckpointManifest m;
  m.model = std::string(to_string(model.config.kind));
  m.variant = std::string(variant);
  m.config = model_config_to_json(model.config);
  save_checkpoint(manifest_path, model.params, std::move(m));
}

LoadedModel load_model(const std::filesystem::path& manifest_path) {
  auto ckpt = read_checkpoint(manifest_path);
  ModelConfig config = model_config_from_json(ckpt.manifest.config);
  require(std::string(to_string(config.kind)) == ckpt.manifest.model, ErrorCode::FormatError,
          "checkpoint model name does not match its config");
  LoadedModel out{make_model(config, 0), ckpt.manifest.variant};
  load_into(ckpt, out.model.params);
  return out;
}

}  // namespace navqa
