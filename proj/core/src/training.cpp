#include "navqa/training.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include "navqa/error.hpp"
#include "navqa/serialization.hpp"

namespace navqa {

std::string_view to_string(Forcing f) { return f == Forcing::Teacher ? "teacher" : "student"; }

std::optional<Forcing> parse_forcing(std::string_view s) {
  if (s == "teacher") return Forcing::Teacher;
  if (s == "student") return Forcing::Student;
  return std::nullopt;
}

std::string_view to_string(OptimizerKind o) { return o == OptimizerKind::Sgd ? "sgd" : "adam"; }

std::optional<OptimizerKind> parse_optimizer(std::string_view s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

void TrainConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigError, what); };
  check(epochs >= 0, "epochs must be non-negative");
  check(learning_rate > 0 && std::isfinite(learning_rate), "learning_rate must be positive");
  check(batch_size > 0, "batch_size must be positive");
  check(max_episode_steps > 0, "max_episode_steps must be positive");
  check(eval_every >= 0, "eval_every must be non-negative");
  check(clip_norm >= 0, "clip_norm must be non-negative");
  check(jobs > 0, "jobs must be positive");
}

Json train_config_to_json(const TrainConfig& c) {
  return Json{{"forcing", to_string(c.forcing)},   {"epochs", c.epochs},
              {"learning_rate", c.learning_rate},  {"optimizer", to_string(c.optimizer)},
              {"batch_size", c.batch_size},        {"max_episode_steps", c.max_episode_steps},
              {"eval_every", c.eval_every},        {"seed", c.seed},
              {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  bool epochs_set = false;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "forcing") {
        auto f = parse_forcing(value.get<std::string>());
        require(f.has_value(), ErrorCode::ConfigError, "unknown forcing " + value.dump());
        c.forcing = *f;
      } else if (key == "epochs") {
        c.epochs = value.get<int>();
        epochs_set = true;
      } else if (key == "learning_rate") {
        c.learning_rate = value.get<double>();
      } else if (key == "optimizer") {
        auto o = parse_optimizer(value.get<std::string>());
        require(o.has_value(), ErrorCode::ConfigError, "unknown optimizer " + value.dump());
        c.optimizer = *o;
      } else if (key == "batch_size") {
        c.batch_size = value.get<int>();
      } else if (key == "max_episode_steps") {
        c.max_episode_steps = value.get<int>();
      } else if (key == "eval_every") {
        c.eval_every = value.get<int>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "clip_norm") {
        c.clip_norm = value.get<double>();
      } else if (key == "jobs") {
        c.jobs = value.get<int>();
      } else {
        fail(ErrorCode::ConfigError, "unknown training key \"" + key + "\"");
      }
    } catch (const Json::exception& e) {
      fail(ErrorCode::ConfigError, "training key \"" + key + "\": " + e.what());
    }
  }
  if (!epochs_set && c.forcing == Forcing::Student) c.epochs = kDefaultStudentEpochs;
  c.validate();
  return c;
}

StateKey state_key(const GridWorld& world, const AgentState& s) {
  return {world.world_id(), s.position.x, s.position.y, s.heading, s.tilt};
}

double EpisodeLosses::mean() const {
  if (losses.empty()) return 0.0;
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

Action shortest_path_action(const GridWorld& world, const AgentState& state, Cell goal) {
  if (state.tilt > 0) return Action::TiltDown;
  if (state.tilt < 0) return Action::TiltUp;
  if (state.position == goal) return Action::End;
  const auto path = shortest_path(world, state.position, goal);
  const Cell next = path[1];
  int dir = 0;
  while (neighbor(state.position, dir) != next) ++dir;
  switch ((dir - state.heading + 4) % 4) {
    case 0: return Action::Forward;
    case 3: return Action::Left;
    default: return Action::Right;
  }
}

namespace {

/// Sums step losses, backprops the mean, and fills the bookkeeping.
void finish_episode(Graph& g, std::vector<Var>& terms, EpisodeLosses& out) {
  for (Var t : terms) out.losses.push_back(g.scalar(t));
  if (g.grad_enabled() && !terms.empty()) {
    Var total = g.sum_scalars(terms);
    const std::vector<double> scale{1.0 / static_cast<double>(terms.size())};
    g.backward(g.mul(total, g.constant(scale)));
  }
}

Action sample_action(std::span<const double> logits, Rng& rng) {
  const auto p = softmax(logits);
  return action_at(static_cast<int>(rng.categorical(p)));
}

std::span<const int> language_of(const ModalityBundle& b) { return b.language; }

}  // namespace

EpisodeLosses teacher_forcing_episode(const Model& model, const ModalityEncoder& encoder,
                                      const GridWorld& world, const Episode& episode,
                                      std::span<double> grads, VisitedLog* visited) {
  require(is_nav_model(model.config.kind), ErrorCode::ConfigError,
          "teacher forcing needs a navigation model");
  Graph g(model.params, grads);
  EpisodeLosses out;
  std::vector<Var> terms;
  AgentState state = episode.start;
  std::optional<Action> prev;
  const auto& gold = episode.gold_actions;

  auto bundle_at = [&](const AgentState& s) {
    auto b = encoder.encode(world, s, episode.language, prev);
    if (visited) visited->add(world, s);
    return b;
  };
  auto check_available = [&](const ModalityBundle& b, Action a, std::size_t t) {
    if (!b.availability[index_of(a)])
      fail(ErrorCode::GoldReplayFailure, "episode " + std::to_string(episode.episode_id) +
                                             ": gold action " + std::string(to_string(a)) +
                                             " unavailable at step " + std::to_string(t));
  };

  if (model.config.kind == ModelKind::Nav) {
    std::vector<Var> lang;
    Var h;
    for (std::size_t t = 0; t < gold.size(); ++t) {
      auto b = bundle_at(state);
      if (t == 0) {
        lang = lang_encode(g, model.nav.lang, language_of(b), b.mask_language);
        h = initial_hidden(lang);
      }
      check_available(b, gold[t], t);
      auto po = nav_forward(g, model.nav, b, h, lang);
      h = po.next_hidden;
      terms.push_back(g.cross_entropy(po.action_logits, index_of(gold[t])));
      out.correct += argmax(g.value(po.action_logits)) == index_of(gold[t]);
      ++out.steps;
      state = step(world, state, gold[t]);
      prev = gold[t];
    }
  } else {
    std::vector<Var> lang;
    Var ph, ch;
    std::optional<Action> current;
    for (std::size_t t = 0; t < gold.size(); ++t) {
      auto b = bundle_at(state);
      if (t == 0) {
        lang = lang_encode(g, model.nav.lang, language_of(b), b.mask_language);
        ph = initial_hidden(lang);
      }
      check_available(b, gold[t], t);
      if (current) {
        const bool repeat = gold[t] == *current;
        auto co = controller_forward(g, model.nav, model.controller, b, *current, ch);
        ch = co.next_hidden;
        terms.push_back(g.binary_cross_entropy(co.repeat_logit, repeat ? 1.0 : 0.0));
        out.correct += (g.scalar(co.repeat_logit) > 0) == repeat;
        ++out.steps;
        if (!repeat) current.reset();
      }
      if (!current) {
        auto po = nav_forward(g, model.nav, b, ph, lang);
        ph = po.next_hidden;
        terms.push_back(g.cross_entropy(po.action_logits, index_of(gold[t])));
        out.correct += argmax(g.value(po.action_logits)) == index_of(gold[t]);
        ++out.steps;
        current = gold[t];
        ch = g.zeros(static_cast<std::size_t>(model.controller.gru.hidden_dim));
      }
      state = step(world, state, gold[t]);
      prev = gold[t];
      if (gold[t] == Action::End) break;
    }
  }
  finish_episode(g, terms, out);
  return out;
}

EpisodeLosses student_forcing_episode(const Model& model, const ModalityEncoder& encoder,
                                      const GridWorld& world, const Episode& episode, Rng& rng,
                                      int max_steps, std::span<double> grads, VisitedLog* visited) {
  require(is_nav_model(model.config.kind), ErrorCode::ConfigError,
          "student forcing needs a navigation model");
  require(episode.goal.has_value(), ErrorCode::GoldReplayFailure,
          "episode " + std::to_string(episode.episode_id) + " has no goal");
  const Cell goal = *episode.goal;
  Graph g(model.params, grads);
  EpisodeLosses out;
  std::vector<Var> terms;
  AgentState state = episode.start;
  std::optional<Action> prev;
  std::vector<Var> lang;
  Var ph, ch;
  std::optional<Action> current;
  const bool hier = model.config.kind == ModelKind::Hier;

  for (int t = 0; t < max_steps; ++t) {
    auto b = encoder.encode(world, state, episode.language, prev);
    if (visited) visited->add(world, state);
    if (t == 0) {
      lang = lang_encode(g, model.nav.lang, language_of(b), b.mask_language);
      ph = initial_hidden(lang);
    }
    const Action target = shortest_path_action(world, state, goal);
    Action action = Action::End;
    if (hier && current) {
      const bool repeat = target == *current;
      auto co = controller_forward(g, model.nav, model.controller, b, *current, ch);
      ch = co.next_hidden;
      terms.push_back(g.binary_cross_entropy(co.repeat_logit, repeat ? 1.0 : 0.0));
      const double z = g.scalar(co.repeat_logit);
      const double p_repeat = 1.0 / (1.0 + std::exp(-z));
      out.correct += (z > 0) == repeat;
      ++out.steps;
      if (rng.bernoulli(p_repeat) && b.availability[index_of(*current)]) action = *current;
      else current.reset();
    }
    if (!hier || !current) {
      auto po = nav_forward(g, model.nav, b, ph, lang);
      ph = po.next_hidden;
      terms.push_back(g.cross_entropy(po.action_logits, index_of(target)));
      out.correct += argmax(g.value(po.action_logits)) == index_of(target);
      ++out.steps;
      action = sample_action(g.value(po.action_logits), rng);
      if (hier) {
        current = action;
        ch = g.zeros(static_cast<std::size_t>(model.controller.gru.hidden_dim));
      }
    }
    state = step(world, state, action);
    prev = action;
    if (action == Action::End) break;
  }
  finish_episode(g, terms, out);
  return out;
}

std::vector<double> qa_logits(const Model& model, ModalityMasks masks, const GridWorld& world,
                              const Episode& episode) {
  Graph g(model.params);
  const auto tokens = pad_language(episode.language);
  if (model.config.kind == ModelKind::QaTopDown) {
    Var l = qa_topdown_forward(g, model.topdown, render_topdown(world), tokens, masks);
    auto v = g.value(l);
    return {v.begin(), v.end()};
  }
  require(model.config.kind == ModelKind::QaAttention, ErrorCode::ConfigError,
          "qa_logits needs a QA model");
  const auto frames = qa_frames(world, episode);
  auto o = qa_attention_forward(g, model.attention, frames, tokens, masks);
  auto v = g.value(o.logits);
  return {v.begin(), v.end()};
}

EpisodeLosses qa_episode_loss(const Model& model, ModalityMasks masks, const GridWorld& world,
                              const Episode& episode, std::span<double> grads) {
  require(episode.answer.has_value(), ErrorCode::FormatError,
          "episode " + std::to_string(episode.episode_id) + " has no answer");
  Graph g(model.params, grads);
  const auto tokens = pad_language(episode.language);
  Var logits;
  if (model.config.kind == ModelKind::QaTopDown) {
    logits = qa_topdown_forward(g, model.topdown, render_topdown(world), tokens, masks);
  } else {
    require(model.config.kind == ModelKind::QaAttention, ErrorCode::ConfigError,
            "QA training needs a QA model");
    const auto frames = qa_frames(world, episode);
    logits = qa_attention_forward(g, model.attention, frames, tokens, masks).logits;
  }
  EpisodeLosses out;
  std::vector<Var> terms{g.cross_entropy(logits, *episode.answer)};
  out.correct = argmax(g.value(logits)) == *episode.answer;
  out.steps = 1;
  finish_episode(g, terms, out);
  return out;
}

// --------------------------------------------------------------------------

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double beta1, double beta2, double eps)
    : kind_(kind), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  require(learning_rate > 0, ErrorCode::ConfigError, "learning_rate must be positive");
}

void Optimizer::step(ParamStore& params) {
  auto& values = params.flat_values();
  auto& grads = params.flat_grads();
  for (const auto& t : params.tensors())
    for (std::size_t i = t.offset; i < t.offset + t.size; ++i)
      if (!std::isfinite(grads[i]))
        fail(ErrorCode::NonFiniteGradient, "tensor " + t.name + " element " +
                                               std::to_string(i - t.offset) + " gradient " +
                                               std::to_string(grads[i]) + " at update " +
                                               std::to_string(t_ + 1));
  ++t_;
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = ParamStore::to_storage(values[i] - lr_ * grads[i]);
  } else {
    if (m_.size() != values.size()) {
      m_.assign(values.size(), 0.0);
      v_.assign(values.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < values.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      values[i] = ParamStore::to_storage(values[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
  params.zero_grad();
}

void optimize_step(ParamStore& params, Optimizer& optimizer) { optimizer.step(params); }

double clip_gradients(ParamStore& params, double max_norm) {
  auto& g = params.flat_grads();
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& v : g) v *= s;
  }
  return norm;
}

WorldIndex::WorldIndex(std::span<const GridWorld> worlds) {
  for (const auto& w : worlds) by_id_[w.world_id()] = &w;
}

const GridWorld& WorldIndex::at(int world_id) const {
  auto it = by_id_.find(world_id);
  require(it != by_id_.end(), ErrorCode::FormatError,
          "episode refers to unknown world " + std::to_string(world_id));
  return *it->second;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

namespace {

/// Shared minibatch loop: per-episode gradients into private buffers, summed
/// in episode order so results do not depend on the thread count.
template <typename EpisodeFn>
TrainResult run_training(Model& model, std::span<const Episode> train, const TrainConfig& config,
                         const EpochHook& hook, EpisodeFn&& episode_fn) {
  config.validate();
  require(!train.empty(), ErrorCode::EmptyDataset, "no training episodes");
  TrainResult result;
  Optimizer opt(config.optimizer, config.learning_rate);
  const std::size_t n_params = model.params.total_count();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(config.seed, "shuffle", {static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    long correct = 0, steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const int b = static_cast<int>(std::min<std::size_t>(config.batch_size, order.size() - start));
      std::vector<std::vector<double>> grads(b);
      std::vector<EpisodeLosses> losses(b);
      std::vector<VisitedLog> visited(b);
      parallel_for(b, config.jobs, [&](int k) {
        grads[k].assign(n_params, 0.0);
        losses[k] = episode_fn(train[order[start + k]], epoch, grads[k], visited[k]);
      });
      auto& flat = model.params.flat_grads();
      std::fill(flat.begin(), flat.end(), 0.0);
      for (int k = 0; k < b; ++k) {
        for (std::size_t i = 0; i < n_params; ++i) flat[i] += grads[k][i];
        loss_sum += losses[k].mean();
        correct += losses[k].correct;
        steps += losses[k].steps;
        result.visited.merge(visited[k]);
      }
      for (auto& v : flat) v /= b;
      clip_gradients(model.params, config.clip_norm);
      opt.step(model.params);
    }
    result.log.push_back(Json{{"epoch", epoch},
                              {"split", "train"},
                              {"loss", loss_sum / static_cast<double>(train.size())},
                              {"metric", steps ? static_cast<double>(correct) / steps : 0.0}});
    const bool due = (config.eval_every > 0 && epoch % config.eval_every == 0) || epoch == config.epochs;
    if (hook && due)
      for (auto& row : hook(epoch, model)) result.log.push_back(std::move(row));
  }
  return result;
}

}  // namespace

TrainResult train_nav(Model& model, const ModalityEncoder& encoder, std::span<const GridWorld> worlds,
                      std::span<const Episode> train, const TrainConfig& config,
                      const EpochHook& hook) {
  require(is_nav_model(model.config.kind), ErrorCode::ConfigError,
          std::string(to_string(model.config.kind)) + " model cannot train on navigation data");
  WorldIndex index(worlds);
  for (const auto& e : train)
    require(!e.gold_actions.empty() && e.goal.has_value(), ErrorCode::ConfigError,
            "episode " + std::to_string(e.episode_id) + " is not a navigation episode");
  return run_training(model, train, config, hook,
                      [&](const Episode& e, int epoch, std::span<double> g, VisitedLog& v) {
                        const auto& w = index.at(e.world_id);
                        if (config.forcing == Forcing::Teacher)
                          return teacher_forcing_episode(model, encoder, w, e, g, &v);
                        Rng rng = Rng::stream(config.seed, "student",
                                              {static_cast<std::uint64_t>(epoch),
                                               static_cast<std::uint64_t>(e.episode_id)});
                        return student_forcing_episode(model, encoder, w, e, rng,
                                                       config.max_episode_steps, g, &v);
                      });
}

TrainResult train_qa(Model& model, ModalityMasks masks, std::span<const GridWorld> worlds,
                     std::span<const Episode> train, const TrainConfig& config,
                     const EpochHook& hook) {
  require(!train.empty(), ErrorCode::EmptyDataset, "no QA training episodes");
  require(!is_nav_model(model.config.kind), ErrorCode::ConfigError,
          std::string(to_string(model.config.kind)) + " model cannot train on QA data");
  WorldIndex index(worlds);
  for (const auto& e : train)
    require(e.answer.has_value(), ErrorCode::ConfigError,
            "episode " + std::to_string(e.episode_id) + " is not a QA episode");
  return run_training(model, train, config, hook,
                      [&](const Episode& e, int, std::span<double> g, VisitedLog&) {
                        return qa_episode_loss(model, masks, index.at(e.world_id), e, g);
                      });
}

}  // namespace navqa
