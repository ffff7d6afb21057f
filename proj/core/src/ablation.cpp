#include "navqa/ablation.hpp"

#include "navqa/error.hpp"

namespace navqa {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::A: return "a";
    case Variant::AV: return "av";
    case Variant::AL: return "al";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (auto v : kAllVariants)
    if (to_string(v) == s) return v;
  return std::nullopt;
}

std::string_view table_label(Variant v) {
  switch (v) {
    case Variant::Full: return "Full";
    case Variant::A: return "A";
    case Variant::AV: return "A_V";
    case Variant::AL: return "A_L";
  }
  return "?";
}

ModalityMasks AblationSpec::masks() const {
  switch (variant) {
    case Variant::Full: return {false, false};
    case Variant::A: return {true, true};
    case Variant::AV: return {false, true};
    case Variant::AL: return {true, false};
  }
  return {};
}

AblatedModel apply_ablation(const Model& model, AblationSpec spec) {
  return AblatedModel{&model, spec, ModalityEncoder(spec.masks())};
}

namespace {

class PolicyAgent final : public NavAgent {
 public:
  explicit PolicyAgent(const AblatedModel& m) : m_(m) {}

  std::string name() const override { return std::string(to_string(m_.spec.variant)); }

  void begin(const GridWorld&, const Episode& episode, Rng&) override {
    graph_ = std::make_unique<Graph>(m_.model->params);
    language_ = pad_language(episode.language);
    lang_ = lang_encode(*graph_, m_.model->nav.lang, language_, m_.encoder.masks().language);
    ph_ = initial_hidden(lang_);
    prev_.reset();
    current_.reset();
  }

  Action act(const GridWorld& world, const AgentState& state) override {
    Graph& g = *graph_;
    auto b = m_.encoder.encode(world, state, language_, prev_);
    const bool hier = m_.model->config.kind == ModelKind::Hier;
    std::optional<Action> action;
    if (hier && current_) {
      auto co = controller_forward(g, m_.model->nav, m_.model->controller, b, *current_, ch_);
      ch_ = co.next_hidden;
      if (g.scalar(co.repeat_logit) > 0 && b.availability[index_of(*current_)]) action = *current_;
      else current_.reset();
    }
    if (!action) {
      auto po = nav_forward(g, m_.model->nav, b, ph_, lang_);
      ph_ = po.next_hidden;
      action = action_at(argmax(g.value(po.action_logits)));
      if (hier) {
        current_ = action;
        ch_ = g.zeros(static_cast<std::size_t>(m_.model->controller.gru.hidden_dim));
      }
    }
    prev_ = action;
    return *action;
  }

 private:
  AblatedModel m_;
  std::unique_ptr<Graph> graph_;
  std::vector<int> language_;
  std::vector<Var> lang_;
  Var ph_, ch_;
  std::optional<Action> prev_;
  std::optional<Action> current_;
};

class RandomForwardAgent final : public NavAgent {
 public:
  std::string name() const override { return std::string(kRandomForward); }

  void begin(const GridWorld&, const Episode&, Rng& rng) override {
    turns_left_ = static_cast<int>(rng.uniform_index(4));
    forwards_ = 0;
  }

  Action act(const GridWorld& world, const AgentState& state) override {
    if (turns_left_ > 0) {
      --turns_left_;
      return Action::Right;
    }
    if (forwards_ == 5) return Action::End;
    if (available_actions(world, state)[index_of(Action::Forward)]) {
      ++forwards_;
      return Action::Forward;
    }
    return Action::Right;
  }

 private:
  int turns_left_ = 0;
  int forwards_ = 0;
};

class Random100Agent final : public NavAgent {
 public:
  std::string name() const override { return std::string(kRandom100); }
  int min_step_budget() const override { return 101; }

  void begin(const GridWorld&, const Episode&, Rng& rng) override {
    rng_ = &rng;
    taken_ = 0;
  }

  Action act(const GridWorld& world, const AgentState& state) override {
    if (taken_ == 100) return Action::End;
    ++taken_;
    const auto mask = available_actions(world, state);
    std::vector<Action> options;
    for (int i = 0; i < kNumActions; ++i)
      if (mask[i] && action_at(i) != Action::End) options.push_back(action_at(i));
    return options[rng_->uniform_index(options.size())];
  }

 private:
  Rng* rng_ = nullptr;
  int taken_ = 0;
};

std::vector<Action> run_agent(NavAgent& agent, const GridWorld& world, const AgentState& start,
                              Rng& rng, int max_steps) {
  Episode e;
  e.world_id = world.world_id();
  e.start = start;
  agent.begin(world, e, rng);
  std::vector<Action> out;
  AgentState s = start;
  while (static_cast<int>(out.size()) < max_steps) {
    const Action a = agent.act(world, s);
    out.push_back(a);
    s = step(world, s, a);
    if (a == Action::End) break;
  }
  return out;
}

}  // namespace

std::unique_ptr<NavAgent> make_policy_agent(const AblatedModel& model) {
  require(model.model && is_nav_model(model.model->config.kind), ErrorCode::ConfigError,
          "policy agents need a navigation model");
  return std::make_unique<PolicyAgent>(model);
}

std::unique_ptr<NavAgent> make_random_forward_agent() { return std::make_unique<RandomForwardAgent>(); }

std::unique_ptr<NavAgent> make_random_100_agent() { return std::make_unique<Random100Agent>(); }

std::vector<Action> random_forward_baseline(const GridWorld& world, const AgentState& start,
                                            Rng& rng, int max_steps) {
  RandomForwardAgent agent;
  return run_agent(agent, world, start, rng, max_steps);
}

std::vector<Action> random_100_baseline(const GridWorld& world, const AgentState& start, Rng& rng) {
  Random100Agent agent;
  return run_agent(agent, world, start, rng, 101);
}

MajorityBaseline MajorityBaseline::fit(std::span<const Episode> train) {
  std::map<QuestionType, std::array<int, kNumAnswers>> counts;
  std::array<int, kNumAnswers> overall{};
  for (const auto& e : train) {
    if (!e.answer || !e.question_type) continue;
    ++counts[*e.question_type][*e.answer];
    ++overall[*e.answer];
  }
  require(!counts.empty(), ErrorCode::EmptyDataset, "no answered questions to fit a majority baseline");
  auto top = [](const std::array<int, kNumAnswers>& c) {
    int best = 0;
    for (int a = 1; a < kNumAnswers; ++a)
      if (c[a] > c[best]) best = a;
    return best;
  };
  MajorityBaseline m;
  for (const auto& [q, c] : counts) m.by_type_[q] = top(c);
  m.overall_ = top(overall);
  return m;
}

int MajorityBaseline::answer(QuestionType q) const {
  auto it = by_type_.find(q);
  return it == by_type_.end() ? overall_ : it->second;
}

int MajorityBaseline::answer(const Episode& e) const {
  return e.question_type ? answer(*e.question_type) : overall_;
}

MajorityBaseline majority_baseline(std::span<const Episode> train) { return MajorityBaseline::fit(train); }

}  // namespace navqa
