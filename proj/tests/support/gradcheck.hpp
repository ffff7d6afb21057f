#pragma once

#include <vector>

#include "fixtures.hpp"
#include "navqa/encoders.hpp"
#include "navqa/episodegen.hpp"
#include "navqa/policy.hpp"
#include "navqa/training.hpp"
#include "navqa/vocabulary.hpp"

namespace navqa::fixtures {

/// Finite-difference check of one model class on `instances` random episodes,
/// n coordinates each.
inline GradCheck grad_check_model(ModelKind kind, int instances, int n, std::uint64_t seed) {
  GenSpec spec;
  spec.seed = seed;
  spec.seen_worlds = 3;
  spec.unseen_worlds = 0;
  spec.episodes_per_world = 4;
  spec.val_seen_fraction = 0.0;
  spec.min_goal_distance = 3;
  if (kind == ModelKind::QaTopDown) {
    spec.task = GenTask::QaTopDown;
    spec.seen_worlds = 12;
    spec.room_count = {1, 2};
    spec.room_size = {3, 4};
  } else if (kind == ModelKind::QaAttention) {
    spec.task = GenTask::QaEgocentric;
    spec.question_types = {QuestionType::Color, QuestionType::Counting};
  }
  const auto data = generate_dataset(spec);
  WorldIndex index(data.worlds);

  ModelConfig mc;
  mc.kind = kind;
  mc.vocab_size = Vocabulary::builtin().size();
  Rng rng = Rng::stream(seed, "gradcheck");
  GradCheck total;
  for (int k = 0; k < instances; ++k) {
    Model m = make_model(mc, seed * 100 + k);
    const auto& e = data.splits.train[rng.uniform_index(data.splits.train.size())];
    const auto& w = index.at(e.world_id);
    ModalityEncoder enc;
    auto loss = [&](std::span<double> grads) {
      if (is_nav_model(kind)) return teacher_forcing_episode(m, enc, w, e, grads).mean();
      return qa_episode_loss(m, {}, w, e, grads).mean();
    };
    std::vector<double> g(m.params.total_count(), 0.0);
    loss(g);
    auto r = finite_difference_check(m.params.flat_values(), g, [&] { return loss({}); }, n, rng);
    total.checked += r.checked;
    total.worst = std::max(total.worst, r.worst);
  }
  return total;
}

}  // namespace navqa::fixtures
