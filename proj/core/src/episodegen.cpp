#include "navqa/episodegen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

#include "navqa/error.hpp"

namespace navqa {

namespace {

constexpr int kMaxWorldAttempts = 64;
constexpr int kMaxEpisodeAttempts = 2000;
constexpr int kMaxQuestionAttempts = 20000;
constexpr double kExtraDoorProbability = 0.25;
constexpr int kMaxCountWord = 40;

constexpr std::array<std::string_view, kNumQuestionTypes> kQuestionTypeNames = {
    "existence", "counting", "spatial", "color"};

// Natural-mode scene statistics. Count peaks are spread over 1, 2 and 3 so
// that the question subject alone predicts a counting answer.
constexpr std::array<TypeProfile, kNumObjectTypes> kNaturalProfiles = {{
    {0.90, {0.55, 0.30, 0.15}, true},    // fridge
    {0.80, {0.55, 0.30, 0.15}, true},    // microwave
    {0.80, {0.225, 0.55, 0.225}, true},  // garbage_can
    {0.60, {0.55, 0.30, 0.15}, true},    // bathtub
    {0.70, {0.225, 0.55, 0.225}, false}, // sofa
    {0.80, {0.15, 0.30, 0.55}, false},   // table
    {0.80, {0.15, 0.30, 0.55}, false},   // lamp
    {0.90, {0.225, 0.55, 0.225}, true},  // counter
}};

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

struct Layout {
  int rows = 1;
  int cols = 1;
  std::vector<int> col_x;  // first interior x of each room column
  std::vector<int> col_w;
  std::vector<int> row_y;
  std::vector<int> row_h;
};

Layout plan_layout(const GenSpec& spec, Rng& rng) {
  const int n = rng.uniform_int(spec.room_count.min, spec.room_count.max);
  std::vector<std::pair<int, int>> shapes;
  for (int r = 1; r <= n; ++r)
    if (n % r == 0) shapes.emplace_back(r, n / r);
  auto [rows, cols] = shapes[rng.uniform_index(shapes.size())];
  Layout l;
  l.rows = rows;
  l.cols = cols;
  int x = 1;
  for (int j = 0; j < cols; ++j) {
    int w = rng.uniform_int(spec.room_size.min, spec.room_size.max);
    l.col_x.push_back(x);
    l.col_w.push_back(w);
    x += w + 1;
  }
  int y = 1;
  for (int i = 0; i < rows; ++i) {
    int h = rng.uniform_int(spec.room_size.min, spec.room_size.max);
    l.row_y.push_back(y);
    l.row_h.push_back(h);
    y += h + 1;
  }
  return l;
}

bool touches_wall(const GridWorld& w, Cell c) {
  for (int h = 0; h < 4; ++h)
    if (!w.is_floor(neighbor(c, h))) return true;
  return false;
}

Color sample_color(const GenSpec& spec, ObjectType type, Rng& rng) {
  if (spec.balance_mode == BalanceMode::Randomized)
    return static_cast<Color>(rng.uniform_index(kNumColors));
  const Color canonical = spec.canonical_colors[static_cast<int>(type)];
  if (rng.bernoulli(spec.bias)) return canonical;
  int other = static_cast<int>(rng.uniform_index(kNumColors - 1));
  if (other >= static_cast<int>(canonical)) ++other;
  return static_cast<Color>(other);
}

bool is_goal_type(const GenSpec& spec, ObjectType t) {
  return std::find(spec.goal_types.begin(), spec.goal_types.end(), t) != spec.goal_types.end();
}

/// (goal object, start cell) pairs at least min_goal_distance apart, in
/// object then row-major order. With `first_only` stops at the first hit.
std::vector<std::pair<int, Cell>> far_goal_pairs(const GridWorld& world, const GenSpec& spec,
                                                 bool first_only) {
  std::vector<std::pair<int, Cell>> out;
  const auto floors = world.floor_cells();
  for (std::size_t i = 0; i < world.objects().size(); ++i) {
    const auto& o = world.objects()[i];
    if (!is_goal_type(spec, o.type)) continue;
    const auto field = distance_field(world, o.position);
    for (Cell c : floors)
      if (field[world.index(c)] >= spec.min_goal_distance) {
        out.emplace_back(static_cast<int>(i), c);
        if (first_only) return out;
      }
  }
  return out;
}

std::optional<GridWorld> try_build_world(const GenSpec& spec, int index, Split split,
                                         bool ensure_goal_object, Rng& rng) {
  Layout l = plan_layout(spec, rng);
  const int width = l.col_x.back() + l.col_w.back() + 1;
  const int height = l.row_y.back() + l.row_h.back() + 1;
  GridWorld world(width, height, index, split);
  for (int i = 0; i < l.rows; ++i)
    for (int j = 0; j < l.cols; ++j)
      for (int y = l.row_y[i]; y < l.row_y[i] + l.row_h[i]; ++y)
        for (int x = l.col_x[j]; x < l.col_x[j] + l.col_w[j]; ++x)
          world.set_cell({x, y}, CellKind::Floor, i * l.cols + j);

  // Doors: a random spanning tree over adjacent rooms plus occasional extras.
  struct Edge {
    int a, b;
    bool horizontal;  // rooms side by side
  };
  std::vector<Edge> edges;
  for (int i = 0; i < l.rows; ++i)
    for (int j = 0; j < l.cols; ++j) {
      if (j + 1 < l.cols) edges.push_back({i * l.cols + j, i * l.cols + j + 1, true});
      if (i + 1 < l.rows) edges.push_back({i * l.cols + j, (i + 1) * l.cols + j, false});
    }
  rng.shuffle(std::span(edges));
  UnionFind uf(l.rows * l.cols);
  std::vector<Cell> doors;
  for (const Edge& e : edges) {
    const bool tree_edge = uf.unite(e.a, e.b);
    if (!tree_edge && !rng.bernoulli(kExtraDoorProbability)) continue;
    const int ai = e.a / l.cols, aj = e.a % l.cols;
    Cell door;
    if (e.horizontal) {
      door.x = l.col_x[aj] + l.col_w[aj];
      door.y = rng.uniform_int(l.row_y[ai], l.row_y[ai] + l.row_h[ai] - 1);
    } else {
      door.y = l.row_y[ai] + l.row_h[ai];
      door.x = rng.uniform_int(l.col_x[aj], l.col_x[aj] + l.col_w[aj] - 1);
    }
    world.set_cell(door, CellKind::Floor, e.a);
    doors.push_back(door);
  }

  std::vector<bool> blocked(static_cast<std::size_t>(width) * height, false);
  for (Cell d : doors) blocked[world.index(d)] = true;
  auto free_cells = [&](bool wall_only) {
    std::vector<Cell> out;
    for (Cell c : world.floor_cells()) {
      if (blocked[world.index(c)]) continue;
      if (wall_only && !touches_wall(world, c)) continue;
      out.push_back(c);
    }
    return out;
  };
  auto place = [&](ObjectType type, bool wall_only) -> bool {
    auto cells = free_cells(wall_only);
    if (cells.empty() && wall_only) cells = free_cells(false);
    if (cells.empty()) return false;
    Cell c = cells[rng.uniform_index(cells.size())];
    world.add_object({type, sample_color(spec, type, rng), c, std::nullopt});
    blocked[world.index(c)] = true;
    return true;
  };

  if (spec.balance_mode == BalanceMode::Randomized) {
    const int k = rng.uniform_int(spec.object_count.min, spec.object_count.max);
    for (int n = 0; n < k; ++n)
      if (!place(static_cast<ObjectType>(rng.uniform_index(kNumObjectTypes)), false))
        return std::nullopt;
  } else {
    for (int t = 0; t < kNumObjectTypes; ++t) {
      const auto& p = kNaturalProfiles[t];
      if (!rng.bernoulli(p.presence)) continue;
      const int count = 1 + static_cast<int>(rng.categorical(p.count_given_present));
      for (int n = 0; n < count; ++n)
        if (!place(static_cast<ObjectType>(t), p.against_wall)) return std::nullopt;
    }
  }
  if (ensure_goal_object && !spec.goal_types.empty()) {
    bool has_goal = std::any_of(world.objects().begin(), world.objects().end(), [&](const auto& o) {
      return std::find(spec.goal_types.begin(), spec.goal_types.end(), o.type) != spec.goal_types.end();
    });
    if (!has_goal) {
      ObjectType t = spec.goal_types[rng.uniform_index(spec.goal_types.size())];
      bool wall_only = spec.balance_mode == BalanceMode::Natural &&
                       kNaturalProfiles[static_cast<int>(t)].against_wall;
      if (!place(t, wall_only)) return std::nullopt;
    }
  }

  // Containment: move an object next to a same-room host and link it.
  auto& objs = world.mutable_objects();
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (!rng.bernoulli(spec.container_probability)) continue;
    bool is_host = std::any_of(objs.begin(), objs.end(),
                               [&](const auto& o) { return o.container == static_cast<int>(i); });
    if (is_host || objs[i].container) continue;
    std::vector<int> hosts;
    for (std::size_t j = 0; j < objs.size(); ++j) {
      if (j == i || objs[j].container) continue;
      if (world.room(objs[j].position) != world.room(objs[i].position)) continue;
      hosts.push_back(static_cast<int>(j));
    }
    if (hosts.empty()) continue;
    const int host = hosts[rng.uniform_index(hosts.size())];
    std::vector<Cell> spots;
    for (int h = 0; h < 4; ++h) {
      Cell c = neighbor(objs[host].position, h);
      if (!world.is_floor(c) || blocked[world.index(c)]) continue;
      if (world.room(c) != world.room(objs[host].position)) continue;
      spots.push_back(c);
    }
    if (spots.empty()) continue;
    Cell to = spots[rng.uniform_index(spots.size())];
    blocked[world.index(objs[i].position)] = false;
    blocked[world.index(to)] = true;
    objs[i].position = to;
    objs[i].container = host;
  }

  if (ensure_goal_object && !spec.goal_types.empty() && far_goal_pairs(world, spec, true).empty())
    return std::nullopt;
  world.validate();
  return world;
}

int heading_between(Cell a, Cell b) {
  for (int h = 0; h < 4; ++h)
    if (neighbor(a, h) == b) return h;
  fail(ErrorCode::Unreachable, "path cells are not adjacent");
}

Episode make_qa_episode(const GridWorld& world, const QuestionParams& q, int answer, int id) {
  Episode e;
  e.episode_id = id;
  e.world_id = world.world_id();
  e.task = TaskKind::QA;
  e.answer = answer;
  e.language = question_tokens(q);
  e.question_type = q.type;
  e.template_name = std::string(to_string(q.type));
  e.target_type = q.subject;
  e.split = world.split();
  return e;
}

}  // namespace

// --------------------------------------------------------------------------

std::string_view to_string(QuestionType q) { return kQuestionTypeNames[static_cast<int>(q)]; }

std::optional<QuestionType> parse_question_type(std::string_view s) {
  for (int i = 0; i < kNumQuestionTypes; ++i)
    if (kQuestionTypeNames[i] == s) return static_cast<QuestionType>(i);
  return std::nullopt;
}

std::vector<int> answer_candidates(QuestionType q) {
  switch (q) {
    case QuestionType::Existence:
    case QuestionType::Spatial: return {kAnswerYes, kAnswerNo};
    case QuestionType::Counting:
      return {answer_for_count(0), answer_for_count(1), answer_for_count(2), answer_for_count(3)};
    case QuestionType::Color: {
      std::vector<int> out;
      for (int c = 0; c < kNumColors; ++c) out.push_back(answer_for_color(static_cast<Color>(c)));
      return out;
    }
  }
  return {};
}

double chance_rate(QuestionType q) { return 1.0 / static_cast<double>(answer_candidates(q).size()); }

std::string_view to_string(GenTask t) {
  switch (t) {
    case GenTask::Nav: return "nav";
    case GenTask::EqaNav: return "eqa_nav";
    case GenTask::QaTopDown: return "qa_topdown";
    case GenTask::QaEgocentric: return "qa_egocentric";
  }
  return "nav";
}

std::optional<GenTask> parse_gen_task(std::string_view s) {
  for (GenTask t : {GenTask::Nav, GenTask::EqaNav, GenTask::QaTopDown, GenTask::QaEgocentric})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

std::array<Color, kNumObjectTypes> GenSpec::default_canonical_colors() {
  return {Color::White, Color::Grey,  Color::Green, Color::Grey,
          Color::Brown, Color::Brown, Color::Red,   Color::White};
}

void GenSpec::validate() const {
  auto check = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::ConfigError, what);
  };
  check(bias >= 0.0 && bias <= 1.0, "bias must lie in [0, 1]");
  check(entropy_threshold > 0.0 && entropy_threshold <= 1.0, "entropy_threshold must lie in (0, 1]");
  check(seen_worlds >= 0 && unseen_worlds >= 0 && seen_worlds + unseen_worlds > 0,
        "world counts must be non-negative and not both zero");
  check(room_count.min >= 1 && room_count.min <= room_count.max, "invalid room_count range");
  check(room_size.min >= 2 && room_size.min <= room_size.max, "invalid room_size range");
  check(object_count.min >= 0 && object_count.min <= object_count.max, "invalid object_count range");
  check(episodes_per_world >= 0, "episodes_per_world must be non-negative");
  check(val_seen_fraction >= 0.0 && val_seen_fraction < 1.0, "val_seen_fraction must lie in [0, 1)");
  check(start_heading_bias >= 0.0 && start_heading_bias <= 1.0, "start_heading_bias must lie in [0, 1]");
  check(container_probability >= 0.0 && container_probability <= 1.0,
        "container_probability must lie in [0, 1]");
  check(min_goal_distance >= 0, "min_goal_distance must be non-negative");
  if (task == GenTask::Nav) check(!goal_types.empty(), "nav task needs goal_types");
  if (task == GenTask::EqaNav) {
    check(!t_offsets.empty(), "eqa_nav task needs t_offsets");
    for (int t : t_offsets) check(t > 0, "t_offsets must be positive");
  }
  if (task == GenTask::QaTopDown || task == GenTask::QaEgocentric)
    check(!question_types.empty(), "qa task needs question_types");
  if (task == GenTask::QaEgocentric)
    for (auto q : question_types)
      check(q == QuestionType::Color || q == QuestionType::Counting,
            "qa_egocentric supports only color and counting questions");
}

const std::array<TypeProfile, kNumObjectTypes>& natural_profiles() { return kNaturalProfiles; }

// --------------------------------------------------------------------------

GridWorld gen_world(const GenSpec& spec, int index, Split split, bool ensure_goal_object) {
  for (int attempt = 0; attempt < kMaxWorldAttempts; ++attempt) {
    Rng rng = Rng::stream(spec.seed, "world",
                          {static_cast<std::uint64_t>(index), static_cast<std::uint64_t>(attempt)});
    if (auto w = try_build_world(spec, index, split, ensure_goal_object, rng)) return *std::move(w);
  }
  fail(ErrorCode::GenerationFailure,
       "world " + std::to_string(index) + ": no valid layout after bounded retries");
}

std::vector<Action> compile_gold_actions(int start_heading, std::span<const Cell> path) {
  std::vector<Action> out;
  int heading = start_heading;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int want = heading_between(path[i - 1], path[i]);
    switch ((want - heading + 4) % 4) {
      case 1: out.push_back(Action::Right); break;
      case 2:
        out.push_back(Action::Right);
        out.push_back(Action::Right);
        break;
      case 3: out.push_back(Action::Left); break;
      default: break;
    }
    heading = want;
    out.push_back(Action::Forward);
  }
  out.push_back(Action::End);
  return out;
}

std::vector<AgentState> replay(const GridWorld& world, const AgentState& start,
                               std::span<const Action> actions) {
  std::vector<AgentState> states{start};
  states.reserve(actions.size() + 1);
  for (Action a : actions) states.push_back(step(world, states.back(), a));
  return states;
}

Episode gen_nav_episode(const GridWorld& world, const GenSpec& spec, Rng& rng, int episode_id) {
  std::vector<int> eligible;
  for (std::size_t i = 0; i < world.objects().size(); ++i) {
    auto t = world.objects()[i].type;
    if (std::find(spec.goal_types.begin(), spec.goal_types.end(), t) != spec.goal_types.end())
      eligible.push_back(static_cast<int>(i));
  }
  if (eligible.empty())
    fail(ErrorCode::GenerationFailure,
         "world " + std::to_string(world.world_id()) + " has no goal-eligible object");
  const auto floors = world.floor_cells();
  std::vector<std::pair<int, Cell>> fallback;
  for (int attempt = 0; attempt <= kMaxEpisodeAttempts; ++attempt) {
    int goal_index = eligible[rng.uniform_index(eligible.size())];
    Cell start = floors[rng.uniform_index(floors.size())];
    if (attempt == kMaxEpisodeAttempts) {
      // Rare: sample directly from the valid pairs.
      fallback = far_goal_pairs(world, spec, false);
      if (fallback.empty()) break;
      std::tie(goal_index, start) = fallback[rng.uniform_index(fallback.size())];
    }
    const auto& goal = world.objects()[goal_index];
    auto path = shortest_path(world, start, goal.position);
    if (static_cast<int>(path.size()) - 1 < spec.min_goal_distance) continue;
    int heading = static_cast<int>(rng.uniform_index(4));
    if (path.size() > 1 && rng.bernoulli(spec.start_heading_bias))
      heading = heading_between(path[0], path[1]);
    Episode e;
    e.episode_id = episode_id;
    e.world_id = world.world_id();
    e.task = TaskKind::Nav;
    e.start = AgentState{start, heading, 0, 0, false};
    e.goal = goal.position;
    e.gold_actions = compile_gold_actions(heading, path);
    e.language = gen_instruction(world, e.gold_actions, e.start);
    e.template_name = "instruction";
    e.target_type = goal.type;
    e.split = world.split();
    return e;
  }
  fail(ErrorCode::GenerationFailure, "world " + std::to_string(world.world_id()) +
                                         ": no start at goal distance >= " +
                                         std::to_string(spec.min_goal_distance));
}

Episode gen_eqa_episode(const GridWorld& world, const GenSpec& spec, Rng& rng, int t_offset,
                        int episode_id) {
  (void)spec;
  std::vector<int> targets;
  for (std::size_t i = 0; i < world.objects().size(); ++i)
    if (world.count_of(world.objects()[i].type) == 1) targets.push_back(static_cast<int>(i));
  if (targets.empty())
    fail(ErrorCode::GenerationFailure,
         "world " + std::to_string(world.world_id()) + " has no uniquely named object");
  const auto floors = world.floor_cells();
  for (int attempt = 0; attempt < kMaxEpisodeAttempts; ++attempt) {
    const auto& target = world.objects()[targets[rng.uniform_index(targets.size())]];
    const Cell from = floors[rng.uniform_index(floors.size())];
    const int heading = static_cast<int>(rng.uniform_index(4));
    auto path = shortest_path(world, from, target.position);
    auto gold = compile_gold_actions(heading, path);
    const int moves = static_cast<int>(gold.size()) - 1;
    if (moves < t_offset) continue;
    const auto prefix = std::span(gold).first(moves - t_offset);
    AgentState start = replay(world, AgentState{from, heading, 0, 0, false}, prefix).back();
    start.steps_taken = 0;
    QuestionParams q{QuestionType::Color, target.type, target.type};
    Episode e;
    e.episode_id = episode_id;
    e.world_id = world.world_id();
    e.task = TaskKind::Nav;
    e.start = start;
    e.goal = target.position;
    e.answer = answer_for_color(target.color);
    e.gold_actions.assign(gold.begin() + (moves - t_offset), gold.end());
    e.language = question_tokens(q);
    e.question_type = QuestionType::Color;
    e.template_name = "color";
    e.target_type = target.type;
    e.split = world.split();
    e.t_offset = t_offset;
    return e;
  }
  fail(ErrorCode::GenerationFailure, "world " + std::to_string(world.world_id()) +
                                         ": no gold path of length >= " + std::to_string(t_offset));
}

std::vector<int> gen_instruction(const GridWorld& world, std::span<const Action> gold_actions,
                                 const AgentState& start) {
  const auto& vocab = Vocabulary::builtin();
  const auto states = replay(world, start, gold_actions);
  const int goal_object = world.object_at(states.back().position);

  struct Segment {
    int rights = 0;
    int lefts = 0;
    std::vector<Cell> cells;
  };
  std::vector<Segment> segments;
  Segment cur;
  bool in_run = false;
  for (std::size_t i = 0; i < gold_actions.size(); ++i) {
    Action a = gold_actions[i];
    if (a == Action::Forward) {
      cur.cells.push_back(states[i + 1].position);
      in_run = true;
      continue;
    }
    if (in_run) {
      segments.push_back(cur);
      cur = Segment{};
      in_run = false;
    }
    if (a == Action::Right) ++cur.rights;
    if (a == Action::Left) ++cur.lefts;
  }
  if (in_run || cur.rights || cur.lefts) segments.push_back(cur);

  auto landmark_for = [&](const Segment& s) -> int {
    int best = -1, best_d = 2, best_pos = 0;
    for (std::size_t o = 0; o < world.objects().size(); ++o) {
      if (static_cast<int>(o) == goal_object) continue;
      const Cell p = world.objects()[o].position;
      for (std::size_t k = 0; k < s.cells.size(); ++k) {
        const int d = std::abs(p.x - s.cells[k].x) + std::abs(p.y - s.cells[k].y);
        if (d > 1) continue;
        if (d < best_d || (d == best_d && static_cast<int>(k) < best_pos)) {
          best = static_cast<int>(o);
          best_d = d;
          best_pos = static_cast<int>(k);
        }
      }
    }
    return best;
  };

  auto build = [&](bool with_landmarks) {
    std::vector<std::string> words;
    for (const auto& s : segments) {
      if (s.rights >= 2) words.insert(words.end(), {"turn", "around"});
      else if (s.rights == 1) words.insert(words.end(), {"turn", "right"});
      else if (s.lefts >= 1) words.insert(words.end(), {"turn", "left"});
      if (s.cells.empty()) continue;
      const int lm = with_landmarks ? landmark_for(s) : -1;
      if (lm >= 0) {
        const auto& o = world.objects()[lm];
        words.insert(words.end(), {"walk", "past", "the", std::string(to_string(o.color)),
                                   std::string(to_string(o.type))});
      } else {
        const int n = std::min<int>(static_cast<int>(s.cells.size()), kMaxCountWord);
        words.insert(words.end(), {"go", "forward", std::to_string(n)});
      }
    }
    if (goal_object >= 0) {
      if (!words.empty()) words.emplace_back("and");
      words.insert(words.end(), {"go", "to", "the",
                                 std::string(to_string(world.objects()[goal_object].type))});
    }
    return words;
  };

  auto words = build(true);
  if (static_cast<int>(words.size()) > kMaxLanguageTokens) words = build(false);
  if (static_cast<int>(words.size()) > kMaxLanguageTokens) words.resize(kMaxLanguageTokens);
  return vocab.encode(words);
}

// --------------------------------------------------------------------------

std::optional<int> question_answer(const GridWorld& world, const QuestionParams& q) {
  switch (q.type) {
    case QuestionType::Existence: return world.count_of(q.subject) > 0 ? kAnswerYes : kAnswerNo;
    case QuestionType::Counting: {
      const int c = world.count_of(q.subject);
      if (c > 3) return std::nullopt;
      return answer_for_count(c);
    }
    case QuestionType::Spatial: {
      if (q.subject == q.container) return std::nullopt;
      const auto& objs = world.objects();
      for (const auto& o : objs)
        if (o.type == q.subject && o.container && objs[*o.container].type == q.container)
          return kAnswerYes;
      return kAnswerNo;
    }
    case QuestionType::Color: {
      if (world.count_of(q.subject) != 1) return std::nullopt;
      for (const auto& o : world.objects())
        if (o.type == q.subject) return answer_for_color(o.color);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::vector<int> question_tokens(const QuestionParams& q) {
  const auto& v = Vocabulary::builtin();
  const std::string a(to_string(q.subject));
  switch (q.type) {
    case QuestionType::Existence: return v.encode({"is", "there", "a", a});
    case QuestionType::Counting: return v.encode({"how", "many", a});
    case QuestionType::Spatial:
      return v.encode({"is", "there", "a", a, "in", "the", to_string(q.container)});
    case QuestionType::Color: return v.encode({"what", "color", "is", "the", a});
  }
  return {};
}

Episode gen_question(std::span<const GridWorld> worlds, const GenSpec& spec, Rng& rng,
                     QuestionType qtype, std::optional<int> target_answer, int episode_id) {
  (void)spec;
  require(!worlds.empty(), ErrorCode::GenerationFailure, "no worlds to ask questions about");
  for (int attempt = 0; attempt < kMaxQuestionAttempts; ++attempt) {
    const auto& world = worlds[rng.uniform_index(worlds.size())];
    QuestionParams q{qtype, static_cast<ObjectType>(rng.uniform_index(kNumObjectTypes)),
                     static_cast<ObjectType>(rng.uniform_index(kNumObjectTypes))};
    auto ans = question_answer(world, q);
    if (!ans || (target_answer && *ans != *target_answer)) continue;
    return make_qa_episode(world, q, *ans, episode_id);
  }
  fail(ErrorCode::GenerationFailure,
       std::string("balancing quota unmet for ") + std::string(to_string(qtype)) +
           (target_answer ? " answer " + std::string(answer_name(*target_answer)) : "") + " in " +
           std::to_string(worlds.size()) + " worlds");
}

Episode gen_question(const GridWorld& world, const GenSpec& spec, Rng& rng, QuestionType qtype) {
  return gen_question(std::span(&world, 1), spec, rng, qtype, std::nullopt, 0);
}

Episode gen_egocentric_question(std::span<const GridWorld> worlds, const GenSpec& spec, Rng& rng,
                                QuestionType qtype, int episode_id) {
  require(qtype == QuestionType::Color || qtype == QuestionType::Counting,
          ErrorCode::GenerationFailure, "egocentric questions are color or counting");
  require(!worlds.empty(), ErrorCode::GenerationFailure, "no worlds to ask questions about");
  for (int attempt = 0; attempt < kMaxQuestionAttempts; ++attempt) {
    const auto& world = worlds[rng.uniform_index(worlds.size())];
    QuestionParams q{qtype, static_cast<ObjectType>(rng.uniform_index(kNumObjectTypes)),
                     ObjectType::Fridge};
    auto ans = question_answer(world, q);
    if (!ans || world.count_of(q.subject) == 0) continue;
    std::vector<Cell> instances;
    for (const auto& o : world.objects())
      if (o.type == q.subject) instances.push_back(o.position);
    const Cell target = instances[rng.uniform_index(instances.size())];
    const auto floors = world.floor_cells();
    const Cell from = floors[rng.uniform_index(floors.size())];
    auto path = shortest_path(world, from, target);
    if (static_cast<int>(path.size()) - 1 < std::max(1, spec.min_goal_distance)) continue;
    const int heading = static_cast<int>(rng.uniform_index(4));
    Episode e = make_qa_episode(world, q, *ans, episode_id);
    e.start = AgentState{from, heading, 0, 0, false};
    e.goal = target;
    e.gold_actions = compile_gold_actions(heading, path);
    return e;
  }
  fail(ErrorCode::GenerationFailure,
       "no askable " + std::string(to_string(qtype)) + " question with a reachable subject");
}

std::vector<Episode> entropy_filter(std::span<const Episode> dataset, double threshold) {
  std::map<std::pair<std::string, int>, std::map<int, int>> groups;
  auto key = [](const Episode& e) {
    return std::make_pair(e.template_name, e.target_type ? static_cast<int>(*e.target_type) : -1);
  };
  for (const auto& e : dataset)
    if (e.answer) ++groups[key(e)][*e.answer];
  std::map<std::pair<std::string, int>, bool> keep;
  for (const auto& [k, counts] : groups) {
    int total = 0, top = 0;
    for (auto [a, n] : counts) {
      total += n;
      top = std::max(top, n);
    }
    keep[k] = static_cast<double>(top) / total <= threshold;
  }
  std::vector<Episode> out;
  for (const auto& e : dataset)
    if (!e.answer || keep[key(e)]) out.push_back(e);
  if (out.empty()) fail(ErrorCode::EmptyDataset, "entropy filter removed every question");
  return out;
}

DatasetSplits split_dataset(std::span<const GridWorld> worlds, std::span<const Episode> episodes,
                            double val_seen_fraction, std::uint64_t seed) {
  std::map<int, Split> world_split;
  for (const auto& w : worlds) world_split[w.world_id()] = w.split();
  auto split_of = [&](const Episode& e) {
    auto it = world_split.find(e.world_id);
    return it == world_split.end() ? e.split : it->second;
  };
  std::vector<std::size_t> seen;
  for (std::size_t i = 0; i < episodes.size(); ++i)
    if (split_of(episodes[i]) == Split::Seen) seen.push_back(i);
  Rng rng = Rng::stream(seed, "split");
  auto order = seen;
  rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(std::llround(val_seen_fraction * seen.size()));
  std::vector<bool> is_val(episodes.size(), false);
  for (std::size_t k = 0; k < n_val; ++k) is_val[order[k]] = true;

  DatasetSplits out;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (split_of(episodes[i]) == Split::Unseen) out.val_unseen.push_back(episodes[i]);
    else if (is_val[i]) out.val_seen.push_back(episodes[i]);
    else out.train.push_back(episodes[i]);
  }
  return out;
}

GeneratedData generate_dataset(const GenSpec& spec) {
  spec.validate();
  GeneratedData data;
  const bool ensure_goal = spec.task == GenTask::Nav;
  for (int i = 0; i < spec.seen_worlds + spec.unseen_worlds; ++i)
    data.worlds.push_back(
        gen_world(spec, i, i < spec.seen_worlds ? Split::Seen : Split::Unseen, ensure_goal));

  std::vector<Episode> episodes;
  int next_id = 0;
  auto episode_rng = [&](int id) {
    return Rng::stream(spec.seed, "episode", {static_cast<std::uint64_t>(id)});
  };
  switch (spec.task) {
    case GenTask::Nav:
    case GenTask::EqaNav:
      for (const auto& w : data.worlds)
        for (int k = 0; k < spec.episodes_per_world; ++k) {
          const int id = next_id++;
          Rng rng = episode_rng(id);
          if (spec.task == GenTask::Nav) {
            episodes.push_back(gen_nav_episode(w, spec, rng, id));
          } else {
            const int t = spec.t_offsets[k % spec.t_offsets.size()];
            episodes.push_back(gen_eqa_episode(w, spec, rng, t, id));
          }
        }
      break;
    case GenTask::QaTopDown:
    case GenTask::QaEgocentric: {
      const std::vector<GridWorld> pools[2] = {
          {data.worlds.begin(), data.worlds.begin() + spec.seen_worlds},
          {data.worlds.begin() + spec.seen_worlds, data.worlds.end()}};
      const auto nq = spec.question_types.size();
      for (const auto& pool : pools) {
        const int n = static_cast<int>(pool.size()) * spec.episodes_per_world;
        for (int k = 0; k < n; ++k) {
          const int id = next_id++;
          Rng rng = episode_rng(id);
          const QuestionType qtype = spec.question_types[k % nq];
          if (spec.task == GenTask::QaEgocentric) {
            episodes.push_back(gen_egocentric_question(pool, spec, rng, qtype, id));
            continue;
          }
          std::optional<int> target;
          if (spec.balance_mode == BalanceMode::Randomized) {
            const auto cands = answer_candidates(qtype);
            target = cands[(k / nq) % cands.size()];
          }
          episodes.push_back(gen_question(pool, spec, rng, qtype, target, id));
        }
      }
      if (spec.entropy_threshold < 1.0) episodes = entropy_filter(episodes, spec.entropy_threshold);
      break;
    }
  }
  data.splits = split_dataset(data.worlds, episodes, spec.val_seen_fraction, spec.seed);
  return data;
}

}  // namespace navqa
