#include "navqa/gridworld.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "navqa/error.hpp"

namespace navqa {

namespace {

constexpr std::array<std::string_view, kNumObjectTypes> kTypeNames = {
    "fridge", "microwave", "garbage_can", "bathtub", "sofa", "table", "lamp", "counter"};
constexpr std::array<std::string_view, kNumColors> kColorNames = {"red",   "green", "blue",
                                                                  "brown", "grey",  "white"};
constexpr std::array<std::string_view, kNumActions> kActionNames = {
    "forward", "left", "right", "tilt_up", "tilt_down", "end"};
constexpr std::array<char, kNumActions> kActionCodes = {'F', 'L', 'R', 'U', 'D', 'E'};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_name(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return static_cast<Enum>(i);
  return std::nullopt;
}

std::string cell_str(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnavailableAction: return "UnavailableAction";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::GenerationFailure: return "GenerationFailure";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::GoldReplayFailure: return "GoldReplayFailure";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Error";
}

std::string_view to_string(ObjectType t) { return kTypeNames[static_cast<int>(t)]; }
std::string_view to_string(Color c) { return kColorNames[static_cast<int>(c)]; }
std::string_view to_string(Split s) { return s == Split::Seen ? "seen" : "unseen"; }
std::string_view to_string(Action a) { return kActionNames[index_of(a)]; }
char action_code(Action a) { return kActionCodes[index_of(a)]; }

std::optional<ObjectType> parse_object_type(std::string_view s) {
  return parse_name<ObjectType>(kTypeNames, s);
}
std::optional<Color> parse_color(std::string_view s) { return parse_name<Color>(kColorNames, s); }
std::optional<Split> parse_split(std::string_view s) {
  if (s == "seen") return Split::Seen;
  if (s == "unseen") return Split::Unseen;
  return std::nullopt;
}
std::optional<Action> parse_action(std::string_view s) {
  if (s.size() == 1) {
    for (int i = 0; i < kNumActions; ++i)
      if (kActionCodes[i] == s[0]) return action_at(i);
  }
  return parse_name<Action>(kActionNames, s);
}

// --------------------------------------------------------------------------

GridWorld::GridWorld(int width, int height, int world_id, Split split)
    : width_(width),
      height_(height),
      world_id_(world_id),
      split_(split),
      cells_(static_cast<std::size_t>(width) * height, CellKind::Wall),
      rooms_(static_cast<std::size_t>(width) * height, -1) {
  require(width > 0 && height > 0, ErrorCode::FormatError, "world dimensions must be positive");
}

void GridWorld::set_cell(Cell c, CellKind k, int room_id) {
  require(in_bounds(c), ErrorCode::FormatError, "cell out of bounds " + cell_str(c));
  cells_[index(c)] = k;
  rooms_[index(c)] = k == CellKind::Wall ? -1 : room_id;
}

int GridWorld::add_object(ObjectInstance obj) {
  objects_.push_back(obj);
  return static_cast<int>(objects_.size()) - 1;
}

int GridWorld::object_at(Cell c) const {
  for (std::size_t i = 0; i < objects_.size(); ++i)
    if (objects_[i].position == c) return static_cast<int>(i);
  return -1;
}

int GridWorld::count_of(ObjectType t) const {
  return static_cast<int>(
      std::count_if(objects_.begin(), objects_.end(), [t](const auto& o) { return o.type == t; }));
}

std::vector<Cell> GridWorld::floor_cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (cells_[index({x, y})] == CellKind::Floor) out.push_back({x, y});
  return out;
}

int GridWorld::room_count() const {
  std::set<int> ids;
  for (int r : rooms_)
    if (r >= 0) ids.insert(r);
  return static_cast<int>(ids.size());
}

void GridWorld::validate() const {
  for (int x = 0; x < width_; ++x) {
    require(kind({x, 0}) == CellKind::Wall && kind({x, height_ - 1}) == CellKind::Wall,
            ErrorCode::FormatError, "border cell is not a wall");
  }
  for (int y = 0; y < height_; ++y) {
    require(kind({0, y}) == CellKind::Wall && kind({width_ - 1, y}) == CellKind::Wall,
            ErrorCode::FormatError, "border cell is not a wall");
  }
  std::set<Cell> occupied;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const auto& o = objects_[i];
    require(is_floor(o.position), ErrorCode::FormatError,
            "object on non-floor cell " + cell_str(o.position));
    require(occupied.insert(o.position).second, ErrorCode::FormatError,
            "two objects on cell " + cell_str(o.position));
    if (o.container) {
      int c = *o.container;
      require(c >= 0 && c < static_cast<int>(objects_.size()) && c != static_cast<int>(i),
              ErrorCode::FormatError, "container index out of range");
      require(room(objects_[c].position) == room(o.position), ErrorCode::FormatError,
              "container in a different room");
    }
  }
  auto floors = floor_cells();
  require(!floors.empty(), ErrorCode::FormatError, "world has no floor");
  auto dist = distance_field(*this, floors.front());
  for (Cell c : floors)
    require(dist[index(c)] >= 0, ErrorCode::FormatError, "floor cell " + cell_str(c) + " unreachable");
}

bool operator==(const ObjectInstance& a, const ObjectInstance& b) {
  return a.type == b.type && a.color == b.color && a.position == b.position &&
         a.container == b.container;
}

bool operator==(const GridWorld& a, const GridWorld& b) {
  return a.width_ == b.width_ && a.height_ == b.height_ && a.world_id_ == b.world_id_ &&
         a.split_ == b.split_ && a.cells_ == b.cells_ && a.rooms_ == b.rooms_ &&
         a.objects_ == b.objects_;
}

// --------------------------------------------------------------------------

AvailabilityMask available_actions(const GridWorld& world, const AgentState& state) {
  AvailabilityMask mask{};
  mask[index_of(Action::Forward)] = world.is_floor(neighbor(state.position, state.heading));
  mask[index_of(Action::Left)] = true;
  mask[index_of(Action::Right)] = true;
  mask[index_of(Action::TiltUp)] = state.tilt < 1;
  mask[index_of(Action::TiltDown)] = state.tilt > -1;
  mask[index_of(Action::End)] = true;
  return mask;
}

AgentState step(const GridWorld& world, const AgentState& state, Action action) {
  if (!available_actions(world, state)[index_of(action)])
    fail(ErrorCode::UnavailableAction,
         std::string(to_string(action)) + " at " + cell_str(state.position) + " heading " +
             std::to_string(state.heading) + " tilt " + std::to_string(state.tilt));
  AgentState next = state;
  switch (action) {
    case Action::Forward: next.position = neighbor(state.position, state.heading); break;
    case Action::Left: next.heading = (state.heading + 3) % 4; break;
    case Action::Right: next.heading = (state.heading + 1) % 4; break;
    case Action::TiltUp: next.tilt = state.tilt + 1; break;
    case Action::TiltDown: next.tilt = state.tilt - 1; break;
    case Action::End: next.ended = true; break;
  }
  next.steps_taken = state.steps_taken + 1;
  return next;
}

// --------------------------------------------------------------------------

std::vector<int> distance_field(const GridWorld& world, Cell source) {
  std::vector<int> dist(static_cast<std::size_t>(world.width()) * world.height(), -1);
  if (!world.is_floor(source)) return dist;
  std::deque<Cell> frontier{source};
  dist[world.index(source)] = 0;
  while (!frontier.empty()) {
    Cell c = frontier.front();
    frontier.pop_front();
    for (int h = 0; h < 4; ++h) {
      Cell n = neighbor(c, h);
      if (!world.is_floor(n) || dist[world.index(n)] >= 0) continue;
      dist[world.index(n)] = dist[world.index(c)] + 1;
      frontier.push_back(n);
    }
  }
  return dist;
}

std::vector<Cell> shortest_path(const GridWorld& world, Cell from, Cell to) {
  require(world.is_floor(from) && world.is_floor(to), ErrorCode::Unreachable,
          "path endpoints must be floor cells");
  if (from == to) return {from};
  std::vector<int> parent(static_cast<std::size_t>(world.width()) * world.height(), -1);
  std::vector<bool> seen(parent.size(), false);
  std::deque<Cell> frontier{from};
  seen[world.index(from)] = true;
  bool found = false;
  while (!frontier.empty() && !found) {
    Cell c = frontier.front();
    frontier.pop_front();
    for (int h = 0; h < 4; ++h) {
      Cell n = neighbor(c, h);
      if (!world.is_floor(n) || seen[world.index(n)]) continue;
      seen[world.index(n)] = true;
      parent[world.index(n)] = static_cast<int>(world.index(c));
      if (n == to) {
        found = true;
        break;
      }
      frontier.push_back(n);
    }
  }
  if (!found) fail(ErrorCode::Unreachable, "no path " + cell_str(from) + " -> " + cell_str(to));
  std::vector<Cell> path{to};
  int cur = parent[world.index(to)];
  while (cur >= 0) {
    path.push_back({cur % world.width(), cur / world.width()});
    cur = parent[cur];
  }
  std::reverse(path.begin(), path.end());
  return path;
}

int geodesic_distance(const GridWorld& world, Cell from, Cell to) {
  return static_cast<int>(shortest_path(world, from, to).size()) - 1;
}

// --------------------------------------------------------------------------

namespace {

void encode_cell(const GridWorld& world, Cell c, bool show_objects, double* out) {
  if (!world.is_floor(c)) {
    out[kChannelWall] = 1.0;
    return;
  }
  out[kChannelFloor] = 1.0;
  if (!show_objects) return;
  int idx = world.object_at(c);
  if (idx < 0) return;
  const auto& obj = world.objects()[idx];
  out[kChannelTypeBase + static_cast<int>(obj.type)] = 1.0;
  out[kChannelColorBase + static_cast<int>(obj.color)] = 1.0;
}

}  // namespace

VisionFeature render_egocentric(const GridWorld& world, const AgentState& state) {
  VisionFeature v{};
  const int fwd = state.heading;
  const int right = (state.heading + 1) % 4;
  const bool show_objects = state.tilt == 0;
  for (int depth = 0; depth < kConeDepth; ++depth) {
    for (int lateral = 0; lateral < kConeWidth; ++lateral) {
      const int d = depth + 1;
      const int l = lateral - 1;
      Cell c{state.position.x + d * kHeadingDx[fwd] + l * kHeadingDx[right],
             state.position.y + d * kHeadingDy[fwd] + l * kHeadingDy[right]};
      encode_cell(world, c, show_objects, v.data() + cone_offset(depth, lateral));
    }
  }
  return v;
}

TopDownMap render_topdown(const GridWorld& world) {
  TopDownMap map;
  map.width = world.width();
  map.height = world.height();
  map.data.assign(static_cast<std::size_t>(map.width) * map.height * kCellChannels, 0.0);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      encode_cell(world, {x, y}, true,
                  map.data.data() + (static_cast<std::size_t>(y) * map.width + x) * kCellChannels);
  return map;
}

}  // namespace navqa
