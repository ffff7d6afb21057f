#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace navqa {

// ---------------------------------------------------------------------------
// Vocabularies of the world. Index orders are part of the on-disk formats.
// ---------------------------------------------------------------------------

enum class CellKind : std::uint8_t { Wall, Floor };

enum class ObjectType : std::uint8_t { Fridge, Microwave, GarbageCan, Bathtub, Sofa, Table, Lamp, Counter };
inline constexpr int kNumObjectTypes = 8;

enum class Color : std::uint8_t { Red, Green, Blue, Brown, Grey, White };
inline constexpr int kNumColors = 6;

enum class Split : std::uint8_t { Seen, Unseen };

enum class Action : std::uint8_t { Forward, Left, Right, TiltUp, TiltDown, End };
inline constexpr int kNumActions = 6;

std::string_view to_string(ObjectType t);
std::string_view to_string(Color c);
std::string_view to_string(Split s);
std::string_view to_string(Action a);
/// One-letter code used in logs and tests: F L R U D E.
char action_code(Action a);

std::optional<ObjectType> parse_object_type(std::string_view s);
std::optional<Color> parse_color(std::string_view s);
std::optional<Split> parse_split(std::string_view s);
std::optional<Action> parse_action(std::string_view s);

inline constexpr int index_of(Action a) { return static_cast<int>(a); }
inline constexpr Action action_at(int i) { return static_cast<Action>(i); }

struct Cell {
  int x = 0;
  int y = 0;
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

/// Heading 0..3 = N, E, S, W. North decreases y.
inline constexpr std::array<int, 4> kHeadingDx = {0, 1, 0, -1};
inline constexpr std::array<int, 4> kHeadingDy = {-1, 0, 1, 0};

inline constexpr Cell neighbor(Cell c, int heading) {
  return {c.x + kHeadingDx[heading], c.y + kHeadingDy[heading]};
}

struct ObjectInstance {
  ObjectType type = ObjectType::Fridge;
  Color color = Color::Red;
  Cell position;
  /// Index into GridWorld::objects() of the object this one sits in.
  std::optional<int> container;
};

struct AgentState {
  Cell position;
  int heading = 0;
  int tilt = 0;
  int steps_taken = 0;
  bool ended = false;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

using AvailabilityMask = std::array<bool, kNumActions>;

/// Static map. Construct with the carving API, then call validate().
class GridWorld {
 public:
  GridWorld() = default;
  GridWorld(int width, int height, int world_id = 0, Split split = Split::Seen);

  int width() const { return width_; }
  int height() const { return height_; }
  int world_id() const { return world_id_; }
  Split split() const { return split_; }
  void set_world_id(int id) { world_id_ = id; }
  void set_split(Split s) { split_ = s; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  /// Out-of-bounds cells read as Wall.
  CellKind kind(Cell c) const {
    return in_bounds(c) ? cells_[index(c)] : CellKind::Wall;
  }
  bool is_floor(Cell c) const { return kind(c) == CellKind::Floor; }
  /// -1 for walls.
  int room(Cell c) const { return in_bounds(c) ? rooms_[index(c)] : -1; }

  void set_cell(Cell c, CellKind k, int room_id);

  const std::vector<ObjectInstance>& objects() const { return objects_; }
  std::vector<ObjectInstance>& mutable_objects() { return objects_; }
  int add_object(ObjectInstance obj);
  /// Index of the object on cell c, or -1.
  int object_at(Cell c) const;
  int count_of(ObjectType t) const;

  std::vector<Cell> floor_cells() const;
  int room_count() const;

  /// Throws FormatError describing the first violated invariant.
  void validate() const;

  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  friend bool operator==(const GridWorld&, const GridWorld&);

 private:
  int width_ = 0;
  int height_ = 0;
  int world_id_ = 0;
  Split split_ = Split::Seen;
  std::vector<CellKind> cells_;
  std::vector<int> rooms_;
  std::vector<ObjectInstance> objects_;
};

bool operator==(const ObjectInstance& a, const ObjectInstance& b);

// ---------------------------------------------------------------------------
// Kinematics and sensing
// ---------------------------------------------------------------------------

AvailabilityMask available_actions(const GridWorld& world, const AgentState& state);

/// Throws UnavailableAction when the mask forbids `action`.
AgentState step(const GridWorld& world, const AgentState& state, Action action);

// ---------------------------------------------------------------------------
// Geometry oracles
// ---------------------------------------------------------------------------

/// Minimum-length 4-connected floor path including both endpoints. Neighbors
/// are expanded in N, E, S, W order, which fixes the path among ties.
std::vector<Cell> shortest_path(const GridWorld& world, Cell from, Cell to);

int geodesic_distance(const GridWorld& world, Cell from, Cell to);

/// BFS distances from `source` to every cell in row-major order; -1 where
/// unreachable or wall.
std::vector<int> distance_field(const GridWorld& world, Cell source);

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

inline constexpr int kCellChannels = 16;
inline constexpr int kChannelWall = 0;
inline constexpr int kChannelFloor = 1;
inline constexpr int kChannelTypeBase = 2;
inline constexpr int kChannelColorBase = 2 + kNumObjectTypes;
inline constexpr int kConeWidth = 3;
inline constexpr int kConeDepth = 3;
inline constexpr int kVisionDim = kConeWidth * kConeDepth * kCellChannels;  // 144

using VisionFeature = std::array<double, kVisionDim>;

/// Channel offset of cone cell (depth 0..2 near to far, lateral 0..2 left to right).
inline constexpr int cone_offset(int depth, int lateral) {
  return (depth * kConeWidth + lateral) * kCellChannels;
}

VisionFeature render_egocentric(const GridWorld& world, const AgentState& state);

struct TopDownMap {
  int width = 0;
  int height = 0;
  /// (y * width + x) * kCellChannels + channel
  std::vector<double> data;

  double at(int x, int y, int channel) const {
    return data[(static_cast<std::size_t>(y) * width + x) * kCellChannels + channel];
  }
};

TopDownMap render_topdown(const GridWorld& world);

}  // namespace navqa
