#include "navqa/serialization.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "navqa/error.hpp"

namespace navqa {

namespace {

template <typename T, typename Parse>
T parse_enum(const Json& j, Parse parse, const char* what) {
  if (!j.is_string()) fail(ErrorCode::FormatError, std::string(what) + " must be a string");
  auto v = parse(j.get<std::string>());
  if (!v) fail(ErrorCode::FormatError, std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
  return *v;
}

Json cell_json(Cell c) { return Json{{"x", c.x}, {"y", c.y}}; }
Cell cell_from(const Json& j) { return {j.at("x").get<int>(), j.at("y").get<int>()}; }

template <typename Fn>
auto with_format_errors(Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, e.what());
  }
}

}  // namespace

Json world_to_json(const GridWorld& world) {
  Json grid = Json::array();
  Json rooms = Json::array();
  for (int y = 0; y < world.height(); ++y) {
    std::string row;
    Json room_row = Json::array();
    for (int x = 0; x < world.width(); ++x) {
      row += world.is_floor({x, y}) ? '.' : '#';
      room_row.push_back(world.room({x, y}));
    }
    grid.push_back(row);
    rooms.push_back(room_row);
  }
  Json objects = Json::array();
  for (const auto& o : world.objects()) {
    objects.push_back({{"type", std::string(to_string(o.type))},
                       {"color", std::string(to_string(o.color))},
                       {"x", o.position.x},
                       {"y", o.position.y},
                       {"container", o.container ? Json(*o.container) : Json(nullptr)}});
  }
  return Json{{"world_id", world.world_id()},
              {"split", std::string(to_string(world.split()))},
              {"width", world.width()},
              {"height", world.height()},
              {"grid", grid},
              {"rooms", rooms},
              {"objects", objects}};
}

GridWorld world_from_json(const Json& j) {
  return with_format_errors([&] {
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    GridWorld w(width, height, j.at("world_id").get<int>(),
                parse_enum<Split>(j.at("split"), parse_split, "split"));
    const auto& grid = j.at("grid");
    const auto& rooms = j.at("rooms");
    require(static_cast<int>(grid.size()) == height && static_cast<int>(rooms.size()) == height,
            ErrorCode::FormatError, "grid height mismatch");
    for (int y = 0; y < height; ++y) {
      const auto row = grid[y].get<std::string>();
      require(static_cast<int>(row.size()) == width && static_cast<int>(rooms[y].size()) == width,
              ErrorCode::FormatError, "grid width mismatch");
      for (int x = 0; x < width; ++x) {
        require(row[x] == '.' || row[x] == '#', ErrorCode::FormatError, "bad grid character");
        w.set_cell({x, y}, row[x] == '.' ? CellKind::Floor : CellKind::Wall, rooms[y][x].get<int>());
      }
    }
    for (const auto& o : j.at("objects")) {
      ObjectInstance obj;
      obj.type = parse_enum<ObjectType>(o.at("type"), parse_object_type, "object type");
      obj.color = parse_enum<Color>(o.at("color"), parse_color, "color");
      obj.position = cell_from(o);
      if (o.contains("container") && !o.at("container").is_null())
        obj.container = o.at("container").get<int>();
      w.add_object(obj);
    }
    w.validate();
    return w;
  });
}

Json episode_to_json(const Episode& e) {
  Json gold = Json::array();
  for (Action a : e.gold_actions) gold.push_back(index_of(a));
  return Json{
      {"episode_id", e.episode_id},
      {"world_id", e.world_id},
      {"task", e.task == TaskKind::Nav ? "nav" : "qa"},
      {"start",
       {{"x", e.start.position.x}, {"y", e.start.position.y}, {"heading", e.start.heading},
        {"tilt", e.start.tilt}}},
      {"goal", e.goal ? cell_json(*e.goal) : Json(nullptr)},
      {"answer", e.answer ? Json(std::string(answer_name(*e.answer))) : Json(nullptr)},
      {"gold_actions", gold},
      {"language", e.language},
      {"question_type",
       e.question_type ? Json(std::string(to_string(*e.question_type))) : Json(nullptr)},
      {"template", e.template_name},
      {"target_type", e.target_type ? Json(std::string(to_string(*e.target_type))) : Json(nullptr)},
      {"split", std::string(to_string(e.split))},
      {"t_offset", e.t_offset},
  };
}

Episode episode_from_json(const Json& j) {
  return with_format_errors([&] {
    Episode e;
    e.episode_id = j.at("episode_id").get<int>();
    e.world_id = j.at("world_id").get<int>();
    const auto task = j.at("task").get<std::string>();
    require(task == "nav" || task == "qa", ErrorCode::FormatError, "unknown task '" + task + "'");
    e.task = task == "nav" ? TaskKind::Nav : TaskKind::QA;
    const auto& s = j.at("start");
    e.start.position = cell_from(s);
    e.start.heading = s.at("heading").get<int>();
    e.start.tilt = s.at("tilt").get<int>();
    require(e.start.heading >= 0 && e.start.heading < 4 && e.start.tilt >= -1 && e.start.tilt <= 1,
            ErrorCode::FormatError, "bad start pose");
    if (!j.at("goal").is_null()) e.goal = cell_from(j.at("goal"));
    if (!j.at("answer").is_null())
      e.answer = parse_enum<int>(j.at("answer"), parse_answer, "answer");
    for (const auto& a : j.at("gold_actions")) {
      const int i = a.get<int>();
      require(i >= 0 && i < kNumActions, ErrorCode::FormatError, "action index out of range");
      e.gold_actions.push_back(action_at(i));
    }
    e.language = j.at("language").get<std::vector<int>>();
    if (!j.at("question_type").is_null())
      e.question_type =
          parse_enum<QuestionType>(j.at("question_type"), parse_question_type, "question type");
    e.template_name = j.at("template").get<std::string>();
    if (!j.at("target_type").is_null())
      e.target_type = parse_enum<ObjectType>(j.at("target_type"), parse_object_type, "object type");
    e.split = parse_enum<Split>(j.at("split"), parse_split, "split");
    e.t_offset = j.value("t_offset", 0);
    return e;
  });
}

// --------------------------------------------------------------------------

Json genspec_to_json(const GenSpec& s) {
  Json goal_types = Json::array();
  for (auto t : s.goal_types) goal_types.push_back(std::string(to_string(t)));
  Json qtypes = Json::array();
  for (auto q : s.question_types) qtypes.push_back(std::string(to_string(q)));
  Json canon = Json::object();
  for (int t = 0; t < kNumObjectTypes; ++t)
    canon[std::string(to_string(static_cast<ObjectType>(t)))] =
        std::string(to_string(s.canonical_colors[t]));
  return Json{{"seed", s.seed},
              {"task", std::string(to_string(s.task))},
              {"worlds", {{"seen", s.seen_worlds}, {"unseen", s.unseen_worlds}}},
              {"room_count", {s.room_count.min, s.room_count.max}},
              {"room_size", {s.room_size.min, s.room_size.max}},
              {"object_count", {s.object_count.min, s.object_count.max}},
              {"bias", s.bias},
              {"balance_mode", s.balance_mode == BalanceMode::Natural ? "natural" : "randomized"},
              {"entropy_threshold", s.entropy_threshold},
              {"episodes_per_world", s.episodes_per_world},
              {"val_seen_fraction", s.val_seen_fraction},
              {"t_offsets", s.t_offsets},
              {"goal_types", goal_types},
              {"min_goal_distance", s.min_goal_distance},
              {"start_heading_bias", s.start_heading_bias},
              {"container_probability", s.container_probability},
              {"question_types", qtypes},
              {"canonical_colors", canon}};
}

GenSpec genspec_from_json(const Json& j, std::string_view source) {
  auto where = [&](const std::string& key) {
    const int line = source.empty() ? 0 : line_of_key(source, key);
    return line > 0 ? " (line " + std::to_string(line) + ")" : std::string();
  };
  if (!j.is_object()) fail(ErrorCode::ConfigError, "generation config must be a JSON object");
  static const std::set<std::string> known = {
      "seed", "task", "worlds", "room_count", "room_size", "object_count", "bias", "balance_mode",
      "entropy_threshold", "episodes_per_world", "val_seen_fraction", "t_offsets", "goal_types",
      "min_goal_distance", "start_heading_bias", "container_probability", "question_types",
      "canonical_colors"};
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) fail(ErrorCode::ConfigError, "unknown key '" + k + "'" + where(k));

  GenSpec s;
  std::string current;
  try {
    auto range = [&](const char* key, IntRange& r) {
      current = key;
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      if (!v.is_array() || v.size() != 2) fail(ErrorCode::ConfigError, "expected [min, max]");
      r.min = v[0].get<int>();
      r.max = v[1].get<int>();
    };
    auto get = [&](const char* key, auto& out) {
      current = key;
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    get("seed", s.seed);
    current = "task";
    if (j.contains("task")) s.task = parse_enum<GenTask>(j.at("task"), parse_gen_task, "task");
    current = "worlds";
    if (j.contains("worlds")) {
      s.seen_worlds = j.at("worlds").value("seen", s.seen_worlds);
      s.unseen_worlds = j.at("worlds").value("unseen", s.unseen_worlds);
    }
    range("room_count", s.room_count);
    range("room_size", s.room_size);
    range("object_count", s.object_count);
    get("bias", s.bias);
    current = "balance_mode";
    if (j.contains("balance_mode")) {
      const auto m = j.at("balance_mode").get<std::string>();
      if (m == "natural") s.balance_mode = BalanceMode::Natural;
      else if (m == "randomized") s.balance_mode = BalanceMode::Randomized;
      else fail(ErrorCode::ConfigError, "balance_mode must be 'randomized' or 'natural'");
    }
    get("entropy_threshold", s.entropy_threshold);
    get("episodes_per_world", s.episodes_per_world);
    get("val_seen_fraction", s.val_seen_fraction);
    get("t_offsets", s.t_offsets);
    get("min_goal_distance", s.min_goal_distance);
    get("start_heading_bias", s.start_heading_bias);
    get("container_probability", s.container_probability);
    current = "goal_types";
    if (j.contains("goal_types")) {
      s.goal_types.clear();
      for (const auto& t : j.at("goal_types"))
        s.goal_types.push_back(parse_enum<ObjectType>(t, parse_object_type, "object type"));
    }
    current = "question_types";
    if (j.contains("question_types")) {
      s.question_types.clear();
      for (const auto& q : j.at("question_types"))
        s.question_types.push_back(parse_enum<QuestionType>(q, parse_question_type, "question type"));
    }
    current = "canonical_colors";
    if (j.contains("canonical_colors")) {
      for (const auto& [k, v] : j.at("canonical_colors").items()) {
        auto t = parse_object_type(k);
        if (!t) fail(ErrorCode::ConfigError, "unknown object type '" + k + "'");
        s.canonical_colors[static_cast<int>(*t)] = parse_enum<Color>(v, parse_color, "color");
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::ConfigError, "key '" + current + "'" + where(current) + ": " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, "key '" + current + "'" + where(current) + ": " + e.what());
  }
  s.validate();
  return s;
}

// --------------------------------------------------------------------------

int line_of_key(std::string_view text, std::string_view key) {
  const std::string quoted = "\"" + std::string(key) + "\"";
  const auto pos = text.find(quoted);
  if (pos == std::string_view::npos) return 0;
  int line = 1;
  for (std::size_t i = 0; i < pos; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

Json parse_json_text(std::string_view text, std::string_view name) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorCode::ConfigError, std::string(name) + ":" + std::to_string(line) + ":" +
                                     std::to_string(col) + ": " + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::ConfigError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::FormatError, "cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

Json read_json_file(const std::filesystem::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

std::string to_jsonl(std::span<const Json> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  std::vector<Json> rows;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    rows.push_back(parse_json_text(line, path.string() + ":" + std::to_string(lineno)));
  }
  return rows;
}

void write_worlds(const std::filesystem::path& path, std::span<const GridWorld> worlds) {
  std::vector<Json> rows;
  for (const auto& w : worlds) rows.push_back(world_to_json(w));
  write_text_file(path, to_jsonl(rows));
}

std::vector<GridWorld> read_worlds(const std::filesystem::path& path) {
  std::vector<GridWorld> out;
  for (const auto& j : read_jsonl(path)) out.push_back(world_from_json(j));
  return out;
}

void write_episodes(const std::filesystem::path& path, std::span<const Episode> episodes) {
  std::vector<Json> rows;
  for (const auto& e : episodes) rows.push_back(episode_to_json(e));
  write_text_file(path, to_jsonl(rows));
}

std::vector<Episode> read_episodes(const std::filesystem::path& path) {
  std::vector<Episode> out;
  for (const auto& j : read_jsonl(path)) out.push_back(episode_from_json(j));
  return out;
}

}  // namespace navqa
