#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "navqa/episodegen.hpp"
#include "navqa/gridworld.hpp"

namespace navqa {

using Json = nlohmann::json;

// World record:
//   {"world_id", "split", "width", "height",
//    "grid": ["#####", "#..#", ...]        '#' wall, '.' floor
//    "rooms": [[-1, 0, 0, ...], ...]         room id per cell, -1 on walls
//    "objects": [{"type", "color", "x", "y", "container": index|null}]}
Json world_to_json(const GridWorld& world);
GridWorld world_from_json(const Json& j);

// Episode record (JSONL, one per line):
//   {"episode_id", "world_id", "task": "nav"|"qa",
//    "start": {"x","y","heading","tilt"}, "goal": {"x","y"}|null,
//    "answer": "<answer token>"|null, "gold_actions": [action indices],
//    "language": [token ids], "question_type": name|null, "template",
//    "target_type": name|null, "split": "seen"|"unseen", "t_offset"}
Json episode_to_json(const Episode& e);
Episode episode_from_json(const Json& j);

Json genspec_to_json(const GenSpec& spec);
/// Throws ConfigError naming the offending key (and its line in `source`
/// when given).
GenSpec genspec_from_json(const Json& j, std::string_view source = {});

/// Parses JSON text; syntax errors become ConfigError with "name:line:col".
Json parse_json_text(std::string_view text, std::string_view name);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::string to_jsonl(std::span<const Json> rows);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

void write_worlds(const std::filesystem::path& path, std::span<const GridWorld> worlds);
std::vector<GridWorld> read_worlds(const std::filesystem::path& path);
void write_episodes(const std::filesystem::path& path, std::span<const Episode> episodes);
std::vector<Episode> read_episodes(const std::filesystem::path& path);

/// 1-based line of the first occurrence of "key" in text, or 0.
int line_of_key(std::string_view text, std::string_view key);

}  // namespace navqa
