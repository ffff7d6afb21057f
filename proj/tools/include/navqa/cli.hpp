#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navqa/episodegen.hpp"
#include "navqa/eval.hpp"
#include "navqa/policy.hpp"
#include "navqa/training.hpp"

namespace navqa::cli {

namespace fs = std::filesystem;

/// One experiment file:
///   {"seed": 0, "data": {...}, "model": {...}, "train": {...},
///    "eval": {"max_steps", "success_radius", "baseline", "splits"}}
/// The top-level seed drives generation, initialization and training.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  GenSpec data;
  ModelConfig model;
  TrainConfig train;
  RolloutOptions rollout;
  /// Variant shown in the table's Baseline row; empty picks the task default.
  std::string baseline;
  std::vector<std::string> splits = {"val_seen", "val_unseen"};
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed{};
  std::optional<std::string> forcing{};
  std::optional<int> jobs{};
};

/// Throws ConfigError with "file:line" for unknown keys and malformed values.
ExperimentConfig load_experiment(const fs::path& path, const ConfigOverrides& overrides = {});
ExperimentConfig parse_experiment(std::string_view text, std::string_view name,
                                  const ConfigOverrides& overrides = {});
nlohmann::json experiment_to_json(const ExperimentConfig& c);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const fs::path& path);

/// Hash of everything that affects results: the resolved config (without
/// thread counts) and the contents of every input file.
std::string config_hash(const nlohmann::json& resolved, std::span<const fs::path> inputs);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<fs::path> datasets;
  std::vector<fs::path> checkpoints;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  nlohmann::json config;
  /// Command-specific counts and headline numbers.
  nlohmann::json summary = nlohmann::json::object();
  std::string version;
  double seconds = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& m);

struct Dataset {
  std::vector<GridWorld> worlds;
  std::vector<Episode> train;
  std::vector<Episode> val_seen;
  std::vector<Episode> val_unseen;

  /// "train", "val_seen" or "val_unseen". Throws ConfigError.
  const std::vector<Episode>& split(std::string_view name) const;
};

/// Reads worlds.jsonl, train.jsonl, val_seen.jsonl, val_unseen.jsonl and
/// checks vocab.txt against the built-in vocabulary.
Dataset load_dataset(const fs::path& dir);
std::vector<fs::path> dataset_files(const fs::path& dir);

// --------------------------------------------------------------------------
// Commands. Each writes its outputs plus manifest.json under `out`.
// --------------------------------------------------------------------------

struct GenOptions {
  fs::path config;
  ConfigOverrides overrides;
  fs::path out;
};
RunManifest cmd_gen(const GenOptions& o);

struct TrainOptions {
  fs::path config;
  ConfigOverrides overrides;
  fs::path data;
  std::string variant = "full";
  fs::path out;
};
/// Writes model.json (+ .bin), train_log.jsonl and visited_states.jsonl.
RunManifest cmd_train(const TrainOptions& o);

struct EvalOptions {
  fs::path config;
  ConfigOverrides overrides;
  fs::path data;
  /// Either a checkpoint or a scripted baseline name.
  std::optional<fs::path> checkpoint;
  std::optional<std::string> baseline;
  fs::path out;
};
/// Writes results.json with one record per episode and split.
RunManifest cmd_eval(const EvalOptions& o);

struct AblateOptions {
  fs::path config;
  ConfigOverrides overrides;
  fs::path data;
  std::vector<fs::path> checkpoints;
  fs::path out;
};
/// Evaluates every checkpoint plus the scripted baselines; writes
/// results.json, table.csv and table.json.
RunManifest cmd_ablate(const AblateOptions& o);

struct AnalyzeOptions {
  fs::path data;
  /// A split name or "all".
  std::string split = "train";
  fs::path out;
};
/// Writes bias_report.json, transitions.csv and answers.csv (when present).
RunManifest cmd_analyze(const AnalyzeOptions& o);

struct ReportOptions {
  std::vector<fs::path> results;
  std::optional<std::string> baseline;
  fs::path out;
};
/// Re-aggregates results files into table.csv, table.json and table.md.
RunManifest cmd_report(const ReportOptions& o);

std::string table_to_markdown(const ResultTable& t);

/// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
int run(int argc, char** argv);

}  // namespace navqa::cli
