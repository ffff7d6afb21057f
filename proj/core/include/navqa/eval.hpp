#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "navqa/ablation.hpp"
#include "navqa/episodegen.hpp"

namespace navqa {

struct EpisodeResult {
  int episode_id = 0;
  std::string variant;
  /// "val_seen", "val_unseen", "train", ...
  std::string split;
  bool success = false;
  int d_start = 0;
  int d_T = 0;
  int d_min = 0;
  int steps = 0;
  std::optional<int> answer;
  std::optional<bool> answer_correct;
  std::vector<Action> actions;
};

nlohmann::json result_to_json(const EpisodeResult& r);
EpisodeResult result_from_json(const nlohmann::json& j);

struct RolloutOptions {
  int max_steps = 60;
  /// Success iff final geodesic distance <= radius (cells).
  double success_radius = 1.0;
};

/// Runs the agent until End or the step cap, tracking geodesic distance to
/// the goal after every step.
EpisodeResult rollout(NavAgent& agent, const GridWorld& world, const Episode& episode, Rng& rng,
                      const RolloutOptions& options);

using AgentFactory = std::function<std::unique_ptr<NavAgent>()>;

/// Evaluates every episode with a fresh agent and the episode's own rollout
/// stream, so the output is independent of `jobs`.
std::vector<EpisodeResult> evaluate_nav(const AgentFactory& factory, std::span<const GridWorld> worlds,
                                        std::span<const Episode> episodes, std::string_view split,
                                        const RolloutOptions& options, std::uint64_t seed, int jobs = 1);

/// Top-1 QA accuracy records. Top-down models see render_topdown; attention
/// models the last five gold-trajectory frames. Throws EmptyDataset.
std::vector<EpisodeResult> qa_evaluate(const AblatedModel& model, std::span<const GridWorld> worlds,
                                       std::span<const Episode> episodes, std::string_view split,
                                       int jobs = 1);

std::vector<EpisodeResult> qa_evaluate(const MajorityBaseline& baseline,
                                       std::span<const Episode> episodes, std::string_view split);

double accuracy(std::span<const EpisodeResult> results);
double success_rate(std::span<const EpisodeResult> results);

// --------------------------------------------------------------------------
// Aggregation
// --------------------------------------------------------------------------

enum class TableKind : std::uint8_t { Nav, QA };

struct TableCell {
  double value = 0.0;
  int count = 0;
};

/// Rows Full, Baseline, A, A_V, A_L, Delta; columns (metric, split). The
/// delta row is best unimodal minus baseline per column.
struct ResultTable {
  TableKind kind = TableKind::Nav;
  std::string baseline;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::map<std::pair<std::string, std::string>, TableCell> cells;
  /// Row -> columns where that unimodal row beats Full.
  std::map<std::string, std::vector<std::string>> better_than_full;
  /// Columns where the best unimodal row beats the baseline.
  std::vector<std::string> best_unimodal_beats_baseline;

  std::optional<TableCell> cell(const std::string& row, const std::string& column) const;
};

inline constexpr std::string_view kDeltaRow = "Delta";
inline constexpr std::string_view kBaselineRow = "Baseline";

/// Column name for a metric on a split, e.g. "success_pct_unseen".
std::string column_name(std::string_view metric, std::string_view split);

/// Groups results by variant name and split; `baseline` names the variant
/// shown in the Baseline row. Splits are the distinct result splits sorted.
ResultTable aggregate(std::span<const EpisodeResult> results, TableKind kind,
                      std::string_view baseline);

std::string table_to_csv(const ResultTable& t);
nlohmann::json table_to_json(const ResultTable& t);
std::string results_to_json_text(std::span<const EpisodeResult> results);

}  // namespace navqa
