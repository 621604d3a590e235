#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graspdp/env.hpp"
#include "graspdp/policy.hpp"
#include "graspdp/trajectory.hpp"

namespace graspdp {

enum class ConditionKind { DpBaseline, DpOptimal, BasePolicy, Greedy, Lookahead };

struct ConditionSpec {
  std::string name;
  ConditionKind kind = ConditionKind::BasePolicy;
  int depth = 1;                       // lookahead only
  std::optional<int> rollout_steps;    // lookahead only; empty means run to the end
  bool value_estimate = false;         // lookahead leaves use the base policy's value head
};

inline constexpr const char* kTrainingSuite = "training";
inline constexpr const char* kHeightSuite = "eval-height";
inline constexpr const char* kMassComSuite = "eval-mass-com";

struct ExperimentConfig {
  std::optional<std::filesystem::path> hand_path;  // default_hand() when empty
  std::optional<std::filesystem::path> tool_path;  // default_tool() when empty
  TrajectoryParams nominal;

  // Variation grids. Training heights and eval heights must be nonzero: the
  // torque sign is derived from the sign of the height.
  std::vector<double> training_heights_mm{-6, -4, -2, 2, 4, 6, 8};
  std::vector<double> eval_heights_mm{-6, -4, -2, 2, 4, 6, 8};
  std::vector<double> mass_scales{0.5, 1.0, 1.5, 2.0};
  std::vector<double> com_offsets_cm{-2, -1, 0, 1, 2};
  std::vector<std::string> suites{kHeightSuite, kMassComSuite};

  std::vector<ConditionSpec> conditions;  // five standard conditions when empty in JSON

  EnvConfig env;
  HoldOptions hold;
  FeatureKind features = FeatureKind::Full;
  TrainConfig training;
  std::optional<std::filesystem::path> policy_path;  // pretrained base policy

  std::uint64_t seed = 7;
  std::filesystem::path output_dir = "out";
  int workers = 0;  // 0: all cores
  int repeats = 1;

  /// Throws std::invalid_argument on empty or inconsistent settings.
  void validate() const;

  /// Relative paths are resolved against `base_dir`.
  static ExperimentConfig from_json(const std::string& text, const std::filesystem::path& base_dir = {});
  std::string to_json() const;
};

std::vector<ConditionSpec> standard_conditions();
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct TrajectoryCase {
  std::string suite;
  std::shared_ptr<const EpisodeInput> episode;
};

struct TrajectorySuites {
  std::vector<TrajectoryCase> training;       // 9 with the standard grids
  std::vector<TrajectoryCase> eval_height;    // 7
  std::vector<TrajectoryCase> eval_mass_com;  // 20

  const std::vector<TrajectoryCase>& by_name(const std::string& suite) const;
};

/// Training: nominal with both torque signs, then each training height with
/// the torque sign of the height. Eval-height: each eval height with the
/// opposite sign. Eval-mass-com: every (mass scale, COM offset) pair at the
/// nominal height and torque.
TrajectorySuites make_trajectory_suite(const ExperimentConfig& config, const ToolModel& tool);

std::shared_ptr<const HandModel> load_experiment_hand(const ExperimentConfig& config);
ToolModel load_experiment_tool(const ExperimentConfig& config);

/// Artifacts computed before any evaluation trajectory is revealed.
struct OfflineArtifacts {
  std::shared_ptr<const TabularPolicy> baseline;  // DP on the nominal trajectory
  std::shared_ptr<const Policy> base;             // behavior-cloned base policy
  std::vector<EpochMetrics> training_history;
  std::size_t dataset_rows = 0;
  double seconds = 0.0;
};

using LogFn = std::function<void(const std::string&)>;

std::vector<SolvedTrajectory> solve_training_suite(const std::shared_ptr<const HandModel>& hand,
                                                   const TrajectorySuites& suites, const ExperimentConfig& config);

OfflineArtifacts prepare_offline(const std::shared_ptr<const HandModel>& hand, const TrajectorySuites& suites,
                                 const ExperimentConfig& config, const LogFn& log = {});

struct RunRecord {
  std::string suite;
  std::string trajectory;
  std::string condition;
  double ret = 0.0;
  double hold_cost = 0.0;
  bool terminated = false;
  std::vector<std::uint32_t> grasps;  // discrete state at each slice; the dropped state is G
  double seconds = 0.0;               // online wall time, median over repeats
  int repeats = 1;
};

/// Runs one condition on one trajectory with a fresh environment. The clock
/// covers environment construction and every online decision, including the
/// DP solve for dp-optimal; the hold evaluation is not timed.
RunRecord run_condition(const ConditionSpec& condition, const std::shared_ptr<const HandModel>& hand,
                        const TrajectoryCase& trajectory, const ExperimentConfig& config,
                        const OfflineArtifacts& offline);

struct ExperimentResult {
  std::vector<RunRecord> records;  // suite, trajectory, condition order of the config
  OfflineArtifacts offline;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const LogFn& log = {});

/// 1.96 s / sqrt(n) with the sample standard deviation; empty for n < 2.
std::optional<double> ci_half_width(const std::vector<double>& values);

std::string results_csv(const std::vector<RunRecord>& records);
std::string timing_csv(const std::vector<RunRecord>& records);
/// Reads results.csv and, when given, timing.csv back into records.
std::vector<RunRecord> parse_results_csv(const std::string& results, const std::string& timing = {});

struct PlotData {
  std::map<std::string, std::string> files;  // file name -> CSV text
  std::vector<std::string> warnings;
};

/// summary.csv plus per-figure CSVs (condition, mean, ci_low, ci_high):
/// fig_return_<suite>.csv, fig_return_gap_<suite>.csv (return minus the
/// dp-optimal return of the same trajectory), fig_hold_<suite>.csv and
/// fig_timing.csv over every evaluation trajectory.
PlotData emit_plot_data(const std::vector<RunRecord>& records);

std::string training_metrics_csv(const std::vector<EpochMetrics>& history);

/// results.csv, timing.csv, plot data, training_metrics.csv and policy.json.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace graspdp
