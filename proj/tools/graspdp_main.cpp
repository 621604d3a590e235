// graspdp: grasp-sequence planning experiments from the command line.
//
//   graspdp solve-dp    --config cfg.json [--trajectory NAME] [--dump-rewards]
//   graspdp gen-dataset --config cfg.json
//   graspdp train-bc    --config cfg.json [--dataset DIR]
//   graspdp run         --config cfg.json
//   graspdp plot-data   --out DIR
//
// Shared flags: --workers N, --seed N, --out DIR, --repeats N override the
// matching config fields.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "graspdp/harness.hpp"
#include "graspdp/model_io.hpp"

namespace {

using namespace graspdp;
using nlohmann::json;

struct Common {
  std::string config;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> repeats;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "experiment config (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", c.workers, "threads for DP sweeps and lookahead branches (0: all cores)");
  cmd->add_option("--seed", c.seed, "seed for dataset shuffling and base-policy training");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--repeats", c.repeats, "timed repetitions per trajectory and condition (median reported)")
      ->check(CLI::PositiveNumber);
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
  if (cfg.conditions.empty()) cfg.conditions = standard_conditions();
  if (c.workers) cfg.workers = *c.workers;
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.repeats) cfg.repeats = *c.repeats;
  cfg.validate();
  return cfg;
}

void log_line(const std::string& m) { std::cerr << "[graspdp] " << m << '\n'; }

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const TrajectoryCase& find_trajectory(const TrajectorySuites& suites, const std::string& name) {
  for (const auto* suite : {&suites.training, &suites.eval_height, &suites.eval_mass_com}) {
    for (const TrajectoryCase& c : *suite) {
      if (c.episode->name == name) return c;
    }
  }
  throw std::invalid_argument("no trajectory named '" + name + "' in the configured suites");
}

int solve_dp_cmd(const Common& common, const std::string& trajectory, bool dump_rewards) {
  const ExperimentConfig cfg = load(common);
  const auto hand = load_experiment_hand(cfg);
  const TrajectorySuites suites = make_trajectory_suite(cfg, load_experiment_tool(cfg));
  const TrajectoryCase& tc = find_trajectory(suites, trajectory);

  const auto t0 = std::chrono::steady_clock::now();
  const DiscreteGraspMdp mdp(std::make_shared<const GraspEnv>(hand, tc.episode, cfg.env));
  const DpSolution sol = solve_dp(mdp, cfg.workers);
  const double seconds = since(t0);
  const std::size_t evaluations = mdp.reward_evaluations();
  const double residual = bellman_residual(mdp, sol);

  std::ostringstream table;
  table << "# graspdp dp v1\ngrasp_index,time,value,action\n";
  table.precision(17);
  for (int t = 0; t < mdp.horizon(); ++t) {
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      table << s << ',' << t << ',' << sol.values.at(s, t) << ',' << sol.policy.at(s, t) << '\n';
    }
  }
  write_text_file(cfg.output_dir / ("dp_" + tc.episode->name + ".csv"), table.str());
  if (dump_rewards) {
    std::ostringstream r;
    mdp.dump_rewards(r);
    write_text_file(cfg.output_dir / ("rewards_" + tc.episode->name + ".csv"), r.str());
  }
  std::printf("trajectory      %s\n", tc.episode->name.c_str());
  std::printf("states          %zu (%zu grasps + dropped)\n", mdp.num_states(), mdp.num_states() - 1);
  std::printf("horizon         %d\n", mdp.horizon());
  std::printf("V[s0,0]         %.10g\n", sol.values.at(mdp.initial_state(), 0));
  std::printf("reward evals    %zu\n", evaluations);
  std::printf("IK evaluations  %zu\n", mdp.env().evaluations_computed());
  std::printf("solve seconds   %.3f\n", seconds);
  std::printf("bellman residual %.3g\n", residual);
  return 0;
}

json meta_json(const BcDataset& ds, std::uint64_t seed) {
  const FeatureEncoder& e = ds.encoder;
  return {{"format", "graspdp-dataset"},
          {"version", 1},
          {"features", to_string(e.kind())},
          {"catalog_sizes", e.catalog_sizes()},
          {"grasp_mode", e.grasp_mode() == GraspMode::AllAssigned ? "all-assigned" : "with-null"},
          {"horizon", e.horizon()},
          {"num_features", e.dim()},
          {"num_actions", ds.num_actions},
          {"rows", ds.rows.size()},
          {"seed", seed},
          {"trajectories", ds.trajectories}};
}

BcDataset read_dataset(const std::filesystem::path& dir) {
  const json meta = json::parse(read_text_file(dir / "dataset_meta.json"));
  BcDataset ds;
  ds.encoder = FeatureEncoder(feature_kind_from_string(meta.at("features").get<std::string>()),
                              meta.at("catalog_sizes").get<std::vector<std::size_t>>(),
                              meta.at("grasp_mode").get<std::string>() == "all-assigned" ? GraspMode::AllAssigned : GraspMode::WithNull,
                              meta.at("horizon").get<int>());
  ds.num_actions = meta.at("num_actions").get<std::size_t>();
  ds.trajectories = meta.at("trajectories").get<std::vector<std::string>>();
  std::ifstream in(dir / "dataset.jsonl");
  if (!in) throw std::runtime_error("cannot open " + (dir / "dataset.jsonl").string());
  ds.rows = BcDataset::read_jsonl(in);
  return ds;
}

int gen_dataset_cmd(const Common& common) {
  const ExperimentConfig cfg = load(common);
  const auto hand = load_experiment_hand(cfg);
  const TrajectorySuites suites = make_trajectory_suite(cfg, load_experiment_tool(cfg));
  log_line("solving DP on " + std::to_string(suites.training.size()) + " training trajectories");
  const auto solved = solve_training_suite(hand, suites, cfg);
  const BcDataset ds = generate_bc_dataset(solved, cfg.features, cfg.seed);
  std::ostringstream rows;
  ds.write_jsonl(rows);
  write_text_file(cfg.output_dir / "dataset.jsonl", rows.str());
  write_text_file(cfg.output_dir / "dataset_meta.json", meta_json(ds, cfg.seed).dump(2) + "\n");
  std::printf("wrote %zu rows (%zu features, %zu actions) to %s\n", ds.rows.size(), ds.encoder.dim(), ds.num_actions,
              (cfg.output_dir / "dataset.jsonl").string().c_str());
  return 0;
}

int train_bc_cmd(const Common& common, const std::string& dataset_dir) {
  const ExperimentConfig cfg = load(common);
  const std::filesystem::path dir = dataset_dir.empty() ? cfg.output_dir : std::filesystem::path(dataset_dir);
  const BcDataset ds = read_dataset(dir);
  TrainConfig tc = cfg.training;
  tc.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult tr = train_bc(ds, tc, cfg.env.r_min);
  const double seconds = since(t0);
  write_text_file(cfg.output_dir / "policy.json", tr.policy.to_json() + "\n");

  write_text_file(cfg.output_dir / "training_metrics.csv", training_metrics_csv(tr.history));
  std::printf("rows %zu, epochs %d, %.2f s\n", ds.rows.size(), tc.epochs, seconds);
  if (tr.history.empty()) return 0;
  const EpochMetrics& last = tr.history.back();
  std::printf("train accuracy %.4f, value mse %.4g\n", last.train_accuracy, last.train_value_mse);
  if (last.validation_accuracy) {
    std::printf("validation accuracy %.4f, value mse %.4g\n", *last.validation_accuracy, *last.validation_value_mse);
  }
  return 0;
}

void print_summary(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') std::printf("%s\n", line.c_str());
  }
}

int run_cmd(const Common& common) {
  const ExperimentConfig cfg = load(common);
  const ExperimentResult result = run_experiment(cfg, log_line);
  write_experiment_outputs(result, cfg.output_dir);
  const PlotData plots = emit_plot_data(result.records);
  for (const std::string& w : plots.warnings) log_line("warning: " + w);
  print_summary(plots.files.at("summary.csv"));
  return 0;
}

int plot_data_cmd(const Common& common) {
  const std::filesystem::path dir = common.out ? std::filesystem::path(*common.out) : std::filesystem::path("out");
  const std::string timing_path = (dir / "timing.csv").string();
  const std::string timing = std::filesystem::exists(timing_path) ? read_text_file(timing_path) : std::string();
  const auto records = parse_results_csv(read_text_file(dir / "results.csv"), timing);
  const PlotData plots = emit_plot_data(records);
  for (const auto& [name, text] : plots.files) write_text_file(dir / name, text);
  for (const std::string& w : plots.warnings) log_line("warning: " + w);
  print_summary(plots.files.at("summary.csv"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grasp-sequence planning with dynamic programming and lookahead"};
  app.require_subcommand(1);

  Common common;
  std::string trajectory = "nominal_tq+";
  bool dump_rewards = false;
  std::string dataset_dir;

  auto* solve = app.add_subcommand("solve-dp", "solve one trajectory exhaustively and write its value table");
  add_common(solve, common);
  solve->add_option("--trajectory", trajectory, "trajectory name (default nominal_tq+)");
  solve->add_flag("--dump-rewards", dump_rewards, "also write every (grasp, time, action) reward");

  auto* gen = app.add_subcommand("gen-dataset", "solve the training suite and write the behavior-cloning dataset");
  add_common(gen, common);

  auto* train = app.add_subcommand("train-bc", "train the base policy on a generated dataset");
  add_common(train, common);
  train->add_option("--dataset", dataset_dir, "directory holding dataset.jsonl (default: --out)");

  auto* run = app.add_subcommand("run", "run every condition on the configured evaluation suites");
  add_common(run, common);

  auto* plot = app.add_subcommand("plot-data", "recompute summary and figure CSVs from results.csv");
  add_common(plot, common, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return solve_dp_cmd(common, trajectory, dump_rewards);
    if (gen->parsed()) return gen_dataset_cmd(common);
    if (train->parsed()) return train_bc_cmd(common, dataset_dir);
    if (run->parsed()) return run_cmd(common);
    if (plot->parsed()) return plot_data_cmd(common);
  } catch (const std::exception& e) {
    std::cerr << "graspdp: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
