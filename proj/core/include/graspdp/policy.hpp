#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graspdp/env.hpp"
#include "graspdp/mdp.hpp"

namespace graspdp {

/// Base policy over the discretized environment. `act` returns an index
/// into mdp.actions(s); implementations must be deterministic and safe to
/// call concurrently.
class Policy {
 public:
  using State = DiscreteGraspMdp::State;

  virtual ~Policy() = default;
  virtual std::size_t act(const DiscreteGraspMdp& mdp, State s, int t) const = 0;
  virtual std::optional<double> value(const DiscreteGraspMdp&, State, int) const { return std::nullopt; }

  /// Action for a continuous environment state; throws std::invalid_argument
  /// when the state's grasp is outside the enumeration.
  GraspAction act(const DiscreteGraspMdp& mdp, const EnvState& state) const;
};

/// Binds a policy to one MDP so it can drive rollout/lookahead/evaluate_policy.
BasePolicy<Policy::State> bind(const Policy& policy, const DiscreteGraspMdp& mdp);

/// Terminal value estimator backed by the policy's value head; zero where
/// the policy has none.
ValueEstimator<Policy::State> bind_value(const Policy& policy, const DiscreteGraspMdp& mdp);

/// Stored DP tables, replayed on any MDP with the same grasp enumeration.
class TabularPolicy final : public Policy {
 public:
  explicit TabularPolicy(DpSolution solution);

  std::size_t act(const DiscreteGraspMdp& mdp, State s, int t) const override;
  std::optional<double> value(const DiscreteGraspMdp& mdp, State s, int t) const override;
  using Policy::act;

  const DpSolution& solution() const { return solution_; }

 private:
  void check(const DiscreteGraspMdp& mdp, int t) const;
  DpSolution solution_;
};

TabularPolicy tabular_from_dp(DpSolution solution);

/// Maximizes the immediate reward; ties go to the lowest action index.
class GreedyPolicy final : public Policy {
 public:
  std::size_t act(const DiscreteGraspMdp& mdp, State s, int t) const override;
  using Policy::act;
};

enum class FeatureKind {
  Full,         // time, grasp one-hot, waypoint pose, trajectory summary
  OneHotState,  // one-hot of (grasp index or dropped, time)
};

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

/// Feature map shared by dataset generation and inference. Layout (Full):
/// bias, t/(T-1), dropped flag, one digit-hot block per contactable slot,
/// tool position in the hand-base frame, tool height, external wrench (6),
/// tool mass, center-of-mass offset (3), then one block per time slice of
/// which only slice t is filled: a copy of the grasp digits, the torque about
/// z and the relative tool height. Linear scorers need the slice blocks to
/// express time-dependent preferences for the same grasp.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  FeatureEncoder(FeatureKind kind, std::vector<std::size_t> catalog_sizes, GraspMode grasp_mode, int horizon);
  static FeatureEncoder for_env(FeatureKind kind, const GraspEnv& env);

  FeatureKind kind() const { return kind_; }
  const std::vector<std::size_t>& catalog_sizes() const { return catalog_; }
  GraspMode grasp_mode() const { return mode_; }
  int horizon() const { return horizon_; }
  std::size_t dim() const { return dim_; }

  /// Throws std::invalid_argument if the MDP does not match this encoder.
  void check(const DiscreteGraspMdp& mdp) const;
  void encode(const DiscreteGraspMdp& mdp, Policy::State s, int t, std::vector<double>& out) const;
  std::vector<double> encode(const DiscreteGraspMdp& mdp, Policy::State s, int t) const;

 private:
  FeatureKind kind_ = FeatureKind::Full;
  std::vector<std::size_t> catalog_;
  GraspMode mode_ = GraspMode::AllAssigned;
  GraspSpace space_;
  int horizon_ = 0;
  std::size_t dim_ = 0;
};

struct BcRow {
  std::vector<double> features;
  std::uint32_t action = 0;
  double value = 0.0;
  int trajectory_id = 0;
  int t = 0;
  std::uint32_t state = 0;
};

struct BcDataset {
  FeatureEncoder encoder;
  std::size_t num_actions = 0;
  std::vector<std::string> trajectories;  // names, indexed by trajectory_id
  std::vector<BcRow> rows;

  /// One JSON object per line: {features, action, value, trajectory_id, t, state}.
  void write_jsonl(std::ostream& os) const;
  /// Rows only; the encoder and trajectory names are not part of the row format.
  static std::vector<BcRow> read_jsonl(std::istream& is);

  /// Keeps the first row of each distinct feature vector.
  BcDataset deduplicated() const;
  /// Rows whose trajectory_id is (or is not) in `ids`.
  BcDataset subset(const std::vector<int>& ids, bool keep) const;
};

/// Forward closure of the MDP from its initial state under every action.
/// Entry t lists the non-dropped states reachable at slice t (t < T-1).
std::vector<std::vector<Policy::State>> reachable_states(const DiscreteGraspMdp& mdp);

struct SolvedTrajectory {
  std::shared_ptr<const DiscreteGraspMdp> mdp;
  DpSolution solution;
};

/// One row per reachable (non-dropped state, decision slice) of each
/// trajectory with the stored DP action and value. Rows are shuffled with
/// `seed`.
BcDataset generate_bc_dataset(const std::vector<SolvedTrajectory>& trajectories, FeatureKind kind,
                              std::uint64_t seed);

struct TrainConfig {
  int epochs = 300;
  std::size_t batch_size = 64;
  double learning_rate = 0.02;
  double value_weight = 1.0;  // multiplies the value loss
  double l2 = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> validation_trajectories;
  /// Drop rows whose stored value is at or below r_min (states from which
  /// the tool is always lost); their stored action carries no signal.
  bool skip_doomed = false;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double train_value_mse = 0.0;
  std::optional<double> validation_accuracy;
  std::optional<double> validation_value_mse;
};

/// Linear softmax action scorer plus linear value head over standardized
/// features. Values are learned in units of |r_min| and clamped to
/// [r_min * T, 0] at inference.
class ApproxPolicy final : public Policy {
 public:
  ApproxPolicy() = default;
  ApproxPolicy(FeatureEncoder encoder, std::size_t num_actions, double r_min);

  std::size_t act(const DiscreteGraspMdp& mdp, State s, int t) const override;
  std::optional<double> value(const DiscreteGraspMdp& mdp, State s, int t) const override;
  using Policy::act;

  /// Raw scores (one per action) and value for a feature vector.
  std::vector<double> scores(const std::vector<double>& features) const;
  double value_of(const std::vector<double>& features) const;
  std::size_t best_action(const std::vector<double>& features, std::size_t available) const;

  const FeatureEncoder& encoder() const { return encoder_; }
  std::size_t num_actions() const { return actions_; }
  std::size_t num_features() const { return encoder_.dim(); }
  double r_min() const { return r_min_; }

  // Parameters. Policy weights are row-major (action, feature).
  std::vector<double> mean, scale, policy_weights, value_weights;
  TrainConfig trained_with;

  std::string to_json() const;
  static ApproxPolicy from_json(const std::string& text);

 private:
  void standardize(const std::vector<double>& in, std::vector<double>& out) const;

  FeatureEncoder encoder_;
  std::size_t actions_ = 0;
  double r_min_ = -1000.0;
};

struct TrainResult {
  ApproxPolicy policy;
  std::vector<EpochMetrics> history;
};

/// Adam on cross-entropy (actions) plus value_weight times squared error
/// (values). Rows in `config.validation_trajectories` are held out.
/// Single-threaded; identical inputs give identical weights.
TrainResult train_bc(const BcDataset& dataset, const TrainConfig& config, double r_min = -1000.0);

/// Fraction of rows whose predicted action equals the stored action.
double action_agreement(const ApproxPolicy& policy, const std::vector<BcRow>& rows, std::size_t available);

ApproxPolicy load_policy(const std::filesystem::path& path);

}  // namespace graspdp
