#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "graspdp/grasp_space.hpp"
#include "graspdp/hand.hpp"
#include "graspdp/mdp.hpp"
#include "graspdp/wrench.hpp"

namespace graspdp {

/// Reference tool state at one waypoint plus the hand base pose planned for it.
struct Waypoint {
  Pose tool;
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  Vec3 angular_acceleration = Vec3::Zero();
  Pose hand_base;
};

/// Everything the planner is told at the start of an episode.
struct EpisodeInput {
  std::string name = "episode";
  std::vector<Waypoint> waypoints;
  int horizon = 0;  // T, equal to the waypoint count
  ToolModel tool;
  /// Wrench applied to the tool by the environment once it reaches the final
  /// pose: force (N) and torque about the center of mass (N m).
  Vec6 external_wrench = Vec6::Zero();
  double hold_duration = 2.0;  // s
  std::vector<Obstacle> obstacles;
  std::optional<Grasp> initial_grasp;

  void validate() const;
};

struct RewardWeights {
  double wrench_motion = 1.0;
  double ik = 1.0;
  double wrench_gravity = 1.0;
  double wrench_external = 1.0;
};

struct EnvConfig {
  GraspMode grasp_mode = GraspMode::AllAssigned;
  ActionMode action_mode = ActionMode::SetOnly;
  RewardWeights weights;
  double r_min = -1000.0;
  double redundant_penalty = 0.01;
  double falling_threshold = 0.5;
  /// An assigned link whose IK residual exceeds this is not touching the tool.
  double contact_tolerance = 0.005;  // m
  WrenchOptions wrench;
  IkOptions ik;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  bool memoize = true;
};

/// A grasp realized by IK at one waypoint, with its wrench errors.
struct GraspEvaluation {
  IkResult ik;
  ContactSet contacts;
  std::vector<bool> in_contact;  // per contactable slot
  double wrench_motion = 0.0;    // vs gravity + reference motion
  double wrench_gravity = 0.0;   // vs gravity alone
  double wrench_external = 0.0;  // vs gravity + external wrench (final waypoint only)
};

struct RewardTerms {
  double wrench_motion = 0.0;    // post-action grasp at the current waypoint
  double ik_error = 0.0;         // post-action grasp at the next waypoint
  double wrench_gravity = 0.0;   // after the second IK
  double wrench_external = 0.0;  // only when the next waypoint is the last
  double penalty = 0.0;          // redundant non-NoOp action
  bool collision = false;
  bool falling = false;
  bool terminated = false;
  double reward = 0.0;
};

struct EnvState {
  int t = 0;
  Grasp grasp;
  Eigen::VectorXd q;
  Pose tool_pose;
  Vec3 tool_velocity = Vec3::Zero();
  Vec3 tool_angular_velocity = Vec3::Zero();
  bool terminated = false;
  std::shared_ptr<const EpisodeInput> episode;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool terminated = false;
  RewardTerms terms;
};

/// Surrogate environment: grasp actions, IK realization and shaped reward.
/// Immutable after construction apart from the evaluation cache, which is
/// filled at most once per (grasp, waypoint) key and is safe to share
/// across threads.
class GraspEnv {
 public:
  using State = EnvState;

  GraspEnv(std::shared_ptr<const HandModel> hand, std::shared_ptr<const EpisodeInput> episode, EnvConfig config = {});
  GraspEnv(const GraspEnv&) = delete;
  GraspEnv& operator=(const GraspEnv&) = delete;

  int horizon() const { return episode_->horizon; }
  const HandModel& hand() const { return *hand_; }
  const EpisodeInput& episode() const { return *episode_; }
  std::shared_ptr<const EpisodeInput> episode_ptr() const { return episode_; }
  const EnvConfig& config() const { return config_; }
  const GraspSpace& space() const { return space_; }
  const std::vector<std::size_t>& catalog_sizes() const { return catalog_; }

  Grasp initial_grasp() const;
  EnvState initial_state() const;
  /// State at waypoint t holding `grasp` as realized by the canonical IK.
  EnvState state_for(const Grasp& grasp, int t) const;

  /// Planner action list for a state: NoOp first. Terminated states only offer NoOp.
  std::vector<GraspAction> actions(const EnvState& state) const;

  /// Applies `action` at state.t < T-1 and moves to the next waypoint.
  StepResult step(const EnvState& state, const GraspAction& action) const;

  RewardTerms reward_terms(const Grasp& current, const GraspAction& action, int t) const;
  std::shared_ptr<const GraspEvaluation> evaluate(const Grasp& grasp, int waypoint) const;

  Vec6 gravity_wrench(int waypoint) const;   // contact wrench that holds the tool still
  Vec6 motion_wrench(int waypoint) const;    // ... and produces the reference motion
  Vec6 external_wrench() const;              // ... at the final pose under the external load
  ContactSet contact_set(const Grasp& grasp, const IkResult& ik, int waypoint, std::vector<bool>* in_contact) const;

  // FiniteHorizonMdp surface.
  std::size_t num_actions(const EnvState& state, int t) const;
  Transition<EnvState> transition(const EnvState& state, int t, std::size_t action) const;
  double terminal_reward(const EnvState&) const { return 0.0; }

  std::size_t evaluations_computed() const { return computed_.load(); }

 private:
  GraspEvaluation compute(const Grasp& grasp, int waypoint) const;

  struct Slot {
    std::once_flag once;
    std::shared_ptr<const GraspEvaluation> value;
  };

  std::shared_ptr<const HandModel> hand_;
  std::shared_ptr<const EpisodeInput> episode_;
  EnvConfig config_;
  GraspSpace space_;
  std::vector<std::size_t> catalog_;
  Eigen::VectorXd q_start_;
  std::unique_ptr<Slot[]> cache_;
  mutable std::atomic<std::size_t> computed_{0};
};

/// The discretized environment: states are grasp indices (plus one absorbing
/// "dropped" state entered on termination), time is the waypoint index.
class DiscreteGraspMdp {
 public:
  using State = std::uint32_t;

  explicit DiscreteGraspMdp(std::shared_ptr<const GraspEnv> env);

  int horizon() const { return env_->horizon(); }
  std::size_t num_states() const { return env_->space().size() + 1; }
  State state_at(std::size_t i) const { return static_cast<State>(i); }
  std::size_t state_index(State s) const { return s; }
  State dropped() const { return static_cast<State>(env_->space().size()); }
  State initial_state() const;

  std::size_t num_actions(State s, int t) const;
  Transition<State> transition(State s, int t, std::size_t action) const;
  double terminal_reward(State) const { return 0.0; }

  const GraspEnv& env() const { return *env_; }
  std::shared_ptr<const GraspEnv> env_ptr() const { return env_; }
  const std::vector<GraspAction>& actions(State s) const;

  /// Discrete state of an environment state; throws std::invalid_argument
  /// when its grasp is outside the enumeration.
  State state_of(const EnvState& state) const;

  std::size_t reward_evaluations() const { return evaluations_.load(); }

  /// CSV rows grasp_index,time,action_index,reward,successor_index.
  void dump_rewards(std::ostream& os) const;

 private:
  std::shared_ptr<const GraspEnv> env_;
  std::vector<std::vector<GraspAction>> actions_;
  std::vector<GraspAction> dropped_actions_{GraspAction::noop()};
  mutable std::atomic<std::size_t> evaluations_{0};
};

DiscreteGraspMdp discretize(std::shared_ptr<const HandModel> hand, std::shared_ptr<const EpisodeInput> episode,
                            EnvConfig config = {});

struct HoldOptions {
  double dt = 1e-3;             // s
  double regularization = 0.0;  // force penalty used while holding
};

/// Quasi-static hold at the final pose: contact forces are the wrench-error
/// minimizers, any residual wrench accelerates the tool. Returns the time
/// integral of squared position error plus orientation angle error; a tool
/// that hits an obstacle, or a dropped episode, scores pi rad for the rest
/// of the hold.
double evaluate_hold(const GraspEnv& env, const EnvState& final_state, const Vec6& external_wrench, double duration,
                     const HoldOptions& options = {});

}  // namespace graspdp
