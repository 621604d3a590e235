#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "graspdp/env.hpp"
#include "graspdp/model_io.hpp"
#include "graspdp/trajectory.hpp"
#include "support/test_mdps.hpp"

using namespace graspdp;
using graspdp::testing::reduced_hand;
using graspdp::testing::short_episode;

namespace {

std::shared_ptr<const HandModel> shared_reduced() {
  static const auto hand = std::make_shared<const HandModel>(reduced_hand());
  return hand;
}

// First grasp whose NoOp step at t = 0 survives.
std::optional<Grasp> stable_grasp(const GraspEnv& env) {
  for (std::size_t i = 0; i < env.space().size(); ++i) {
    const Grasp g = env.space().at(i);
    if (!env.reward_terms(g, GraspAction::noop(), 0).terminated) return g;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("nominal trajectory waypoints") {
  TrajectoryParams p;
  const EpisodeInput e = make_episode(p, default_tool(), "nominal");
  REQUIRE(e.horizon == 16);
  REQUIRE(e.waypoints.size() == 16);
  CHECK((e.waypoints.front().tool.position - Vec3(0, 0, 0.014)).norm() <= 1e-15);
  CHECK((e.waypoints.back().tool.position - Vec3(0, 0, 0.06)).norm() <= 1e-15);
  // The surface the tool starts on lies 15 cm below the palm.
  CHECK(e.waypoints.front().hand_base.position.z() == doctest::Approx(0.15));
  CHECK(e.external_wrench[5] == 1.0);
  CHECK(e.waypoints.front().velocity.norm() == 0.0);
  CHECK(e.waypoints.back().velocity.norm() <= 1e-15);
  for (std::size_t k = 1; k < e.waypoints.size(); ++k) {
    CHECK(e.waypoints[k].tool.position.z() > e.waypoints[k - 1].tool.position.z());
  }

  p.mass_scale = 2.0;
  p.com_offset_y = 0.01;
  const EpisodeInput heavy = make_episode(p, default_tool(), "heavy");
  CHECK(heavy.tool.mass == doctest::Approx(0.7));
  CHECK(heavy.tool.com_offset.y() == doctest::Approx(0.01));
  p.waypoints = 1;
  CHECK_THROWS_AS(make_episode(p, default_tool(), "bad"), std::invalid_argument);
}

TEST_CASE("episode validation") {
  EpisodeInput e = *short_episode(4);
  CHECK_NOTHROW(e.validate());
  e.horizon = 3;
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
  e = *short_episode(4);
  e.external_wrench[0] = std::nan("");
  CHECK_THROWS_AS(e.validate(), std::invalid_argument);
}

TEST_CASE("step is deterministic and NoOp is never penalized") {
  const GraspEnv env(shared_reduced(), short_episode(4));
  for (std::size_t i = 0; i < env.space().size(); ++i) {
    const EnvState s = env.state_for(env.space().at(i), 1);
    const StepResult a = env.step(s, GraspAction::noop());
    const StepResult b = env.step(s, GraspAction::noop());
    CHECK(a.reward == b.reward);
    CHECK(a.next.q == b.next.q);
    CHECK(a.terms.penalty == 0.0);
    CHECK(a.next.t == 2);
  }
  const EnvState last = env.state_for(env.initial_grasp(), 3);
  CHECK_THROWS_AS(env.step(last, GraspAction::noop()), std::out_of_range);
}

TEST_CASE("redundant Set costs exactly the penalty") {
  const GraspEnv env(shared_reduced(), short_episode(4));
  const auto g = stable_grasp(env);
  REQUIRE(g.has_value());
  const RewardTerms noop = env.reward_terms(*g, GraspAction::noop(), 0);
  const RewardTerms same = env.reward_terms(*g, GraspAction::set(0, g->pairing[0]), 0);
  CHECK_FALSE(noop.terminated);
  CHECK(same.penalty == 0.01);
  CHECK(same.reward == doctest::Approx(noop.reward - 0.01).epsilon(1e-15));
  CHECK(noop.reward == doctest::Approx(-(noop.wrench_motion + noop.ik_error + noop.wrench_gravity)));
  CHECK(noop.wrench_external == 0.0);
}

TEST_CASE("rewards are nonpositive and equal r_min exactly on termination") {
  const auto mdp = discretize(shared_reduced(), short_episode(4));
  for (std::uint32_t s = 0; s + 1 < mdp.num_states(); ++s) {
    for (int t = 0; t < 3; ++t) {
      for (std::size_t a = 0; a < mdp.num_actions(s, t); ++a) {
        const auto tr = mdp.transition(s, t, a);
        CHECK(tr.reward <= 0.0);
        const RewardTerms terms = mdp.env().reward_terms(mdp.env().space().at(s), mdp.actions(s)[a], t);
        CHECK((tr.reward == -1000.0) == terms.terminated);
        CHECK((tr.next == mdp.dropped()) == terms.terminated);
      }
    }
  }
  // The dropped state absorbs with zero reward.
  CHECK(mdp.num_actions(mdp.dropped(), 0) == 1);
  CHECK(mdp.transition(mdp.dropped(), 0, 0).next == mdp.dropped());
  CHECK(mdp.transition(mdp.dropped(), 0, 0).reward == 0.0);
}

TEST_CASE("the external wrench term appears only on the last step") {
  const GraspEnv env(shared_reduced(), short_episode(4));
  const auto g = stable_grasp(env);
  REQUIRE(g.has_value());
  CHECK(env.reward_terms(*g, GraspAction::noop(), 1).wrench_external == 0.0);
  const auto last = env.evaluate(*g, 3);
  CHECK(env.reward_terms(*g, GraspAction::noop(), 2).wrench_external == last->wrench_external);
}

TEST_CASE("removing every link drops the tool") {
  EnvConfig cfg;
  cfg.grasp_mode = GraspMode::WithNull;
  cfg.action_mode = ActionMode::WithRemoval;
  const GraspEnv env(shared_reduced(), short_episode(4), cfg);
  Grasp g = env.space().at(env.space().size() - 1);
  for (std::size_t k = 0; k + 1 < g.pairing.size(); ++k) g.pairing[k] = kNullContact;
  const StepResult r = env.step(env.state_for(g, 0), GraspAction::remove(g.pairing.size() - 1));
  CHECK(r.terminated);
  CHECK(r.reward == -1000.0);
  CHECK(r.terms.falling);
  CHECK(r.next.grasp.assigned_count() == 0);
  // A terminated state only offers NoOp and stays terminated.
  CHECK(env.actions(r.next).size() == 1);
  CHECK(env.step(r.next, GraspAction::noop()).terminated);
}

TEST_CASE("discretized grid for the default hand") {
  const auto mdp = discretize(std::make_shared<const HandModel>(default_hand()), short_episode(16));
  CHECK(mdp.num_states() == 289);
  CHECK(mdp.horizon() == 16);
  CHECK(mdp.initial_state() == 0u);
  for (std::uint32_t s = 0; s < 288; s += 37) CHECK(mdp.actions(s).size() == 17);
}

TEST_CASE("actions reaching the same grasp share a successor") {
  const auto mdp = discretize(shared_reduced(), short_episode(4));
  const std::uint32_t s = 5;
  const Grasp g = mdp.env().space().at(s);
  const auto& actions = mdp.actions(s);
  std::size_t redundant = 0;
  for (std::size_t a = 1; a < actions.size(); ++a) {
    if (actions[a] == GraspAction::set(1, g.pairing[1])) redundant = a;
  }
  REQUIRE(redundant > 0);
  const auto noop = mdp.transition(s, 0, 0), same = mdp.transition(s, 0, redundant);
  if (noop.next != mdp.dropped()) {
    CHECK(noop.next == s);
    CHECK(same.next == s);
  }
}

TEST_CASE("DP value is the same with and without memoization") {
  EnvConfig off;
  off.memoize = false;
  const auto a = discretize(shared_reduced(), short_episode(3));
  const auto b = discretize(shared_reduced(), short_episode(3), off);
  const DpSolution sa = solve_dp(a), sb = solve_dp(b);
  CHECK(sa.values.at(a.initial_state(), 0) == sb.values.at(b.initial_state(), 0));
  CHECK(sa.values.raw() == sb.values.raw());
  CHECK(a.env().evaluations_computed() < b.env().evaluations_computed());
}

TEST_CASE("reward dump rows") {
  const auto mdp = discretize(shared_reduced(), short_episode(3));
  std::ostringstream os;
  mdp.dump_rewards(os);
  std::istringstream is(os.str());
  std::string line;
  std::size_t rows = 0;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.rfind("grasp_index,time,action_index,reward,successor_index", 0) == 0) header = true;
    else if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(header);
  // 36 grasps x 2 decision slices x 11 actions.
  CHECK(rows == 36 * 2 * 11);
}

TEST_CASE("hold: free fall matches the closed form") {
  TrajectoryParams p;
  p.floor = false;
  EpisodeInput e = make_episode(p, default_tool(), "fall");
  e.hold_duration = 0.1;
  EnvConfig cfg;
  cfg.grasp_mode = GraspMode::WithNull;
  const GraspEnv env(shared_reduced(), std::make_shared<const EpisodeInput>(e), cfg);
  const Grasp none = env.space().at(0);
  REQUIRE(none.assigned_count() == 0);
  const EnvState last = env.state_for(none, e.horizon - 1);

  const double g = 9.81, T = 0.1, dt = 1e-3;
  const double continuous = g * g * std::pow(T, 5) / 20.0;
  // Semi-implicit Euler drop after n steps: g dt^2 n (n + 1) / 2.
  double discrete = 0.0;
  for (int n = 1; n <= 100; ++n) discrete += std::pow(g * dt * dt * n * (n + 1) / 2.0, 2) * dt;

  const double cost = evaluate_hold(env, last, Vec6::Zero(), T);
  CHECK(cost == doctest::Approx(discrete).epsilon(1e-9));
  CHECK(cost == doctest::Approx(continuous).epsilon(0.03));
}

TEST_CASE("hold: no load means no motion and zero cost") {
  EnvConfig cfg;
  cfg.gravity = Vec3::Zero();
  const GraspEnv env(shared_reduced(), short_episode(4), cfg);
  const EnvState last = env.state_for(env.space().at(0), 3);
  CHECK(evaluate_hold(env, last, Vec6::Zero(), 0.5) == 0.0);
}

TEST_CASE("hold: dropped episodes and floor strikes score pi for the rest of the hold") {
  EnvConfig cfg;
  cfg.grasp_mode = GraspMode::WithNull;
  const GraspEnv env(shared_reduced(), short_episode(4), cfg);
  EnvState dropped = env.state_for(env.space().at(0), 3);
  dropped.terminated = true;
  CHECK(evaluate_hold(env, dropped, Vec6::Zero(), 2.0) == doctest::Approx(2.0 * std::numbers::pi));

  // Free fall onto the floor: the bottom face reaches z = 0 after sqrt(2 d / g).
  const EnvState last = env.state_for(env.space().at(0), 3);
  const double drop = env.episode().waypoints.back().tool.position.z() - default_tool().half_extents.z();
  const double hit = std::sqrt(2.0 * drop / 9.81);
  const double cost = evaluate_hold(env, last, Vec6::Zero(), 1.0);
  CHECK(cost >= std::numbers::pi * (1.0 - hit - 2e-3));
  CHECK(cost <= std::numbers::pi * (1.0 - hit + 2e-3) + 0.01);
  CHECK_THROWS_AS(evaluate_hold(env, env.state_for(env.space().at(0), 2), Vec6::Zero(), 1.0), std::invalid_argument);
}

TEST_CASE("hold cost is nonnegative on real grasps") {
  const GraspEnv env(shared_reduced(), short_episode(4));
  for (std::size_t i = 0; i < env.space().size(); i += 5) {
    const EnvState last = env.state_for(env.space().at(i), 3);
    CHECK(evaluate_hold(env, last, env.episode().external_wrench, 0.2) >= 0.0);
  }
}
