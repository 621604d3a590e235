#include <random>

#include <benchmark/benchmark.h>

#include "graspdp/model_io.hpp"
#include "graspdp/policy.hpp"
#include "graspdp/trajectory.hpp"
#include "graspdp/wrench.hpp"

namespace {

using namespace graspdp;

std::shared_ptr<const EpisodeInput> episode(int waypoints) {
  TrajectoryParams p;
  p.waypoints = waypoints;
  return std::make_shared<const EpisodeInput>(make_episode(p, default_tool(), "bench"));
}

ContactSet random_contacts(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  ContactSet s;
  for (int i = 0; i < n; ++i) {
    Contact c;
    c.position = 0.03 * Vec3(g(rng), g(rng), g(rng));
    c.normal = -c.position.normalized();
    c.friction = 0.6;
    s.contacts.push_back(c);
  }
  return s;
}

void BM_WrenchError(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const ContactSet contacts = random_contacts(rng, static_cast<int>(state.range(0)));
  Vec6 w;
  w << 0.2, -0.1, 3.4, 0.01, -0.02, 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(wrench_error(contacts, w, WrenchWeights{}, 1e-3).error);
}
BENCHMARK(BM_WrenchError)->Arg(2)->Arg(4)->Arg(6);

void BM_SolveIk(benchmark::State& state) {
  const HandModel hand = default_hand();
  const ToolModel tool = default_tool();
  const Pose base = Pose::translation({0, 0, 0.15});
  const Pose tool_pose = Pose::translation({0, 0, 0.05});
  const std::vector<Obstacle> floor{Plane{Vec3::UnitZ(), 0.0}};
  std::vector<IkAssignment> assign;
  for (std::size_t link : hand.contactable_links()) assign.push_back({link, 0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_ik(hand, base, hand.mid_range(), assign, tool, tool_pose, floor).ik_error);
  }
}
BENCHMARK(BM_SolveIk)->Unit(benchmark::kMicrosecond);

// Full DP on the default hand; every iteration starts from an empty cache.
void BM_SolveDp(benchmark::State& state) {
  const auto hand = std::make_shared<const HandModel>(default_hand());
  const auto ep = episode(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const DiscreteGraspMdp mdp(std::make_shared<const GraspEnv>(hand, ep, EnvConfig{}));
    benchmark::DoNotOptimize(solve_dp(mdp).values.at(mdp.initial_state(), 0));
  }
}
BENCHMARK(BM_SolveDp)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

// One online lookahead decision from the initial grasp with a greedy base.
void BM_Lookahead(benchmark::State& state) {
  const auto hand = std::make_shared<const HandModel>(default_hand());
  const auto ep = episode(16);
  const GreedyPolicy greedy;
  LookaheadConfig<DiscreteGraspMdp::State> cfg;
  cfg.depth = static_cast<int>(state.range(0));
  for (auto _ : state) {
    const DiscreteGraspMdp mdp(std::make_shared<const GraspEnv>(hand, ep, EnvConfig{}));
    benchmark::DoNotOptimize(lookahead(mdp, bind(greedy, mdp), mdp.initial_state(), 0, cfg).action);
  }
}
BENCHMARK(BM_Lookahead)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
