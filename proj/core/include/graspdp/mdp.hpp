#pragma once

// Finite-horizon deterministic MDP engine: Bellman-backup dynamic programming,
// depth-l exhaustive lookahead and m-step policy rollout.
//
// Time convention: a horizon of T gives time slices 0..T-1. Decisions are
// taken at slices 0..T-2 and slice T-1 is terminal (its value is the
// terminal reward). A rollout or lookahead never steps past slice T-1.

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "graspdp/parallel.hpp"

namespace graspdp {

/// Reward/value assigned to unreachable or forbidden transitions. Finite so
/// that sums stay finite; anything at or below it is treated as unreachable.
inline constexpr double kUnreachable = -1e12;

template <class State>
struct Transition {
  State next;
  double reward = 0.0;
};

template <class M>
concept FiniteHorizonMdp = requires(const M& m, const typename M::State& s, int t, std::size_t a) {
  typename M::State;
  { m.horizon() } -> std::convertible_to<int>;
  { m.num_actions(s, t) } -> std::convertible_to<std::size_t>;
  { m.transition(s, t, a) } -> std::same_as<Transition<typename M::State>>;
  { m.terminal_reward(s) } -> std::convertible_to<double>;
};

template <class M>
concept EnumerableMdp =
    FiniteHorizonMdp<M> && requires(const M& m, const typename M::State& s, std::size_t i) {
      { m.num_states() } -> std::convertible_to<std::size_t>;
      { m.state_at(i) } -> std::convertible_to<typename M::State>;
      { m.state_index(s) } -> std::convertible_to<std::size_t>;
    };

/// Sum of two reward-unit quantities that propagates the unreachable sentinel.
inline double add_value(double a, double b) {
  if (a <= kUnreachable || b <= kUnreachable) return kUnreachable;
  return a + b;
}

/// Dense (state x time) table stored slice-major.
template <class T>
class StateTimeTable {
 public:
  StateTimeTable() = default;
  StateTimeTable(std::size_t states, int horizon, T fill = T{})
      : states_(states), horizon_(horizon), data_(states * static_cast<std::size_t>(horizon), fill) {}

  std::size_t num_states() const { return states_; }
  int horizon() const { return horizon_; }

  T& at(std::size_t s, int t) { return data_[offset(s, t)]; }
  const T& at(std::size_t s, int t) const { return data_[offset(s, t)]; }

  const std::vector<T>& raw() const { return data_; }

 private:
  std::size_t offset(std::size_t s, int t) const {
    if (s >= states_ || t < 0 || t >= horizon_) throw std::out_of_range("state/time index out of table range");
    return static_cast<std::size_t>(t) * states_ + s;
  }

  std::size_t states_ = 0;
  int horizon_ = 0;
  std::vector<T> data_;
};

using ValueTable = StateTimeTable<double>;
using PolicyTable = StateTimeTable<std::uint32_t>;

struct DpSolution {
  ValueTable values;
  PolicyTable policy;
};

/// Exhaustive backward Bellman sweep. States within one slice are
/// independent given the next slice and are swept on `workers` threads.
template <EnumerableMdp M>
DpSolution solve_dp(const M& mdp, int workers = 1) {
  const int horizon = mdp.horizon();
  if (horizon < 1) throw std::invalid_argument("solve_dp: horizon must be >= 1");
  const std::size_t states = mdp.num_states();
  if (states == 0) throw std::invalid_argument("solve_dp: empty state space");

  DpSolution sol{ValueTable(states, horizon, 0.0), PolicyTable(states, horizon, 0u)};
  for (std::size_t s = 0; s < states; ++s) {
    sol.values.at(s, horizon - 1) = mdp.terminal_reward(mdp.state_at(s));
  }
  for (int t = horizon - 2; t >= 0; --t) {
    parallel_for(states, workers, [&](std::size_t s) {
      const auto state = mdp.state_at(s);
      const std::size_t actions = mdp.num_actions(state, t);
      if (actions == 0) throw std::invalid_argument("solve_dp: empty action space at state " + std::to_string(s));
      double best = -std::numeric_limits<double>::infinity();
      std::uint32_t best_action = 0;
      for (std::size_t a = 0; a < actions; ++a) {
        const auto tr = mdp.transition(state, t, a);
        const double q = add_value(tr.reward, sol.values.at(mdp.state_index(tr.next), t + 1));
        if (q > best) {
          best = q;
          best_action = static_cast<std::uint32_t>(a);
        }
      }
      sol.values.at(s, t) = best;
      sol.policy.at(s, t) = best_action;
    });
  }
  return sol;
}

/// Largest |V[s,t] - max_a (R + V[T(s,a), t+1])| over all decision slices.
template <EnumerableMdp M>
double bellman_residual(const M& mdp, const DpSolution& sol) {
  double worst = 0.0;
  for (int t = mdp.horizon() - 2; t >= 0; --t) {
    for (std::size_t s = 0; s < mdp.num_states(); ++s) {
      const auto state = mdp.state_at(s);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mdp.num_actions(state, t); ++a) {
        const auto tr = mdp.transition(state, t, a);
        best = std::max(best, add_value(tr.reward, sol.values.at(mdp.state_index(tr.next), t + 1)));
      }
      worst = std::max(worst, std::abs(sol.values.at(s, t) - best));
    }
  }
  return worst;
}

/// Rollout depth: a step count, or "run to the end of the episode".
class RolloutDepth {
 public:
  static RolloutDepth steps(int m) {
    if (m < 0) throw std::invalid_argument("rollout depth must be >= 0");
    return RolloutDepth(m);
  }
  static RolloutDepth to_end() { return RolloutDepth(-1); }

  bool is_to_end() const { return steps_ < 0; }
  int count() const { return steps_; }

 private:
  explicit RolloutDepth(int s) : steps_(s) {}
  int steps_;
};

template <class State>
using ValueEstimator = std::function<double(const State&, int)>;

template <class State>
using BasePolicy = std::function<std::size_t(const State&, int)>;

template <class State>
double zero_value(const State&, int) {
  return 0.0;
}

/// Follows `base` for up to m steps (never past the terminal slice) and adds
/// the value of the state reached: the MDP terminal reward when that state
/// is on the terminal slice, otherwise `terminal_value`.
template <FiniteHorizonMdp M, class Policy, class Estimator>
double rollout(const M& mdp, const Policy& base, typename M::State state, int t, RolloutDepth m,
               const Estimator& terminal_value) {
  const int last = mdp.horizon() - 1;
  if (t < 0 || t > last) throw std::invalid_argument("rollout: time outside horizon");
  const int steps = m.is_to_end() ? last - t : std::min(m.count(), last - t);
  double v = 0.0;
  for (int k = 0; k < steps; ++k) {
    const std::size_t a = base(state, t);
    auto tr = mdp.transition(state, t, a);
    v = add_value(v, tr.reward);
    state = std::move(tr.next);
    ++t;
  }
  return add_value(v, t == last ? mdp.terminal_reward(state) : terminal_value(state, t));
}

template <class State>
struct LookaheadConfig {
  int depth = 1;
  RolloutDepth rollout = RolloutDepth::to_end();
  ValueEstimator<State> terminal_value = zero_value<State>;
  int workers = 1;
};

struct LookaheadResult {
  std::size_t action = 0;
  double value = 0.0;
};

namespace detail {

template <FiniteHorizonMdp M, class Policy>
double lookahead_value(const M& mdp, const Policy& base, const typename M::State& state, int t, int depth,
                       const LookaheadConfig<typename M::State>& config) {
  double best = -std::numeric_limits<double>::infinity();
  const std::size_t actions = mdp.num_actions(state, t);
  for (std::size_t a = 0; a < actions; ++a) {
    const auto tr = mdp.transition(state, t, a);
    const double tail = depth == 1 ? rollout(mdp, base, tr.next, t + 1, config.rollout, config.terminal_value)
                                   : lookahead_value(mdp, base, tr.next, t + 1, depth - 1, config);
    best = std::max(best, add_value(tr.reward, tail));
  }
  return best;
}

}  // namespace detail

/// Complete depth-l action tree from `state`, leaves scored by rollout of
/// `base`. Returns the maximizing root action (lowest index on ties) and
/// its value. Root branches are evaluated on `config.workers` threads.
template <FiniteHorizonMdp M, class Policy>
LookaheadResult lookahead(const M& mdp, const Policy& base, const typename M::State& state, int t,
                          const LookaheadConfig<typename M::State>& config) {
  if (config.depth < 1) throw std::invalid_argument("lookahead: depth must be >= 1");
  if (t < 0 || t + config.depth > mdp.horizon() - 1) {
    throw std::invalid_argument("lookahead: depth " + std::to_string(config.depth) + " exceeds remaining horizon at t=" +
                                std::to_string(t));
  }
  const std::size_t actions = mdp.num_actions(state, t);
  if (actions == 0) throw std::invalid_argument("lookahead: empty action space");

  std::vector<double> q(actions, kUnreachable);
  parallel_for(actions, config.workers, [&](std::size_t a) {
    const auto tr = mdp.transition(state, t, a);
    const double tail = config.depth == 1
                            ? rollout(mdp, base, tr.next, t + 1, config.rollout, config.terminal_value)
                            : detail::lookahead_value(mdp, base, tr.next, t + 1, config.depth - 1, config);
    q[a] = add_value(tr.reward, tail);
  });

  LookaheadResult result{0, q[0]};
  for (std::size_t a = 1; a < actions; ++a) {
    if (q[a] > result.value) result = {a, q[a]};
  }
  return result;
}

/// Lookahead used as a policy: depth is clamped to the remaining decisions.
template <FiniteHorizonMdp M, class Policy>
std::size_t lookahead_action(const M& mdp, const Policy& base, const typename M::State& state, int t,
                             LookaheadConfig<typename M::State> config) {
  config.depth = std::min(config.depth, mdp.horizon() - 1 - t);
  return lookahead(mdp, base, state, t, config).action;
}

template <class State>
struct TraceStep {
  State state;
  int t = 0;
  std::size_t action = 0;
  double reward = 0.0;
};

template <class State>
struct EpisodeTrace {
  std::vector<TraceStep<State>> steps;
  State final_state{};
  double terminal_reward = 0.0;
  double total = 0.0;
};

/// Runs `policy` from (s0, t0) to the terminal slice. The return includes
/// the terminal reward of the final state.
template <FiniteHorizonMdp M, class Policy>
EpisodeTrace<typename M::State> evaluate_policy(const M& mdp, const Policy& policy, typename M::State s0, int t0 = 0) {
  EpisodeTrace<typename M::State> trace{{}, s0, 0.0, 0.0};
  auto state = std::move(s0);
  const int last = mdp.horizon() - 1;
  for (int t = t0; t < last; ++t) {
    const std::size_t a = policy(state, t);
    auto tr = mdp.transition(state, t, a);
    trace.total = add_value(trace.total, tr.reward);
    trace.steps.push_back({state, t, a, tr.reward});
    state = std::move(tr.next);
  }
  trace.terminal_reward = mdp.terminal_reward(state);
  trace.total = add_value(trace.total, trace.terminal_reward);
  trace.final_state = std::move(state);
  return trace;
}

}  // namespace graspdp
