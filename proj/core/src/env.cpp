#include "graspdp/env.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace graspdp {

void EpisodeInput::validate() const {
  if (horizon < 1) throw std::invalid_argument("episode horizon must be at least 1");
  if (static_cast<std::size_t>(horizon) != waypoints.size()) {
    throw std::invalid_argument("episode horizon must equal the waypoint count");
  }
  for (const Waypoint& w : waypoints) {
    if (!w.tool.is_valid() || !w.hand_base.is_valid()) throw std::invalid_argument("waypoint pose is not a rigid transform");
    if (!w.velocity.allFinite() || !w.acceleration.allFinite() || !w.angular_velocity.allFinite() ||
        !w.angular_acceleration.allFinite()) {
      throw std::invalid_argument("waypoint derivatives must be finite");
    }
  }
  if (!external_wrench.allFinite()) throw std::invalid_argument("external wrench must be finite");
  if (!(hold_duration >= 0.0)) throw std::invalid_argument("hold duration must be non-negative");
  tool.validate();
}

GraspEnv::GraspEnv(std::shared_ptr<const HandModel> hand, std::shared_ptr<const EpisodeInput> episode, EnvConfig config)
    : hand_(std::move(hand)), episode_(std::move(episode)), config_(std::move(config)) {
  if (!hand_ || !episode_) throw std::invalid_argument("GraspEnv needs a hand and an episode");
  episode_->validate();
  for (std::size_t link : hand_->contactable_links()) {
    for (const ContactPairing& p : hand_->link(link).contacts) {
      if (p.tool_point >= episode_->tool.contact_points.size()) {
        throw std::invalid_argument("hand pairing on link '" + hand_->link(link).name + "' references unknown tool point");
      }
    }
  }
  space_ = GraspSpace(*hand_, config_.grasp_mode);
  catalog_ = hand_->catalog_sizes();
  q_start_ = hand_->mid_range();
  if (config_.memoize) {
    cache_ = std::make_unique<Slot[]>(space_.size() * static_cast<std::size_t>(episode_->horizon));
  }
  if (episode_->initial_grasp && !space_.valid(*episode_->initial_grasp)) {
    throw std::invalid_argument("initial grasp does not match the hand");
  }
}

Grasp GraspEnv::initial_grasp() const { return episode_->initial_grasp ? *episode_->initial_grasp : space_.at(0); }

EnvState GraspEnv::state_for(const Grasp& grasp, int t) const {
  if (t < 0 || t >= horizon()) throw std::out_of_range("waypoint index out of range");
  const Waypoint& w = episode_->waypoints[static_cast<std::size_t>(t)];
  EnvState s;
  s.t = t;
  s.grasp = grasp;
  s.q = evaluate(grasp, t)->ik.q;
  s.tool_pose = w.tool;
  s.tool_velocity = w.velocity;
  s.tool_angular_velocity = w.angular_velocity;
  s.episode = episode_;
  return s;
}

EnvState GraspEnv::initial_state() const { return state_for(initial_grasp(), 0); }

std::vector<GraspAction> GraspEnv::actions(const EnvState& state) const {
  if (state.terminated) return {GraspAction::noop()};
  return planner_actions(state.grasp, catalog_, config_.action_mode);
}

Vec6 GraspEnv::gravity_wrench(int waypoint) const {
  (void)episode_->waypoints.at(static_cast<std::size_t>(waypoint));
  Vec6 w = Vec6::Zero();
  w.head<3>() = -episode_->tool.mass * config_.gravity;
  return w;
}

Vec6 GraspEnv::motion_wrench(int waypoint) const {
  const Waypoint& wp = episode_->waypoints.at(static_cast<std::size_t>(waypoint));
  const ToolModel& tool = episode_->tool;
  const Mat3 R = wp.tool.rotation();
  const Mat3 Iw = R * tool.inertia * R.transpose();
  Vec6 w;
  w.head<3>() = tool.mass * (wp.acceleration - config_.gravity);
  w.tail<3>() = Iw * wp.angular_acceleration + wp.angular_velocity.cross(Iw * wp.angular_velocity);
  return w;
}

Vec6 GraspEnv::external_wrench() const {
  // The contacts hold the tool still against gravity and the applied load.
  return gravity_wrench(horizon() - 1) - episode_->external_wrench;
}

ContactSet GraspEnv::contact_set(const Grasp& grasp, const IkResult& ik, int waypoint,
                                 std::vector<bool>* in_contact) const {
  const Waypoint& wp = episode_->waypoints.at(static_cast<std::size_t>(waypoint));
  const ToolModel& tool = episode_->tool;
  const auto& links = hand_->contactable_links();
  ContactSet set;
  set.reference = tool.com_world(wp.tool);
  if (in_contact != nullptr) in_contact->assign(links.size(), false);
  std::size_t target = 0;
  for (std::size_t k = 0; k < links.size(); ++k) {
    const int p = grasp.pairing[k];
    if (p == kNullContact) continue;
    const double residual = ik.residuals.at(target++);
    if (residual > config_.contact_tolerance) continue;
    const ContactPairing& pairing = hand_->link(links[k]).contacts[static_cast<std::size_t>(p)];
    const ToolContactPoint& point = tool.contact_points[pairing.tool_point];
    Contact c;
    c.position = wp.tool.transform(point.position);
    c.normal = wp.tool.rotate(point.normal).normalized();
    c.friction = tool.friction;
    // A sliding link drags along the tool as it moves; friction opposes the
    // tool velocity at the contact.
    if (!grasp.sliding.empty() && grasp.sliding[k] && wp.velocity.norm() > 0.0) c.slide_direction = wp.velocity;
    set.contacts.push_back(c);
    if (in_contact != nullptr) (*in_contact)[k] = true;
  }
  return set;
}

GraspEvaluation GraspEnv::compute(const Grasp& grasp, int waypoint) const {
  if (!space_.valid(grasp)) throw std::invalid_argument("grasp " + grasp.to_string() + " does not match the hand");
  const Waypoint& wp = episode_->waypoints.at(static_cast<std::size_t>(waypoint));
  const auto& links = hand_->contactable_links();
  std::vector<IkAssignment> assignments;
  for (std::size_t k = 0; k < links.size(); ++k) {
    if (grasp.pairing[k] != kNullContact) assignments.push_back({links[k], static_cast<std::size_t>(grasp.pairing[k])});
  }
  GraspEvaluation e;
  e.ik = solve_ik(*hand_, wp.hand_base, q_start_, assignments, episode_->tool, wp.tool, episode_->obstacles, config_.ik);
  e.contacts = contact_set(grasp, e.ik, waypoint, &e.in_contact);
  e.wrench_motion = wrench_error(e.contacts, motion_wrench(waypoint), config_.wrench).error;
  e.wrench_gravity = wrench_error(e.contacts, gravity_wrench(waypoint), config_.wrench).error;
  if (waypoint == horizon() - 1) e.wrench_external = wrench_error(e.contacts, external_wrench(), config_.wrench).error;
  computed_.fetch_add(1, std::memory_order_relaxed);
  return e;
}

std::shared_ptr<const GraspEvaluation> GraspEnv::evaluate(const Grasp& grasp, int waypoint) const {
  if (waypoint < 0 || waypoint >= horizon()) throw std::out_of_range("waypoint index out of range");
  if (cache_) {
    if (const auto index = space_.index_of(grasp)) {
      Slot& slot = cache_[*index * static_cast<std::size_t>(horizon()) + static_cast<std::size_t>(waypoint)];
      std::call_once(slot.once, [&] { slot.value = std::make_shared<const GraspEvaluation>(compute(grasp, waypoint)); });
      return slot.value;
    }
  }
  return std::make_shared<const GraspEvaluation>(compute(grasp, waypoint));
}

RewardTerms GraspEnv::reward_terms(const Grasp& current, const GraspAction& action, int t) const {
  if (t < 0 || t >= horizon() - 1) throw std::out_of_range("no decision at or after the final waypoint");
  const Grasp next = apply_action(current, action, catalog_);
  const auto now = evaluate(next, t);
  const auto later = evaluate(next, t + 1);

  RewardTerms r;
  r.wrench_motion = now->wrench_motion;
  r.ik_error = later->ik.ik_error;
  r.wrench_gravity = later->wrench_gravity;
  if (t + 1 == horizon() - 1) r.wrench_external = later->wrench_external;
  if (action.kind != GraspAction::Kind::NoOp && next == current) r.penalty = config_.redundant_penalty;
  r.collision = now->ik.collision || later->ik.collision;
  const double thr = config_.falling_threshold;
  r.falling = r.wrench_motion > thr || r.wrench_gravity > thr || r.wrench_external > thr;
  r.terminated = r.collision || r.falling;
  if (r.terminated) {
    r.reward = config_.r_min;
  } else {
    const RewardWeights& w = config_.weights;
    r.reward = -(w.wrench_motion * r.wrench_motion + w.ik * r.ik_error + w.wrench_gravity * r.wrench_gravity +
                 w.wrench_external * r.wrench_external) -
               r.penalty;
  }
  return r;
}

StepResult GraspEnv::step(const EnvState& state, const GraspAction& action) const {
  if (state.t < 0 || state.t >= horizon() - 1) throw std::out_of_range("step at or after the final waypoint");
  StepResult out;
  if (state.terminated) {
    out.next = state;
    out.next.t = state.t + 1;
    out.terminated = true;
    out.terms.terminated = true;
    return out;
  }
  out.terms = reward_terms(state.grasp, action, state.t);
  out.reward = out.terms.reward;
  out.terminated = out.terms.terminated;
  out.next = state_for(apply_action(state.grasp, action, catalog_), state.t + 1);
  out.next.terminated = out.terminated;
  return out;
}

std::size_t GraspEnv::num_actions(const EnvState& state, int) const { return actions(state).size(); }

Transition<EnvState> GraspEnv::transition(const EnvState& state, int t, std::size_t action) const {
  if (state.t != t) throw std::invalid_argument("state time does not match t");
  const auto list = actions(state);
  if (action >= list.size()) throw std::out_of_range("action index out of range");
  StepResult r = step(state, list[action]);
  return {std::move(r.next), r.reward};
}

DiscreteGraspMdp::DiscreteGraspMdp(std::shared_ptr<const GraspEnv> env) : env_(std::move(env)) {
  if (!env_) throw std::invalid_argument("DiscreteGraspMdp needs an environment");
  const GraspSpace& space = env_->space();
  actions_.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    actions_.push_back(planner_actions(space.at(i), env_->catalog_sizes(), env_->config().action_mode));
  }
}

DiscreteGraspMdp::State DiscreteGraspMdp::initial_state() const {
  const auto index = env_->space().index_of(env_->initial_grasp());
  if (!index) throw std::invalid_argument("initial grasp is outside the enumeration");
  return static_cast<State>(*index);
}

const std::vector<GraspAction>& DiscreteGraspMdp::actions(State s) const {
  if (s == dropped()) return dropped_actions_;
  return actions_.at(s);
}

std::size_t DiscreteGraspMdp::num_actions(State s, int) const { return actions(s).size(); }

Transition<DiscreteGraspMdp::State> DiscreteGraspMdp::transition(State s, int t, std::size_t action) const {
  const auto& list = actions(s);
  if (action >= list.size()) throw std::out_of_range("action index out of range");
  if (s == dropped()) return {s, 0.0};
  const Grasp grasp = env_->space().at(s);
  const RewardTerms terms = env_->reward_terms(grasp, list[action], t);
  evaluations_.fetch_add(1, std::memory_order_relaxed);
  if (terms.terminated) return {dropped(), terms.reward};
  const auto next = env_->space().index_of(apply_action(grasp, list[action], env_->catalog_sizes()));
  if (!next) throw std::logic_error("action left the grasp enumeration");
  return {static_cast<State>(*next), terms.reward};
}

DiscreteGraspMdp::State DiscreteGraspMdp::state_of(const EnvState& state) const {
  if (state.terminated) return dropped();
  const auto index = env_->space().index_of(state.grasp);
  if (!index) throw std::invalid_argument("grasp " + state.grasp.to_string() + " is outside the enumeration");
  return static_cast<State>(*index);
}

void DiscreteGraspMdp::dump_rewards(std::ostream& os) const {
  os << "# graspdp rewards v1\n";
  os << "grasp_index,time,action_index,reward,successor_index\n";
  os << std::setprecision(17);
  const auto G = static_cast<State>(env_->space().size());
  for (State s = 0; s < G; ++s) {
    for (int t = 0; t + 1 < horizon(); ++t) {
      for (std::size_t a = 0; a < num_actions(s, t); ++a) {
        const auto tr = transition(s, t, a);
        os << s << ',' << t << ',' << a << ',' << tr.reward << ',' << tr.next << '\n';
      }
    }
  }
}

DiscreteGraspMdp discretize(std::shared_ptr<const HandModel> hand, std::shared_ptr<const EpisodeInput> episode,
                            EnvConfig config) {
  return DiscreteGraspMdp(std::make_shared<const GraspEnv>(std::move(hand), std::move(episode), std::move(config)));
}

}  // namespace graspdp
