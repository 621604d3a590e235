#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/LU>

#include "graspdp/env.hpp"

namespace graspdp {

double evaluate_hold(const GraspEnv& env, const EnvState& final_state, const Vec6& external_wrench, double duration,
                     const HoldOptions& options) {
  if (!(duration >= 0.0)) throw std::invalid_argument("hold duration must be non-negative");
  if (!(options.dt > 0.0)) throw std::invalid_argument("hold time step must be positive");
  constexpr double kPi = std::numbers::pi;
  if (final_state.terminated) return kPi * duration;
  const int last = env.horizon() - 1;
  if (final_state.t != last) throw std::invalid_argument("hold starts from the final waypoint");

  const EpisodeInput& ep = env.episode();
  const ToolModel& tool = ep.tool;
  const Pose reference = ep.waypoints[static_cast<std::size_t>(last)].tool;

  // Contacts that are touching at the final waypoint stay attached to the tool.
  std::vector<ToolContactPoint> attached;
  const auto eval = env.evaluate(final_state.grasp, last);
  const auto& links = env.hand().contactable_links();
  for (std::size_t k = 0; k < links.size(); ++k) {
    if (!eval->in_contact[k]) continue;
    const auto& pairing = env.hand().link(links[k]).contacts[static_cast<std::size_t>(final_state.grasp.pairing[k])];
    attached.push_back(tool.contact_points[pairing.tool_point]);
  }

  const int steps = static_cast<int>(std::llround(duration / options.dt));
  const double dt = options.dt;
  const Vec3 gravity_force = tool.mass * env.config().gravity;
  const Mat3 inertia_inv_body = tool.inertia.inverse();

  Pose pose = reference;
  Vec3 com = tool.com_world(pose);
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  double cost = 0.0;

  for (int n = 0; n < steps; ++n) {
    const Mat3 R = pose.rotation();
    Vec6 load;
    load.head<3>() = gravity_force + external_wrench.head<3>();
    load.tail<3>() = external_wrench.tail<3>();

    Vec6 net = load;
    if (!attached.empty()) {
      ContactSet set;
      set.reference = com;
      for (const ToolContactPoint& p : attached) {
        Contact c;
        c.position = pose.transform(p.position);
        c.normal = pose.rotate(p.normal).normalized();
        c.friction = tool.friction;
        set.contacts.push_back(c);
      }
      const WrenchErrorResult fit = wrench_error(set, -load, env.config().wrench.weights, options.regularization,
                                                 env.config().wrench.cone_edges);
      net += fit.achieved;
    }

    const Mat3 Iw = R * tool.inertia * R.transpose();
    const Mat3 Iw_inv = R * inertia_inv_body * R.transpose();
    v += dt * net.head<3>() / tool.mass;
    w += dt * (Iw_inv * (net.tail<3>() - w.cross(Iw * w)));
    com += dt * v;
    const double angle = w.norm() * dt;
    if (angle > 0.0) pose.orientation = (Eigen::AngleAxisd(angle, w.normalized()) * pose.orientation).normalized();
    pose.position = com - pose.rotate(tool.com_offset);

    const PoseError err = pose_error(pose, reference);
    for (const Obstacle& o : ep.obstacles) {
      if (penetration_depth(tool.box(pose), o) > kCollisionTolerance) {
        return cost + (err.position_sq + kPi) * dt * (steps - n);
      }
    }
    cost += (err.position_sq + err.angle) * dt;
  }
  return cost;
}

}  // namespace graspdp
