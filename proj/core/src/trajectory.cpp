#include "graspdp/trajectory.hpp"

#include <stdexcept>

namespace graspdp {

EpisodeInput make_episode(const TrajectoryParams& p, const ToolModel& tool, std::string name) {
  if (p.waypoints < 2) throw std::invalid_argument("trajectory needs at least two waypoints");
  if (!(p.duration > 0.0)) throw std::invalid_argument("trajectory duration must be positive");
  if (!(p.mass_scale > 0.0)) throw std::invalid_argument("mass scale must be positive");

  EpisodeInput e;
  e.name = std::move(name);
  e.horizon = p.waypoints;
  e.tool = tool;
  e.tool.mass *= p.mass_scale;
  e.tool.inertia *= p.mass_scale;
  e.tool.com_offset.y() += p.com_offset_y;
  e.external_wrench[5] = p.torque_z;
  e.hold_duration = p.hold_duration;
  if (p.floor) e.obstacles.push_back(Plane{Vec3::UnitZ(), 0.0});

  const double rise = p.end_height - p.start_height;
  const double D = p.duration;
  for (int k = 0; k < p.waypoints; ++k) {
    const double s = static_cast<double>(k) / (p.waypoints - 1);
    const double shape = s * s * (3.0 - 2.0 * s);
    const double z = p.start_height + rise * shape;
    Waypoint w;
    // The tool frame sits at the box center; the reference point is the frame origin.
    w.tool = Pose::translation(Vec3(0.0, 0.0, z + p.height_offset));
    w.velocity = Vec3(0.0, 0.0, rise * 6.0 * s * (1.0 - s) / D);
    w.acceleration = Vec3(0.0, 0.0, rise * (6.0 - 12.0 * s) / (D * D));
    w.hand_base = Pose::translation(Vec3(0.0, 0.0, p.palm_height + p.hand_follow * (z - p.start_height)));
    e.waypoints.push_back(w);
  }
  e.validate();
  return e;
}

}  // namespace graspdp
