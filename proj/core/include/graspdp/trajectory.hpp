#pragma once

#include <string>

#include "graspdp/env.hpp"

namespace graspdp {

/// Straight vertical lift with a smoothstep time profile. The hand base
/// rises by `hand_follow` times the nominal lift and ignores the height
/// offset, so offsets and the lift itself move the tool relative to the hand.
struct TrajectoryParams {
  double start_height = 0.014;  // m, first tool waypoint
  double end_height = 0.06;     // m, last tool waypoint
  int waypoints = 16;
  double duration = 1.5;        // s, first to last waypoint
  double palm_height = 0.15;    // m, hand base height at the first nominal waypoint
  double hand_follow = 0.6;
  double height_offset = 0.0;   // m, added to every tool waypoint
  double torque_z = 1.0;        // N m, external torque about z at the final pose
  double mass_scale = 1.0;      // multiplies tool mass and inertia
  double com_offset_y = 0.0;    // m
  double hold_duration = 2.0;   // s
  bool floor = true;            // plane obstacle at z = 0
};

EpisodeInput make_episode(const TrajectoryParams& params, const ToolModel& tool, std::string name);

}  // namespace graspdp
