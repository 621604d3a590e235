#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "graspdp/geometry.hpp"

namespace graspdp {

enum class PrimitiveKind { Capsule, Sphere };

/// Revolute joint about `axis`, expressed in the frame at the link root.
struct Joint {
  Vec3 axis = Vec3::UnitZ();
  double lower = -1.0;
  double upper = 1.0;
};

/// One discrete contact option for a link: a point on the link (link frame)
/// touching a catalogued point on the tool.
struct ContactPairing {
  Vec3 link_point = Vec3::Zero();
  std::size_t tool_point = 0;
};

/// Link frame convention: the joint rotates about `joint.axis` at the link
/// root, and the link extends `length` along its local +x. A capsule spans
/// the whole segment; a sphere sits at the segment midpoint.
struct Link {
  std::string name;
  double length = 0.0;
  PrimitiveKind primitive = PrimitiveKind::Capsule;
  double radius = 0.0;
  Joint joint;
  std::vector<ContactPairing> contacts;
};

struct Finger {
  std::string name;
  Pose base;  // finger root in the hand frame
  std::vector<Link> links;
};

/// Serial-chain hand: fingers of revolute links hanging off a rigid palm.
/// Every link carries exactly one joint, so joint i belongs to link i in
/// finger-major order.
class HandModel {
 public:
  HandModel() = default;
  explicit HandModel(std::vector<Finger> fingers);

  const std::vector<Finger>& fingers() const { return fingers_; }
  std::size_t link_count() const { return links_.size(); }
  std::size_t joint_count() const { return links_.size(); }

  const Link& link(std::size_t i) const;
  std::size_t finger_of(std::size_t link) const { return finger_of_.at(link); }
  std::size_t first_link_of_finger(std::size_t finger) const { return finger_start_.at(finger); }

  /// Links in the same finger with consecutive indices share a joint.
  bool adjacent(std::size_t a, std::size_t b) const;

  /// Global indices of links with a non-empty contact catalog, in order.
  const std::vector<std::size_t>& contactable_links() const { return contactable_; }
  std::vector<std::size_t> catalog_sizes() const;

  const Eigen::VectorXd& lower_limits() const { return lower_; }
  const Eigen::VectorXd& upper_limits() const { return upper_; }
  Eigen::VectorXd mid_range() const { return 0.5 * (lower_ + upper_); }

 private:
  std::vector<Finger> fingers_;
  std::vector<std::pair<std::size_t, std::size_t>> links_;  // (finger, index in finger)
  std::vector<std::size_t> finger_of_;
  std::vector<std::size_t> finger_start_;
  std::vector<std::size_t> contactable_;
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
};

struct ToolContactPoint {
  Vec3 position = Vec3::Zero();  // tool frame
  Vec3 normal = Vec3::UnitX();   // inward unit normal, tool frame
};

/// Rigid tool: box geometry, inertial data and a contact point catalog.
struct ToolModel {
  std::string name = "tool";
  double mass = 0.35;
  Mat3 inertia = Mat3::Identity() * 1e-4;  // about the center of mass, tool frame
  Vec3 com_offset = Vec3::Zero();
  double friction = 0.5;
  Vec3 half_extents = Vec3(0.01, 0.01, 0.01);
  std::vector<ToolContactPoint> contact_points;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  OrientedBox box(const Pose& tool_pose) const { return {tool_pose, half_extents}; }
  Vec3 com_world(const Pose& tool_pose) const { return tool_pose.transform(com_offset); }
};

struct ForwardKinematics {
  Eigen::VectorXd q;                         // configuration actually used (clamped)
  bool clamped = false;                      // true if any input was outside its limits
  std::vector<Eigen::Isometry3d> frames;     // link root frames, world
  std::vector<Segment> segments;             // link axes, world
  std::vector<std::vector<Vec3>> contact_points;  // world candidate contact points per link

  Vec3 point(std::size_t link, const Vec3& body_point) const { return frames[link] * body_point; }
  SweptSphere shape(const HandModel& hand, std::size_t link) const;
};

ForwardKinematics forward_kinematics(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q);

/// World-frame 3 x joints Jacobian of a point rigidly attached to `link`.
Eigen::Matrix3Xd point_jacobian(const HandModel& hand, const ForwardKinematics& fk, std::size_t link,
                                const Vec3& world_point);

/// Penetration depth above this counts as a collision.
inline constexpr double kCollisionTolerance = 1e-5;

struct CollisionReport {
  bool colliding = false;
  double max_penetration = 0.0;  // zero whenever colliding is false
};

/// Non-adjacent link pairs, link/obstacle pairs and tool/obstacle pairs.
/// Link/tool contact is the grasp itself and is not a collision.
CollisionReport check_collision(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q,
                                const ToolModel* tool, const Pose& tool_pose, std::span<const Obstacle> obstacles);

/// IK target expressed directly as a link point and a world target.
struct PointTarget {
  std::size_t link = 0;
  Vec3 link_point = Vec3::Zero();
  Vec3 target = Vec3::Zero();
};

/// IK target referencing catalog entries: contact pairing `contact` of `link`.
struct IkAssignment {
  std::size_t link = 0;
  std::size_t contact = 0;
};

struct IkOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-6;   // rad
  double collision_weight = 1e3;
  double damping = 1e-6;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
};

struct IkResult {
  Eigen::VectorXd q;
  std::vector<Vec3> realized;     // world contact point per target
  std::vector<double> residuals;  // per target, m
  double ik_error = 0.0;          // max residual, m
  bool collision = false;
  double max_penetration = 0.0;
  int iterations = 0;
  double objective = 0.0;
};

/// Sum-of-squares IK objective: target residuals plus a quadratic hinge on
/// link/link and link/obstacle penetration.
class IkObjective {
 public:
  IkObjective(const HandModel& hand, const Pose& base, std::span<const PointTarget> targets,
              std::span<const Obstacle> obstacles, double collision_weight);

  double value(const Eigen::VectorXd& q) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& q) const;

  /// Stacked residual vector r (objective = r.r) and its Jacobian.
  void residuals(const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* jacobian) const;

 private:
  const HandModel& hand_;
  Pose base_;
  std::vector<PointTarget> targets_;
  std::vector<Obstacle> obstacles_;
  std::vector<std::pair<std::size_t, std::size_t>> link_pairs_;
  double sqrt_weight_;
};

IkResult solve_ik(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q_start,
                  std::span<const PointTarget> targets, const ToolModel* tool, const Pose& tool_pose,
                  std::span<const Obstacle> obstacles, const IkOptions& options = {});

/// Catalog form. Throws std::invalid_argument on unknown link/contact
/// indices, tool points outside the tool catalog or duplicate links.
IkResult solve_ik(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q_start,
                  std::span<const IkAssignment> assignments, const ToolModel& tool, const Pose& tool_pose,
                  std::span<const Obstacle> obstacles, const IkOptions& options = {});

}  // namespace graspdp
