#pragma once

#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace graspdp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Quat = Eigen::Quaterniond;

/// Rigid transform. Orientation is kept as a unit quaternion.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static Pose identity() { return {}; }
  static Pose from(const Vec3& p, const Quat& q);
  static Pose translation(const Vec3& p) { return {p, Quat::Identity()}; }

  Vec3 transform(const Vec3& p) const { return position + orientation * p; }
  Vec3 rotate(const Vec3& v) const { return orientation * v; }
  Mat3 rotation() const { return orientation.toRotationMatrix(); }
  Eigen::Isometry3d isometry() const;

  Pose operator*(const Pose& other) const;
  Pose inverse() const;

  /// True when the quaternion norm is within 1e-9 of one.
  bool is_valid() const;
};

struct PoseError {
  double position_sq = 0.0;  // m^2
  double angle = 0.0;        // rad, in [0, pi]
};

/// Geodesic angle of a * b^-1, in [0, pi].
double rotation_angle(const Quat& a, const Quat& b);

PoseError pose_error(const Pose& pose, const Pose& reference);

/// Skew-symmetric matrix with skew(a) * b == a.cross(b).
Mat3 skew(const Vec3& v);

struct Segment {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
};

struct ClosestPoints {
  Vec3 first = Vec3::Zero();
  Vec3 second = Vec3::Zero();
  double s = 0.0;  // parameter along the first segment
  double t = 0.0;  // parameter along the second segment
  double distance = 0.0;
};

/// Closest points between two (possibly degenerate) segments.
ClosestPoints closest_points(const Segment& p, const Segment& q);

/// Closest point on a segment to a point; returns the segment parameter.
double closest_parameter(const Segment& seg, const Vec3& point);

/// Half-space obstacle: the free side is normal . x >= offset.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
  double signed_distance(const Vec3& x) const { return normal.dot(x) - offset; }
};

struct SphereObstacle {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

using Obstacle = std::variant<Plane, SphereObstacle>;

/// Swept sphere (capsule) or plain sphere; a sphere is a capsule whose
/// segment is a single point.
struct SweptSphere {
  Segment axis;
  double radius = 0.0;
};

/// Penetration between two convex shapes. `depth` is positive when they
/// overlap; `normal` points from the second shape toward the first and the
/// witness points are the axis points that realize it.
struct Penetration {
  double depth = 0.0;
  Vec3 normal = Vec3::UnitZ();
  Vec3 witness_first = Vec3::Zero();
  Vec3 witness_second = Vec3::Zero();
};

Penetration penetration(const SweptSphere& a, const SweptSphere& b);
Penetration penetration(const SweptSphere& a, const Plane& plane);
Penetration penetration(const SweptSphere& a, const SphereObstacle& sphere);
Penetration penetration(const SweptSphere& a, const Obstacle& obstacle);

/// Oriented box given by its pose and half extents.
struct OrientedBox {
  Pose pose;
  Vec3 half_extents = Vec3::Zero();
  std::vector<Vec3> vertices() const;
};

/// Plane penetration via the box support function in -normal.
double penetration_depth(const OrientedBox& box, const Plane& plane);
double penetration_depth(const OrientedBox& box, const SphereObstacle& sphere);
double penetration_depth(const OrientedBox& box, const Obstacle& obstacle);

}  // namespace graspdp
