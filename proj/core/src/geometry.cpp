#include "graspdp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace graspdp {

Pose Pose::from(const Vec3& p, const Quat& q) { return {p, q.normalized()}; }

Eigen::Isometry3d Pose::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = orientation.toRotationMatrix();
  iso.translation() = position;
  return iso;
}

Pose Pose::operator*(const Pose& other) const {
  return {position + orientation * other.position, (orientation * other.orientation).normalized()};
}

Pose Pose::inverse() const {
  const Quat inv = orientation.conjugate();
  return {-(inv * position), inv};
}

bool Pose::is_valid() const { return std::abs(orientation.norm() - 1.0) <= 1e-9 && position.allFinite(); }

double rotation_angle(const Quat& a, const Quat& b) {
  const Quat d = (a * b.conjugate()).normalized();
  const double v = d.vec().norm();
  return 2.0 * std::atan2(v, std::abs(d.w()));
}

PoseError pose_error(const Pose& pose, const Pose& reference) {
  return {(pose.position - reference.position).squaredNorm(), rotation_angle(pose.orientation, reference.orientation)};
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

double closest_parameter(const Segment& seg, const Vec3& point) {
  const Vec3 d = seg.b - seg.a;
  const double len2 = d.squaredNorm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp((point - seg.a).dot(d) / len2, 0.0, 1.0);
}

// Segment/segment closest points (Ericson, Real-Time Collision Detection 5.1.9).
ClosestPoints closest_points(const Segment& p, const Segment& q) {
  constexpr double eps = 1e-18;
  const Vec3 d1 = p.b - p.a;
  const Vec3 d2 = q.b - q.a;
  const Vec3 r = p.a - q.a;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0;
  double t = 0.0;
  if (a <= eps && e <= eps) {
    s = t = 0.0;
  } else if (a <= eps) {
    s = 0.0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      t = 0.0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  ClosestPoints out;
  out.s = s;
  out.t = t;
  out.first = p.a + d1 * s;
  out.second = q.a + d2 * t;
  out.distance = (out.first - out.second).norm();
  return out;
}

namespace {

Vec3 safe_direction(const Vec3& v, const Vec3& fallback) {
  const double n = v.norm();
  return n > 1e-15 ? Vec3(v / n) : fallback;
}

}  // namespace

Penetration penetration(const SweptSphere& a, const SweptSphere& b) {
  const ClosestPoints cp = closest_points(a.axis, b.axis);
  Penetration out;
  out.normal = safe_direction(cp.first - cp.second, Vec3::UnitZ());
  out.depth = a.radius + b.radius - cp.distance;
  out.witness_first = cp.first;
  out.witness_second = cp.second;
  return out;
}

Penetration penetration(const SweptSphere& a, const Plane& plane) {
  const double da = plane.signed_distance(a.axis.a);
  const double db = plane.signed_distance(a.axis.b);
  Penetration out;
  out.normal = plane.normal;
  out.witness_first = da <= db ? a.axis.a : a.axis.b;
  out.witness_second = out.witness_first - plane.normal * std::min(da, db);
  out.depth = a.radius - std::min(da, db);
  return out;
}

Penetration penetration(const SweptSphere& a, const SphereObstacle& sphere) {
  const double s = closest_parameter(a.axis, sphere.center);
  const Vec3 p = a.axis.a + (a.axis.b - a.axis.a) * s;
  Penetration out;
  out.normal = safe_direction(p - sphere.center, Vec3::UnitZ());
  out.depth = a.radius + sphere.radius - (p - sphere.center).norm();
  out.witness_first = p;
  out.witness_second = sphere.center;
  return out;
}

Penetration penetration(const SweptSphere& a, const Obstacle& obstacle) {
  return std::visit([&](const auto& o) { return penetration(a, o); }, obstacle);
}

std::vector<Vec3> OrientedBox::vertices() const {
  std::vector<Vec3> out;
  out.reserve(8);
  for (int i = 0; i < 8; ++i) {
    const Vec3 corner((i & 1) ? half_extents.x() : -half_extents.x(), (i & 2) ? half_extents.y() : -half_extents.y(),
                      (i & 4) ? half_extents.z() : -half_extents.z());
    out.push_back(pose.transform(corner));
  }
  return out;
}

double penetration_depth(const OrientedBox& box, const Plane& plane) {
  const Vec3 local_n = box.pose.orientation.conjugate() * plane.normal;
  const double support = box.half_extents.dot(local_n.cwiseAbs());
  return -(plane.signed_distance(box.pose.position) - support);
}

double penetration_depth(const OrientedBox& box, const SphereObstacle& sphere) {
  const Vec3 local = box.pose.orientation.conjugate() * (sphere.center - box.pose.position);
  const Vec3 clamped = local.cwiseMax(-box.half_extents).cwiseMin(box.half_extents);
  if (clamped == local) {
    // Center inside the box: distance to the nearest face plus the radius.
    const Vec3 gap = box.half_extents - local.cwiseAbs();
    return sphere.radius + gap.minCoeff();
  }
  return sphere.radius - (local - clamped).norm();
}

double penetration_depth(const OrientedBox& box, const Obstacle& obstacle) {
  return std::visit([&](const auto& o) { return penetration_depth(box, o); }, obstacle);
}

}  // namespace graspdp
