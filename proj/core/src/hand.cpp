#include "graspdp/hand.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace graspdp {

HandModel::HandModel(std::vector<Finger> fingers) : fingers_(std::move(fingers)) {
  if (fingers_.empty()) throw std::invalid_argument("hand model needs at least one finger");
  for (std::size_t f = 0; f < fingers_.size(); ++f) {
    if (fingers_[f].links.empty()) throw std::invalid_argument("finger '" + fingers_[f].name + "' has no links");
    if (!fingers_[f].base.is_valid()) throw std::invalid_argument("finger '" + fingers_[f].name + "' base pose invalid");
    finger_start_.push_back(links_.size());
    for (std::size_t k = 0; k < fingers_[f].links.size(); ++k) {
      const Link& link = fingers_[f].links[k];
      if (!(link.length >= 0.0) || !(link.radius > 0.0)) {
        throw std::invalid_argument("link '" + link.name + "' needs length >= 0 and radius > 0");
      }
      if (!(link.joint.lower < link.joint.upper)) {
        throw std::invalid_argument("link '" + link.name + "' joint limits are degenerate");
      }
      if (std::abs(link.joint.axis.norm() - 1.0) > 1e-9) {
        throw std::invalid_argument("link '" + link.name + "' joint axis is not unit length");
      }
      if (!link.contacts.empty()) contactable_.push_back(links_.size());
      links_.emplace_back(f, k);
      finger_of_.push_back(f);
    }
  }
  lower_.resize(static_cast<Eigen::Index>(links_.size()));
  upper_.resize(static_cast<Eigen::Index>(links_.size()));
  for (std::size_t i = 0; i < links_.size(); ++i) {
    lower_[static_cast<Eigen::Index>(i)] = link(i).joint.lower;
    upper_[static_cast<Eigen::Index>(i)] = link(i).joint.upper;
  }
}

const Link& HandModel::link(std::size_t i) const {
  if (i >= links_.size()) throw std::out_of_range("link index out of range");
  return fingers_[links_[i].first].links[links_[i].second];
}

bool HandModel::adjacent(std::size_t a, std::size_t b) const {
  if (a == b) return true;
  if (finger_of_.at(a) != finger_of_.at(b)) return false;
  return (a > b ? a - b : b - a) == 1;
}

std::vector<std::size_t> HandModel::catalog_sizes() const {
  std::vector<std::size_t> out;
  out.reserve(contactable_.size());
  for (std::size_t i : contactable_) out.push_back(link(i).contacts.size());
  return out;
}

void ToolModel::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("tool mass must be positive");
  if (!(friction >= 0.0)) throw std::invalid_argument("tool friction must be non-negative");
  if ((inertia - inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("tool inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (!(eig.eigenvalues().minCoeff() > 0.0)) throw std::invalid_argument("tool inertia must be positive definite");
  if (!(half_extents.minCoeff() > 0.0)) throw std::invalid_argument("tool half extents must be positive");
  for (const auto& c : contact_points) {
    if (std::abs(c.normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("tool contact normal is not unit length");
  }
}

ForwardKinematics forward_kinematics(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q) {
  if (q.size() != static_cast<Eigen::Index>(hand.joint_count())) {
    throw std::invalid_argument("forward_kinematics: configuration size mismatch");
  }
  ForwardKinematics fk;
  fk.q = q.cwiseMax(hand.lower_limits()).cwiseMin(hand.upper_limits());
  fk.clamped = (fk.q - q).cwiseAbs().maxCoeff() > 0.0;
  fk.frames.resize(hand.link_count());
  fk.segments.resize(hand.link_count());
  fk.contact_points.resize(hand.link_count());

  const Eigen::Isometry3d hand_frame = base.isometry();
  std::size_t i = 0;
  for (const Finger& finger : hand.fingers()) {
    Eigen::Isometry3d frame = hand_frame * finger.base.isometry();
    for (const Link& link : finger.links) {
      frame.rotate(Eigen::AngleAxisd(fk.q[static_cast<Eigen::Index>(i)], link.joint.axis));
      fk.frames[i] = frame;
      fk.segments[i] = {frame.translation(), frame * Vec3(link.length, 0.0, 0.0)};
      auto& pts = fk.contact_points[i];
      pts.reserve(link.contacts.size());
      for (const auto& c : link.contacts) pts.push_back(frame * c.link_point);
      frame.translate(Vec3(link.length, 0.0, 0.0));
      ++i;
    }
  }
  return fk;
}

SweptSphere ForwardKinematics::shape(const HandModel& hand, std::size_t link) const {
  const Link& l = hand.link(link);
  const Segment& s = segments[link];
  if (l.primitive == PrimitiveKind::Sphere) {
    const Vec3 mid = 0.5 * (s.a + s.b);
    return {{mid, mid}, l.radius};
  }
  return {s, l.radius};
}

Eigen::Matrix3Xd point_jacobian(const HandModel& hand, const ForwardKinematics& fk, std::size_t link,
                                const Vec3& world_point) {
  Eigen::Matrix3Xd J = Eigen::Matrix3Xd::Zero(3, static_cast<Eigen::Index>(hand.joint_count()));
  const std::size_t first = hand.first_link_of_finger(hand.finger_of(link));
  for (std::size_t j = first; j <= link; ++j) {
    const Vec3 axis = fk.frames[j].linear() * hand.link(j).joint.axis;
    J.col(static_cast<Eigen::Index>(j)) = axis.cross(world_point - fk.frames[j].translation());
  }
  return J;
}

CollisionReport check_collision(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q,
                                const ToolModel* tool, const Pose& tool_pose, std::span<const Obstacle> obstacles) {
  const ForwardKinematics fk = forward_kinematics(hand, base, q);
  double worst = 0.0;
  const std::size_t n = hand.link_count();
  for (std::size_t i = 0; i < n; ++i) {
    const SweptSphere si = fk.shape(hand, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      if (hand.adjacent(i, j)) continue;
      worst = std::max(worst, penetration(si, fk.shape(hand, j)).depth);
    }
    for (const Obstacle& o : obstacles) worst = std::max(worst, penetration(si, o).depth);
  }
  if (tool != nullptr) {
    const OrientedBox box = tool->box(tool_pose);
    for (const Obstacle& o : obstacles) worst = std::max(worst, penetration_depth(box, o));
  }
  CollisionReport report;
  report.colliding = worst > kCollisionTolerance;
  report.max_penetration = report.colliding ? worst : 0.0;
  return report;
}

}  // namespace graspdp
