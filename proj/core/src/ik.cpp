#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>

#include "graspdp/hand.hpp"

namespace graspdp {

IkObjective::IkObjective(const HandModel& hand, const Pose& base, std::span<const PointTarget> targets,
                         std::span<const Obstacle> obstacles, double collision_weight)
    : hand_(hand),
      base_(base),
      targets_(targets.begin(), targets.end()),
      obstacles_(obstacles.begin(), obstacles.end()),
      sqrt_weight_(std::sqrt(std::max(0.0, collision_weight))) {
  for (std::size_t i = 0; i < hand.link_count(); ++i) {
    for (std::size_t j = i + 1; j < hand.link_count(); ++j) {
      if (!hand.adjacent(i, j)) link_pairs_.emplace_back(i, j);
    }
  }
}

void IkObjective::residuals(const Eigen::VectorXd& q, Eigen::VectorXd& r, Eigen::MatrixXd* jacobian) const {
  const ForwardKinematics fk = forward_kinematics(hand_, base_, q);
  const auto n = static_cast<Eigen::Index>(hand_.joint_count());

  struct Active {
    double depth;
    Vec3 normal;
    std::size_t first_link;
    Vec3 first_point;
    std::ptrdiff_t second_link;  // -1 for obstacles
    Vec3 second_point;
    bool kink;  // axes meet: depth is flat or non-differentiable here
  };
  std::vector<Active> active;
  if (sqrt_weight_ > 0.0) {
    for (const auto& [i, j] : link_pairs_) {
      const Penetration p = penetration(fk.shape(hand_, i), fk.shape(hand_, j));
      if (p.depth > 0.0) {
        active.push_back({p.depth, p.normal, i, p.witness_first, static_cast<std::ptrdiff_t>(j), p.witness_second,
                          (p.witness_first - p.witness_second).norm() <= 1e-12});
      }
    }
    for (std::size_t i = 0; i < hand_.link_count(); ++i) {
      const SweptSphere s = fk.shape(hand_, i);
      for (const Obstacle& o : obstacles_) {
        const Penetration p = penetration(s, o);
        const bool kink = std::holds_alternative<SphereObstacle>(o) &&
                          (p.witness_first - p.witness_second).norm() <= 1e-12;
        if (p.depth > 0.0) active.push_back({p.depth, p.normal, i, p.witness_first, -1, p.witness_second, kink});
      }
    }
  }

  const auto rows = static_cast<Eigen::Index>(3 * targets_.size() + active.size());
  r.resize(rows);
  if (jacobian != nullptr) jacobian->setZero(rows, n);

  Eigen::Index row = 0;
  for (const PointTarget& t : targets_) {
    const Vec3 p = fk.point(t.link, t.link_point);
    r.segment<3>(row) = p - t.target;
    if (jacobian != nullptr) jacobian->block(row, 0, 3, n) = point_jacobian(hand_, fk, t.link, p);
    row += 3;
  }
  for (const Active& a : active) {
    r[row] = sqrt_weight_ * a.depth;
    if (jacobian != nullptr && !a.kink) {
      // Crossing axes (common for fingers sharing a plane) keep the depth at
      // r1 + r2 under small motions, so their row stays zero.
      // depth = r1 + r2 - |w1 - w2|; the witness points move rigidly with
      // their links to first order, so d depth = -n . (J_w1 - J_w2) dq.
      Eigen::RowVectorXd g = -a.normal.transpose() * point_jacobian(hand_, fk, a.first_link, a.first_point);
      if (a.second_link >= 0) {
        g += a.normal.transpose() *
             point_jacobian(hand_, fk, static_cast<std::size_t>(a.second_link), a.second_point);
      }
      jacobian->row(row) = sqrt_weight_ * g;
    }
    ++row;
  }
}

double IkObjective::value(const Eigen::VectorXd& q) const {
  Eigen::VectorXd r;
  residuals(q, r, nullptr);
  return r.squaredNorm();
}

Eigen::VectorXd IkObjective::gradient(const Eigen::VectorXd& q) const {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  residuals(q, r, &J);
  return 2.0 * J.transpose() * r;
}

namespace {

Eigen::VectorXd clamp_to_limits(const HandModel& hand, const Eigen::VectorXd& q) {
  return q.cwiseMax(hand.lower_limits()).cwiseMin(hand.upper_limits());
}

}  // namespace

IkResult solve_ik(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q_start,
                  std::span<const PointTarget> targets, const ToolModel* tool, const Pose& tool_pose,
                  std::span<const Obstacle> obstacles, const IkOptions& options) {
  if (q_start.size() != static_cast<Eigen::Index>(hand.joint_count())) {
    throw std::invalid_argument("solve_ik: start configuration size mismatch");
  }
  for (const PointTarget& t : targets) {
    if (t.link >= hand.link_count()) throw std::invalid_argument("solve_ik: unknown link index");
  }
  const IkObjective objective(hand, base, targets, obstacles, options.collision_weight);
  IkResult result;
  Eigen::VectorXd q = clamp_to_limits(hand, q_start);
  Eigen::VectorXd r;
  Eigen::MatrixXd J;
  objective.residuals(q, r, &J);
  double f = r.squaredNorm();

  const auto try_direction = [&](const Eigen::VectorXd& d, Eigen::VectorXd& q_out, double& f_out, bool& tiny) {
    double alpha = 1.0;
    tiny = false;
    for (int k = 0; k < options.max_backtracks; ++k) {
      Eigen::VectorXd q_try = clamp_to_limits(hand, q + alpha * d);
      if ((q_try - q).norm() < options.step_tolerance) {
        tiny = true;
        return false;
      }
      const double f_try = objective.value(q_try);
      if (f_try < f) {
        q_out = std::move(q_try);
        f_out = f_try;
        return true;
      }
      alpha *= options.backtrack_factor;
    }
    return false;
  };

  for (int iter = 0; iter < options.max_iterations && f > 1e-30; ++iter) {
    const Eigen::VectorXd g = J.transpose() * r;
    Eigen::MatrixXd H = J.transpose() * J;
    H.diagonal().array() += options.damping;
    const Eigen::VectorXd d_gn = -H.ldlt().solve(g);

    Eigen::VectorXd q_next;
    double f_next = f;
    bool tiny = false;
    bool accepted = d_gn.allFinite() && try_direction(d_gn, q_next, f_next, tiny);
    if (!accepted && !tiny) {
      // Projection onto the joint limits can spoil the Gauss-Newton step.
      accepted = try_direction(-g * (1.0 / std::max(1.0, g.norm())), q_next, f_next, tiny);
    }
    if (!accepted) break;

    const double step = (q_next - q).norm();
    q = std::move(q_next);
    f = f_next;
    ++result.iterations;
    objective.residuals(q, r, &J);
    if (step < options.step_tolerance) break;
  }

  const ForwardKinematics fk = forward_kinematics(hand, base, q);
  result.q = q;
  result.objective = f;
  result.realized.reserve(targets.size());
  result.residuals.reserve(targets.size());
  for (const PointTarget& t : targets) {
    const Vec3 p = fk.point(t.link, t.link_point);
    result.realized.push_back(p);
    result.residuals.push_back((p - t.target).norm());
    result.ik_error = std::max(result.ik_error, result.residuals.back());
  }
  const CollisionReport report = check_collision(hand, base, q, tool, tool_pose, obstacles);
  result.collision = report.colliding;
  result.max_penetration = report.max_penetration;
  return result;
}

IkResult solve_ik(const HandModel& hand, const Pose& base, const Eigen::VectorXd& q_start,
                  std::span<const IkAssignment> assignments, const ToolModel& tool, const Pose& tool_pose,
                  std::span<const Obstacle> obstacles, const IkOptions& options) {
  std::vector<PointTarget> targets;
  targets.reserve(assignments.size());
  std::vector<bool> seen(hand.link_count(), false);
  for (const IkAssignment& a : assignments) {
    if (a.link >= hand.link_count()) {
      throw std::invalid_argument("solve_ik: unknown link index " + std::to_string(a.link));
    }
    if (seen[a.link]) throw std::invalid_argument("solve_ik: link assigned twice");
    seen[a.link] = true;
    const Link& link = hand.link(a.link);
    if (a.contact >= link.contacts.size()) {
      throw std::invalid_argument("solve_ik: unknown contact " + std::to_string(a.contact) + " on link '" +
                                  link.name + "'");
    }
    const ContactPairing& pairing = link.contacts[a.contact];
    if (pairing.tool_point >= tool.contact_points.size()) {
      throw std::invalid_argument("solve_ik: pairing references unknown tool point");
    }
    targets.push_back({a.link, pairing.link_point, tool_pose.transform(tool.contact_points[pairing.tool_point].position)});
  }
  return solve_ik(hand, base, q_start, targets, &tool, tool_pose, obstacles, options);
}

}  // namespace graspdp
