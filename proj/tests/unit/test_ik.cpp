#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "graspdp/hand.hpp"
#include "graspdp/model_io.hpp"
#include "support/oracles.hpp"

using namespace graspdp;
using graspdp::testing::planar_two_link;

namespace {

Eigen::VectorXd random_interior(const HandModel& hand, std::mt19937_64& rng, double margin = 1e-3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd q = hand.lower_limits();
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double span = hand.upper_limits()[j] - hand.lower_limits()[j] - 2 * margin;
    q[j] += margin + u(rng) * span;
  }
  return q;
}

}  // namespace

TEST_CASE("IK objective gradient matches central differences") {
  const HandModel hand = default_hand();
  const ToolModel tool = default_tool();
  const Pose base = Pose::translation({0, 0, 0.15});
  const Pose tool_pose = Pose::translation({0, 0, 0.06});
  std::vector<PointTarget> targets;
  for (std::size_t link : hand.contactable_links()) {
    const ContactPairing& c = hand.link(link).contacts.front();
    targets.push_back({link, c.link_point, tool_pose.transform(tool.contact_points[c.tool_point].position)});
  }
  const std::vector<Obstacle> floor{Plane{Vec3::UnitZ(), 0.0}};
  const IkObjective objective(hand, base, targets, floor, 1e3);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd q = random_interior(hand, rng);
    CHECK(graspdp::testing::ik_gradient_gap(objective, q) <= 1e-4);
  }
}

TEST_CASE("IK starting on target needs no progress") {
  const HandModel hand = planar_two_link(0.04, 0.03);
  Eigen::VectorXd q(2);
  q << 0.4, 0.7;
  const Vec3 tip = forward_kinematics(hand, Pose::identity(), q).contact_points[1][0];
  const std::vector<PointTarget> t{{1, Vec3(0.03, 0, 0), tip}};
  const IkResult r = solve_ik(hand, Pose::identity(), q, t, nullptr, Pose::identity(), {});
  CHECK(r.ik_error <= 1e-15);
  CHECK(r.iterations == 0);
  CHECK((r.q - q).norm() == 0.0);
}

TEST_CASE("IK reaches targets inside the two-link annulus") {
  const double l1 = 0.04, l2 = 0.03, elbow = 2.8;
  const HandModel hand = planar_two_link(l1, l2, -elbow, elbow);
  // The elbow limit, not |l1 - l2|, sets the inner radius.
  const double inner = std::sqrt(l1 * l1 + l2 * l2 + 2 * l1 * l2 * std::cos(elbow));
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd start(2);
  start << 0.3, 0.6;
  for (int i = 0; i < 40; ++i) {
    const double r = inner + 0.002 + u(rng) * (l1 + l2 - inner - 0.004);
    const double a = (u(rng) - 0.5) * 2.0;
    const Vec3 target(r * std::cos(a), r * std::sin(a), 0.0);
    const std::vector<PointTarget> t{{1, Vec3(l2, 0, 0), target}};
    const IkResult res = solve_ik(hand, Pose::identity(), start, t, nullptr, Pose::identity(), {});
    CHECK(res.ik_error <= 1e-4);
    CHECK(res.ik_error == doctest::Approx(res.residuals[0]));
    CHECK((res.realized[0] - target).norm() == doctest::Approx(res.ik_error));
  }
}

TEST_CASE("IK residual beyond the workspace equals the boundary distance") {
  const double l1 = 0.04, l2 = 0.03;
  const HandModel hand = planar_two_link(l1, l2);
  Eigen::VectorXd start(2);
  start << 0.3, 0.6;
  for (double d : {0.005, 0.01, 0.03}) {
    for (double a : {-0.5, 0.2, 1.0}) {
      const double r = l1 + l2 + d;
      const Vec3 target(r * std::cos(a), r * std::sin(a), 0.0);
      const std::vector<PointTarget> t{{1, Vec3(l2, 0, 0), target}};
      const IkResult res = solve_ik(hand, Pose::identity(), start, t, nullptr, Pose::identity(), {});
      CHECK(std::abs(res.ik_error - d) <= 1e-3);
    }
  }
}

TEST_CASE("IK does not increase the objective from the start") {
  const HandModel hand = default_hand();
  const ToolModel tool = default_tool();
  const Pose base = Pose::translation({0, 0, 0.15});
  const Pose tool_pose = Pose::translation({0, 0, 0.05});
  const std::vector<Obstacle> floor{Plane{Vec3::UnitZ(), 0.0}};
  std::vector<IkAssignment> assign;
  for (std::size_t link : hand.contactable_links()) assign.push_back({link, 0});
  std::vector<PointTarget> targets;
  for (const IkAssignment& a : assign) {
    const ContactPairing& c = hand.link(a.link).contacts[a.contact];
    targets.push_back({a.link, c.link_point, tool_pose.transform(tool.contact_points[c.tool_point].position)});
  }
  const IkObjective objective(hand, base, targets, floor, 1e3);
  const IkResult r = solve_ik(hand, base, hand.mid_range(), assign, tool, tool_pose, floor);
  CHECK(r.objective <= objective.value(hand.mid_range()));
  CHECK(r.objective == doctest::Approx(objective.value(r.q)));
  CHECK(r.iterations <= IkOptions{}.max_iterations);
}

TEST_CASE("IK rejects malformed assignments") {
  const HandModel hand = default_hand();
  const ToolModel tool = default_tool();
  const std::size_t link = hand.contactable_links().front();
  const std::vector<IkAssignment> unknown_link{{hand.link_count(), 0}};
  const std::vector<IkAssignment> unknown_contact{{link, 99}};
  const std::vector<IkAssignment> twice{{link, 0}, {link, 1}};
  const Pose p = Pose::identity();
  CHECK_THROWS_AS(solve_ik(hand, p, hand.mid_range(), unknown_link, tool, p, {}), std::invalid_argument);
  CHECK_THROWS_AS(solve_ik(hand, p, hand.mid_range(), unknown_contact, tool, p, {}), std::invalid_argument);
  CHECK_THROWS_AS(solve_ik(hand, p, hand.mid_range(), twice, tool, p, {}), std::invalid_argument);
}

TEST_CASE("hand and tool validation") {
  Finger f;
  f.name = "f";
  Link l;
  l.name = "l";
  l.radius = 0.01;
  l.joint = {Vec3::UnitZ(), 1.0, 1.0};
  f.links = {l};
  CHECK_THROWS_AS(HandModel({f}), std::invalid_argument);
  CHECK_THROWS_AS(HandModel(std::vector<Finger>{}), std::invalid_argument);

  ToolModel t = default_tool();
  CHECK_NOTHROW(t.validate());
  t.mass = 0.0;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = default_tool();
  t.inertia(0, 1) = 1e-3;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t = default_tool();
  t.contact_points[0].normal = Vec3(2, 0, 0);
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}
