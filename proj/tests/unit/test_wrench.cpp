#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "graspdp/wrench.hpp"
#include "support/oracles.hpp"

using namespace graspdp;

namespace {

Contact contact(const Vec3& p, const Vec3& n, double mu) {
  Contact c;
  c.position = p;
  c.normal = n.normalized();
  c.friction = mu;
  return c;
}

// 0.35 kg cube of side 5 cm held by one contact on -x and two on +x.
ContactSet cube_grasp(double mu) {
  const double h = 0.025;
  ContactSet s;
  s.contacts = {contact({-h, 0.0, 0.0}, Vec3::UnitX(), mu), contact({h, 0.015, 0.0}, -Vec3::UnitX(), mu),
                contact({h, -0.015, 0.0}, -Vec3::UnitX(), mu)};
  return s;
}

void check_result_invariants(const ContactSet& set, const Vec6& desired, const WrenchErrorResult& r, double lambda,
                             int edges) {
  const GraspMap G = grasp_map(set);
  Eigen::VectorXd f(3 * static_cast<Eigen::Index>(set.contacts.size()));
  for (std::size_t i = 0; i < set.contacts.size(); ++i) f.segment<3>(3 * static_cast<Eigen::Index>(i)) = r.forces[i];
  CHECK((G * f - r.achieved).norm() <= 1e-9);
  const double recomputed = (r.achieved - desired).squaredNorm() + lambda * f.squaredNorm();
  CHECK(std::abs(recomputed - r.error) <= 1e-9 * std::max(1.0, r.error));
  CHECK(r.error >= 0.0);
  // Inside the linearized cone: a nonnegative combination of its edges.
  for (std::size_t i = 0; i < set.contacts.size(); ++i) {
    const auto e = contact_edges(set.contacts[i], edges);
    Eigen::MatrixXd E(3, static_cast<Eigen::Index>(e.size()));
    for (std::size_t j = 0; j < e.size(); ++j) E.col(static_cast<Eigen::Index>(j)) = e[j];
    const Eigen::VectorXd c = solve_nnls(E, r.forces[i], 0.0);
    CHECK((E * c - r.forces[i]).norm() <= 1e-8);
  }
}

}  // namespace

TEST_CASE("grasp map blocks") {
  ContactSet s;
  s.contacts = {contact({0.1, 0.0, 0.0}, Vec3::UnitX(), 0.5), contact(Vec3::Zero(), Vec3::UnitZ(), 0.5)};
  const GraspMap G = grasp_map(s);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(6);
  f.segment<3>(0) = Vec3(0.0, 1.0, 0.0);
  const Vec6 w = G * f;
  CHECK(w.head<3>().isApprox(Vec3(0, 1, 0)));
  CHECK((w.tail<3>() - Vec3(0, 0, 0.1)).norm() <= 1e-15);
  // A contact at the reference point has no torque block.
  CHECK(G.block<3, 3>(3, 3).isZero());
  CHECK(G.block<3, 3>(0, 3).isIdentity());
}

TEST_CASE("equal and opposite forces along the contact line cancel") {
  ContactSet s;
  s.reference = Vec3(0.01, 0.02, 0.0);
  s.contacts = {contact({-0.03, 0.0, 0.0}, Vec3::UnitX(), 0.3), contact({0.03, 0.0, 0.0}, -Vec3::UnitX(), 0.3)};
  Eigen::VectorXd f(6);
  f << 2.0, 0.0, 0.0, -2.0, 0.0, 0.0;
  CHECK((grasp_map(s) * f).norm() <= 1e-15);
}

TEST_CASE("cone linearization") {
  const auto single = linearize_cone(Vec3::UnitZ(), 0.0, 8);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Vec3::UnitZ());

  const auto four = linearize_cone(Vec3::UnitZ(), 1.0, 4);
  REQUIRE(four.size() == 4);
  for (const Vec3& e : four) {
    CHECK(e.norm() == doctest::Approx(1.0));
    CHECK(std::acos(e.z()) == doctest::Approx(M_PI / 4).epsilon(1e-12));
    // Each edge lies in the xz or yz plane.
    CHECK(std::min(std::abs(e.x()), std::abs(e.y())) <= 1e-15);
  }

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    const Vec3 n = Vec3(g(rng), g(rng), g(rng)).normalized();
    const double mu = std::abs(g(rng));
    for (const Vec3& e : linearize_cone(n, mu, 3 + i % 9)) {
      const double along = e.dot(n);
      CHECK((e - along * n).norm() <= mu * along + 1e-12);
    }
  }
  CHECK_THROWS_AS(linearize_cone(Vec3::UnitZ(), 0.5, 2), std::invalid_argument);
  CHECK_THROWS_AS(linearize_cone(Vec3::UnitZ(), -0.1, 8), std::invalid_argument);
}

TEST_CASE("sliding contacts use the single backward edge") {
  Contact c = contact(Vec3::Zero(), Vec3::UnitZ(), 0.5);
  c.slide_direction = Vec3::UnitX();
  const auto e = contact_edges(c, 8);
  REQUIRE(e.size() == 1);
  CHECK(e[0].isApprox(Vec3(-0.5, 0.0, 1.0).normalized()));
}

TEST_CASE("nnls small cases") {
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  CHECK(solve_nnls(I, Eigen::Vector2d(1.0, -1.0)).isApprox(Eigen::Vector2d(1.0, 0.0)));
  CHECK(solve_nnls(I, Eigen::Vector2d::Zero()).isZero());
  CHECK_THROWS_AS(solve_nnls(I, Eigen::Vector3d::Zero()), std::invalid_argument);
}

TEST_CASE("nnls matches least squares when that is nonnegative, and satisfies KKT") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int unconstrained_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index m = 3 + trial % 6, n = 1 + trial % 5;
    Eigen::MatrixXd A(m, n);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = u(rng);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) b[i] = u(rng);
    const double lambda = trial % 2 ? 0.0 : 1e-3;
    const Eigen::VectorXd x = solve_nnls(A, b, lambda);
    CHECK(nnls_kkt_residual(A, b, lambda, x) <= 1e-8);
    Eigen::MatrixXd H = A.transpose() * A;
    H.diagonal().array() += lambda;
    const Eigen::VectorXd ls = H.ldlt().solve(A.transpose() * b);
    if (ls.minCoeff() >= 0.0) {
      ++unconstrained_cases;
      CHECK((x - ls).norm() <= 1e-9 * std::max(1.0, ls.norm()));
    }
  }
  CHECK(unconstrained_cases > 10);
}

TEST_CASE("wrench error: zero target, frictionless orthogonal contact, empty set") {
  const ContactSet cube = cube_grasp(0.5);
  const auto zero = wrench_error(cube, Vec6::Zero(), WrenchWeights{}, 1e-3);
  CHECK(zero.error == 0.0);
  for (const Vec3& f : zero.forces) CHECK(f.isZero());

  ContactSet one;
  one.contacts = {contact(Vec3::Zero(), Vec3::UnitZ(), 0.0)};
  Vec6 w = Vec6::Zero();
  w[0] = 1.0;
  const auto r = wrench_error(one, w, WrenchWeights{}, 0.0);
  CHECK(r.error == 1.0);
  CHECK(r.forces[0].isZero());

  Vec6 big;
  big << 1, 2, 3, 0.1, 0.2, 0.3;
  CHECK(wrench_error(ContactSet{}, big, WrenchWeights{}, 1e-3).error == doctest::Approx(big.squaredNorm()));
}

TEST_CASE("wrench error: force-closure cube resists gravity") {
  const ContactSet cube = cube_grasp(0.5);
  for (double sign : {1.0, -1.0}) {
    Vec6 w = Vec6::Zero();
    w[2] = sign * 0.35 * 9.81;
    const auto r = wrench_error(cube, w, WrenchWeights{}, 0.0);
    CHECK(r.error <= 1e-6);
    check_result_invariants(cube, w, r, 0.0, 8);
  }
}

TEST_CASE("wrench error: weights scale residual components") {
  ContactSet one;
  one.contacts = {contact(Vec3::Zero(), Vec3::UnitZ(), 0.0)};
  Vec6 w = Vec6::Zero();
  w[0] = 1.0;
  w[5] = 2.0;
  CHECK(wrench_error(one, w, WrenchWeights{3.0, 0.5}, 0.0).error == doctest::Approx(9.0 + 1.0));
  CHECK_THROWS_AS(wrench_error(one, w, WrenchWeights{0.0, 1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(wrench_error(one, w, WrenchWeights{}, -1.0), std::invalid_argument);
}

TEST_CASE("wrench error: random instances keep invariants, monotone in contacts, quadratic in scale") {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 60; ++trial) {
    ContactSet s;
    const int k = 1 + trial % 4;
    for (int i = 0; i < k; ++i) {
      const Vec3 p = 0.03 * Vec3(g(rng), g(rng), g(rng));
      s.contacts.push_back(contact(p, -p + 0.01 * Vec3(g(rng), g(rng), g(rng)), 0.2 + 0.1 * std::abs(g(rng))));
    }
    Vec6 w;
    for (int i = 0; i < 6; ++i) w[i] = g(rng) * (i < 3 ? 1.0 : 0.05);
    const auto r = wrench_error(s, w, WrenchWeights{}, 1e-3);
    check_result_invariants(s, w, r, 1e-3, 8);

    ContactSet more = s;
    more.contacts.push_back(contact(0.03 * Vec3(g(rng), g(rng), g(rng)), Vec3(g(rng), g(rng), g(rng)), 0.4));
    CHECK(wrench_error(more, w, WrenchWeights{}, 1e-3).error <= r.error + 1e-12);

    const double e0 = wrench_error(s, w, WrenchWeights{}, 0.0).error;
    const double e3 = wrench_error(s, 3.0 * w, WrenchWeights{}, 0.0).error;
    CHECK(std::abs(e3 - 9.0 * e0) <= 1e-8 * std::max(1.0, e3));
  }
}

TEST_CASE("wrench error: planar instances agree with the grid oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = graspdp::testing::random_planar_instance(rng);
    const double solver = wrench_error(p.contacts(), p.desired6(), WrenchWeights{}, p.lambda).error;
    const double oracle = graspdp::testing::planar_grid_oracle(p);
    CHECK(solver <= oracle + 1e-12);
    CHECK(std::abs(solver - oracle) <= 0.05 * oracle);
  }
}
