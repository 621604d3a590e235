#include "graspdp/wrench.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace graspdp {

void ContactSet::validate() const {
  for (const Contact& c : contacts) {
    if (std::abs(c.normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("contact normal is not unit length");
    if (!(c.friction >= 0.0)) throw std::invalid_argument("contact friction must be non-negative");
  }
}

GraspMap grasp_map(const ContactSet& contacts) {
  const auto k = static_cast<Eigen::Index>(contacts.contacts.size());
  GraspMap G = GraspMap::Zero(6, 3 * k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Contact& c = contacts.contacts[static_cast<std::size_t>(i)];
    G.block<3, 3>(0, 3 * i).setIdentity();
    G.block<3, 3>(3, 3 * i) = skew(c.position - contacts.reference);
  }
  return G;
}

namespace {

// Tangent basis (t1, t2) with t1 = n x e for the coordinate axis e least
// aligned with n (first such axis on ties), t2 = n x t1.
std::pair<Vec3, Vec3> tangent_basis(const Vec3& n) {
  const Vec3 a = n.cwiseAbs();
  Eigen::Index axis = 0;
  for (Eigen::Index i = 1; i < 3; ++i) {
    if (a[i] < a[axis]) axis = i;
  }
  const Vec3 t1 = n.cross(Vec3::Unit(axis)).normalized();
  return {t1, n.cross(t1)};
}

}  // namespace

std::vector<Vec3> linearize_cone(const Vec3& normal, double mu, int edge_count) {
  if (mu < 0.0) throw std::invalid_argument("linearize_cone: friction must be non-negative");
  if (mu == 0.0) return {normal};
  if (edge_count < 3) throw std::invalid_argument("linearize_cone: need at least 3 edges");
  const auto [t1, t2] = tangent_basis(normal);
  std::vector<Vec3> edges;
  edges.reserve(static_cast<std::size_t>(edge_count));
  for (int j = 0; j < edge_count; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / edge_count;
    edges.push_back((normal + mu * (std::cos(theta) * t1 + std::sin(theta) * t2)).normalized());
  }
  return edges;
}

std::vector<Vec3> contact_edges(const Contact& contact, int edge_count) {
  if (contact.slide_direction) {
    const Vec3 s = *contact.slide_direction - contact.normal * contact.normal.dot(*contact.slide_direction);
    if (s.norm() > 1e-12) return {(contact.normal - contact.friction * s.normalized()).normalized()};
  }
  return linearize_cone(contact.normal, contact.friction, edge_count);
}

Eigen::VectorXd solve_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda) {
  if (A.rows() != b.size()) throw std::invalid_argument("solve_nnls: A rows and b size differ");
  if (A.cols() < 1) throw std::invalid_argument("solve_nnls: A needs at least one column");
  if (lambda < 0.0) throw std::invalid_argument("solve_nnls: lambda must be non-negative");

  const Eigen::Index n = A.cols();
  // Work on the normal equations of the regularized problem.
  Eigen::MatrixXd Q = A.transpose() * A;
  Q.diagonal().array() += lambda;
  const Eigen::VectorXd c = A.transpose() * b;
  const double scale = std::max({1.0, Q.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff()});
  const double tol = 1e-13 * scale;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Eigen::VectorXd w = c;  // negative gradient of 0.5 x'Qx - c'x

  const auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd Qp(m, m);
    Eigen::VectorXd cp(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      cp[r] = c[idx[static_cast<std::size_t>(r)]];
      for (Eigen::Index s = 0; s < m; ++s) Qp(r, s) = Q(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(s)]);
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Qp);
    Eigen::VectorXd zp;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      zp = ldlt.solve(cp);
    } else {
      zp = Qp.colPivHouseholderQr().solve(cp);
    }
    z.setZero(n);
    for (Eigen::Index r = 0; r < m; ++r) z[idx[static_cast<std::size_t>(r)]] = zp[r];
  };

  const int max_outer = static_cast<int>(3 * n + 10);
  for (int outer = 0; outer < max_outer; ++outer) {
    Eigen::Index j = -1;
    double best = tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && w[i] > best) {
        best = w[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[static_cast<std::size_t>(j)] = true;

    Eigen::VectorXd z;
    bool stalled = false;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      solve_passive(z);
      if (inner == 0 && z[j] <= 0.0) {
        // Entering variable cannot move: its multiplier is zero to rounding.
        passive[static_cast<std::size_t>(j)] = false;
        stalled = true;
        break;
      }
      bool feasible = true;
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) {
          feasible = false;
          alpha = std::min(alpha, x[i] / (x[i] - z[i]));
        }
      }
      if (feasible) {
        x = z;
        break;
      }
      x += alpha * (z - x);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x[i] <= 1e-15 * scale) {
          passive[static_cast<std::size_t>(i)] = false;
          x[i] = 0.0;
        }
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!passive[static_cast<std::size_t>(i)]) x[i] = 0.0;
    }
    w = c - Q * x;
    if (stalled) break;
  }
  return x.cwiseMax(0.0);
}

double nnls_kkt_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda, const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = A.transpose() * (A * x - b) + lambda * x;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    worst = std::max(worst, -x[i]);
    worst = std::max(worst, x[i] > 0.0 ? std::abs(g[i]) : -g[i]);
  }
  return worst;
}

WrenchErrorResult wrench_error(const ContactSet& contacts, const Vec6& desired, const WrenchWeights& weights,
                               double lambda, int cone_edges) {
  if (!desired.allFinite()) throw std::invalid_argument("wrench_error: desired wrench must be finite");
  if (lambda < 0.0) throw std::invalid_argument("wrench_error: lambda must be non-negative");
  if (!(weights.force > 0.0) || !(weights.torque > 0.0)) {
    throw std::invalid_argument("wrench_error: weights must be positive");
  }
  contacts.validate();

  Vec6 wdiag;
  wdiag << weights.force, weights.force, weights.force, weights.torque, weights.torque, weights.torque;
  const Vec6 target = wdiag.cwiseProduct(desired);

  WrenchErrorResult out;
  out.forces.assign(contacts.contacts.size(), Vec3::Zero());
  if (contacts.empty()) {
    out.mismatch = target.squaredNorm();
    out.error = out.mismatch;
    return out;
  }

  // Edge matrix E: stacked forces f = E c with c >= 0.
  std::vector<std::vector<Vec3>> edges;
  Eigen::Index columns = 0;
  for (const Contact& c : contacts.contacts) {
    edges.push_back(contact_edges(c, cone_edges));
    columns += static_cast<Eigen::Index>(edges.back().size());
  }
  const auto k = static_cast<Eigen::Index>(contacts.contacts.size());
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(3 * k, columns);
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    for (const Vec3& e : edges[static_cast<std::size_t>(i)]) E.block<3, 1>(3 * i, col++) = e;
  }

  const GraspMap G = grasp_map(contacts);
  // Rows: weighted wrench fit, then sqrt(lambda) * f for the force penalty.
  Eigen::MatrixXd A(6 + 3 * k, columns);
  A.topRows(6) = wdiag.asDiagonal() * (G * E);
  A.bottomRows(3 * k) = std::sqrt(lambda) * E;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(6 + 3 * k);
  b.head<6>() = target;

  const Eigen::VectorXd coeff = solve_nnls(A, b, 0.0);
  const Eigen::VectorXd f = E * coeff;
  for (Eigen::Index i = 0; i < k; ++i) out.forces[static_cast<std::size_t>(i)] = f.segment<3>(3 * i);
  out.achieved = G * f;
  out.mismatch = wdiag.cwiseProduct(out.achieved - desired).squaredNorm();
  out.regularization = lambda * f.squaredNorm();
  out.error = out.mismatch + out.regularization;
  return out;
}

}  // namespace graspdp
