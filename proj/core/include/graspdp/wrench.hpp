#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "graspdp/geometry.hpp"

namespace graspdp {

/// Point contact with Coulomb friction. When `slide_direction` is set the
/// contact is sliding along it and friction opposes the motion, so the
/// force is restricted to the single cone boundary edge facing backwards.
struct Contact {
  Vec3 position = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // inward unit normal
  double friction = 0.5;
  std::optional<Vec3> slide_direction;
};

struct ContactSet {
  std::vector<Contact> contacts;
  Vec3 reference = Vec3::Zero();  // torque reference point (tool center of mass)

  void validate() const;
  bool empty() const { return contacts.empty(); }
};

using GraspMap = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// 6 x 3k map from stacked contact forces to the net wrench about the
/// reference point: identity force blocks over (p_i - ref)x torque blocks.
GraspMap grasp_map(const ContactSet& contacts);

/// Pyramid approximation of a friction cone: unit edges n + mu t_j at equal
/// tangent angles. mu == 0 gives the single normal direction.
std::vector<Vec3> linearize_cone(const Vec3& normal, double mu, int edge_count = 8);

/// Edges admitted for one contact (a single edge for sliding contacts).
std::vector<Vec3> contact_edges(const Contact& contact, int edge_count = 8);

/// min ||A x - b||^2 + lambda ||x||^2 subject to x >= 0 (Lawson-Hanson
/// active set). Throws std::invalid_argument on dimension mismatch.
Eigen::VectorXd solve_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda = 0.0);

/// Largest violation of the KKT conditions of the problem above at x.
double nnls_kkt_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda, const Eigen::VectorXd& x);

struct WrenchWeights {
  double force = 1.0;   // multiplies force residual components (N)
  double torque = 1.0;  // multiplies torque residual components (N m)
};

struct WrenchOptions {
  WrenchWeights weights;
  double regularization = 1e-3;
  int cone_edges = 8;
};

struct WrenchErrorResult {
  double error = 0.0;           // ||W (G f - w_d)||^2 + lambda ||f||^2
  double mismatch = 0.0;        // ||W (G f - w_d)||^2
  double regularization = 0.0;  // lambda ||f||^2
  std::vector<Vec3> forces;     // per contact, N
  Vec6 achieved = Vec6::Zero();  // G f
};

/// Friction-cone constrained least-squares fit of the contact forces to the
/// desired net wrench (force; torque about the reference point).
WrenchErrorResult wrench_error(const ContactSet& contacts, const Vec6& desired, const WrenchWeights& weights,
                               double lambda, int cone_edges = 8);

inline WrenchErrorResult wrench_error(const ContactSet& contacts, const Vec6& desired, const WrenchOptions& options) {
  return wrench_error(contacts, desired, options.weights, options.regularization, options.cone_edges);
}

}  // namespace graspdp
