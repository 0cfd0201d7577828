#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ccd/plant.hpp"

namespace ccd {

struct EquilibriumSolution {
  VectorXd theta;   // solved unknowns [x_check; u_check]
  VectorXd x_tgt;
  VectorXd u_tgt;
  double residual_norm = 0.0;
  int iterations = 0;
};

// Scatter known values and theta into full-length target vectors.
inline void assemble_targets(const EquilibriumPartition& p, const VectorXd& x_hat,
                             const VectorXd& u_hat, const VectorXd& theta, int n_x, int n_u,
                             VectorXd& x_tgt, VectorXd& u_tgt) {
  x_tgt.resize(n_x);
  u_tgt.resize(n_u);
  for (size_t i = 0; i < p.known_state_idx.size(); ++i) x_tgt[p.known_state_idx[i]] = x_hat[i];
  for (size_t i = 0; i < p.unknown_state_idx.size(); ++i) x_tgt[p.unknown_state_idx[i]] = theta[i];
  const int off = static_cast<int>(p.unknown_state_idx.size());
  for (size_t i = 0; i < p.known_control_idx.size(); ++i) u_tgt[p.known_control_idx[i]] = u_hat[i];
  for (size_t i = 0; i < p.unknown_control_idx.size(); ++i)
    u_tgt[p.unknown_control_idx[i]] = theta[off + i];
}

// Rows residual_row_idx of [jac_x | jac_u], columns restricted to the unknowns.
inline MatrixXd reduced_jacobian(const PlantModel& plant, const VectorXd& x_tgt,
                                 const VectorXd& u_tgt, const VectorXd& d,
                                 const EquilibriumPartition& p) {
  const int nt = p.n_theta();
  MatrixXd R(nt, nt);
  if (nt == 0) return R;
  MatrixXd Jx = plant.jac_x(x_tgt, u_tgt, d);
  MatrixXd Ju = plant.jac_u(x_tgt, u_tgt, d);
  const int nsx = static_cast<int>(p.unknown_state_idx.size());
  for (int r = 0; r < nt; ++r) {
    int row = p.residual_row_idx[r];
    for (int c = 0; c < nsx; ++c) R(r, c) = Jx(row, p.unknown_state_idx[c]);
    for (size_t c = 0; c < p.unknown_control_idx.size(); ++c)
      R(r, nsx + c) = Ju(row, p.unknown_control_idx[c]);
  }
  return R;
}

inline VectorXd reduced_residual(const PlantModel& plant, const VectorXd& x_tgt,
                                 const VectorXd& u_tgt, const VectorXd& d,
                                 const EquilibriumPartition& p) {
  VectorXd full = plant.residual(x_tgt, u_tgt, d);
  VectorXd r(p.residual_row_idx.size());
  for (size_t i = 0; i < p.residual_row_idx.size(); ++i) r[i] = full[p.residual_row_idx[i]];
  return r;
}

// Newton with step halving (Armijo on ||r||^2) for the partitioned
// steady-state system. x_hat/u_hat are the known target values ordered like
// the partition's known index sets.
inline EquilibriumSolution solve_equilibrium(const PlantModel& plant, const VectorXd& x_hat,
                                             const VectorXd& u_hat, const VectorXd& d,
                                             const VectorXd& theta0, double tol = 1e-12,
                                             int max_iter = 50) {
  const EquilibriumPartition& p = plant.partition();
  p.validate(plant.n_x(), plant.n_u());
  if (!theta0.allFinite()) throw DomainError("non-finite theta0");

  EquilibriumSolution sol;
  sol.theta = theta0;
  assemble_targets(p, x_hat, u_hat, sol.theta, plant.n_x(), plant.n_u(), sol.x_tgt, sol.u_tgt);

  if (p.n_theta() == 0) {
    sol.residual_norm = plant.residual(sol.x_tgt, sol.u_tgt, d).norm();
    return sol;
  }

  VectorXd r = reduced_residual(plant, sol.x_tgt, sol.u_tgt, d, p);
  double norm = r.norm();
  for (int it = 0; it < max_iter; ++it) {
    if (norm <= tol) {
      sol.residual_norm = norm;
      sol.iterations = it;
      return sol;
    }
    MatrixXd Jr = reduced_jacobian(plant, sol.x_tgt, sol.u_tgt, d, p);
    Eigen::FullPivLU<MatrixXd> lu(Jr);
    if (!lu.isInvertible()) {
      double cond = std::abs(lu.maxPivot()) /
                    std::max(std::abs(lu.matrixLU().diagonal().cwiseAbs().minCoeff()), 1e-300);
      throw SingularJacobian("singular reduced Jacobian in equilibrium solve", cond);
    }
    VectorXd step = lu.solve(-r);
    double alpha = 1.0;
    VectorXd theta_new;
    VectorXd r_new;
    double norm_new = norm;
    for (int h = 0; h <= 20; ++h) {
      theta_new = sol.theta + alpha * step;
      assemble_targets(p, x_hat, u_hat, theta_new, plant.n_x(), plant.n_u(), sol.x_tgt, sol.u_tgt);
      r_new = reduced_residual(plant, sol.x_tgt, sol.u_tgt, d, p);
      norm_new = r_new.norm();
      if (std::isfinite(norm_new) && norm_new < norm) break;
      alpha *= 0.5;
    }
    sol.theta = theta_new;
    r = r_new;
    norm = norm_new;
    sol.iterations = it + 1;
  }
  if (norm > tol) {
    sol.residual_norm = norm;
    throw NoConvergence("equilibrium Newton exceeded max_iter", norm);
  }
  sol.residual_norm = norm;
  return sol;
}

}  // namespace ccd
