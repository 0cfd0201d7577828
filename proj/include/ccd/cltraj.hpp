#pragma once

#include <vector>

#include "ccd/equilibrium.hpp"
#include "ccd/riccati.hpp"

namespace ccd {

struct Trajectory {
  std::vector<VectorXd> dx;  // perturbation states, entries 0..n_t
  double dt = 0.0;
  int n_t = 0;
  double cost = 0.0;
};

// Cost integrand weight Q + P' G S^{-T} G' P shared by the cost and its partials.
inline MatrixXd cost_weight_matrix(const RiccatiSolution& ric, const CostWeights& w) {
  MatrixXd SinvTGtP = w.S.transpose().llt().solve(ric.G_tgt.transpose() * ric.P);
  return w.Q + ric.P.transpose() * ric.G_tgt * SinvTGtP;
}

// f = sum_{i=1..n_t} dx_i' (Q + P' G S^{-T} G' P) dx_i * dt; dx_0 excluded.
inline double lqr_cost(const Trajectory& traj, const RiccatiSolution& ric, const CostWeights& w) {
  MatrixXd M = cost_weight_matrix(ric, w);
  double f = 0.0;
  for (int i = 1; i <= traj.n_t; ++i) f += traj.dx[i].dot(M * traj.dx[i]);
  return f * traj.dt;
}

// Explicit Euler on the closed loop: the full nonlinear residual with the
// gain frozen at the target point,
//   dx_k = dx_{k-1} + r_nl(x_tgt + dx_{k-1}, u_tgt + W dx_{k-1}, d) * dt.
inline Trajectory simulate(const PlantModel& plant, const EquilibriumSolution& eq,
                           const RiccatiSolution& ric, const VectorXd& d, const VectorXd& dx0,
                           double dt, int n_t, const CostWeights& weights) {
  if (dt <= 0.0 || n_t < 1) throw ConfigError("simulate requires dt > 0 and n_t >= 1");
  Trajectory traj;
  traj.dt = dt;
  traj.n_t = n_t;
  traj.dx.reserve(n_t + 1);
  traj.dx.push_back(dx0);
  VectorXd dx = dx0;
  for (int k = 1; k <= n_t; ++k) {
    VectorXd r = plant.residual(eq.x_tgt + dx, eq.u_tgt + ric.W * dx, d);
    dx += r * dt;
    if (!dx.allFinite()) throw DivergedTrajectory("non-finite state in closed-loop simulation", k);
    traj.dx.push_back(dx);
  }
  traj.cost = lqr_cost(traj, ric, weights);
  return traj;
}

}  // namespace ccd
