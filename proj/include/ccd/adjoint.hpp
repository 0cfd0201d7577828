#pragma once

#include <vector>

#include "ccd/cltraj.hpp"
#include "ccd/equilibrium.hpp"
#include "ccd/lyapunov.hpp"
#include "ccd/riccati.hpp"

namespace ccd {

struct AdjointBundle {
  std::vector<VectorXd> psi_cl;  // entries 1..n_t ([0] kept zero)
  MatrixXd Psi_ARE;
  VectorXd psi_nl;   // one entry per equilibrium unknown
  VectorXd grad;     // df/dd
};

struct CostPartials {
  std::vector<VectorXd> df_ddx;  // entries 0..n_t; entry 0 is zero (dx_0 is data)
  MatrixXd df_dP;
  MatrixXd df_dG;
};

inline CostPartials cost_partials(const Trajectory& traj, const RiccatiSolution& ric,
                                  const CostWeights& w) {
  const int n_x = static_cast<int>(ric.P.rows());
  CostPartials cp;
  cp.df_ddx.assign(traj.n_t + 1, VectorXd::Zero(n_x));
  // 2 (Q + P' G S^{-T} G' P) dx_i dt
  MatrixXd M2 = 2.0 * cost_weight_matrix(ric, w) * traj.dt;
  for (int i = 1; i <= traj.n_t; ++i) cp.df_ddx[i] = M2 * traj.dx[i];

  MatrixXd Ssum = w.S.transpose().llt().solve(MatrixXd::Identity(w.S.rows(), w.S.cols())) +
                  w.S.llt().solve(MatrixXd::Identity(w.S.rows(), w.S.cols()));
  MatrixXd X = MatrixXd::Zero(n_x, n_x);  // sum dx_i dx_i' dt
  for (int i = 1; i <= traj.n_t; ++i) X += traj.dx[i] * traj.dx[i].transpose() * traj.dt;
  cp.df_dP = ric.G_tgt * Ssum * ric.G_tgt.transpose() * ric.P * X;
  cp.df_dG = ric.P * X * ric.P.transpose() * ric.G_tgt * Ssum;
  return cp;
}

// Reverse sweep of the transposed bidiagonal closed-loop system:
//   psi_{n_t} = -df/ddx_{n_t},
//   psi_k = -df/ddx_k + (I + dt (J_k + G_k W)') psi_{k+1},
// with J_k, G_k evaluated on the trajectory at (x_tgt + dx_k, u_tgt + W dx_k).
inline std::vector<VectorXd> solve_closed_loop_adjoint(const PlantModel& plant,
                                                       const EquilibriumSolution& eq,
                                                       const RiccatiSolution& ric,
                                                       const Trajectory& traj,
                                                       const CostWeights& weights,
                                                       const VectorXd& d) {
  CostPartials cp = cost_partials(traj, ric, weights);
  const int n_t = traj.n_t;
  const int n_x = plant.n_x();
  std::vector<VectorXd> psi(n_t + 1, VectorXd::Zero(n_x));
  psi[n_t] = -cp.df_ddx[n_t];
  for (int k = n_t - 1; k >= 1; --k) {
    VectorXd x = eq.x_tgt + traj.dx[k];
    VectorXd u = eq.u_tgt + ric.W * traj.dx[k];
    MatrixXd Acl = plant.jac_x(x, u, d) + plant.jac_u(x, u, d) * ric.W;
    psi[k] = -cp.df_ddx[k] + psi[k + 1] + traj.dt * Acl.transpose() * psi[k + 1];
  }
  return psi;
}

// Trajectory contractions of the closed-loop residual against psi_cl.
// Index convention: psi^{(k)} pairs with the Jacobians at step k-1, matching
// the explicit-Euler primal.
struct ClosedLoopContractions {
  MatrixXd S_P;        // sum_k dt G_{k-1}' psi_k dx_{k-1}'        (n_u x n_x)
  VectorXd sum_Jpsi;   // sum_k dt J_{k-1}' psi_k                  (n_x)
  VectorXd sum_Gpsi;   // sum_k dt G_{k-1}' psi_k                  (n_u)
  VectorXd grad_d;     // -sum_k dt (dr_nl/dd at step k-1)' psi_k  (n_d)
};

inline ClosedLoopContractions contract_closed_loop(const PlantModel& plant,
                                                   const EquilibriumSolution& eq,
                                                   const RiccatiSolution& ric,
                                                   const Trajectory& traj,
                                                   const std::vector<VectorXd>& psi,
                                                   const VectorXd& d) {
  ClosedLoopContractions c;
  c.S_P = MatrixXd::Zero(plant.n_u(), plant.n_x());
  c.sum_Jpsi = VectorXd::Zero(plant.n_x());
  c.sum_Gpsi = VectorXd::Zero(plant.n_u());
  c.grad_d = VectorXd::Zero(plant.n_d());
  for (int k = 1; k <= traj.n_t; ++k) {
    VectorXd x = eq.x_tgt + traj.dx[k - 1];
    VectorXd u = eq.u_tgt + ric.W * traj.dx[k - 1];
    VectorXd Jtpsi = plant.jac_x(x, u, d).transpose() * psi[k];
    VectorXd Gtpsi = plant.jac_u(x, u, d).transpose() * psi[k];
    c.S_P += traj.dt * Gtpsi * traj.dx[k - 1].transpose();
    c.sum_Jpsi += traj.dt * Jtpsi;
    c.sum_Gpsi += traj.dt * Gtpsi;
    c.grad_d -= traj.dt * plant.jac_d(x, u, d).transpose() * psi[k];
  }
  return c;
}

// Lyapunov solve for the ARE adjoint: Jt Psi + Psi Jt' + sym(rhs) = 0 with
// Jt = J_tgt - G_tgt S^{-1} G_tgt' P (the closed-loop matrix).
inline MatrixXd solve_are_adjoint(const RiccatiSolution& ric, const MatrixXd& rhs) {
  MatrixXd sym_rhs = 0.5 * (rhs + rhs.transpose());
  return solve_lyapunov(ric.closed_loop(), sym_rhs);
}

// Reverse-mode seeds contracting the design/target derivatives of the frozen
// Jacobians. Jbar carries the ARE trace term; Gbar additionally carries the
// cost's and the closed-loop residual's dependence on G_tgt through W.
struct TraceSeeds {
  MatrixXd Jbar;
  MatrixXd Gbar;
};

inline TraceSeeds trace_seeds(const RiccatiSolution& ric, const CostWeights& w,
                              const CostPartials& cp, const ClosedLoopContractions& cl,
                              const MatrixXd& Psi) {
  const MatrixXd& P = ric.P;
  TraceSeeds s;
  s.Jbar = P * Psi.transpose() + P.transpose() * Psi;
  // -P' Psi P' G S^{-T} - P Psi' P G S^{-1}
  MatrixXd t1 = P.transpose() * Psi * P.transpose() * ric.G_tgt;
  MatrixXd t2 = P * Psi.transpose() * P * ric.G_tgt;
  s.Gbar = -(w.S.transpose().llt().solve(t1.transpose())).transpose() -
           (w.S.llt().solve(t2.transpose())).transpose();
  // f and r_cl both depend on G_tgt via the frozen gain; fold them in so one
  // contraction covers every tr(G' Gbar) term.
  s.Gbar += cp.df_dG + P * cl.S_P.transpose() * w.S.llt().solve(MatrixXd::Identity(w.S.rows(), w.S.cols()));
  return s;
}

// Steady-state adjoint: (dr_check/dtheta)' psi_nl = -(df/dtheta + psi_cl' dr_cl/dtheta
// + dtr(Psi' R_ARE)/dtheta), assembled from the x_tgt/u_tgt components.
inline VectorXd solve_steady_adjoint(const PlantModel& plant, const EquilibriumSolution& eq,
                                     const RiccatiSolution& ric, const TraceSeeds& seeds,
                                     const ClosedLoopContractions& cl, const VectorXd& d) {
  const EquilibriumPartition& p = plant.partition();
  const int nt = p.n_theta();
  if (nt == 0) return VectorXd();

  VectorXd g_x = plant.contract_jacobians(eq.x_tgt, eq.u_tgt, d, seeds.Jbar, seeds.Gbar, Wrt::state) -
                 cl.sum_Jpsi;
  VectorXd g_u = plant.contract_jacobians(eq.x_tgt, eq.u_tgt, d, seeds.Jbar, seeds.Gbar, Wrt::control) -
                 cl.sum_Gpsi;

  VectorXd rhs(nt);
  const int nsx = static_cast<int>(p.unknown_state_idx.size());
  for (int i = 0; i < nsx; ++i) rhs[i] = -g_x[p.unknown_state_idx[i]];
  for (size_t i = 0; i < p.unknown_control_idx.size(); ++i)
    rhs[nsx + i] = -g_u[p.unknown_control_idx[i]];

  MatrixXd Jr = reduced_jacobian(plant, eq.x_tgt, eq.u_tgt, d, p);
  Eigen::FullPivLU<MatrixXd> lu(Jr.transpose());
  if (!lu.isInvertible())
    throw SingularJacobian("singular reduced Jacobian in steady-state adjoint");
  return lu.solve(rhs);
}

// Total derivative df/dd assembled from the three adjoints.
inline VectorXd total_gradient(const PlantModel& plant, const EquilibriumSolution& eq,
                               const RiccatiSolution& ric, const TraceSeeds& seeds,
                               const ClosedLoopContractions& cl, const VectorXd& psi_nl,
                               const VectorXd& d) {
  VectorXd grad =
      plant.contract_jacobians(eq.x_tgt, eq.u_tgt, d, seeds.Jbar, seeds.Gbar, Wrt::design) +
      cl.grad_d;
  const EquilibriumPartition& p = plant.partition();
  if (p.n_theta() > 0) {
    MatrixXd Jd = plant.jac_d(eq.x_tgt, eq.u_tgt, d);
    for (size_t r = 0; r < p.residual_row_idx.size(); ++r)
      grad += psi_nl[r] * Jd.row(p.residual_row_idx[r]).transpose();
  }
  return grad;
}

// Algorithm: closed-loop adjoint -> ARE adjoint -> steady-state adjoint ->
// total-derivative assembly.
inline AdjointBundle compute_gradient(const PlantModel& plant, const EquilibriumSolution& eq,
                                      const RiccatiSolution& ric, const Trajectory& traj,
                                      const CostWeights& weights, const VectorXd& d) {
  AdjointBundle b;
  b.psi_cl = solve_closed_loop_adjoint(plant, eq, ric, traj, weights, d);
  ClosedLoopContractions cl = contract_closed_loop(plant, eq, ric, traj, b.psi_cl, d);
  CostPartials cp = cost_partials(traj, ric, weights);

  MatrixXd rhs = cp.df_dP +
                 ric.G_tgt * weights.S.transpose().llt().solve(cl.S_P);
  b.Psi_ARE = solve_are_adjoint(ric, rhs);

  TraceSeeds seeds = trace_seeds(ric, weights, cp, cl, b.Psi_ARE);
  b.psi_nl = solve_steady_adjoint(plant, eq, ric, seeds, cl, d);
  b.grad = total_gradient(plant, eq, ric, seeds, cl, b.psi_nl, d);
  return b;
}

}  // namespace ccd
