#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "ccd/lyapunov.hpp"

namespace ccd {

struct CostWeights {
  MatrixXd Q;  // state cost, symmetric PSD
  MatrixXd S;  // control cost, symmetric PD

  void validate() const {
    auto sym_err = [](const MatrixXd& M) { return (M - M.transpose()).norm(); };
    if (sym_err(Q) > 1e-12 * (1.0 + Q.norm())) throw ConfigError("Q must be symmetric");
    if (sym_err(S) > 1e-12 * (1.0 + S.norm())) throw ConfigError("S must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eq(Q);
    if (eq.eigenvalues().minCoeff() < -1e-12 * (1.0 + Q.norm()))
      throw ConfigError("Q must be positive semi-definite");
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw ConfigError("S must be positive definite");
  }
};

struct RiccatiSolution {
  MatrixXd P;      // ARE solution
  MatrixXd W;      // feedback gain, W = -S^{-1} G' P
  MatrixXd J_tgt;  // state Jacobian frozen at the target point
  MatrixXd G_tgt;  // control Jacobian frozen at the target point
  double residual_norm = 0.0;

  // Closed-loop matrix J_tgt - G_tgt S^{-1} G_tgt' P (equals J_tgt + G_tgt W).
  MatrixXd closed_loop() const { return J_tgt + G_tgt * W; }
};

inline MatrixXd feedback_gain(const MatrixXd& P, const MatrixXd& G_tgt, const MatrixXd& S) {
  return -S.llt().solve(G_tgt.transpose() * P);
}

inline MatrixXd are_residual(const MatrixXd& P, const MatrixXd& J, const MatrixXd& G,
                             const CostWeights& w) {
  return J.transpose() * P + P * J - P * G * w.S.llt().solve(G.transpose() * P) + w.Q;
}

namespace detail {

// Integrates Pdot = J'P + PJ - PGS^{-1}G'P + Q from P(0) = Q with adaptive
// explicit steps until the associated gain stabilizes the pair, producing a
// seed for the Kleinman iteration.
inline MatrixXd stabilizing_seed(const MatrixXd& J, const MatrixXd& G, const CostWeights& w) {
  const int n = static_cast<int>(J.rows());
  MatrixXd P = w.Q;
  auto gain_is_stabilizing = [&](const MatrixXd& Pc) {
    return is_hurwitz(J + G * feedback_gain(Pc, G, w.S), 1e-12);
  };
  if (gain_is_stabilizing(P)) return P;
  double dt = 0.1 / (1.0 + J.norm());
  const int max_steps = 200000;
  for (int step = 0; step < max_steps; ++step) {
    MatrixXd R = are_residual(P, J, G, w);
    MatrixXd Pn = P + dt * R;
    Pn = 0.5 * (Pn + Pn.transpose());
    if (!Pn.allFinite() || Pn.norm() > 1e12) {
      dt *= 0.5;
      if (dt < 1e-300) break;
      continue;
    }
    P = Pn;
    if (R.norm() <= 1e-3 * (1.0 + P.norm()) || step % 8 == 0) {
      if (gain_is_stabilizing(P)) return P;
    }
    // Grow the step cautiously; blow-ups are caught and halved above.
    dt *= 1.02;
  }
  throw NotStabilizable("failed to produce a stabilizing gain from the differential Riccati sweep");
}

}  // namespace detail

// Kleinman-Newton: from a stabilizing gain W_k, solve
//   (J + G W_k)' P + P (J + G W_k) = -(Q + W_k' S W_k)
// and update W_{k+1} = -S^{-1} G' P. Quadratically convergent.
inline RiccatiSolution solve_are(const MatrixXd& J_tgt, const MatrixXd& G_tgt,
                                 const CostWeights& weights, double tol = 1e-12,
                                 int max_iter = 50) {
  weights.validate();
  RiccatiSolution sol;
  sol.J_tgt = J_tgt;
  sol.G_tgt = G_tgt;

  MatrixXd P = detail::stabilizing_seed(J_tgt, G_tgt, weights);
  MatrixXd W = feedback_gain(P, G_tgt, weights.S);
  double res = are_residual(P, J_tgt, G_tgt, weights).norm();
  for (int it = 0; it < max_iter; ++it) {
    if (res <= tol) break;
    MatrixXd A = J_tgt + G_tgt * W;
    MatrixXd C = weights.Q + W.transpose() * weights.S * W;
    P = solve_lyapunov(A.transpose(), C);
    P = 0.5 * (P + P.transpose());
    W = feedback_gain(P, G_tgt, weights.S);
    res = are_residual(P, J_tgt, G_tgt, weights).norm();
  }
  if (res > std::max(tol, 1e-10)) throw NoConvergence("Kleinman iteration did not converge", res);
  sol.P = P;
  sol.W = W;
  sol.residual_norm = res;
  if (!is_hurwitz(sol.closed_loop(), 1e-10))
    throw NotStabilizable("accepted Riccati solution is not stabilizing");
  return sol;
}

}  // namespace ccd
