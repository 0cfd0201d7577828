#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <thread>
#include <vector>

#include "ccd/adjoint.hpp"
#include "ccd/cltraj.hpp"
#include "ccd/equilibrium.hpp"
#include "ccd/riccati.hpp"

namespace ccd {

struct AnalysisSettings {
  VectorXd x_hat;   // known target states, ordered like partition.known_state_idx
  VectorXd u_hat;   // known target controls
  VectorXd theta0;  // empty -> plant default
  double eq_tol = 1e-12;
  int eq_max_iter = 50;
  CostWeights weights;
  double are_tol = 1e-12;
  int are_max_iter = 50;
  VectorXd dx0;
  double dt = 0.01;
  int n_t = 1000;
};

struct AnalysisResult {
  EquilibriumSolution eq;
  RiccatiSolution ric;
  Trajectory traj;
  double cost = 0.0;
};

// Full analysis chain: equilibrium -> linearize -> ARE/gain -> closed-loop
// integration -> LQR cost.
inline AnalysisResult run_analysis(const PlantModel& plant, const VectorXd& d,
                                   const AnalysisSettings& s) {
  AnalysisResult r;
  VectorXd theta0 = s.theta0.size() > 0 ? s.theta0 : plant.theta0();
  r.eq = solve_equilibrium(plant, s.x_hat, s.u_hat, d, theta0, s.eq_tol, s.eq_max_iter);
  MatrixXd J = plant.jac_x(r.eq.x_tgt, r.eq.u_tgt, d);
  MatrixXd G = plant.jac_u(r.eq.x_tgt, r.eq.u_tgt, d);
  r.ric = solve_are(J, G, s.weights, s.are_tol, s.are_max_iter);
  r.traj = simulate(plant, r.eq, r.ric, d, s.dx0, s.dt, s.n_t, s.weights);
  r.cost = r.traj.cost;
  return r;
}

inline AdjointBundle analysis_gradient(const PlantModel& plant, const VectorXd& d,
                                       const AnalysisSettings& s, const AnalysisResult& r) {
  return compute_gradient(plant, r.eq, r.ric, r.traj, s.weights, d);
}

inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
    });
  for (auto& th : pool) th.join();
}

// Central finite differences of the full analysis chain, the independent
// oracle for the adjoint gradient. h = h_base * (1 + |d_i|) per component.
inline VectorXd fd_gradient(const PlantModel& plant, const VectorXd& d, const AnalysisSettings& s,
                            double h_base = 1e-5, int threads = 1) {
  VectorXd g(d.size());
  parallel_for(static_cast<int>(d.size()), threads, [&](int i) {
    double h = h_base * (1.0 + std::abs(d[i]));
    VectorXd dp = d, dm = d;
    dp[i] += h;
    dm[i] -= h;
    double fp = run_analysis(plant, dp, s).cost;
    double fm = run_analysis(plant, dm, s).cost;
    g[i] = (fp - fm) / (2.0 * h);
  });
  return g;
}

struct GradCheckResult {
  VectorXd adjoint;
  VectorXd fd;
  VectorXd rel_err;
  double max_rel_err = 0.0;
  double cost = 0.0;
};

inline GradCheckResult grad_check(const PlantModel& plant, const VectorXd& d,
                                  const AnalysisSettings& s, double fd_step = 1e-5,
                                  int threads = 1) {
  GradCheckResult res;
  AnalysisResult ar = run_analysis(plant, d, s);
  res.cost = ar.cost;
  res.adjoint = analysis_gradient(plant, d, s, ar).grad;
  res.fd = fd_gradient(plant, d, s, fd_step, threads);
  res.rel_err.resize(d.size());
  for (int i = 0; i < d.size(); ++i)
    res.rel_err[i] = std::abs(res.adjoint[i] - res.fd[i]) / std::max(std::abs(res.fd[i]), 1e-12);
  res.max_rel_err = res.rel_err.size() > 0 ? res.rel_err.maxCoeff() : 0.0;
  return res;
}

}  // namespace ccd
