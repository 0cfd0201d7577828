#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ccd/cartpole.hpp"
#include "ccd/pipeline.hpp"
#include "ccd/quadrotor.hpp"
#include "test_util.hpp"

using namespace ccd;
using testing::LinearPlant;
using testing::random_hurwitz;
using testing::random_matrix;
using testing::random_vector;

namespace {

// Random stabilizable linear setup r = A x + B u with a zero target point.
struct LinearSetup {
  LinearPlant plant;
  EquilibriumSolution eq;
  CostWeights w;
  RiccatiSolution ric;

  LinearSetup(int n, int m, std::mt19937& rng)
      : plant(random_hurwitz(n, rng), random_matrix(n, m, rng), MatrixXd(n, 0),
              VectorXd::Zero(n)) {
    eq.x_tgt = VectorXd::Zero(n);
    eq.u_tgt = VectorXd::Zero(m);
    w.Q = MatrixXd::Identity(n, n);
    w.S = MatrixXd::Identity(m, m);
    ric = solve_are(plant.A, plant.B, w);
  }
};

}  // namespace

TEST_CASE("zero perturbation gives an all-zero adjoint bundle") {
  PlanarQuadrotor plant;
  VectorXd d = VectorXd::Zero(2);
  AnalysisSettings s;
  s.x_hat = VectorXd::Zero(6);
  s.weights.Q = MatrixXd::Identity(6, 6);
  s.weights.S = 0.01 * MatrixXd::Identity(2, 2);
  s.dx0 = VectorXd::Zero(6);
  s.n_t = 50;
  AnalysisResult r = run_analysis(plant, d, s);
  AdjointBundle b = analysis_gradient(plant, d, s, r);
  for (const VectorXd& psi : b.psi_cl) CHECK(psi.norm() == 0.0);
  CHECK(b.Psi_ARE.norm() == 0.0);
  CHECK(b.psi_nl.norm() == 0.0);
  CHECK(b.grad.norm() == 0.0);
}

TEST_CASE("back-substitution equals the dense stacked transposed solve") {
  std::mt19937 rng(41);
  const int n = 2, n_t = 5;
  for (int trial = 0; trial < 100; ++trial) {
    LinearSetup ls(n, 1, rng);
    VectorXd dx0 = random_vector(n, rng);
    Trajectory traj = simulate(ls.plant, ls.eq, ls.ric, VectorXd(), dx0, 0.05, n_t, ls.w);
    std::vector<VectorXd> psi =
        solve_closed_loop_adjoint(ls.plant, ls.eq, ls.ric, traj, ls.w, VectorXd());

    // Forward system M z = b over z = [dx_1; ...; dx_{n_t}] with I on the
    // diagonal and -(I + dt A_cl) on the subdiagonal; the adjoint solves
    // M' psi = -df/ddx stacked the same way.
    MatrixXd Acl = ls.plant.A + ls.plant.B * ls.ric.W;
    MatrixXd step = MatrixXd::Identity(n, n) + traj.dt * Acl;
    MatrixXd M = MatrixXd::Identity(n * n_t, n * n_t);
    for (int k = 1; k < n_t; ++k) M.block(k * n, (k - 1) * n, n, n) = -step;
    CostPartials cp = cost_partials(traj, ls.ric, ls.w);
    VectorXd rhs(n * n_t);
    for (int k = 1; k <= n_t; ++k) rhs.segment((k - 1) * n, n) = -cp.df_ddx[k];
    VectorXd stacked = M.transpose().fullPivLu().solve(rhs);

    for (int k = 1; k <= n_t; ++k)
      CHECK((psi[k] - stacked.segment((k - 1) * n, n)).norm() < 1e-12 * (1.0 + rhs.norm()));
  }
}

TEST_CASE("scalar ARE adjoint has the closed form c / (2 sqrt(2))") {
  MatrixXd J(1, 1), G(1, 1);
  J << -1;
  G << 1;
  CostWeights w{MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)};
  RiccatiSolution ric = solve_are(J, G, w);  // closed loop at -sqrt(2)
  for (double c : {1.0, -0.3, 7.5}) {
    MatrixXd Psi = solve_are_adjoint(ric, MatrixXd::Constant(1, 1, c));
    CHECK(Psi(0, 0) == doctest::Approx(c / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  }
}

TEST_CASE("ARE adjoint re-substitutes into its Lyapunov equation") {
  CartPole plant;
  VectorXd d(3);
  d << 1, 5, 2;
  AnalysisSettings s;
  s.x_hat = (VectorXd(4) << 0, 0, M_PI, 0).finished();
  s.u_hat = VectorXd::Zero(1);
  s.weights.Q = 0.1 * MatrixXd::Identity(4, 4);
  s.weights.S = MatrixXd::Identity(1, 1);
  s.dx0 = (VectorXd(4) << -1, 0, 2 - M_PI, 0).finished();
  s.n_t = 300;
  AnalysisResult r = run_analysis(plant, d, s);
  AdjointBundle b = analysis_gradient(plant, d, s, r);

  std::vector<VectorXd> psi = b.psi_cl;
  ClosedLoopContractions cl = contract_closed_loop(plant, r.eq, r.ric, r.traj, psi, d);
  CostPartials cp = cost_partials(r.traj, r.ric, s.weights);
  MatrixXd rhs = cp.df_dP + r.ric.G_tgt * s.weights.S.transpose().llt().solve(cl.S_P);
  MatrixXd sym_rhs = 0.5 * (rhs + rhs.transpose());
  MatrixXd Jt = r.ric.closed_loop();
  MatrixXd res = Jt * b.Psi_ARE + b.Psi_ARE * Jt.transpose() + sym_rhs;
  CHECK(res.norm() < 1e-10 * (1.0 + sym_rhs.norm()));
  CHECK((b.Psi_ARE - b.Psi_ARE.transpose()).norm() < 1e-12 * (1.0 + b.Psi_ARE.norm()));
}

TEST_CASE("cost partials match finite differences") {
  std::mt19937 rng(43);
  LinearSetup ls(2, 1, rng);
  VectorXd dx0 = random_vector(2, rng);
  Trajectory traj = simulate(ls.plant, ls.eq, ls.ric, VectorXd(), dx0, 0.05, 3, ls.w);
  CostPartials cp = cost_partials(traj, ls.ric, ls.w);
  const double h = 1e-6;

  for (int k = 1; k <= traj.n_t; ++k) {
    for (int i = 0; i < 2; ++i) {
      Trajectory tp = traj, tm = traj;
      tp.dx[k][i] += h;
      tm.dx[k][i] -= h;
      double fd = (lqr_cost(tp, ls.ric, ls.w) - lqr_cost(tm, ls.ric, ls.w)) / (2 * h);
      CHECK(std::abs(cp.df_ddx[k][i] - fd) < 1e-7 * (1.0 + std::abs(fd)));
    }
  }
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      RiccatiSolution rp = ls.ric, rm = ls.ric;
      rp.P(i, j) += h;
      rm.P(i, j) -= h;
      double fd = (lqr_cost(traj, rp, ls.w) - lqr_cost(traj, rm, ls.w)) / (2 * h);
      CHECK(std::abs(cp.df_dP(i, j) - fd) < 1e-7 * (1.0 + std::abs(fd)));
    }
  for (int i = 0; i < 2; ++i) {
    RiccatiSolution rp = ls.ric, rm = ls.ric;
    rp.G_tgt(i, 0) += h;
    rm.G_tgt(i, 0) -= h;
    double fd = (lqr_cost(traj, rp, ls.w) - lqr_cost(traj, rm, ls.w)) / (2 * h);
    CHECK(std::abs(cp.df_dG(i, 0) - fd) < 1e-7 * (1.0 + std::abs(fd)));
  }
}

TEST_CASE("trace seeds predict directional derivatives in the state Jacobian") {
  // Perturb A in both the frozen linearization and the simulated residual;
  // the FD slope must equal tr(Jbar' dA) minus the trajectory contraction.
  std::mt19937 rng(47);
  const int n = 3, m = 2;
  LinearSetup ls(n, m, rng);
  VectorXd dx0 = random_vector(n, rng);
  const double dt = 0.02;
  const int n_t = 150;

  auto cost_of = [&](const MatrixXd& A) {
    LinearPlant p2(A, ls.plant.B, MatrixXd(n, 0), VectorXd::Zero(n));
    RiccatiSolution ric = solve_are(A, ls.plant.B, ls.w);
    Trajectory t = simulate(p2, ls.eq, ric, VectorXd(), dx0, dt, n_t, ls.w);
    return t.cost;
  };

  Trajectory traj = simulate(ls.plant, ls.eq, ls.ric, VectorXd(), dx0, dt, n_t, ls.w);
  std::vector<VectorXd> psi =
      solve_closed_loop_adjoint(ls.plant, ls.eq, ls.ric, traj, ls.w, VectorXd());
  ClosedLoopContractions cl = contract_closed_loop(ls.plant, ls.eq, ls.ric, traj, psi, VectorXd());
  CostPartials cp = cost_partials(traj, ls.ric, ls.w);
  MatrixXd rhs = cp.df_dP + ls.ric.G_tgt * ls.w.S.transpose().llt().solve(cl.S_P);
  MatrixXd Psi = solve_are_adjoint(ls.ric, rhs);
  TraceSeeds seeds = trace_seeds(ls.ric, ls.w, cp, cl, Psi);

  MatrixXd dA = random_matrix(n, n, rng);
  double traj_term = 0.0;
  for (int k = 1; k <= n_t; ++k) traj_term -= dt * psi[k].dot(dA * traj.dx[k - 1]);
  double predicted = (seeds.Jbar.transpose() * dA).trace() + traj_term;

  const double eps = 1e-6;
  double fd = (cost_of(ls.plant.A + eps * dA) - cost_of(ls.plant.A - eps * dA)) / (2 * eps);
  CHECK(std::abs(predicted - fd) / std::max(std::abs(fd), 1e-12) < 1e-6);
}

TEST_CASE("trace seeds predict directional derivatives in the control Jacobian") {
  std::mt19937 rng(53);
  const int n = 3, m = 2;
  LinearSetup ls(n, m, rng);
  VectorXd dx0 = random_vector(n, rng);
  const double dt = 0.02;
  const int n_t = 150;

  auto cost_of = [&](const MatrixXd& B) {
    LinearPlant p2(ls.plant.A, B, MatrixXd(n, 0), VectorXd::Zero(n));
    RiccatiSolution ric = solve_are(ls.plant.A, B, ls.w);
    Trajectory t = simulate(p2, ls.eq, ric, VectorXd(), dx0, dt, n_t, ls.w);
    return t.cost;
  };

  Trajectory traj = simulate(ls.plant, ls.eq, ls.ric, VectorXd(), dx0, dt, n_t, ls.w);
  std::vector<VectorXd> psi =
      solve_closed_loop_adjoint(ls.plant, ls.eq, ls.ric, traj, ls.w, VectorXd());
  ClosedLoopContractions cl = contract_closed_loop(ls.plant, ls.eq, ls.ric, traj, psi, VectorXd());
  CostPartials cp = cost_partials(traj, ls.ric, ls.w);
  MatrixXd rhs = cp.df_dP + ls.ric.G_tgt * ls.w.S.transpose().llt().solve(cl.S_P);
  MatrixXd Psi = solve_are_adjoint(ls.ric, rhs);
  TraceSeeds seeds = trace_seeds(ls.ric, ls.w, cp, cl, Psi);

  MatrixXd dB = random_matrix(n, m, rng);
  double traj_term = 0.0;
  for (int k = 1; k <= n_t; ++k)
    traj_term -= dt * psi[k].dot(dB * (ls.ric.W * traj.dx[k - 1]));
  double predicted = (seeds.Gbar.transpose() * dB).trace() + traj_term;

  const double eps = 1e-6;
  double fd = (cost_of(ls.plant.B + eps * dB) - cost_of(ls.plant.B - eps * dB)) / (2 * eps);
  CHECK(std::abs(predicted - fd) / std::max(std::abs(fd), 1e-12) < 1e-6);
}

TEST_CASE("cart-pole end-to-end gradient matches finite differences") {
  CartPole plant;
  VectorXd d(3);
  d << 1, 5, 2;
  AnalysisSettings s;
  s.x_hat = (VectorXd(4) << 0, 0, M_PI, 0).finished();
  s.u_hat = VectorXd::Zero(1);
  s.weights.Q = 0.1 * MatrixXd::Identity(4, 4);
  s.weights.S = MatrixXd::Identity(1, 1);
  s.dx0 = (VectorXd(4) << -1, 0, 2 - M_PI, 0).finished();
  s.dt = 0.01;
  s.n_t = 400;
  GradCheckResult gc = grad_check(plant, d, s);
  CHECK(gc.max_rel_err < 1e-6);
}

TEST_CASE("quadrotor end-to-end gradient matches finite differences") {
  PlanarQuadrotor plant;
  VectorXd d(2);
  d << 0.05, -0.02;
  AnalysisSettings s;
  s.x_hat = VectorXd::Zero(6);
  s.weights.Q = MatrixXd::Identity(6, 6);
  s.weights.S = 0.01 * MatrixXd::Identity(2, 2);
  s.dx0 = (VectorXd(6) << 1, 1, 0.1, 0.5, 0.3, 0.05).finished();
  s.dt = 0.01;
  s.n_t = 400;
  GradCheckResult gc = grad_check(plant, d, s);
  CHECK(gc.max_rel_err < 1e-5);
}
