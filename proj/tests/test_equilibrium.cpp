#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ccd/cartpole.hpp"
#include "ccd/equilibrium.hpp"
#include "ccd/quadrotor.hpp"
#include "test_util.hpp"

using namespace ccd;
using testing::LinearPlant;

TEST_CASE("fully specified equilibrium returns the targets verbatim") {
  CartPole plant;
  VectorXd x_hat(4), u_hat(1), d(3);
  x_hat << 0, 0, M_PI, 0;
  u_hat << 0;
  d << 1, 5, 2;
  EquilibriumSolution sol = solve_equilibrium(plant, x_hat, u_hat, d, plant.theta0());
  CHECK(sol.theta.size() == 0);
  CHECK((sol.x_tgt - x_hat).norm() == 0.0);
  CHECK((sol.u_tgt - u_hat).norm() == 0.0);
  CHECK(sol.residual_norm < 1e-12);
}

TEST_CASE("scalar toy plant xdot = -x + u with known x solves u = x") {
  // r = -x + u, x_tgt = 2 known, u unknown -> u_tgt = 2.
  MatrixXd A(1, 1), B(1, 1), C(1, 0);
  A << -1;
  B << 1;
  LinearPlant plant(A, B, C, VectorXd::Zero(1));
  EquilibriumPartition p;
  p.known_state_idx = {0};
  p.unknown_control_idx = {0};
  p.residual_row_idx = {0};
  plant.set_partition(p);
  VectorXd x_hat(1), d(0);
  x_hat << 2.0;
  EquilibriumSolution sol = solve_equilibrium(plant, x_hat, VectorXd(), d, VectorXd::Zero(1));
  CHECK(sol.u_tgt[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(sol.residual_norm < 1e-12);
}

TEST_CASE("identity plant reduced Jacobian is the identity") {
  MatrixXd A = MatrixXd::Zero(2, 2), B = MatrixXd::Identity(2, 2), C(2, 0);
  LinearPlant plant(A, B, C, VectorXd::Zero(2));
  EquilibriumPartition p;
  p.known_state_idx = {0, 1};
  p.unknown_control_idx = {0, 1};
  p.residual_row_idx = {0, 1};
  plant.set_partition(p);
  VectorXd x(2), u(2), d(0);
  x.setZero();
  u.setZero();
  MatrixXd R = reduced_jacobian(plant, x, u, d, p);
  CHECK((R - MatrixXd::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("empty theta gives a 0x0 reduced Jacobian") {
  CartPole plant;
  VectorXd x(4), u(1), d(3);
  x << 0, 0, M_PI, 0;
  u << 0;
  d << 1, 5, 2;
  MatrixXd R = reduced_jacobian(plant, x, u, d, plant.partition());
  CHECK(R.rows() == 0);
  CHECK(R.cols() == 0);
}

TEST_CASE("quadrotor hover control matches the closed form") {
  PlanarQuadrotor plant;
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dd(-0.3, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd d(2);
    d << dd(rng), dd(rng);
    double oracle = std::sqrt(plant.m * plant.g / (4.0 * plant.k_T * (1.0 + d[0])));
    EquilibriumSolution sol = solve_equilibrium(plant, VectorXd::Zero(6), VectorXd(), d,
                                                plant.theta0(), 1e-12, 50);
    CHECK(sol.u_tgt[0] == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(sol.u_tgt[1] == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(sol.residual_norm <= 1e-12);
    // Residual restricted to the partition rows vanishes.
    VectorXd r = plant.residual(sol.x_tgt, sol.u_tgt, d);
    for (int row : plant.partition().residual_row_idx) CHECK(std::abs(r[row]) <= 1e-12);
  }
}

TEST_CASE("Newton converges fast from a +/-50% warm start") {
  PlanarQuadrotor plant;
  VectorXd d = VectorXd::Zero(2);
  double oracle = std::sqrt(plant.m * plant.g / (4.0 * plant.k_T));
  for (double scale : {0.5, 1.5}) {
    VectorXd theta0 = VectorXd::Constant(2, scale * oracle);
    EquilibriumSolution sol =
        solve_equilibrium(plant, VectorXd::Zero(6), VectorXd(), d, theta0, 1e-12, 50);
    CHECK(sol.iterations <= 8);
    CHECK(sol.residual_norm <= 1e-12);
  }
}

TEST_CASE("reordering the unknown index sets leaves the assembled targets unchanged") {
  PlanarQuadrotor a, b;
  EquilibriumPartition pb = a.partition();
  std::swap(pb.unknown_control_idx[0], pb.unknown_control_idx[1]);
  std::swap(pb.residual_row_idx[0], pb.residual_row_idx[1]);
  b.set_partition(pb);
  VectorXd d(2);
  d << 0.1, -0.05;
  EquilibriumSolution sa = solve_equilibrium(a, VectorXd::Zero(6), VectorXd(), d, a.theta0());
  EquilibriumSolution sb = solve_equilibrium(b, VectorXd::Zero(6), VectorXd(), d, b.theta0());
  CHECK((sa.x_tgt - sb.x_tgt).norm() <= 1e-12);
  CHECK((sa.u_tgt - sb.u_tgt).norm() <= 1e-10 * sa.u_tgt.norm());
}

TEST_CASE("singular reduced Jacobian is reported") {
  // r = 0*u - x: the residual row does not depend on the unknown control.
  MatrixXd A(1, 1), B(1, 1), C(1, 0);
  A << -1;
  B << 0;
  LinearPlant plant(A, B, C, VectorXd::Zero(1));
  EquilibriumPartition p;
  p.known_state_idx = {0};
  p.unknown_control_idx = {0};
  p.residual_row_idx = {0};
  plant.set_partition(p);
  VectorXd x_hat(1), d(0);
  x_hat << 1.0;
  CHECK_THROWS_AS(solve_equilibrium(plant, x_hat, VectorXd(), d, VectorXd::Zero(1)),
                  SingularJacobian);
}

TEST_CASE("max_iter exceeded raises NoConvergence with the best norm") {
  PlanarQuadrotor plant;
  VectorXd d = VectorXd::Zero(2);
  try {
    solve_equilibrium(plant, VectorXd::Zero(6), VectorXd(), d, plant.theta0(), 1e-12, 1);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.best_norm > 0.0);
    CHECK(std::isfinite(e.best_norm));
  }
}
