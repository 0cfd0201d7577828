#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ccd/cartpole.hpp"
#include "ccd/optimize.hpp"
#include "test_util.hpp"

using namespace ccd;

namespace {

// f = 1/2 ||d - c||^2 with exact gradient, for optimizer plumbing tests.
class Quadratic : public Objective {
 public:
  explicit Quadratic(VectorXd c) : c_(std::move(c)) {}
  double eval(const VectorXd& d, VectorXd& grad) override {
    grad = d - c_;
    return 0.5 * (d - c_).squaredNorm();
  }

 private:
  VectorXd c_;
};

OptOptions box(int n, double lo, double hi) {
  OptOptions o;
  o.lower = VectorXd::Constant(n, lo);
  o.upper = VectorXd::Constant(n, hi);
  return o;
}

AnalysisSettings quad_settings() {
  AnalysisSettings s;
  s.x_hat = VectorXd::Zero(6);
  s.weights.Q = MatrixXd::Identity(6, 6);
  s.weights.S = 0.01 * MatrixXd::Identity(2, 2);
  s.dx0 = (VectorXd(6) << 1, 1, 0.1, 0.5, 0.3, 0.05).finished();
  s.dt = 0.01;
  s.n_t = 300;
  return s;
}

double hover_p_min(const PlanarQuadrotor& plant, const AnalysisSettings& s, const OptOptions& o,
                   VectorXd* d_min = nullptr) {
  HoverPowerObjective obj(plant, s);
  OptHistory h = minimize(obj, {}, VectorXd::Zero(2), o);
  if (d_min) *d_min = h.d_opt;
  return h.f_opt;
}

}  // namespace

TEST_CASE("unconstrained convex quadratic converges in a handful of iterations") {
  VectorXd c(3);
  c << 1.0, -2.0, 0.5;
  Quadratic obj(c);
  OptHistory h = minimize(obj, {}, VectorXd::Zero(3), box(3, -10, 10));
  CHECK(h.converged);
  CHECK((h.d_opt - c).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(h.records.size() <= 30);
}

TEST_CASE("bound-constrained quadratic lands on the active bound") {
  VectorXd c(1);
  c << 2.0;
  Quadratic obj(c);
  OptHistory h = minimize(obj, {}, VectorXd::Zero(1), box(1, -1, 1));
  CHECK(h.converged);
  CHECK(h.d_opt[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("linear inequality: min ||d||^2 s.t. d0 + d1 >= 1") {
  Quadratic obj(VectorXd::Zero(2));
  auto con = std::make_shared<LinearConstraint>((VectorXd(2) << 1, 1).finished(), 1.0);
  OptHistory h = minimize(obj, {con}, (VectorXd(2) << 2, 2).finished(), box(2, -10, 10));
  CHECK(h.converged);
  CHECK(h.d_opt[0] == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(h.d_opt[1] == doctest::Approx(0.5).epsilon(1e-4));
  // The constraint is active and the history carries the multiplier path.
  CHECK(!h.records.empty());
  CHECK(h.records.back().constraints.size() == 1);
}

TEST_CASE("history records are monotone in the augmented objective per outer pass") {
  Quadratic obj((VectorXd(2) << 3, 3).finished());
  OptHistory h = minimize(obj, {}, VectorXd::Zero(2), box(2, -10, 10));
  for (size_t i = 1; i < h.records.size(); ++i)
    if (h.records[i].outer == h.records[i - 1].outer)
      CHECK(h.records[i].f <= h.records[i - 1].f + 1e-12);
}

TEST_CASE("hover power constraint value at the power-optimal design") {
  PlanarQuadrotor plant;
  AnalysisSettings s = quad_settings();
  OptOptions o = box(2, -0.3, 0.3);
  VectorXd d_min;
  double p_min = hover_p_min(plant, s, o, &d_min);
  CHECK(p_min > 0.0);

  for (double eps : {0.0, 0.03}) {
    HoverPowerConstraint con(plant, s, eps, p_min);
    VectorXd g;
    double c = con.eval(d_min, g);
    CHECK(c == doctest::Approx(eps * p_min).epsilon(1e-9).scale(p_min));
  }
}

TEST_CASE("hover power objective and constraint gradients match finite differences") {
  PlanarQuadrotor plant;
  AnalysisSettings s = quad_settings();
  VectorXd d(2);
  d << 0.1, -0.05;

  HoverPowerObjective obj(plant, s);
  VectorXd g;
  obj.eval(d, g);
  for (int i = 0; i < 2; ++i) {
    double h = 1e-6;
    VectorXd dp = d, dm = d, tmp;
    dp[i] += h;
    dm[i] -= h;
    double fd = (obj.eval(dp, tmp) - obj.eval(dm, tmp)) / (2 * h);
    CHECK(testing::rel_err(g[i], fd) < 1e-6);
  }

  HoverPowerConstraint con(plant, s, 0.02, 10.0);
  VectorXd gc;
  con.eval(d, gc);
  for (int i = 0; i < 2; ++i) {
    double h = 1e-6;
    VectorXd dp = d, dm = d, tmp;
    dp[i] += h;
    dm[i] -= h;
    HoverPowerConstraint c2(plant, s, 0.02, 10.0);
    double fd = (c2.eval(dp, tmp) - c2.eval(dm, tmp)) / (2 * h);
    CHECK(testing::rel_err(gc[i], fd) < 1e-6);
  }
}

TEST_CASE("cart-pole design optimization reaches the bound-active optimum") {
  CartPole plant;
  AnalysisSettings s;
  s.x_hat = (VectorXd(4) << 0, 0, M_PI, 0).finished();
  s.u_hat = VectorXd::Zero(1);
  s.weights.Q = 0.1 * MatrixXd::Identity(4, 4);
  s.weights.S = MatrixXd::Identity(1, 1);
  s.dx0 = (VectorXd(4) << -1, 0, 2 - M_PI, 0).finished();
  s.dt = 0.01;
  s.n_t = 1000;

  VectorXd d0(3);
  d0 << 1, 5, 2;
  PipelineObjective baseline(plant, s);
  VectorXd tmp;
  double f0 = baseline.eval(d0, tmp);

  OptOptions o;
  o.lower = (VectorXd(3) << 0.5, 2.5, 1.0).finished();
  o.upper = (VectorXd(3) << 2.0, 7.5, 2.0).finished();
  auto mass_sum =
      std::make_shared<LinearConstraint>((VectorXd(3) << 1, 1, 0).finished(), 3.5, "m+M");

  PipelineObjective obj(plant, s);
  OptHistory h = minimize(obj, {mass_sum}, d0, o);
  CHECK(h.converged);
  CHECK(std::abs(h.d_opt[0] - 1.0) < 1e-3);
  CHECK(std::abs(h.d_opt[1] - 2.5) < 1e-3);
  CHECK(std::abs(h.d_opt[2] - 1.0) < 1e-3);
  CHECK(h.d_opt[0] + h.d_opt[1] == doctest::Approx(3.5).epsilon(1e-3));
  CHECK(h.f_opt < 0.35 * f0);  // at least 65% cost reduction
}

TEST_CASE("pareto sweep trades LQR cost against hover power monotonically") {
  PlanarQuadrotor plant;
  AnalysisSettings s = quad_settings();
  OptOptions o = box(2, -0.3, 0.3);
  double p_min = hover_p_min(plant, s, o);
  std::vector<double> eps = {0.005, 0.01, 0.02, 0.03};
  std::vector<ParetoPoint> pts = pareto_sweep(plant, s, VectorXd::Zero(2), o, eps, p_min);
  REQUIRE(pts.size() == eps.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].ok);
    CHECK(pts[i].p_hover <= (1.0 + eps[i]) * p_min * (1.0 + 1e-8));
    if (i > 0) {
      CHECK(pts[i].f_lqr <= pts[i - 1].f_lqr + 1e-10);
      CHECK(pts[i].p_hover >= pts[i - 1].p_hover - 1e-10);
    }
  }
}
