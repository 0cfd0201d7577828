#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "ccd/pipeline.hpp"
#include "ccd/quadrotor.hpp"

namespace ccd {

// Differentiable objective; eval fills the gradient. Throws the analysis
// errors (NotStabilizable, DivergedTrajectory, ...) on failure; the optimizer
// treats those as rejected steps.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double eval(const VectorXd& d, VectorXd& grad) = 0;
};

// LQR trajectory cost of the full analysis chain, with adjoint gradient.
// Warm-starts each equilibrium solve from the previous accepted one.
class PipelineObjective : public Objective {
 public:
  PipelineObjective(const PlantModel& plant, AnalysisSettings settings)
      : plant_(plant), settings_(std::move(settings)) {}

  double eval(const VectorXd& d, VectorXd& grad) override {
    AnalysisResult r = run_analysis(plant_, d, settings_);
    grad = analysis_gradient(plant_, d, settings_, r).grad;
    if (r.eq.theta.size() > 0) settings_.theta0 = r.eq.theta;
    last_ = r;
    return r.cost;
  }

  const AnalysisResult& last() const { return last_; }
  const AnalysisSettings& settings() const { return settings_; }

 private:
  const PlantModel& plant_;
  AnalysisSettings settings_;
  AnalysisResult last_;
};

// Steady hover power P_hover(u_tgt(d), d), differentiated through the
// equilibrium solve by the implicit function theorem.
class HoverPowerObjective : public Objective {
 public:
  HoverPowerObjective(const PlanarQuadrotor& plant, AnalysisSettings settings)
      : plant_(plant), settings_(std::move(settings)) {}

  double eval(const VectorXd& d, VectorXd& grad) override {
    VectorXd theta0 = settings_.theta0.size() > 0 ? settings_.theta0 : plant_.theta0();
    EquilibriumSolution eq = solve_equilibrium(plant_, settings_.x_hat, settings_.u_hat, d, theta0,
                                               settings_.eq_tol, settings_.eq_max_iter);
    settings_.theta0 = eq.theta;
    grad = hover_power_gradient(plant_, eq, d);
    return plant_.hover_power_t(eq.u_tgt.data(), d.data());
  }

  static VectorXd hover_power_gradient(const PlanarQuadrotor& plant, const EquilibriumSolution& eq,
                                       const VectorXd& d) {
    const EquilibriumPartition& p = plant.partition();
    double cP = plant.power_coeff(d.data());
    double O1 = eq.u_tgt[0], O2 = eq.u_tgt[1];
    VectorXd dP_dd(2);
    dP_dd << 2.0 * 0.5 * plant.k_P * (O1 * O1 * O1 + O2 * O2 * O2),
        2.0 * plant.k_P * (O1 * O1 * O1 + O2 * O2 * O2);
    // dP/dtheta: x-part zero, u-part 6 c_P Omega^2 per rotor
    VectorXd dP_dth = VectorXd::Zero(p.n_theta());
    const int nsx = static_cast<int>(p.unknown_state_idx.size());
    for (size_t i = 0; i < p.unknown_control_idx.size(); ++i) {
      double O = eq.u_tgt[p.unknown_control_idx[i]];
      dP_dth[nsx + i] = 6.0 * cP * O * O;
    }
    // Chain through r_check(theta; d) = 0.
    MatrixXd Jr = reduced_jacobian(plant, eq.x_tgt, eq.u_tgt, d, p);
    VectorXd w = Jr.transpose().fullPivLu().solve(dP_dth);
    MatrixXd Jd = plant.jac_d(eq.x_tgt, eq.u_tgt, d);
    VectorXd g = dP_dd;
    for (size_t r = 0; r < p.residual_row_idx.size(); ++r)
      g -= w[r] * Jd.row(p.residual_row_idx[r]).transpose();
    return g;
  }

 private:
  const PlanarQuadrotor& plant_;
  AnalysisSettings settings_;
};

// Scalar inequality c(d) >= 0 with gradient.
class Constraint {
 public:
  virtual ~Constraint() = default;
  virtual double eval(const VectorXd& d, VectorXd& grad) = 0;
  virtual std::string name() const = 0;
};

class LinearConstraint : public Constraint {  // a . d >= b
 public:
  LinearConstraint(VectorXd a, double b, std::string name = "linear")
      : a_(std::move(a)), b_(b), name_(std::move(name)) {}
  double eval(const VectorXd& d, VectorXd& grad) override {
    grad = a_;
    return a_.dot(d) - b_;
  }
  std::string name() const override { return name_; }

 private:
  VectorXd a_;
  double b_;
  std::string name_;
};

// Epsilon-constraint on steady hover power: (1 + eps) P_min - P_hover >= 0.
class HoverPowerConstraint : public Constraint {
 public:
  HoverPowerConstraint(const PlanarQuadrotor& plant, AnalysisSettings settings, double eps,
                       double p_min)
      : power_(plant, std::move(settings)), eps_(eps), p_min_(p_min) {}
  double eval(const VectorXd& d, VectorXd& grad) override {
    VectorXd gp;
    double p = power_.eval(d, gp);
    last_power_ = p;
    grad = -gp;
    return (1.0 + eps_) * p_min_ - p;
  }
  std::string name() const override { return "hover_power"; }
  double last_power() const { return last_power_; }

 private:
  HoverPowerObjective power_;
  double eps_;
  double p_min_;
  double last_power_ = 0.0;
};

struct OptRecord {
  int outer = 0;
  int inner = 0;
  VectorXd d;
  double f = 0.0;
  std::vector<double> constraints;
  double grad_norm = 0.0;
  double kkt = 0.0;
  double step_alpha = 0.0;
  std::vector<double> lambda;
  double mu = 0.0;
};

struct OptHistory {
  std::vector<OptRecord> records;
  std::string termination;
  VectorXd d_opt;
  double f_opt = 0.0;
  bool converged = false;
};

struct OptOptions {
  VectorXd lower;
  VectorXd upper;
  double tol_kkt = 1e-6;
  int max_outer = 30;
  int max_inner = 200;
  double mu0 = 10.0;
  double mu_growth = 10.0;
  double mu_max = 1e6;  // keeps mu * (roundoff in c) well below tol_kkt
  double feas_tol = 1e-8;
};

namespace detail {

inline VectorXd clamp(const VectorXd& d, const VectorXd& lo, const VectorXd& hi) {
  return d.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace detail

// Augmented-Lagrangian outer loop over the general inequalities, projected
// BFGS with Armijo backtracking on the bound box inside.
inline OptHistory minimize(Objective& objective,
                           const std::vector<std::shared_ptr<Constraint>>& constraints,
                           const VectorXd& d0, const OptOptions& opt) {
  const int n = static_cast<int>(d0.size());
  const int m = static_cast<int>(constraints.size());
  const double inf = std::numeric_limits<double>::infinity();

  OptHistory hist;
  VectorXd d = detail::clamp(d0, opt.lower, opt.upper);
  VectorXd lambda = VectorXd::Zero(m);
  double mu = opt.mu0;

  // Evaluates objective + constraints; returns false on analysis failure.
  struct Eval {
    double f = 0.0;
    VectorXd gf;
    VectorXd c;
    MatrixXd gc;  // one column per constraint
    bool ok = false;
  };
  int consecutive_failures = 0;
  auto evaluate = [&](const VectorXd& dv) {
    Eval e;
    e.c.resize(m);
    e.gc.resize(n, m);
    try {
      e.f = objective.eval(dv, e.gf);
      VectorXd gci;
      for (int j = 0; j < m; ++j) {
        e.c[j] = constraints[j]->eval(dv, gci);
        e.gc.col(j) = gci;
      }
      e.ok = true;
    } catch (const std::runtime_error&) {
      e.ok = false;
    }
    return e;
  };

  auto al_value = [&](const Eval& e) {
    if (!e.ok) return inf;
    double v = e.f;
    for (int j = 0; j < m; ++j) {
      double t = std::max(0.0, lambda[j] - mu * e.c[j]);
      v += (t * t - lambda[j] * lambda[j]) / (2.0 * mu);
    }
    return v;
  };
  auto al_grad = [&](const Eval& e) {
    VectorXd g = e.gf;
    for (int j = 0; j < m; ++j) {
      double t = std::max(0.0, lambda[j] - mu * e.c[j]);
      if (t > 0.0) g -= t * e.gc.col(j);
    }
    return g;
  };
  // Projected-gradient KKT measure. Multipliers for the apparently active
  // constraints are fit by least squares over the free coordinates, which is
  // far more accurate than the first-order estimates max(0, lambda - mu c).
  auto kkt_measure = [&](const VectorXd& dv, const Eval& e) {
    std::vector<int> act, free_idx;
    for (int j = 0; j < m; ++j)
      if (lambda[j] - mu * e.c[j] > 0.0 || std::abs(e.c[j]) <= opt.feas_tol) act.push_back(j);
    for (int i = 0; i < n; ++i)
      if (dv[i] > opt.lower[i] && dv[i] < opt.upper[i]) free_idx.push_back(i);
    VectorXd lam_ls = VectorXd::Zero(m);
    if (!act.empty() && !free_idx.empty()) {
      MatrixXd A(free_idx.size(), act.size());
      VectorXd b(free_idx.size());
      for (size_t r = 0; r < free_idx.size(); ++r) {
        b[r] = e.gf[free_idx[r]];
        for (size_t c = 0; c < act.size(); ++c) A(r, c) = e.gc(free_idx[r], act[c]);
      }
      VectorXd sol = A.colPivHouseholderQr().solve(b);
      for (size_t c = 0; c < act.size(); ++c) lam_ls[act[c]] = std::max(0.0, sol[c]);
    }
    VectorXd gL = e.gf;
    for (int j = 0; j < m; ++j) gL -= lam_ls[j] * e.gc.col(j);
    return (detail::clamp(dv - gL, opt.lower, opt.upper) - dv).lpNorm<Eigen::Infinity>();
  };

  Eval cur = evaluate(d);
  if (!cur.ok) throw OptimizationAborted("analysis failed at the initial design");
  // Feasibility target for the multiplier update: tighten after a successful
  // update, loosen to a mu-dependent level after a penalty increase, so mu
  // stays as small as the problem allows and lambda keeps moving.
  double eta = std::pow(mu, -0.1);

  for (int outer = 0; outer < opt.max_outer; ++outer) {
    // The iterate may already be optimal (e.g. a warm start), so test before
    // spending an inner solve.
    {
      double viol0 = 0.0;
      for (int j = 0; j < m; ++j) viol0 = std::max(viol0, -cur.c[j]);
      if (kkt_measure(d, cur) <= opt.tol_kkt && viol0 <= opt.feas_tol) {
        hist.converged = true;
        hist.termination = "kkt";
        break;
      }
    }
    double tol_inner = std::max(opt.tol_kkt, 1e-2 * std::pow(0.1, outer));

    // --- inner: projected BFGS on the augmented Lagrangian ---
    MatrixXd H = MatrixXd::Identity(n, n);
    VectorXd g = al_grad(cur);
    double L = al_value(cur);
    int stalled = 0;  // consecutive steps with improvement at the noise floor
    for (int inner = 0; inner < opt.max_inner; ++inner) {
      double pg = (detail::clamp(d - g, opt.lower, opt.upper) - d).lpNorm<Eigen::Infinity>();
      OptRecord rec;
      rec.outer = outer;
      rec.inner = inner;
      rec.d = d;
      rec.f = cur.f;
      rec.constraints.assign(cur.c.data(), cur.c.data() + m);
      rec.grad_norm = g.norm();
      rec.kkt = pg;
      rec.lambda.assign(lambda.data(), lambda.data() + m);
      rec.mu = mu;
      hist.records.push_back(rec);
      if (pg <= tol_inner) break;

      // Zero the direction on active bounds the gradient pushes against, so
      // clamping cannot turn a descent direction into an ascent one.
      auto project_dir = [&](VectorXd p) {
        for (int i = 0; i < n; ++i)
          if ((d[i] <= opt.lower[i] && p[i] < 0.0) || (d[i] >= opt.upper[i] && p[i] > 0.0))
            p[i] = 0.0;
        return p;
      };
      VectorXd p = project_dir(-(H * g));
      if (p.dot(g) >= 0.0) {
        H.setIdentity();
        p = project_dir(-g);
      }
      double alpha = 1.0;
      Eval trial;
      VectorXd d_new;
      bool accepted = false;
      for (int h = 0; h < 40; ++h) {
        d_new = detail::clamp(d + alpha * p, opt.lower, opt.upper);
        if ((d_new - d).norm() == 0.0) break;
        trial = evaluate(d_new);
        double Lt = al_value(trial);
        // The roundoff allowance keeps tiny end-game steps acceptable when the
        // true improvement falls below the precision of L itself.
        if (trial.ok && Lt <= L + 1e-4 * g.dot(d_new - d) + 1e-14 * (1.0 + std::abs(L))) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        if (!trial.ok && ++consecutive_failures > 10)
          throw OptimizationAborted("persistent analysis failure during line search");
        break;  // no descent in the box: inner loop is done
      }
      consecutive_failures = 0;
      hist.records.back().step_alpha = alpha;
      double Lt = al_value(trial);
      stalled = (L - Lt <= 1e-12 * (1.0 + std::abs(L))) ? stalled + 1 : 0;
      if (stalled >= 2) {  // oscillating within roundoff of L
        d = d_new;
        cur = trial;
        break;
      }

      VectorXd g_new = al_grad(trial);
      VectorXd sdiff = d_new - d;
      VectorXd y = g_new - g;
      // Reset curvature when the active bound set changes.
      auto active = [&](const VectorXd& v) {
        std::vector<int> a;
        for (int i = 0; i < n; ++i)
          if (v[i] <= opt.lower[i] || v[i] >= opt.upper[i]) a.push_back(i);
        return a;
      };
      if (active(d) != active(d_new)) {
        H.setIdentity();
      } else {
        double sy = sdiff.dot(y);
        if (sy > 1e-12 * sdiff.norm() * y.norm()) {
          VectorXd Hy = H * y;
          double yHy = y.dot(Hy);
          H += ((sy + yHy) / (sy * sy)) * (sdiff * sdiff.transpose()) -
               (Hy * sdiff.transpose() + sdiff * Hy.transpose()) / sy;
        }
      }
      d = d_new;
      cur = trial;
      g = g_new;
      L = al_value(cur);
    }

    // --- outer: convergence test, multiplier and penalty updates ---
    double viol = 0.0;
    for (int j = 0; j < m; ++j) viol = std::max(viol, -cur.c[j]);
    double kkt = kkt_measure(d, cur);
    double comp = 0.0;
    for (int j = 0; j < m; ++j) comp = std::max(comp, std::abs(lambda[j] * std::min(cur.c[j], 0.0)));
    if (kkt <= opt.tol_kkt && viol <= opt.feas_tol) {
      hist.converged = true;
      hist.termination = "kkt";
      break;
    }
    if (viol <= std::max(eta, opt.feas_tol)) {
      for (int j = 0; j < m; ++j) lambda[j] = std::max(0.0, lambda[j] - mu * cur.c[j]);
      eta = std::max(opt.feas_tol, eta * std::pow(mu, -0.9));
    } else {
      mu = std::min(mu * opt.mu_growth, opt.mu_max);
      eta = std::max(opt.feas_tol, std::pow(mu, -0.1));
    }
    if (outer == opt.max_outer - 1) hist.termination = "max_outer";
  }

  hist.d_opt = d;
  hist.f_opt = cur.f;
  return hist;
}

struct ParetoPoint {
  double eps = 0.0;
  double f_lqr = 0.0;
  double p_hover = 0.0;
  VectorXd d_opt;
  bool ok = false;
  std::string error;
};

// One constrained minimize per epsilon, warm-started from the previous
// optimum. Failures are recorded and the sweep continues.
inline std::vector<ParetoPoint> pareto_sweep(const PlanarQuadrotor& plant,
                                             const AnalysisSettings& settings,
                                             const VectorXd& d0, const OptOptions& opt,
                                             const std::vector<double>& eps_list, double p_min) {
  std::vector<ParetoPoint> points;
  VectorXd d_start = d0;
  for (double eps : eps_list) {
    ParetoPoint pt;
    pt.eps = eps;
    try {
      PipelineObjective obj(plant, settings);
      auto con = std::make_shared<HoverPowerConstraint>(plant, settings, eps, p_min);
      OptHistory h = minimize(obj, {con}, d_start, opt);
      pt.d_opt = h.d_opt;
      pt.f_lqr = h.f_opt;
      VectorXd tmp;
      HoverPowerObjective pw(plant, settings);
      pt.p_hover = pw.eval(h.d_opt, tmp);
      pt.ok = true;
      d_start = h.d_opt;
    } catch (const std::runtime_error& e) {
      pt.error = e.what();
    }
    points.push_back(pt);
  }
  return points;
}

}  // namespace ccd
