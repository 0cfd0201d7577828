#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ccd/errors.hpp"

namespace ccd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Split of target states/controls into known and unknown components, plus
// the residual rows that form the square reduced steady-state system.
struct EquilibriumPartition {
  std::vector<int> known_state_idx;
  std::vector<int> unknown_state_idx;
  std::vector<int> known_control_idx;
  std::vector<int> unknown_control_idx;
  std::vector<int> residual_row_idx;

  int n_theta() const {
    return static_cast<int>(unknown_state_idx.size() + unknown_control_idx.size());
  }

  // Checks that the index sets partition [0, n_x) and [0, n_u) and that the
  // reduced system is square.
  void validate(int n_x, int n_u) const {
    auto check_partition = [](const std::vector<int>& a, const std::vector<int>& b, int n,
                              const char* what) {
      std::vector<char> seen(n, 0);
      for (int i : a) {
        if (i < 0 || i >= n || seen[i]) throw ConfigError(std::string("invalid ") + what + " partition");
        seen[i] = 1;
      }
      for (int i : b) {
        if (i < 0 || i >= n || seen[i]) throw ConfigError(std::string("invalid ") + what + " partition");
        seen[i] = 1;
      }
      if (static_cast<int>(a.size() + b.size()) != n)
        throw ConfigError(std::string("incomplete ") + what + " partition");
    };
    check_partition(known_state_idx, unknown_state_idx, n_x, "state");
    check_partition(known_control_idx, unknown_control_idx, n_u, "control");
    if (static_cast<int>(residual_row_idx.size()) != n_theta())
      throw ConfigError("residual_row_idx size must equal the number of unknowns");
    for (int i : residual_row_idx)
      if (i < 0 || i >= n_x) throw ConfigError("residual_row_idx out of range");
  }
};

enum class Wrt { state, control, design };

// Behavioral contract for a parametrized dynamical system xdot = residual(x, u, d).
// Implementations hold no mutable state and are safe to share across threads.
class PlantModel {
 public:
  virtual ~PlantModel() = default;

  virtual int n_x() const = 0;
  virtual int n_u() const = 0;
  virtual int n_d() const = 0;

  virtual VectorXd residual(const VectorXd& x, const VectorXd& u, const VectorXd& d) const = 0;
  virtual MatrixXd jac_x(const VectorXd& x, const VectorXd& u, const VectorXd& d) const = 0;
  virtual MatrixXd jac_u(const VectorXd& x, const VectorXd& u, const VectorXd& d) const = 0;
  virtual MatrixXd jac_d(const VectorXd& x, const VectorXd& u, const VectorXd& d) const = 0;

  // d/dv [ tr(jac_x' * Jbar) + tr(jac_u' * Gbar) ] for v in {x, u, d}.
  // Default: central differences, h = 1e-6 * (1 + |v_i|) per component.
  // Plants with analytic second derivatives may override.
  virtual VectorXd contract_jacobians(const VectorXd& x, const VectorXd& u, const VectorXd& d,
                                      const MatrixXd& Jbar, const MatrixXd& Gbar, Wrt wrt) const {
    auto scalarize = [&](const VectorXd& xs, const VectorXd& us, const VectorXd& ds) {
      double t = 0.0;
      if (Jbar.size() > 0) t += (jac_x(xs, us, ds).transpose() * Jbar).trace();
      if (Gbar.size() > 0) t += (jac_u(xs, us, ds).transpose() * Gbar).trace();
      return t;
    };
    int n = wrt == Wrt::state ? n_x() : wrt == Wrt::control ? n_u() : n_d();
    VectorXd g(n);
    VectorXd xp = x, up = u, dp = d;
    VectorXd& v = wrt == Wrt::state ? xp : wrt == Wrt::control ? up : dp;
    for (int i = 0; i < n; ++i) {
      double h = 1e-6 * (1.0 + std::abs(v[i]));
      double v0 = v[i];
      v[i] = v0 + h;
      double fp = scalarize(xp, up, dp);
      v[i] = v0 - h;
      double fm = scalarize(xp, up, dp);
      v[i] = v0;
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  }

  virtual const EquilibriumPartition& partition() const = 0;

  // Warm start for the equilibrium unknowns; zeros unless overridden.
  virtual VectorXd theta0() const { return VectorXd::Zero(partition().n_theta()); }

 protected:
  void require_finite(const VectorXd& v, const char* what) const {
    if (!v.allFinite()) throw DomainError(std::string("non-finite ") + what);
  }
};

}  // namespace ccd
