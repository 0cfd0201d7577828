#pragma once

#include "ccd/plant_ad.hpp"

namespace ccd {

// Cart-pole in dimensionless form. State [x, v, theta, omega], scalar control,
// design d = [m, M, L]. theta = pi is the upright pole.
class CartPole : public AdPlant<CartPole> {
 public:
  double g = 10.0;
  double delta = 0.0;  // cart damping; no published value, defaults to zero

  CartPole() {
    // Both fixed points are fully specified, so nothing is solved at steady state.
    part_.known_state_idx = {0, 1, 2, 3};
    part_.known_control_idx = {0};
  }

  int n_x() const override { return 4; }
  int n_u() const override { return 1; }
  int n_d() const override { return 3; }
  const EquilibriumPartition& partition() const override { return part_; }
  void set_partition(EquilibriumPartition p) { part_ = std::move(p); }

  template <class S>
  void residual_t(const S* x, const S* u, const S* d, S* out) const {
    const S& v = x[1];
    const S& theta = x[2];
    const S& omega = x[3];
    const S& m = d[0];
    const S& M = d[1];
    const S& L = d[2];
    // theta = pi is the upright (unstable) pole, theta = 0 hangs down; the
    // trig terms measure the deviation from upright.
    S st = -sin(theta);
    S ct = -cos(theta);
    S den = M + m * st * st;        // common denominator scale
    S core = m * L * omega * omega * st - delta * v;
    out[0] = v;
    out[1] = (-(m * m) * (L * L) * g * ct * st + m * (L * L) * core) / (m * (L * L) * den) + u[0] / den;
    out[2] = omega;
    out[3] = ((m + M) * m * g * L * st - m * L * ct * core) / (m * (L * L) * den) + u[0] * ct / (L * den);
  }

  VectorXd contract_jacobians(const VectorXd& x, const VectorXd& u, const VectorXd& d,
                              const MatrixXd& Jbar, const MatrixXd& Gbar, Wrt wrt) const override {
    return contract_exact(x, u, d, Jbar, Gbar, wrt);
  }

 private:
  EquilibriumPartition part_;
};

}  // namespace ccd
