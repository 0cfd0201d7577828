#pragma once

#include "ccd/plant_ad.hpp"

namespace ccd {

// Planar (longitudinal) quadrotor. State [x, y, theta, v_x, v_y, omega],
// control [Omega_1, Omega_2] (rotor speeds, rad/s), design d = [d1, d2]
// scaling the rotor thrust/power coefficients:
//   T = c_T(d) Omega^2 with c_T = k_T (1 + d1)
//   P = c_P(d) Omega^3 with c_P = k_P (1 + 0.5 d1 + d2)
// The right rotor pair produces T1 each, the left pair T2 each.
class PlanarQuadrotor : public AdPlant<PlanarQuadrotor> {
 public:
  double m = 1.4;        // kg
  double I = 0.0211;     // kg m^2
  double ell = 0.159;    // m
  double beta = 0.1365;  // N/(m/s)^2
  double g = 9.81;       // m/s^2
  double k_T = 1.4e-5;   // N/(rad/s)^2, hover Omega ~ 495 rad/s at d = 0
  double k_P = 2.0e-7;   // W/(rad/s)^3

  PlanarQuadrotor() {
    // Hover target: states fully known (zero), both rotor speeds unknown.
    part_.known_state_idx = {0, 1, 2, 3, 4, 5};
    part_.unknown_control_idx = {0, 1};
    part_.residual_row_idx = {4, 5};  // v_y and omega balances
  }

  int n_x() const override { return 6; }
  int n_u() const override { return 2; }
  int n_d() const override { return 2; }
  const EquilibriumPartition& partition() const override { return part_; }
  void set_partition(EquilibriumPartition p) { part_ = std::move(p); }

  VectorXd theta0() const override {
    VectorXd th(2);
    th.setConstant(std::sqrt(m * g / (4.0 * k_T)) * 0.8);
    return th;
  }

  template <class S>
  S thrust_coeff(const S* d) const { return k_T * (1.0 + d[0]); }
  template <class S>
  S power_coeff(const S* d) const { return k_P * (1.0 + 0.5 * d[0] + d[1]); }

  // Total power drawn by all four rotors at speeds (Omega_1, Omega_2).
  template <class S>
  S hover_power_t(const S* u, const S* d) const {
    S cP = power_coeff(d);
    return 2.0 * cP * (u[0] * u[0] * u[0] + u[1] * u[1] * u[1]);
  }

  template <class S>
  void residual_t(const S* x, const S* u, const S* d, S* out) const {
    if (value_of(u[0]) < 0.0 || value_of(u[1]) < 0.0)
      throw DomainError("negative rotor speed");
    const S& theta = x[2];
    const S& vx = x[3];
    const S& vy = x[4];
    const S& omega = x[5];
    S cT = thrust_coeff(d);
    S T1 = cT * u[0] * u[0];
    S T2 = cT * u[1] * u[1];
    S st = sin(theta);
    S ct = cos(theta);
    S q = vx * vx + vy * vy;
    // Drag is beta * v_i * speed; at zero speed both the value and the
    // Jacobian vanish, so the guarded branch stays exact.
    S speed = value_of(q) == 0.0 ? S(0.0) : sqrt(q);
    out[0] = vx;
    out[1] = vy;
    out[2] = omega;
    out[3] = (-2.0 * (T1 + T2) * st - beta * vx * speed) / m;
    out[4] = (2.0 * (T1 + T2) * ct - beta * vy * speed) / m - g;
    out[5] = 2.0 * (T1 - T2) * ell / I;
  }

 private:
  EquilibriumPartition part_;
};

// Analytic thrust surrogate: T = c_T(d) Omega^2 with its derivatives.
struct ThrustEval {
  double T;
  double dT_dOmega;
  Eigen::Vector2d dT_dd;
};

inline ThrustEval thrust_model(const PlanarQuadrotor& plant, double Omega,
                               const Eigen::Vector2d& d) {
  if (Omega < 0.0) throw DomainError("negative rotor speed");
  double cT = plant.k_T * (1.0 + d[0]);
  ThrustEval e;
  e.T = cT * Omega * Omega;
  e.dT_dOmega = 2.0 * cT * Omega;
  e.dT_dd = {plant.k_T * Omega * Omega, 0.0};
  return e;
}

struct PowerEval {
  double P;
  double dP_dOmega;
  Eigen::Vector2d dP_dd;
};

inline PowerEval power_model(const PlanarQuadrotor& plant, double Omega,
                             const Eigen::Vector2d& d) {
  if (Omega < 0.0) throw DomainError("negative rotor speed");
  double cP = plant.k_P * (1.0 + 0.5 * d[0] + d[1]);
  PowerEval e;
  e.P = cP * Omega * Omega * Omega;
  e.dP_dOmega = 3.0 * cP * Omega * Omega;
  e.dP_dd = {0.5 * plant.k_P * Omega * Omega * Omega, plant.k_P * Omega * Omega * Omega};
  return e;
}

}  // namespace ccd
