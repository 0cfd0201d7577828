#pragma once

#include <vector>

#include "ccd/duals.hpp"
#include "ccd/plant.hpp"

namespace ccd {

// CRTP helper: derives exact Jacobians (and optionally exact Jacobian
// contractions) from a scalar-templated residual
//   template <class S> void residual_t(const S* x, const S* u, const S* d, S* out) const;
template <class Derived>
class AdPlant : public PlantModel {
 public:
  VectorXd residual(const VectorXd& x, const VectorXd& u, const VectorXd& d) const override {
    require_finite(x, "state");
    require_finite(u, "control");
    require_finite(d, "design");
    VectorXd out(n_x());
    self().template residual_t<double>(x.data(), u.data(), d.data(), out.data());
    return out;
  }

  MatrixXd jac_x(const VectorXd& x, const VectorXd& u, const VectorXd& d) const override {
    return jac_block(x, u, d, Wrt::state);
  }
  MatrixXd jac_u(const VectorXd& x, const VectorXd& u, const VectorXd& d) const override {
    return jac_block(x, u, d, Wrt::control);
  }
  MatrixXd jac_d(const VectorXd& x, const VectorXd& u, const VectorXd& d) const override {
    return jac_block(x, u, d, Wrt::design);
  }

 protected:
  // Exact contraction via nested duals; concrete plants expose it by
  // overriding contract_jacobians and forwarding here.
  VectorXd contract_exact(const VectorXd& x, const VectorXd& u, const VectorXd& d,
                          const MatrixXd& Jbar, const MatrixXd& Gbar, Wrt wrt) const {
    const int nx = n_x(), nu = n_u(), nd = n_d();
    const int nw = wrt == Wrt::state ? nx : wrt == Wrt::control ? nu : nd;
    std::vector<Dual2> xs(nx), us(nu), ds(nd), out(nx);
    VectorXd g = VectorXd::Zero(nw);
    for (int i = 0; i < nw; ++i) {
      // Inner seed: Jacobian column j. Outer seed: differentiation direction i.
      auto run = [&](Wrt jac_wrt, const MatrixXd& weight) {
        if (weight.size() == 0) return;
        const int ncols = jac_wrt == Wrt::state ? nx : nu;
        for (int j = 0; j < ncols; ++j) {
          for (int k = 0; k < nx; ++k) xs[k] = Dual2{Dual1{x[k], 0.0}, Dual1{0.0, 0.0}};
          for (int k = 0; k < nu; ++k) us[k] = Dual2{Dual1{u[k], 0.0}, Dual1{0.0, 0.0}};
          for (int k = 0; k < nd; ++k) ds[k] = Dual2{Dual1{d[k], 0.0}, Dual1{0.0, 0.0}};
          Dual2* wvar = wrt == Wrt::state ? xs.data() : wrt == Wrt::control ? us.data() : ds.data();
          Dual2* jvar = jac_wrt == Wrt::state ? xs.data() : us.data();
          wvar[i].d.v = 1.0;
          jvar[j].v.d = 1.0;  // inner and outer seeds live in distinct fields
          self().template residual_t<Dual2>(xs.data(), us.data(), ds.data(), out.data());
          for (int r = 0; r < nx; ++r) g[i] += weight(r, j) * out[r].d.d;
        }
      };
      run(Wrt::state, Jbar);
      run(Wrt::control, Gbar);
    }
    return g;
  }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }

  MatrixXd jac_block(const VectorXd& x, const VectorXd& u, const VectorXd& d, Wrt wrt) const {
    require_finite(x, "state");
    require_finite(u, "control");
    require_finite(d, "design");
    const int nx = n_x(), nu = n_u(), nd = n_d();
    const int ncols = wrt == Wrt::state ? nx : wrt == Wrt::control ? nu : nd;
    std::vector<Dual1> xs(nx), us(nu), ds(nd), out(nx);
    for (int k = 0; k < nx; ++k) xs[k] = Dual1{x[k], 0.0};
    for (int k = 0; k < nu; ++k) us[k] = Dual1{u[k], 0.0};
    for (int k = 0; k < nd; ++k) ds[k] = Dual1{d[k], 0.0};
    Dual1* var = wrt == Wrt::state ? xs.data() : wrt == Wrt::control ? us.data() : ds.data();
    MatrixXd jac(nx, ncols);
    for (int j = 0; j < ncols; ++j) {
      var[j].d = 1.0;
      self().template residual_t<Dual1>(xs.data(), us.data(), ds.data(), out.data());
      var[j].d = 0.0;
      for (int r = 0; r < nx; ++r) jac(r, j) = out[r].d;
    }
    return jac;
  }
};

}  // namespace ccd
