#pragma once

#include <functional>

#include "fsi/core.hpp"

namespace fsi {

// Stiffly accurate implicit Runge-Kutta coefficients: last row of A equals b
// and c_s = 1, so the final stage is the step value and no projection step
// exists anywhere in the steppers.
struct ButcherTableau {
  int s = 0;
  MatX A;
  VecX b, c;
  MatX A_inv;
  VecX A_inv_row_sum;  // A^{-1} 1

  bool stiffly_accurate() const;
  // max_k<=order |sum_j b_j c_j^{k-1} - 1/k|
  double order_condition_residual(int order) const;
  // Linear stability function R(z) = 1 + z b^T (I - z A)^{-1} 1.
  double stability(double z) const;
};

// Radau-IIA with s in 1..4; nodes and weights are constructed from the
// collocation conditions in extended precision at startup.
ButcherTableau radau_iia(int s);

// Affine map from stacked stage values to stage time derivatives:
//   Ydot_i = (1/dt) ( sum_j Ainv_ij Y_j - (Ainv 1)_i y_prev ).
class StageDifferentiation {
public:
  StageDifferentiation(const ButcherTableau& tab, double dt) : tab_(&tab), dt_(dt) {
    require(dt > 0, Error::Kind::config, "time step must be positive");
  }

  double coeff(int i, int j) const { return tab_->A_inv(i, j) / dt_; }
  double prev_coeff(int i) const { return -tab_->A_inv_row_sum[i] / dt_; }

  // stages: s vectors; prev: value at the step start.
  std::vector<VecX> derivatives(const std::vector<VecX>& stages, const VecX& prev) const;
  VecX derivative(int i, const std::vector<VecX>& stages, const VecX& prev) const;

private:
  const ButcherTableau* tab_;
  double dt_;
};

// Dense IRK step for small systems, used by verification drivers: solves the
// stage equations Y_i = y + dt sum_j a_ij f(t + c_j dt, Y_j) by Newton.
VecX irk_step_dense(const ButcherTableau& tab, double t, double dt, const VecX& y,
                    const std::function<VecX(double, const VecX&)>& f,
                    const std::function<MatX(double, const VecX&)>& jac);

}  // namespace fsi
