#include "fsi/irk.hpp"

#include <cmath>

namespace fsi {

namespace {

// Jacobi P_n^{(1,0)} and derivative, long double three-term recurrence.
void jacobi10(int n, long double x, long double& value, long double& deriv) {
  const long double alpha = 1.0L, beta = 0.0L;
  long double p0 = 1.0L, p1 = 0.5L * ((alpha + beta + 2) * x + (alpha - beta));
  long double d0 = 0.0L, d1 = 0.5L * (alpha + beta + 2);
  if (n == 0) {
    value = p0;
    deriv = d0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const long double a1 = 2.0L * k * (k + alpha + beta) * (2 * k + alpha + beta - 2);
    const long double a2 = (2 * k + alpha + beta - 1) * (alpha * alpha - beta * beta);
    const long double a3 = (2 * k + alpha + beta - 2) * (2 * k + alpha + beta - 1) *
                           (2 * k + alpha + beta);
    const long double a4 = 2.0L * (k + alpha - 1) * (k + beta - 1) * (2 * k + alpha + beta);
    const long double p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
    const long double d2 = ((a2 + a3 * x) * d1 + a3 * p1 - a4 * d0) / a1;
    p0 = p1;
    p1 = p2;
    d0 = d1;
    d1 = d2;
  }
  value = p1;
  deriv = d1;
}

// Interior Radau abscissae on (0,1): mapped roots of P_{s-1}^{(1,0)}.
std::vector<long double> radau_interior_nodes(int s) {
  const int n = s - 1;
  std::vector<long double> roots;
  for (int i = 0; i < n; ++i) {
    // Chebyshev-like initial guess, then Newton with deflation.
    long double x = std::cos(M_PI * (2.0L * i + 1.0L) / (2.0L * n + 1.0L));
    for (int it = 0; it < 200; ++it) {
      long double v, d;
      jacobi10(n, x, v, d);
      long double defl = 0.0L;
      for (long double r : roots) defl += 1.0L / (x - r);
      const long double step = v / (d - v * defl);
      x -= step;
      if (std::abs((double)step) < 1e-19) break;
    }
    roots.push_back(x);
  }
  std::sort(roots.begin(), roots.end());
  for (auto& r : roots) r = 0.5L * (r + 1.0L);
  return roots;
}

// Solve V y = rhs with V_{kj} = c_j^k (k = 0..s-1), long double elimination.
std::vector<long double> vandermonde_solve(const std::vector<long double>& c,
                                           std::vector<long double> rhs) {
  const int s = static_cast<int>(c.size());
  std::vector<std::vector<long double>> m(s, std::vector<long double>(s));
  for (int k = 0; k < s; ++k)
    for (int j = 0; j < s; ++j) m[k][j] = std::pow(c[j], (long double)k);
  for (int col = 0; col < s; ++col) {
    int piv = col;
    for (int r = col + 1; r < s; ++r)
      if (std::abs((double)m[r][col]) > std::abs((double)m[piv][col])) piv = r;
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    for (int r = col + 1; r < s; ++r) {
      const long double f = m[r][col] / m[col][col];
      for (int cc = col; cc < s; ++cc) m[r][cc] -= f * m[col][cc];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<long double> y(s);
  for (int r = s - 1; r >= 0; --r) {
    long double acc = rhs[r];
    for (int cc = r + 1; cc < s; ++cc) acc -= m[r][cc] * y[cc];
    y[r] = acc / m[r][r];
  }
  return y;
}

}  // namespace

bool ButcherTableau::stiffly_accurate() const {
  if (std::abs(c[s - 1] - 1.0) > 0.0) return false;
  for (int j = 0; j < s; ++j)
    if (A(s - 1, j) != b[j]) return false;
  return true;
}

double ButcherTableau::order_condition_residual(int order) const {
  double worst = 0.0;
  for (int k = 1; k <= order; ++k) {
    double acc = 0.0;
    for (int j = 0; j < s; ++j) acc += b[j] * std::pow(c[j], k - 1);
    worst = std::max(worst, std::abs(acc - 1.0 / k));
  }
  return worst;
}

double ButcherTableau::stability(double z) const {
  const MatX m = MatX::Identity(s, s) - z * A;
  const VecX k = m.fullPivLu().solve(VecX::Ones(s));
  return 1.0 + z * b.dot(k);
}

ButcherTableau radau_iia(int s) {
  require(s >= 1 && s <= 4, Error::Kind::config,
          "unsupported stage count " + std::to_string(s) + " (need 1..4)");
  std::vector<long double> c = radau_interior_nodes(s);
  c.push_back(1.0L);

  ButcherTableau tab;
  tab.s = s;
  tab.c.resize(s);
  for (int i = 0; i < s; ++i) tab.c[i] = static_cast<double>(c[i]);
  tab.A.resize(s, s);
  for (int i = 0; i < s; ++i) {
    // Collocation conditions: sum_j A_ij c_j^{k-1} = c_i^k / k, k = 1..s.
    std::vector<long double> rhs(s);
    for (int k = 1; k <= s; ++k) rhs[k - 1] = std::pow(c[i], (long double)k) / k;
    const auto row = vandermonde_solve(c, rhs);
    for (int j = 0; j < s; ++j) tab.A(i, j) = static_cast<double>(row[j]);
  }
  tab.b = tab.A.row(s - 1);  // stiff accuracy holds bitwise by construction
  tab.A_inv = tab.A.inverse();
  tab.A_inv_row_sum = tab.A_inv * VecX::Ones(s);
  return tab;
}

std::vector<VecX> StageDifferentiation::derivatives(const std::vector<VecX>& stages,
                                                    const VecX& prev) const {
  std::vector<VecX> out(stages.size());
  for (int i = 0; i < static_cast<int>(stages.size()); ++i) out[i] = derivative(i, stages, prev);
  return out;
}

VecX StageDifferentiation::derivative(int i, const std::vector<VecX>& stages,
                                      const VecX& prev) const {
  VecX d = prev_coeff(i) * prev;
  for (int j = 0; j < static_cast<int>(stages.size()); ++j) d += coeff(i, j) * stages[j];
  return d;
}

VecX irk_step_dense(const ButcherTableau& tab, double t, double dt, const VecX& y,
                    const std::function<VecX(double, const VecX&)>& f,
                    const std::function<MatX(double, const VecX&)>& jac) {
  const int s = tab.s, n = static_cast<int>(y.size());
  VecX stages = y.replicate(s, 1);
  for (int it = 0; it < 50; ++it) {
    VecX res(s * n);
    MatX j = MatX::Zero(s * n, s * n);
    std::vector<VecX> fs(s);
    for (int i = 0; i < s; ++i)
      fs[i] = f(t + tab.c[i] * dt, stages.segment(i * n, n));
    for (int i = 0; i < s; ++i) {
      res.segment(i * n, n) = stages.segment(i * n, n) - y;
      for (int k = 0; k < s; ++k) res.segment(i * n, n) -= dt * tab.A(i, k) * fs[k];
      for (int k = 0; k < s; ++k) {
        const MatX jk = jac(t + tab.c[k] * dt, stages.segment(k * n, n));
        j.block(i * n, k * n, n, n) -= dt * tab.A(i, k) * jk;
      }
      j.block(i * n, i * n, n, n) += MatX::Identity(n, n);
    }
    const VecX delta = j.fullPivLu().solve(res);
    stages -= delta;
    if (delta.lpNorm<Eigen::Infinity>() < 1e-14 * std::max(1.0, stages.lpNorm<Eigen::Infinity>()))
      break;
  }
  return stages.tail(n);  // stiffly accurate: last stage is the step value
}

}  // namespace fsi
