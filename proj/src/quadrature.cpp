#include "fsi/quadrature.hpp"

#include <cmath>

namespace fsi {

namespace {

// Gauss-Legendre on [-1,1] by Newton iteration on P_n; machine precision.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      if (n == 1) p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / pp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * pp * pp);
  }
}

}  // namespace

LineRule gauss_legendre_01(int npoints) {
  std::vector<double> x, w;
  gauss_legendre(npoints, x, w);
  LineRule rule;
  rule.points.resize(npoints);
  rule.weights.resize(npoints);
  for (int i = 0; i < npoints; ++i) {
    rule.points[i] = 0.5 * (x[i] + 1.0);
    rule.weights[i] = 0.5 * w[i];
  }
  return rule;
}

QuadratureRule quadrature_rule(int degree) {
  require(degree >= 0 && degree <= 10, Error::Kind::config,
          "unsupported quadrature degree " + std::to_string(degree));
  if (degree <= 1) {
    QuadratureRule rule;
    rule.points = {Vec2(1.0 / 3.0, 1.0 / 3.0)};
    rule.weights = {0.5};
    return rule;
  }
  if (degree == 2) {
    QuadratureRule rule;
    rule.points = {Vec2(1.0 / 6.0, 1.0 / 6.0), Vec2(2.0 / 3.0, 1.0 / 6.0),
                   Vec2(1.0 / 6.0, 2.0 / 3.0)};
    rule.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    return rule;
  }
  // Collapsed tensor rule: x = a, y = b (1 - a) with Jacobian (1 - a);
  // a monomial x^p y^q becomes a^p (1-a)^{q+1} b^q, so n Gauss points per
  // direction integrate total degree d exactly when 2n - 1 >= d + 1.
  const int n = (degree + 3) / 2;
  const LineRule g = gauss_legendre_01(n);
  QuadratureRule rule;
  rule.points.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double a = g.points[i], b = g.points[j];
      rule.points.emplace_back(a, b * (1.0 - a));
      rule.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - a));
    }
  return rule;
}

}  // namespace fsi
