#pragma once

#include <vector>

#include "fsi/core.hpp"

namespace fsi {

struct QuadratureRule {
  std::vector<Vec2> points;    // reference triangle {x>=0, y>=0, x+y<=1}
  std::vector<double> weights; // sum to 1/2
};

// Exact for polynomials of total degree <= degree (degree <= 10).
QuadratureRule quadrature_rule(int degree);

struct LineRule {
  std::vector<double> points;  // on [0,1]
  std::vector<double> weights; // sum to 1
};

LineRule gauss_legendre_01(int npoints);

}  // namespace fsi
