#pragma once

#include <functional>

#include "fsi/spaces.hpp"

namespace fsi {

enum class SolidModel { linear, svk };

struct SolidParams {
  double rho = 1.0;
  double E = 1.0;
  double nu = 0.3;
  SolidModel model = SolidModel::svk;
  // Optional hooks, reference-configuration coordinates. Defaults: none/zero.
  std::function<Vec2(const Vec2&, double)> body_force;
  std::function<Vec2(const Vec2&, double)> neumann_data;

  // Plane strain.
  double lambda() const { return E * nu / ((1 + nu) * (1 - 2 * nu)); }
  double mu() const { return E / (2 * (1 + nu)); }
};

class SolidAssembly {
public:
  SolidAssembly(const Spaces& spaces, SolidParams params) : sp_(&spaces), params_(params) {}

  const SolidParams& params() const { return params_; }

  VecX residual(const VecX& d, double t = 0.0) const;
  SpMat stiffness(const VecX& d) const;  // tangent of residual; symmetric
  SpMat mass() const;                    // constant SPD
  double energy(const VecX& d) const;    // stored elastic energy

private:
  const Spaces* sp_;
  SolidParams params_;
};

}  // namespace fsi
