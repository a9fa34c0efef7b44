#pragma once

#include <functional>

#include "fsi/ale.hpp"
#include "fsi/spaces.hpp"

namespace fsi {

struct FluidParams {
  double rho = 1.0;
  double mu = 1.0;
  // Optional hooks used by verification drivers. body_force takes current
  // coordinates; neumann_data is integrated on the reference boundary.
  std::function<Vec2(const Vec2&, double)> body_force;
  std::function<Vec2(const Vec2&, double)> neumann_data;
};

// One-sweep evaluation of all configuration-dependent products at a state.
struct FluidBlocks {
  VecX rprime;  // spatial residual, length N_u
  VecX mass_u;  // M_f(config) u
  VecX div_u;   // B_f(config) u, length N_p
};

class FluidAssembly {
public:
  FluidAssembly(const Spaces& spaces, FluidParams params) : sp_(&spaces), params_(params) {}

  const FluidParams& params() const { return params_; }

  VecX residual(const VecX& u, const VecX& p, const AleConfig& ale, const VecX& omega,
                double t) const;
  FluidBlocks blocks(const VecX& u, const VecX& p, const AleConfig& ale, const VecX& omega,
                     double t) const;

  // dRdu / dRdp / dRdw are optional outputs (skip with nullptr). dRdw is the
  // mesh-velocity sensitivity; the geometry sensitivity is probed by finite
  // differences on the ALE map at solver level.
  void jacobians(const VecX& u, const VecX& p, const AleConfig& ale, const VecX& omega, double t,
                 SpMat* dRdu, SpMat* dRdp, SpMat* dRdw) const;

  SpMat mass(const AleConfig& ale) const;
  SpMat divergence(const AleConfig& ale) const;
  VecX mass_times(const AleConfig& ale, const VecX& u) const;
  VecX div_times(const AleConfig& ale, const VecX& u) const;

  // Integrals of the pressure basis on the given configuration; the bordering
  // column used on enclosed fluid domains.
  VecX pressure_integrals(const AleConfig& ale) const;

  // 2 mu int eps(u):eps(u) on the given configuration.
  double dissipation(const VecX& u, const AleConfig& ale) const;

private:
  const Spaces* sp_;
  FluidParams params_;
};

}  // namespace fsi
