#pragma once

#include "fsi/rom_offline.hpp"

namespace fsi {

// Reduced model bound to a high-fidelity system. Residuals are exact Galerkin
// projections of the high-fidelity stage residuals (no hyper-reduction).
struct RomSystem {
  const FsiSystem* hf = nullptr;
  ReducedBasis basis;
  MatX ale_port_cols;  // N_u x m: pseudo-elastic mesh motion per port mode
  bool enclosed = false;

  int m() const { return basis.m; }
  int nu() const { return basis.n_u(); }
  int np() const { return basis.n_p; }
  int ns() const { return basis.n_s; }
};

RomSystem build_rom_system(const FsiSystem& hf, ReducedBasis basis);

struct RomState {
  double t = 0;
  VecX beta, alpha_f, alpha_p, alpha_s;  // accepted reduced coordinates
  // High-fidelity-space step caches (the model keeps full assembly anyway).
  VecX mass_u_prev;  // M_f at the accepted configuration times the velocity
  VecX d_prev;       // reconstructed displacement
  VecX v_prev;       // reconstructed solid velocity
};

// Projection of a high-fidelity state in the respective inner products.
RomState rom_initial_state(const RomSystem& rom, const HfState& hf_state);

struct RomFields {
  VecX u, p, d, v;  // reconstructed full-space fields
};

// Reduced residual blocks at a stacked reduced stage state; exposed for
// verification against independent projections.
struct RomResiduals {
  VecX port;         // s*m
  VecX fluid_bubble; // s*nu
  VecX divergence;   // s*np (+ s border rows when enclosed)
  VecX solid_bubble; // s*ns
};
RomResiduals reduced_stage_system(const RomSystem& rom, const RomState& prev,
                                  const ButcherTableau& tab, double dt, const VecX& beta,
                                  const VecX& alpha_f, const VecX& alpha_p, const VecX& alpha_s,
                                  const VecX& lambda);

struct RomStepResult {
  RomState state;
  RomFields fields;
  StepDiagnostics diag;
  double dissipation_integral = 0;
  VecX inst_residual_f;
  std::vector<StageSnapshot> stages;
};

RomStepResult rom_advance_step(const RomSystem& rom, const RomState& state,
                               const ButcherTableau& tab, double dt,
                               const SolverSettings& settings);
// Dense reduced monolithic Newton, the verification oracle for the reduced
// Schur path.
RomStepResult rom_oracle_step(const RomSystem& rom, const RomState& state,
                              const ButcherTableau& tab, double dt,
                              const SolverSettings& settings);

struct EnergyReport {
  double kinetic_fluid = 0, kinetic_solid = 0, elastic = 0;
  double dissipation_integral = 0;
  double identity_residual = 0;
  double total() const { return kinetic_fluid + kinetic_solid + elastic; }
};

// Fully discrete energy bookkeeping for one accepted step:
// residual = [E(t+dt) - E(t) + dissipation integral] / max(|E|, eps).
EnergyReport energy_report(const FsiSystem& sys, const EnergySample& before,
                           const HfState& after, double dissipation_integral);

}  // namespace fsi
