#pragma once

#include <memory>

#include "fsi/fluid_assembly.hpp"
#include "fsi/irk.hpp"
#include "fsi/solid_assembly.hpp"

namespace fsi {

// Separable fluid Dirichlet data u_dir(t) = c_dir(t) * profile plus constant
// solid clamp values.
struct DirichletData {
  VecX fluid_profile;                    // length N_u, nonzero on Dirichlet dofs
  std::function<double(double)> c_dir;   // defaults to 0
  VecX solid_values;                     // length N_s

  double c(double t) const { return c_dir ? c_dir(t) : 0.0; }
};

// Immutable per-run bundle: mesh, spaces, assemblers, extension operators.
struct FsiSystem {
  Mesh mesh;
  Spaces spaces;
  std::unique_ptr<FluidAssembly> fluid;
  std::unique_ptr<SolidAssembly> solid;
  ExtensionOperator ext_ale;  // pseudo-elastic mesh motion
  ExtensionOperator ext_hf;   // harmonic fluid velocity extension
  ExtensionOperator ext_hs;   // harmonic solid extension
  SpMat mass_s;
  VecX m_ref;                 // reference pressure-basis integrals
  MatX ale_cols;              // N_u x N_c: mesh-motion extension of each trace direction
  DirichletData dirichlet;
  double diameter = 1.0;

  FsiSystem() = default;
  FsiSystem(const FsiSystem&) = delete;
  FsiSystem& operator=(const FsiSystem&) = delete;

  const Spaces& sp() const { return spaces; }
  bool enclosed() const { return spaces.fluid_enclosed; }
};

std::unique_ptr<FsiSystem> build_system(Mesh mesh, const FluidParams& fluid,
                                        const SolidParams& solid, const PseudoParams& pseudo,
                                        DirichletData dirichlet);

struct SolverSettings {
  double abs_tol_scale = 1e-10;  // absolute tolerance = scale * sqrt(#unknowns)
  double rel_tol = 1e-8;
  int max_iters = 25;
  bool line_search = false;
  double fd_step_scale = 1e-7;  // shape-derivative step = scale * domain diameter
  bool frozen_geometry = false;  // disables the shape channel (diagnostics)
  bool record_stages = false;
  int verbosity = 0;
};

struct HfState {
  double t = 0.0;
  VecX u, p, d, v;  // fluid velocity/pressure, solid displacement/velocity
  VecX mass_u;      // M_f at the accepted configuration times u
};

HfState initial_state(const FsiSystem& sys);
// Consistent start: steady Stokes solve with the interface trace matching the
// given solid velocity and c_dir(0) inflow.
HfState initial_state_stokes(const FsiSystem& sys, const VecX& solid_velocity);

struct StageSnapshot {
  double t = 0.0;
  double c_dir = 0.0;
  VecX u, p, d;
};

struct StepDiagnostics {
  int newton_iters = 0;
  std::vector<double> residual_norms;
  double kinematic_mismatch = 0.0;  // max over stages of |trace u_f - trace u_s|
  bool converged = false;
};

struct StepResult {
  HfState state;
  StepDiagnostics diag;
  VecX inst_residual_f;            // instantaneous fluid momentum residual at t^{n+1}
  double dissipation_integral = 0; // dt * sum_i b_i D(u^(i))
  std::vector<StageSnapshot> stages;  // filled when settings.record_stages
};

StepResult advance_step(const FsiSystem& sys, const HfState& state, const ButcherTableau& tab,
                        double dt, const SolverSettings& settings);

// Same linearization solved as one dense system per Newton iteration; guarded
// to small meshes. Agrees with advance_step to linear-solver accuracy.
StepResult monolithic_oracle_step(const FsiSystem& sys, const HfState& state,
                                  const ButcherTableau& tab, double dt,
                                  const SolverSettings& settings, int max_unknowns = 5000);

// Fluid-only stepping with the interface held at the reference position;
// used for the hold phase before releasing the structure.
StepResult advance_step_held(const FsiSystem& sys, const HfState& state,
                             const ButcherTableau& tab, double dt,
                             const SolverSettings& settings);

// Energy pieces shared by HF and reduced runs.
struct EnergySample {
  double kinetic_fluid = 0, kinetic_solid = 0, elastic = 0;
  double total() const { return kinetic_fluid + kinetic_solid + elastic; }
};
EnergySample energy_sample(const FsiSystem& sys, const HfState& state);

}  // namespace fsi
