#pragma once

#include "fsi/coupled_solver.hpp"

namespace fsi {

struct NewmarkParams {
  double beta = 0.25;
  double gamma = 0.5;
  bool require_unconditional_stability = false;

  void validate() const {
    require(beta > 0 && gamma > 0, Error::Kind::config, "Newmark parameters must be positive");
    if (require_unconditional_stability)
      require(2 * beta >= gamma && gamma >= 0.5, Error::Kind::config,
              "unconditional stability needs 2*beta >= gamma >= 1/2");
  }
};

// One Newmark step of the linear system M qdd + K q = 0; the standalone
// update reused by verification drivers.
void newmark_linear_step(const MatX& m, const MatX& k, double dt, const NewmarkParams& np,
                         VecX& q, VecX& v, VecX& a);

// History carried by the BDF2 (fluid) + Newmark (solid) baseline stepper.
struct Bdf2State {
  HfState now;
  VecX accel;        // solid acceleration
  VecX mass_u_prev;  // fluid momentum one step back
  VecX g_prev;       // interface displacement one step back
  bool have_history = false;
};

Bdf2State bdf2_initial_state(const FsiSystem& sys, const HfState& state);

// Monolithic coupled step with the same interface conditions as the IRK path;
// first step falls back to backward Euler for the fluid history.
StepResult bdf2_newmark_step(const FsiSystem& sys, Bdf2State& state, double dt,
                             const NewmarkParams& np, const SolverSettings& settings);

}  // namespace fsi
