#include <cmath>

#include "doctest.h"
#include "fsi/benchmarks.hpp"
#include "fsi/newmark.hpp"
#include "helpers.hpp"

using namespace fsi;

namespace {

std::unique_ptr<FsiSystem> tiny_box_system() {
  BenchmarkGeometry geo = default_geometry(BenchmarkKind::box_isolated);
  geo.h = 0.25;
  FluidParams fp;
  fp.rho = 1.0;
  fp.mu = 0.1;
  SolidParams sp;
  sp.rho = 1.0;
  sp.E = 50.0;
  sp.model = SolidModel::svk;
  return build_system(generate_benchmark(geo), fp, sp, PseudoParams{}, DirichletData{});
}

}  // namespace

TEST_CASE("trapezoidal Newmark conserves the oscillator energy") {
  NewmarkParams np;  // beta = 1/4, gamma = 1/2
  MatX m = MatX::Constant(1, 1, 1.0);
  MatX k = MatX::Constant(1, 1, 4.0);
  VecX q = VecX::Constant(1, 1.0), v = VecX::Zero(1), a = VecX::Constant(1, -4.0);
  const double e0 = 0.5 * v.dot(m * v) + 0.5 * q.dot(k * q);
  for (int step = 0; step < 1000; ++step) {
    newmark_linear_step(m, k, 0.1, np, q, v, a);
    const double e = 0.5 * v.dot(m * v) + 0.5 * q.dot(k * q);
    CHECK(std::abs(e - e0) < 1e-10 * e0);
  }
}

TEST_CASE("damped Newmark (beta=1/3, gamma=3/5) decays monotonically") {
  NewmarkParams np;
  np.beta = 1.0 / 3.0;
  np.gamma = 3.0 / 5.0;
  np.require_unconditional_stability = true;
  np.validate();
  MatX m = MatX::Constant(1, 1, 1.0);
  MatX k = MatX::Constant(1, 1, 4.0);
  VecX q = VecX::Constant(1, 1.0), v = VecX::Zero(1), a = VecX::Constant(1, -4.0);
  const double e0 = 0.5 * v.dot(m * v) + 0.5 * q.dot(k * q);
  // The physical energy oscillates slightly within a period; the decay is
  // monotone per oscillation period (~31 steps at dt = 0.1, omega = 2).
  std::vector<double> energy;
  for (int step = 0; step < 400; ++step) {
    newmark_linear_step(m, k, 0.1, np, q, v, a);
    energy.push_back(0.5 * v.dot(m * v) + 0.5 * q.dot(k * q));
  }
  const int window = 32;
  double prev_mean = e0;
  for (std::size_t start = 0; start + window <= energy.size(); start += window) {
    double mean = 0;
    for (int i = 0; i < window; ++i) mean += energy[start + i];
    mean /= window;
    CHECK(mean < prev_mean);
    prev_mean = mean;
  }
  for (double e : energy) CHECK(e <= e0 * (1 + 1e-9));
  CHECK(energy.back() < 0.5 * e0);  // visibly dissipated
}

TEST_CASE("stability constraint flag rejects 2*beta < gamma") {
  NewmarkParams np;
  np.beta = 0.25;
  np.gamma = 0.6;
  np.require_unconditional_stability = true;
  CHECK_THROWS_AS(np.validate(), Error);
}

TEST_CASE("bdf2+newmark keeps the zero state stationary") {
  auto sys = tiny_box_system();
  Bdf2State st = bdf2_initial_state(*sys, initial_state(*sys));
  SolverSettings settings;
  for (int k = 0; k < 3; ++k) {
    StepResult r = bdf2_newmark_step(*sys, st, 0.05, NewmarkParams{}, settings);
    CHECK(r.diag.converged);
    CHECK(r.state.u.norm() == 0.0);
    CHECK(r.state.d.norm() == 0.0);
  }
}

TEST_CASE("bdf2+newmark advances a kicked box with interface continuity") {
  auto sys = tiny_box_system();
  VecX kick = VecX::Zero(sys->sp().n_s());
  for (int n = 0; n < sys->sp().disp.n_nodes(); ++n)
    kick[2 * n] = 0.2 * std::sin(M_PI * sys->sp().disp.node_coords[n].x());
  Bdf2State st = bdf2_initial_state(*sys, initial_state_stokes(*sys, kick));
  SolverSettings settings;
  for (int k = 0; k < 4; ++k) {
    StepResult r = bdf2_newmark_step(*sys, st, 0.05, NewmarkParams{}, settings);
    CHECK(r.diag.converged);
    CHECK(r.diag.kinematic_mismatch < 1e-12);
    CHECK(r.diag.newton_iters <= 10);
  }
  CHECK(st.now.u.norm() > 0.0);
}
