#include "fsi/coupled_solver.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>

namespace fsi {

std::unique_ptr<FsiSystem> build_system(Mesh mesh, const FluidParams& fluid,
                                        const SolidParams& solid, const PseudoParams& pseudo,
                                        DirichletData dirichlet) {
  auto sys = std::make_unique<FsiSystem>();
  sys->mesh = std::move(mesh);
  sys->spaces = build_spaces(sys->mesh);
  sys->fluid = std::make_unique<FluidAssembly>(sys->spaces, fluid);
  sys->solid = std::make_unique<SolidAssembly>(sys->spaces, solid);
  sys->ext_ale = build_extension(ExtensionKind::pseudo_elastic_fluid, sys->spaces, pseudo);
  sys->ext_hf = build_extension(ExtensionKind::harmonic_fluid, sys->spaces);
  sys->ext_hs = build_extension(ExtensionKind::harmonic_solid, sys->spaces);
  sys->mass_s = sys->solid->mass();
  sys->m_ref = sys->fluid->pressure_integrals(ale_reference(sys->spaces));
  const int nc = sys->spaces.n_c;
  sys->ale_cols.resize(sys->spaces.n_u(), nc);
  for (int k = 0; k < nc; ++k) {
    VecX e = VecX::Zero(nc);
    e[k] = 1.0;
    sys->ale_cols.col(k) = sys->ext_ale.extend_trace(e);
  }
  Vec2 lo = sys->mesh.nodes[0], hi = sys->mesh.nodes[0];
  for (const auto& n : sys->mesh.nodes) {
    lo = lo.cwiseMin(n);
    hi = hi.cwiseMax(n);
  }
  sys->diameter = (hi - lo).norm();
  if (dirichlet.fluid_profile.size() == 0) dirichlet.fluid_profile = VecX::Zero(sys->spaces.n_u());
  if (dirichlet.solid_values.size() == 0) dirichlet.solid_values = VecX::Zero(sys->spaces.n_s());
  sys->dirichlet = std::move(dirichlet);
  return sys;
}

HfState initial_state(const FsiSystem& sys) {
  HfState st;
  st.t = 0.0;
  st.u = VecX::Zero(sys.sp().n_u());
  st.p = VecX::Zero(sys.sp().n_p());
  st.d = VecX::Zero(sys.sp().n_s());
  st.v = VecX::Zero(sys.sp().n_s());
  st.mass_u = VecX::Zero(sys.sp().n_u());
  return st;
}

EnergySample energy_sample(const FsiSystem& sys, const HfState& state) {
  EnergySample e;
  e.kinetic_fluid = 0.5 * state.u.dot(state.mass_u);
  e.kinetic_solid = 0.5 * state.v.dot(sys.mass_s * state.v);
  e.elastic = sys.solid->energy(state.d);
  return e;
}

namespace {

// Index layout of the condensed unknowns for one time step.
struct Layout {
  const Spaces* sp;
  bool enclosed;
  int s;                       // stages
  int n_in, n_p, n_dir;        // fluid
  int ns_in, ns_dir;           // solid
  int dim_w, dim_d;            // per-stage local block sizes
  int nc;

  std::vector<int> w_col;      // velocity dof -> per-stage W column (-1 on interface)
  std::vector<int> mom_row;    // velocity dof -> per-stage interior momentum row
  std::vector<int> gpos_f;     // velocity dof -> trace slot
  std::vector<int> d_col;      // solid dof -> per-stage D column (-1 on interface)
  std::vector<int> smom_row;   // solid dof -> per-stage interior momentum row
  std::vector<int> gpos_s;     // solid dof -> trace slot

  explicit Layout(const Spaces& spaces, int stages)
      : sp(&spaces), enclosed(spaces.fluid_enclosed), s(stages) {
    const auto& vp = spaces.vel_part;
    const auto& dp = spaces.disp_part;
    nc = spaces.n_c;
    n_in = static_cast<int>(vp.interior.size());
    n_p = spaces.n_p();
    n_dir = static_cast<int>(vp.dirichlet.size());
    ns_in = static_cast<int>(dp.interior.size());
    ns_dir = static_cast<int>(dp.dirichlet.size());
    dim_w = n_in + n_p + n_dir + (enclosed ? 1 : 0);
    dim_d = ns_in + ns_dir;

    w_col.assign(spaces.n_u(), -1);
    mom_row.assign(spaces.n_u(), -1);
    gpos_f.assign(spaces.n_u(), -1);
    for (int i = 0; i < n_in; ++i) {
      w_col[vp.interior[i]] = i;
      mom_row[vp.interior[i]] = i;
    }
    for (int i = 0; i < n_dir; ++i) w_col[vp.dirichlet[i]] = n_in + n_p + i;
    for (int k = 0; k < nc; ++k) gpos_f[vp.iface[k]] = k;

    d_col.assign(spaces.n_s(), -1);
    smom_row.assign(spaces.n_s(), -1);
    gpos_s.assign(spaces.n_s(), -1);
    for (int i = 0; i < ns_in; ++i) {
      d_col[dp.interior[i]] = i;
      smom_row[dp.interior[i]] = i;
    }
    for (int i = 0; i < ns_dir; ++i) d_col[dp.dirichlet[i]] = ns_in + i;
    for (int k = 0; k < nc; ++k) gpos_s[dp.iface[k]] = k;
  }

  // Per-stage fluid local row layout: [mom_in | div | dir | norm].
  int frow_div(int m) const { return n_in + m; }
  int frow_dir(int i) const { return n_in + n_p + i; }
  int frow_norm() const { return n_in + n_p + n_dir; }
  int fcol_p(int m) const { return n_in + m; }
  int fcol_lambda() const { return n_in + n_p + n_dir; }
  int total_unknowns() const { return s * (nc + dim_w + dim_d); }
};

struct StageEval {
  double t = 0, cdir = 0, lambda = 0;
  VecX u, p, d, us, omega;  // full-space fields
  AleConfig cfg;
  FluidBlocks fb;           // R'_f, M u, B u at this configuration
  VecX rs_prime;            // R'_s(d)
};

struct Work {
  std::vector<StageEval> st;
  std::vector<VecX> rf_stage, rs_stage;  // fully discrete stage residuals
  VecX r_gamma, r_f, r_s;                // condensed residual blocks
  double norm = 0;
};

class Stepper {
public:
  Stepper(const FsiSystem& sys, const HfState& prev, const ButcherTableau& tab, double dt,
          const SolverSettings& settings)
      : sys_(sys),
        prev_(prev),
        tab_(tab),
        dt_(dt),
        set_(settings),
        lay_(sys.sp(), tab.s),
        g_prev_(gather(prev.d, sys.sp().disp_part.iface)) {}

  Work evaluate(const VecX& g, const VecX& w, const VecX& dl) const {
    const Spaces& sp = sys_.sp();
    const int s = lay_.s;
    Work work;
    work.st.resize(s);
    // Solid displacement stages first (the kinematic relation couples them).
    for (int i = 0; i < s; ++i) {
      StageEval& st = work.st[i];
      st.t = prev_.t + tab_.c[i] * dt_;
      st.cdir = sys_.dirichlet.c(st.t);
      st.d = VecX::Zero(sp.n_s());
      scatter(st.d, sp.disp_part.iface, g.segment(i * lay_.nc, lay_.nc));
      for (int k = 0; k < lay_.ns_in; ++k)
        st.d[sp.disp_part.interior[k]] = dl[i * lay_.dim_d + k];
      for (int k = 0; k < lay_.ns_dir; ++k)
        st.d[sp.disp_part.dirichlet[k]] = dl[i * lay_.dim_d + lay_.ns_in + k];
    }
    for (int i = 0; i < s; ++i) {
      StageEval& st = work.st[i];
      // Stage solid velocity via the inverse kinematic relation.
      st.us = (-tab_.A_inv_row_sum[i] / dt_) * prev_.d;
      for (int j = 0; j < s; ++j) st.us += (tab_.A_inv(i, j) / dt_) * work.st[j].d;

      st.u = VecX::Zero(sp.n_u());
      const VecX trace_us = gather(st.us, sp.disp_part.iface);
      scatter(st.u, sp.vel_part.iface, trace_us);
      for (int k = 0; k < lay_.n_in; ++k)
        st.u[sp.vel_part.interior[k]] = w[i * lay_.dim_w + k];
      for (int k = 0; k < lay_.n_dir; ++k)
        st.u[sp.vel_part.dirichlet[k]] = w[i * lay_.dim_w + lay_.n_in + lay_.n_p + k];
      st.p = w.segment(i * lay_.dim_w + lay_.n_in, lay_.n_p);
      st.lambda = lay_.enclosed ? w[i * lay_.dim_w + lay_.fcol_lambda()] : 0.0;

      // Mesh motion and mesh velocity from the interface trace.
      const VecX gi = g.segment(i * lay_.nc, lay_.nc);
      VecX dg = (-tab_.A_inv_row_sum[i] / dt_) * g_prev_;
      for (int j = 0; j < s; ++j) dg += (tab_.A_inv(i, j) / dt_) * g.segment(j * lay_.nc, lay_.nc);
      st.cfg = set_.frozen_geometry ? ale_reference(sp)
                                    : ale_from_field(sp, sys_.ale_cols * gi);
      st.omega = sys_.ale_cols * dg;

      st.fb = sys_.fluid->blocks(st.u, st.p, st.cfg, st.omega, st.t);
      st.rs_prime = sys_.solid->residual(st.d, st.t);
    }
    // Fully discrete stage residuals.
    work.rf_stage.resize(s);
    work.rs_stage.resize(s);
    for (int i = 0; i < s; ++i) {
      VecX rf = work.st[i].fb.mass_u - prev_.mass_u;
      VecX rs = sys_.mass_s * (work.st[i].us - prev_.v);
      for (int j = 0; j < s; ++j) {
        rf += dt_ * tab_.A(i, j) * work.st[j].fb.rprime;
        rs += dt_ * tab_.A(i, j) * work.st[j].rs_prime;
      }
      work.rf_stage[i] = std::move(rf);
      work.rs_stage[i] = std::move(rs);
    }
    // Condensed blocks.
    const Spaces& spc = sys_.sp();
    work.r_gamma.resize(s * lay_.nc);
    work.r_f.resize(s * lay_.dim_w);
    work.r_s.resize(s * lay_.dim_d);
    for (int i = 0; i < s; ++i) {
      work.r_gamma.segment(i * lay_.nc, lay_.nc) =
          gather(work.rf_stage[i], spc.vel_part.iface) +
          gather(work.rs_stage[i], spc.disp_part.iface);
      auto rf = work.r_f.segment(i * lay_.dim_w, lay_.dim_w);
      for (int k = 0; k < lay_.n_in; ++k) rf[k] = work.rf_stage[i][spc.vel_part.interior[k]];
      rf.segment(lay_.n_in, lay_.n_p) = work.st[i].fb.div_u;
      if (lay_.enclosed) {
        rf.segment(lay_.n_in, lay_.n_p) += work.st[i].lambda * sys_.m_ref;
        rf[lay_.frow_norm()] = sys_.m_ref.dot(work.st[i].p);
      }
      const double cd = work.st[i].cdir;
      for (int k = 0; k < lay_.n_dir; ++k) {
        const int dof = spc.vel_part.dirichlet[k];
        rf[lay_.frow_dir(k)] = work.st[i].u[dof] - cd * sys_.dirichlet.fluid_profile[dof];
      }
      auto rs = work.r_s.segment(i * lay_.dim_d, lay_.dim_d);
      for (int k = 0; k < lay_.ns_in; ++k) rs[k] = work.rs_stage[i][spc.disp_part.interior[k]];
      for (int k = 0; k < lay_.ns_dir; ++k) {
        const int dof = spc.disp_part.dirichlet[k];
        rs[lay_.ns_in + k] = work.st[i].d[dof] - sys_.dirichlet.solid_values[dof];
      }
    }
    work.norm = std::sqrt(work.r_gamma.squaredNorm() + work.r_f.squaredNorm() +
                          work.r_s.squaredNorm());
    return work;
  }

  // Assembled linearization around `work`.
  struct Lin {
    SpMat j_ff, j_ss;    // local blocks
    SpMat j_gf, j_gs;    // interface rows vs local columns
    MatX j_fg, j_sg;     // local rows vs control columns
    MatX j_gg;           // interface rows vs control columns
  };

  Lin linearize(const Work& work) const {
    const Spaces& sp = sys_.sp();
    const int s = lay_.s, nc = lay_.nc;
    Lin lin;
    std::vector<Triplet> tff, tss, tgf, tgs;
    lin.j_fg = MatX::Zero(s * lay_.dim_w, s * nc);
    lin.j_sg = MatX::Zero(s * lay_.dim_d, s * nc);
    lin.j_gg = MatX::Zero(s * nc, s * nc);

    // Per-stage assembled operators.
    std::vector<SpMat> dRdu(s), dRdp(s), dRdw(s), K(s), M(s), B(s);
    std::vector<MatX> wcols(s);  // dRdw * mesh-motion extension columns
    for (int j = 0; j < s; ++j) {
      sys_.fluid->jacobians(work.st[j].u, work.st[j].p, work.st[j].cfg, work.st[j].omega,
                            work.st[j].t, &dRdu[j], &dRdp[j], &dRdw[j]);
      K[j] = sys_.solid->stiffness(work.st[j].d);
      M[j] = sys_.fluid->mass(work.st[j].cfg);
      B[j] = sys_.fluid->divergence(work.st[j].cfg);
      wcols[j] = dRdw[j] * sys_.ale_cols;
    }

    // Fluid momentum rows: dRf^(i)/du^(j) = delta_ij M^(i) + dt a_ij dRdu^(j),
    // with interface columns redirected through the kinematic relation.
    auto add_fluid_ucols = [&](int i, int j, const SpMat& mat, double factor) {
      for (int col = 0; col < mat.outerSize(); ++col)
        for (SpMat::InnerIterator it(mat, col); it; ++it) {
          const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
          const double v = factor * it.value();
          const int rw = lay_.mom_row[r];
          const int rg = lay_.gpos_f[r];
          const int cw = lay_.w_col[c];
          if (cw >= 0) {
            if (rw >= 0) tff.emplace_back(i * lay_.dim_w + rw, j * lay_.dim_w + cw, v);
            if (rg >= 0) tgf.emplace_back(i * nc + rg, j * lay_.dim_w + cw, v);
          } else {
            const int cg = lay_.gpos_f[c];
            // u_Gamma^(j) = sum_l Ainv(j,l)/dt g_l - ... (control channel)
            for (int l = 0; l < s; ++l) {
              const double vv = v * tab_.A_inv(j, l) / dt_;
              if (rw >= 0) lin.j_fg(i * lay_.dim_w + rw, l * nc + cg) += vv;
              if (rg >= 0) lin.j_gg(i * nc + rg, l * nc + cg) += vv;
            }
          }
        }
    };
    auto add_fluid_pcols = [&](int i, int j, const SpMat& mat, double factor) {
      for (int col = 0; col < mat.outerSize(); ++col)
        for (SpMat::InnerIterator it(mat, col); it; ++it) {
          const int rw = lay_.mom_row[static_cast<int>(it.row())];
          const int rg = lay_.gpos_f[static_cast<int>(it.row())];
          const double v = factor * it.value();
          const int cw = lay_.fcol_p(static_cast<int>(it.col()));
          if (rw >= 0) tff.emplace_back(i * lay_.dim_w + rw, j * lay_.dim_w + cw, v);
          if (rg >= 0) tgf.emplace_back(i * nc + rg, j * lay_.dim_w + cw, v);
        }
    };

    for (int i = 0; i < s; ++i) {
      add_fluid_ucols(i, i, M[i], 1.0);
      for (int j = 0; j < s; ++j) {
        add_fluid_ucols(i, j, dRdu[j], dt_ * tab_.A(i, j));
        add_fluid_pcols(i, j, dRdp[j], dt_ * tab_.A(i, j));
        // Mesh-velocity channel: omega^(j) depends on every control stage.
        for (int l = 0; l < s; ++l) {
          const double f = dt_ * tab_.A(i, j) * tab_.A_inv(j, l) / dt_;
          for (int r = 0; r < sp.n_u(); ++r) {
            const int rw = lay_.mom_row[r];
            const int rg = lay_.gpos_f[r];
            if (rw < 0 && rg < 0) continue;
            for (int k = 0; k < nc; ++k) {
              const double v = f * wcols[j](r, k);
              if (rw >= 0) lin.j_fg(i * lay_.dim_w + rw, l * nc + k) += v;
              if (rg >= 0) lin.j_gg(i * nc + rg, l * nc + k) += v;
            }
          }
        }
      }
      // Divergence rows (stage-diagonal).
      for (int col = 0; col < B[i].outerSize(); ++col)
        for (SpMat::InnerIterator it(B[i], col); it; ++it) {
          const int rr = lay_.frow_div(static_cast<int>(it.row()));
          const int c = static_cast<int>(it.col());
          const int cw = lay_.w_col[c];
          if (cw >= 0) {
            tff.emplace_back(i * lay_.dim_w + rr, i * lay_.dim_w + cw, it.value());
          } else {
            const int cg = lay_.gpos_f[c];
            for (int l = 0; l < s; ++l)
              lin.j_fg(i * lay_.dim_w + rr, l * nc + cg) += it.value() * tab_.A_inv(i, l) / dt_;
          }
        }
      if (lay_.enclosed) {
        for (int m = 0; m < lay_.n_p; ++m) {
          tff.emplace_back(i * lay_.dim_w + lay_.frow_div(m), i * lay_.dim_w + lay_.fcol_lambda(),
                           sys_.m_ref[m]);
          tff.emplace_back(i * lay_.dim_w + lay_.frow_norm(), i * lay_.dim_w + lay_.fcol_p(m),
                           sys_.m_ref[m]);
        }
      }
      for (int k = 0; k < lay_.n_dir; ++k)
        tff.emplace_back(i * lay_.dim_w + lay_.frow_dir(k),
                         i * lay_.dim_w + lay_.n_in + lay_.n_p + k, 1.0);

      // Solid rows: dRs^(i)/dd^(j) = Ainv(i,j)/dt M_s + dt a_ij K^(j).
      for (int j = 0; j < s; ++j) {
        auto add_solid = [&](const SpMat& mat, double factor) {
          for (int col = 0; col < mat.outerSize(); ++col)
            for (SpMat::InnerIterator it(mat, col); it; ++it) {
              const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
              const double v = factor * it.value();
              const int rw = lay_.smom_row[r];
              const int rg = lay_.gpos_s[r];
              if (rw < 0 && rg < 0) continue;
              const int cd = lay_.d_col[c];
              if (cd >= 0) {
                if (rw >= 0) tss.emplace_back(i * lay_.dim_d + rw, j * lay_.dim_d + cd, v);
                if (rg >= 0) tgs.emplace_back(i * nc + rg, j * lay_.dim_d + cd, v);
              } else {
                const int cg = lay_.gpos_s[c];
                if (rw >= 0) lin.j_sg(i * lay_.dim_d + rw, j * nc + cg) += v;
                if (rg >= 0) lin.j_gg(i * nc + rg, j * nc + cg) += v;
              }
            }
        };
        add_solid(sys_.mass_s, tab_.A_inv(i, j) / dt_);
        add_solid(K[j], dt_ * tab_.A(i, j));
      }
      for (int k = 0; k < lay_.ns_dir; ++k)
        tss.emplace_back(i * lay_.dim_d + lay_.ns_in + k, i * lay_.dim_d + lay_.ns_in + k, 1.0);
    }

    // Shape channel: forward differences on the ALE map, one trace direction
    // and one stage at a time.
    if (!set_.frozen_geometry) {
      const double eps = set_.fd_step_scale * sys_.diameter;
      for (int j = 0; j < s; ++j) {
        const VecX base_d = work.st[j].cfg.d_tilde;
        for (int k = 0; k < nc; ++k) {
          const AleConfig pert =
              ale_from_field_unchecked(sp, base_d + eps * sys_.ale_cols.col(k));
          const FluidBlocks fbp = sys_.fluid->blocks(work.st[j].u, work.st[j].p, pert,
                                                     work.st[j].omega, work.st[j].t);
          const VecX dRp = (fbp.rprime - work.st[j].fb.rprime) / eps;
          const VecX dMu = (fbp.mass_u - work.st[j].fb.mass_u) / eps;
          const VecX dBu = (fbp.div_u - work.st[j].fb.div_u) / eps;
          for (int i = 0; i < s; ++i) {
            const double f = dt_ * tab_.A(i, j);
            for (int r = 0; r < sp.n_u(); ++r) {
              const double v = f * dRp[r] + (i == j ? dMu[r] : 0.0);
              if (v == 0.0) continue;
              const int rw = lay_.mom_row[r];
              const int rg = lay_.gpos_f[r];
              if (rw >= 0) lin.j_fg(i * lay_.dim_w + rw, j * nc + k) += v;
              if (rg >= 0) lin.j_gg(i * nc + rg, j * nc + k) += v;
            }
          }
          for (int m = 0; m < lay_.n_p; ++m)
            lin.j_fg(j * lay_.dim_w + lay_.frow_div(m), j * nc + k) += dBu[m];
        }
      }
    }

    lin.j_ff.resize(s * lay_.dim_w, s * lay_.dim_w);
    lin.j_ff.setFromTriplets(tff.begin(), tff.end());
    lin.j_ss.resize(s * lay_.dim_d, s * lay_.dim_d);
    lin.j_ss.setFromTriplets(tss.begin(), tss.end());
    lin.j_gf.resize(s * nc, s * lay_.dim_w);
    lin.j_gf.setFromTriplets(tgf.begin(), tgf.end());
    lin.j_gs.resize(s * nc, s * lay_.dim_d);
    lin.j_gs.setFromTriplets(tgs.begin(), tgs.end());
    return lin;
  }

  struct Delta {
    VecX g, w, d;
  };

  // Static condensation of the interface control (Schur path).
  Delta solve_condensed(const Work& work, const Lin& lin) const {
    Eigen::SparseLU<SpMat> lu_f, lu_s;
    lu_f.compute(lin.j_ff);
    require(lu_f.info() == Eigen::Success, Error::Kind::solver,
            "singular fluid local Jacobian");
    lu_s.compute(lin.j_ss);
    require(lu_s.info() == Eigen::Success, Error::Kind::solver,
            "singular solid local Jacobian");
    const VecX w_star = lu_f.solve(-work.r_f);
    const VecX d_star = lu_s.solve(-work.r_s);
    const MatX g_to_f = lu_f.solve(-lin.j_fg);
    const MatX g_to_s = lu_s.solve(-lin.j_sg);
    const MatX schur = lin.j_gg - lin.j_gf * (-g_to_f) - lin.j_gs * (-g_to_s);
    const VecX rhs = -work.r_gamma - lin.j_gf * w_star - lin.j_gs * d_star;
    Eigen::PartialPivLU<MatX> lu_sc(schur);
    const VecX dg = lu_sc.solve(rhs);
    require(std::isfinite(dg.lpNorm<Eigen::Infinity>()), Error::Kind::solver,
            "singular interface Schur complement");
    Delta delta;
    delta.g = dg;
    delta.w = w_star + g_to_f * dg;
    delta.d = d_star + g_to_s * dg;
    return delta;
  }

  // Same linearization as one dense solve.
  Delta solve_monolithic(const Work& work, const Lin& lin) const {
    const int nw = static_cast<int>(work.r_f.size());
    const int nd = static_cast<int>(work.r_s.size());
    const int ng = static_cast<int>(work.r_gamma.size());
    MatX j = MatX::Zero(nw + nd + ng, nw + nd + ng);
    j.block(0, 0, nw, nw) = MatX(lin.j_ff);
    j.block(0, nw + nd, nw, ng) = lin.j_fg;
    j.block(nw, nw, nd, nd) = MatX(lin.j_ss);
    j.block(nw, nw + nd, nd, ng) = lin.j_sg;
    j.block(nw + nd, 0, ng, nw) = MatX(lin.j_gf);
    j.block(nw + nd, nw, ng, nd) = MatX(lin.j_gs);
    j.block(nw + nd, nw + nd, ng, ng) = lin.j_gg;
    VecX r(nw + nd + ng);
    r << work.r_f, work.r_s, work.r_gamma;
    const VecX dx = j.partialPivLu().solve(-r);
    Delta delta;
    delta.w = dx.head(nw);
    delta.d = dx.segment(nw, nd);
    delta.g = dx.tail(ng);
    return delta;
  }

  StepResult run(bool monolithic) {
    const Spaces& sp = sys_.sp();
    const int s = lay_.s, nc = lay_.nc;
    // Warm start: previous accepted state replicated across stages.
    VecX g(s * nc), w(s * lay_.dim_w), dl(s * lay_.dim_d);
    for (int i = 0; i < s; ++i) {
      g.segment(i * nc, nc) = g_prev_;
      auto wi = w.segment(i * lay_.dim_w, lay_.dim_w);
      for (int k = 0; k < lay_.n_in; ++k) wi[k] = prev_.u[sp.vel_part.interior[k]];
      wi.segment(lay_.n_in, lay_.n_p) = prev_.p;
      for (int k = 0; k < lay_.n_dir; ++k)
        wi[lay_.n_in + lay_.n_p + k] = prev_.u[sp.vel_part.dirichlet[k]];
      if (lay_.enclosed) wi[lay_.fcol_lambda()] = 0.0;
      auto di = dl.segment(i * lay_.dim_d, lay_.dim_d);
      for (int k = 0; k < lay_.ns_in; ++k) di[k] = prev_.d[sp.disp_part.interior[k]];
      for (int k = 0; k < lay_.ns_dir; ++k) di[lay_.ns_in + k] = prev_.d[sp.disp_part.dirichlet[k]];
    }

    StepResult out;
    Work work = evaluate(g, w, dl);
    const double tol_abs = set_.abs_tol_scale * std::sqrt(double(lay_.total_unknowns()));
    const double tol_rel = set_.rel_tol * std::max(work.norm, 1e-30);
    out.diag.residual_norms.push_back(work.norm);

    for (int it = 0; it < set_.max_iters; ++it) {
      if (work.norm < tol_abs || work.norm < tol_rel) {
        out.diag.converged = true;
        break;
      }
      const Lin lin = linearize(work);
      const Delta delta = monolithic ? solve_monolithic(work, lin) : solve_condensed(work, lin);
      double alpha = 1.0;
      for (int ls = 0;; ++ls) {
        try {
          Work trial = evaluate(g + alpha * delta.g, w + alpha * delta.w, dl + alpha * delta.d);
          if (!set_.line_search || trial.norm <= work.norm || ls >= 6) {
            g += alpha * delta.g;
            w += alpha * delta.w;
            dl += alpha * delta.d;
            work = std::move(trial);
            break;
          }
        } catch (const Error&) {
          if (ls >= 6) throw;
        }
        alpha *= 0.5;
      }
      out.diag.newton_iters = it + 1;
      out.diag.residual_norms.push_back(work.norm);
      if (set_.verbosity > 1)
        std::printf("    newton it=%d |r|=%.3e\n", it + 1, work.norm);
    }
    if (!out.diag.converged && work.norm < tol_abs) out.diag.converged = true;
    if (!out.diag.converged) {
      std::string hist;
      for (double r : out.diag.residual_norms) hist += " " + std::to_string(r);
      fail(Error::Kind::solver,
           "Newton did not converge in " + std::to_string(set_.max_iters) +
               " iterations (residual history:" + hist + ")");
    }

    // Stiffly accurate: the last stage is the accepted state.
    const StageEval& last = work.st[s - 1];
    out.state.t = prev_.t + dt_;
    out.state.u = last.u;
    out.state.p = last.p;
    out.state.d = last.d;
    out.state.v = last.us;
    out.state.mass_u = last.fb.mass_u;

    for (int i = 0; i < s; ++i) {
      const VecX tf = gather(work.st[i].u, sp.vel_part.iface);
      const VecX ts = gather(work.st[i].us, sp.disp_part.iface);
      out.diag.kinematic_mismatch =
          std::max(out.diag.kinematic_mismatch, (tf - ts).lpNorm<Eigen::Infinity>());
      out.dissipation_integral +=
          dt_ * tab_.b[i] * sys_.fluid->dissipation(work.st[i].u, work.st[i].cfg);
    }
    // Instantaneous momentum residual at the accepted time (collocation
    // derivative of the momentum products plus the spatial residual).
    VecX dmu = (-tab_.A_inv_row_sum[s - 1] / dt_) * prev_.mass_u;
    for (int j = 0; j < s; ++j) dmu += (tab_.A_inv(s - 1, j) / dt_) * work.st[j].fb.mass_u;
    out.inst_residual_f = dmu + last.fb.rprime;

    if (set_.record_stages) {
      for (int i = 0; i < s; ++i) {
        StageSnapshot snap;
        snap.t = work.st[i].t;
        snap.c_dir = work.st[i].cdir;
        snap.u = work.st[i].u;
        snap.p = work.st[i].p;
        snap.d = work.st[i].d;
        out.stages.push_back(std::move(snap));
      }
    }
    return out;
  }

private:
  const FsiSystem& sys_;
  const HfState& prev_;
  const ButcherTableau& tab_;
  double dt_;
  SolverSettings set_;
  Layout lay_;
  VecX g_prev_;
};

}  // namespace

StepResult advance_step(const FsiSystem& sys, const HfState& state, const ButcherTableau& tab,
                        double dt, const SolverSettings& settings) {
  Stepper stepper(sys, state, tab, dt, settings);
  return stepper.run(false);
}

StepResult monolithic_oracle_step(const FsiSystem& sys, const HfState& state,
                                  const ButcherTableau& tab, double dt,
                                  const SolverSettings& settings, int max_unknowns) {
  Layout lay(sys.sp(), tab.s);
  require(lay.total_unknowns() <= max_unknowns, Error::Kind::config,
          "monolithic oracle guard: " + std::to_string(lay.total_unknowns()) +
              " unknowns exceed " + std::to_string(max_unknowns));
  Stepper stepper(sys, state, tab, dt, settings);
  return stepper.run(true);
}

StepResult advance_step_held(const FsiSystem& sys, const HfState& state,
                             const ButcherTableau& tab, double dt,
                             const SolverSettings& settings) {
  // Interface frozen at the reference position: the solid is skipped and the
  // trace is an extra homogeneous Dirichlet condition on the fluid.
  const Spaces& sp = sys.sp();
  const int s = tab.s;
  const int n_in = static_cast<int>(sp.vel_part.interior.size());
  const int n_dir = static_cast<int>(sp.vel_part.dirichlet.size());
  const int n_p = sp.n_p();
  const bool enclosed = sp.fluid_enclosed;
  const int dim_w = n_in + n_p + n_dir + (enclosed ? 1 : 0);

  std::vector<int> w_col(sp.n_u(), -1), mom_row(sp.n_u(), -1);
  for (int i = 0; i < n_in; ++i) {
    w_col[sp.vel_part.interior[i]] = i;
    mom_row[sp.vel_part.interior[i]] = i;
  }
  for (int i = 0; i < n_dir; ++i) w_col[sp.vel_part.dirichlet[i]] = n_in + n_p + i;

  const AleConfig cfg = ale_reference(sp);
  const VecX omega = VecX::Zero(sp.n_u());
  const SpMat mass = sys.fluid->mass(cfg);
  const SpMat bdiv = sys.fluid->divergence(cfg);

  VecX w(s * dim_w);
  for (int i = 0; i < s; ++i) {
    auto wi = w.segment(i * dim_w, dim_w);
    for (int k = 0; k < n_in; ++k) wi[k] = state.u[sp.vel_part.interior[k]];
    wi.segment(n_in, n_p) = state.p;
    for (int k = 0; k < n_dir; ++k) wi[n_in + n_p + k] = state.u[sp.vel_part.dirichlet[k]];
    if (enclosed) wi[dim_w - 1] = 0;
  }

  auto fields = [&](const VecX& wv, int i, VecX& u, VecX& p, double& lambda) {
    u = VecX::Zero(sp.n_u());
    for (int k = 0; k < n_in; ++k) u[sp.vel_part.interior[k]] = wv[i * dim_w + k];
    for (int k = 0; k < n_dir; ++k) u[sp.vel_part.dirichlet[k]] = wv[i * dim_w + n_in + n_p + k];
    p = wv.segment(i * dim_w + n_in, n_p);
    lambda = enclosed ? wv[i * dim_w + dim_w - 1] : 0.0;
  };

  std::vector<FluidBlocks> fb(s);
  std::vector<VecX> u(s), p(s);
  std::vector<double> lambda(s), tstage(s);
  auto evaluate = [&](const VecX& wv) {
    VecX r(s * dim_w);
    for (int i = 0; i < s; ++i) {
      fields(wv, i, u[i], p[i], lambda[i]);
      tstage[i] = state.t + tab.c[i] * dt;
      fb[i] = sys.fluid->blocks(u[i], p[i], cfg, omega, tstage[i]);
    }
    for (int i = 0; i < s; ++i) {
      VecX rf = fb[i].mass_u - state.mass_u;
      for (int j = 0; j < s; ++j) rf += dt * tab.A(i, j) * fb[j].rprime;
      auto ri = r.segment(i * dim_w, dim_w);
      for (int k = 0; k < n_in; ++k) ri[k] = rf[sp.vel_part.interior[k]];
      ri.segment(n_in, n_p) = fb[i].div_u;
      if (enclosed) {
        ri.segment(n_in, n_p) += lambda[i] * sys.m_ref;
        ri[dim_w - 1] = sys.m_ref.dot(p[i]);
      }
      const double cd = sys.dirichlet.c(tstage[i]);
      for (int k = 0; k < n_dir; ++k) {
        const int dof = sp.vel_part.dirichlet[k];
        ri[n_in + n_p + k] = u[i][dof] - cd * sys.dirichlet.fluid_profile[dof];
      }
    }
    return r;
  };

  StepResult out;
  VecX r = evaluate(w);
  const double tol = settings.abs_tol_scale * std::sqrt(double(s * dim_w));
  const double tol_rel = settings.rel_tol * std::max(r.norm(), 1e-30);
  out.diag.residual_norms.push_back(r.norm());
  for (int it = 0; it < settings.max_iters; ++it) {
    if (r.norm() < tol || r.norm() < tol_rel) {
      out.diag.converged = true;
      break;
    }
    std::vector<Triplet> trip;
    for (int j = 0; j < s; ++j) {
      SpMat dRdu, dRdp;
      sys.fluid->jacobians(u[j], p[j], cfg, omega, tstage[j], &dRdu, &dRdp, nullptr);
      for (int i = 0; i < s; ++i) {
        const double f = dt * tab.A(i, j);
        for (int col = 0; col < dRdu.outerSize(); ++col)
          for (SpMat::InnerIterator itr(dRdu, col); itr; ++itr) {
            const int rw = mom_row[itr.row()];
            const int cw = w_col[itr.col()];
            if (rw >= 0 && cw >= 0)
              trip.emplace_back(i * dim_w + rw, j * dim_w + cw, f * itr.value());
          }
        for (int col = 0; col < dRdp.outerSize(); ++col)
          for (SpMat::InnerIterator itr(dRdp, col); itr; ++itr) {
            const int rw = mom_row[itr.row()];
            if (rw >= 0)
              trip.emplace_back(i * dim_w + rw, j * dim_w + n_in + itr.col(), f * itr.value());
          }
      }
    }
    for (int i = 0; i < s; ++i) {
      for (int col = 0; col < mass.outerSize(); ++col)
        for (SpMat::InnerIterator itr(mass, col); itr; ++itr) {
          const int rw = mom_row[itr.row()];
          const int cw = w_col[itr.col()];
          if (rw >= 0 && cw >= 0) trip.emplace_back(i * dim_w + rw, i * dim_w + cw, itr.value());
        }
      for (int col = 0; col < bdiv.outerSize(); ++col)
        for (SpMat::InnerIterator itr(bdiv, col); itr; ++itr) {
          const int cw = w_col[itr.col()];
          if (cw >= 0) trip.emplace_back(i * dim_w + n_in + itr.row(), i * dim_w + cw, itr.value());
        }
      if (enclosed)
        for (int m = 0; m < n_p; ++m) {
          trip.emplace_back(i * dim_w + n_in + m, i * dim_w + dim_w - 1, sys.m_ref[m]);
          trip.emplace_back(i * dim_w + dim_w - 1, i * dim_w + n_in + m, sys.m_ref[m]);
        }
      for (int k = 0; k < n_dir; ++k)
        trip.emplace_back(i * dim_w + n_in + n_p + k, i * dim_w + n_in + n_p + k, 1.0);
    }
    SpMat j(s * dim_w, s * dim_w);
    j.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(j);
    require(lu.info() == Eigen::Success, Error::Kind::solver,
            "singular fluid Jacobian in held step");
    w -= lu.solve(r);
    r = evaluate(w);
    out.diag.newton_iters = it + 1;
    out.diag.residual_norms.push_back(r.norm());
  }
  require(out.diag.converged, Error::Kind::solver, "held-step Newton did not converge");

  out.state = state;
  out.state.t = state.t + dt;
  out.state.u = u[s - 1];
  out.state.p = p[s - 1];
  out.state.mass_u = fb[s - 1].mass_u;
  for (int i = 0; i < s; ++i)
    out.dissipation_integral += dt * tab.b[i] * sys.fluid->dissipation(u[i], cfg);
  VecX dmu = (-tab.A_inv_row_sum[s - 1] / dt) * state.mass_u;
  for (int j = 0; j < s; ++j) dmu += (tab.A_inv(s - 1, j) / dt) * fb[j].mass_u;
  out.inst_residual_f = dmu + fb[s - 1].rprime;
  if (settings.record_stages) {
    for (int i = 0; i < s; ++i) {
      StageSnapshot snap;
      snap.t = tstage[i];
      snap.c_dir = sys.dirichlet.c(tstage[i]);
      snap.u = u[i];
      snap.p = p[i];
      snap.d = state.d;
      out.stages.push_back(std::move(snap));
    }
  }
  return out;
}

HfState initial_state_stokes(const FsiSystem& sys, const VecX& solid_velocity) {
  // Steady solve at t = 0 with the interface trace matching the given solid
  // velocity; gives divergence-consistent initial data.
  const Spaces& sp = sys.sp();
  const int n_in = static_cast<int>(sp.vel_part.interior.size());
  const int n_p = sp.n_p();
  const bool enclosed = sp.fluid_enclosed;
  const int n = n_in + n_p + (enclosed ? 1 : 0);

  HfState st = initial_state(sys);
  st.v = solid_velocity;
  const double cd = sys.dirichlet.c(0.0);
  VecX u = VecX::Zero(sp.n_u());
  scatter(u, sp.vel_part.iface, gather(solid_velocity, sp.disp_part.iface));
  for (int dof : sp.vel_part.dirichlet) u[dof] = cd * sys.dirichlet.fluid_profile[dof];
  VecX p = VecX::Zero(n_p);
  const AleConfig cfg = ale_reference(sp);
  const VecX omega = VecX::Zero(sp.n_u());

  std::vector<int> col_of(sp.n_u(), -1);
  for (int i = 0; i < n_in; ++i) col_of[sp.vel_part.interior[i]] = i;

  double lambda = 0.0;
  for (int it = 0; it < 25; ++it) {
    const FluidBlocks fb = sys.fluid->blocks(u, p, cfg, omega, 0.0);
    VecX r(n);
    for (int k = 0; k < n_in; ++k) r[k] = fb.rprime[sp.vel_part.interior[k]];
    r.segment(n_in, n_p) = fb.div_u;
    if (enclosed) {
      r.segment(n_in, n_p) += lambda * sys.m_ref;
      r[n - 1] = sys.m_ref.dot(p);
    }
    if (r.norm() < 1e-11 * std::sqrt(double(n)) + 1e-14) break;
    SpMat dRdu, dRdp;
    sys.fluid->jacobians(u, p, cfg, omega, 0.0, &dRdu, &dRdp, nullptr);
    const SpMat bdiv = sys.fluid->divergence(cfg);
    std::vector<Triplet> trip;
    for (int c = 0; c < dRdu.outerSize(); ++c)
      for (SpMat::InnerIterator itr(dRdu, c); itr; ++itr) {
        const int rw = col_of[itr.row()], cw = col_of[itr.col()];
        if (rw >= 0 && cw >= 0) trip.emplace_back(rw, cw, itr.value());
      }
    for (int c = 0; c < dRdp.outerSize(); ++c)
      for (SpMat::InnerIterator itr(dRdp, c); itr; ++itr) {
        const int rw = col_of[itr.row()];
        if (rw >= 0) trip.emplace_back(rw, n_in + itr.col(), itr.value());
      }
    for (int c = 0; c < bdiv.outerSize(); ++c)
      for (SpMat::InnerIterator itr(bdiv, c); itr; ++itr) {
        const int cw = col_of[itr.col()];
        if (cw >= 0) trip.emplace_back(n_in + itr.row(), cw, itr.value());
      }
    if (enclosed)
      for (int m = 0; m < n_p; ++m) {
        trip.emplace_back(n_in + m, n - 1, sys.m_ref[m]);
        trip.emplace_back(n - 1, n_in + m, sys.m_ref[m]);
      }
    SpMat j(n, n);
    j.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<SpMat> lu;
    lu.compute(j);
    require(lu.info() == Eigen::Success, Error::Kind::solver,
            "singular Jacobian in the initial steady solve");
    const VecX dx = lu.solve(-r);
    for (int k = 0; k < n_in; ++k) u[sp.vel_part.interior[k]] += dx[k];
    p += dx.segment(n_in, n_p);
    if (enclosed) lambda += dx[n - 1];
  }
  st.u = u;
  st.p = p;
  st.mass_u = sys.fluid->mass_times(cfg, u);
  return st;
}

}  // namespace fsi
