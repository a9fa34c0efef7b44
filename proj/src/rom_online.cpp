#include "fsi/rom_online.hpp"

#include <cmath>

namespace fsi {

RomSystem build_rom_system(const FsiSystem& hf, ReducedBasis basis) {
  require(basis.mesh_hash == hf.mesh.hash(), Error::Kind::data,
          "reduced basis was built for a different mesh");
  RomSystem rom;
  rom.hf = &hf;
  rom.basis = std::move(basis);
  rom.enclosed = hf.enclosed();
  rom.ale_port_cols.resize(hf.sp().n_u(), rom.basis.m);
  for (int j = 0; j < rom.basis.m; ++j)
    rom.ale_port_cols.col(j) = hf.ext_ale.extend_trace(rom.basis.psi.col(j));
  return rom;
}

RomState rom_initial_state(const RomSystem& rom, const HfState& hf_state) {
  const FsiSystem& sys = *rom.hf;
  const Spaces& sp = sys.sp();
  const ReducedBasis& b = rom.basis;
  const InnerProduct g_iface = assemble_inner_product(InnerProductKind::L2_interface, sp);
  const InnerProduct g_h1f = assemble_inner_product(InnerProductKind::H1_fluid, sp);
  const InnerProduct g_h1s = assemble_inner_product(InnerProductKind::H1_solid, sp);
  const InnerProduct g_l2p = assemble_inner_product(InnerProductKind::L2_pressure, sp);

  RomState st;
  st.t = hf_state.t;
  st.beta = b.psi.transpose() * (g_iface.gram * gather(hf_state.d, sp.disp_part.iface));
  st.alpha_s = b.z_s.transpose() * (g_h1s.gram * (hf_state.d - b.ext_s * st.beta));
  st.alpha_p = b.z_p.transpose() * (g_l2p.gram * hf_state.p);
  const VecX beta_dot =
      b.psi.transpose() * (g_iface.gram * gather(hf_state.u, sp.vel_part.iface));
  const double cd = sys.dirichlet.c(hf_state.t);
  st.alpha_f = b.z_f.transpose() *
               (g_h1f.gram * (hf_state.u - cd * b.lift_dir - b.ext_f * beta_dot));

  st.d_prev = b.z_s * st.alpha_s + b.ext_s * st.beta;
  const VecX vbeta = b.psi.transpose() * (g_iface.gram * gather(hf_state.v, sp.disp_part.iface));
  st.v_prev = b.ext_s * vbeta +
              b.z_s * (b.z_s.transpose() * (g_h1s.gram * (hf_state.v - b.ext_s * vbeta)));
  const VecX u0 = cd * b.lift_dir + b.z_f * st.alpha_f + b.ext_f * beta_dot;
  const AleConfig cfg = ale_from_field(sp, rom.ale_port_cols * st.beta);
  st.mass_u_prev = sys.fluid->mass_times(cfg, u0);
  return st;
}

namespace {

struct RomLayout {
  int s, m, nu, np, ns;
  bool enclosed;
  int dim_f;  // per-stage fluid-local block: nu + np (+1 border)

  RomLayout(const RomSystem& rom, int stages)
      : s(stages), m(rom.m()), nu(rom.nu()), np(rom.np()), ns(rom.ns()),
        enclosed(rom.enclosed), dim_f(nu + np + (rom.enclosed ? 1 : 0)) {}
};

struct RomStage {
  double t = 0, cdir = 0, lambda = 0;
  VecX beta, alpha_f, alpha_p, alpha_s;  // per-stage coordinates
  VecX beta_dot;                         // (D beta)_i
  VecX u, p, d, us, omega;               // reconstructed fields
  AleConfig cfg;
  FluidBlocks fb;
  VecX rs_prime;
};

struct RomWork {
  std::vector<RomStage> st;
  std::vector<VecX> rf_stage, rs_stage;
  VecX r_port, r_fluid;  // r_fluid stacks [bubble; divergence(+border)] per stage
  VecX r_solid;
  double norm = 0;
};

class RomStepper {
public:
  RomStepper(const RomSystem& rom, const RomState& prev, const ButcherTableau& tab, double dt,
             const SolverSettings& settings)
      : rom_(rom), sys_(*rom.hf), prev_(prev), tab_(tab), dt_(dt), set_(settings),
        lay_(rom, tab.s) {}

  RomWork evaluate(const VecX& beta, const VecX& af, const VecX& ap, const VecX& as,
                   const VecX& lambda) const {
    const Spaces& sp = sys_.sp();
    const ReducedBasis& b = rom_.basis;
    const int s = lay_.s;
    RomWork work;
    work.st.resize(s);
    for (int i = 0; i < s; ++i) {
      RomStage& st = work.st[i];
      st.t = prev_.t + tab_.c[i] * dt_;
      st.cdir = sys_.dirichlet.c(st.t);
      st.beta = beta.segment(i * lay_.m, lay_.m);
      st.alpha_f = af.segment(i * lay_.nu, lay_.nu);
      st.alpha_p = ap.segment(i * lay_.np, lay_.np);
      st.alpha_s = as.segment(i * lay_.ns, lay_.ns);
      st.lambda = lay_.enclosed ? lambda[i] : 0.0;
      st.beta_dot = (-tab_.A_inv_row_sum[i] / dt_) * prev_.beta;
      for (int j = 0; j < s; ++j)
        st.beta_dot += (tab_.A_inv(i, j) / dt_) * beta.segment(j * lay_.m, lay_.m);
      st.d = b.z_s * st.alpha_s + b.ext_s * st.beta;
      st.u = st.cdir * b.lift_dir + b.z_f * st.alpha_f + b.ext_f * st.beta_dot;
      st.p = b.z_p * st.alpha_p;
      st.cfg = ale_from_field(sp, rom_.ale_port_cols * st.beta);
      st.omega = rom_.ale_port_cols * st.beta_dot;
    }
    for (int i = 0; i < s; ++i) {
      RomStage& st = work.st[i];
      st.us = (-tab_.A_inv_row_sum[i] / dt_) * prev_.d_prev;
      for (int j = 0; j < s; ++j) st.us += (tab_.A_inv(i, j) / dt_) * work.st[j].d;
      st.fb = sys_.fluid->blocks(st.u, st.p, st.cfg, st.omega, st.t);
      st.rs_prime = sys_.solid->residual(st.d, st.t);
    }
    work.rf_stage.resize(s);
    work.rs_stage.resize(s);
    for (int i = 0; i < s; ++i) {
      VecX rf = work.st[i].fb.mass_u - prev_.mass_u_prev;
      VecX rs = sys_.mass_s * (work.st[i].us - prev_.v_prev);
      for (int j = 0; j < s; ++j) {
        rf += dt_ * tab_.A(i, j) * work.st[j].fb.rprime;
        rs += dt_ * tab_.A(i, j) * work.st[j].rs_prime;
      }
      work.rf_stage[i] = std::move(rf);
      work.rs_stage[i] = std::move(rs);
    }
    work.r_port.resize(s * lay_.m);
    work.r_fluid.resize(s * lay_.dim_f);
    work.r_solid.resize(s * lay_.ns);
    for (int i = 0; i < s; ++i) {
      work.r_port.segment(i * lay_.m, lay_.m) =
          b.ext_s.transpose() * work.rs_stage[i] + b.ext_f.transpose() * work.rf_stage[i];
      auto rf = work.r_fluid.segment(i * lay_.dim_f, lay_.dim_f);
      rf.head(lay_.nu) = b.z_f.transpose() * work.rf_stage[i];
      rf.segment(lay_.nu, lay_.np) = b.z_p.transpose() * work.st[i].fb.div_u;
      if (lay_.enclosed) {
        rf.segment(lay_.nu, lay_.np) +=
            work.st[i].lambda * (b.z_p.transpose() * sys_.m_ref);
        rf[lay_.dim_f - 1] = sys_.m_ref.dot(work.st[i].p);
      }
      work.r_solid.segment(i * lay_.ns, lay_.ns) = b.z_s.transpose() * work.rs_stage[i];
    }
    work.norm = std::sqrt(work.r_port.squaredNorm() + work.r_fluid.squaredNorm() +
                          work.r_solid.squaredNorm());
    return work;
  }

  struct Lin {
    MatX j_ff, j_ss, j_fg, j_sg, j_gf, j_gs, j_gg;
  };

  Lin linearize(const RomWork& work) const {
    const Spaces& sp = sys_.sp();
    const ReducedBasis& b = rom_.basis;
    const int s = lay_.s;
    Lin lin;
    lin.j_ff = MatX::Zero(s * lay_.dim_f, s * lay_.dim_f);
    lin.j_ss = MatX::Zero(s * lay_.ns, s * lay_.ns);
    lin.j_fg = MatX::Zero(s * lay_.dim_f, s * lay_.m);
    lin.j_sg = MatX::Zero(s * lay_.ns, s * lay_.m);
    lin.j_gf = MatX::Zero(s * lay_.m, s * lay_.dim_f);
    lin.j_gs = MatX::Zero(s * lay_.m, s * lay_.ns);
    lin.j_gg = MatX::Zero(s * lay_.m, s * lay_.m);

    const MatX ms_zs = sys_.mass_s * b.z_s;
    const MatX ms_es = sys_.mass_s * b.ext_s;
    for (int j = 0; j < s; ++j) {
      SpMat dRdu, dRdp, dRdw;
      sys_.fluid->jacobians(work.st[j].u, work.st[j].p, work.st[j].cfg, work.st[j].omega,
                            work.st[j].t, &dRdu, &dRdp, &dRdw);
      const SpMat mass = sys_.fluid->mass(work.st[j].cfg);
      const SpMat bdiv = sys_.fluid->divergence(work.st[j].cfg);
      const SpMat kst = sys_.solid->stiffness(work.st[j].d);

      const MatX dRdu_zf = dRdu * b.z_f;             // velocity bubble columns
      const MatX dRdu_ef = dRdu * b.ext_f;           // port velocity columns
      const MatX dRdp_zp = dRdp * b.z_p;
      const MatX dRdw_cols = dRdw * rom_.ale_port_cols;
      const MatX mass_zf = mass * b.z_f;
      const MatX mass_ef = mass * b.ext_f;
      const MatX k_zs = kst * b.z_s;
      const MatX k_es = kst * b.ext_s;
      const MatX bdiv_zf = bdiv * b.z_f;
      const MatX bdiv_ef = bdiv * b.ext_f;

      for (int i = 0; i < s; ++i) {
        const double aij = dt_ * tab_.A(i, j);
        // Fluid momentum wrt alpha_f / alpha_p.
        MatX mom_f = aij * dRdu_zf;
        if (i == j) mom_f += mass_zf;
        const MatX mom_p = aij * dRdp_zp;
        lin.j_ff.block(i * lay_.dim_f, j * lay_.dim_f, lay_.nu, lay_.nu) +=
            b.z_f.transpose() * mom_f;
        lin.j_ff.block(i * lay_.dim_f, j * lay_.dim_f + lay_.nu, lay_.nu, lay_.np) +=
            b.z_f.transpose() * mom_p;
        lin.j_gf.block(i * lay_.m, j * lay_.dim_f, lay_.m, lay_.nu) +=
            b.ext_f.transpose() * mom_f;
        lin.j_gf.block(i * lay_.m, j * lay_.dim_f + lay_.nu, lay_.m, lay_.np) +=
            b.ext_f.transpose() * mom_p;
        // Fluid momentum wrt beta: port velocity + mesh velocity channels.
        for (int l = 0; l < s; ++l) {
          const double coef = tab_.A_inv(j, l) / dt_;
          MatX col = coef * (aij * (dRdu_ef + dRdw_cols));
          if (i == j) col += coef * mass_ef;
          lin.j_fg.block(i * lay_.dim_f, l * lay_.m, lay_.nu, lay_.m) +=
              b.z_f.transpose() * col;
          lin.j_gg.block(i * lay_.m, l * lay_.m, lay_.m, lay_.m) +=
              b.ext_f.transpose() * col;
        }
        // Solid rows wrt alpha_s / beta.
        const double minv = tab_.A_inv(i, j) / dt_;
        const MatX sol_z = minv * ms_zs + aij * k_zs;
        const MatX sol_e = minv * ms_es + aij * k_es;
        lin.j_ss.block(i * lay_.ns, j * lay_.ns, lay_.ns, lay_.ns) +=
            b.z_s.transpose() * sol_z;
        lin.j_sg.block(i * lay_.ns, j * lay_.m, lay_.ns, lay_.m) +=
            b.z_s.transpose() * sol_e;
        lin.j_gs.block(i * lay_.m, j * lay_.ns, lay_.m, lay_.ns) +=
            b.ext_s.transpose() * sol_z;
        lin.j_gg.block(i * lay_.m, j * lay_.m, lay_.m, lay_.m) +=
            b.ext_s.transpose() * sol_e;
      }
      // Divergence rows (stage-diagonal in the fields).
      lin.j_ff.block(j * lay_.dim_f + lay_.nu, j * lay_.dim_f, lay_.np, lay_.nu) +=
          b.z_p.transpose() * bdiv_zf;
      for (int l = 0; l < s; ++l)
        lin.j_fg.block(j * lay_.dim_f + lay_.nu, l * lay_.m, lay_.np, lay_.m) +=
            (tab_.A_inv(j, l) / dt_) * (b.z_p.transpose() * bdiv_ef);
      if (lay_.enclosed) {
        const VecX zm = b.z_p.transpose() * sys_.m_ref;
        for (int r = 0; r < lay_.np; ++r) {
          lin.j_ff(j * lay_.dim_f + lay_.nu + r, j * lay_.dim_f + lay_.dim_f - 1) += zm[r];
          lin.j_ff(j * lay_.dim_f + lay_.dim_f - 1, j * lay_.dim_f + lay_.nu + r) += zm[r];
        }
      }
    }

    // Shape channel: forward differences over port modes.
    if (!set_.frozen_geometry) {
      const double eps = set_.fd_step_scale * sys_.diameter;
      for (int j = 0; j < s; ++j) {
        for (int k = 0; k < lay_.m; ++k) {
          const AleConfig pert = ale_from_field_unchecked(
              sp, work.st[j].cfg.d_tilde + eps * rom_.ale_port_cols.col(k));
          const FluidBlocks fbp = sys_.fluid->blocks(work.st[j].u, work.st[j].p, pert,
                                                     work.st[j].omega, work.st[j].t);
          const VecX dRp = (fbp.rprime - work.st[j].fb.rprime) / eps;
          const VecX dMu = (fbp.mass_u - work.st[j].fb.mass_u) / eps;
          const VecX dBu = (fbp.div_u - work.st[j].fb.div_u) / eps;
          for (int i = 0; i < s; ++i) {
            VecX col = dt_ * tab_.A(i, j) * dRp;
            if (i == j) col += dMu;
            lin.j_fg.block(i * lay_.dim_f, j * lay_.m + k, lay_.nu, 1) +=
                b.z_f.transpose() * col;
            lin.j_gg.block(i * lay_.m, j * lay_.m + k, lay_.m, 1) +=
                b.ext_f.transpose() * col;
          }
          lin.j_fg.block(j * lay_.dim_f + lay_.nu, j * lay_.m + k, lay_.np, 1) +=
              b.z_p.transpose() * dBu;
        }
      }
    }
    return lin;
  }

  RomStepResult run(bool monolithic) {
    const int s = lay_.s;
    VecX beta = prev_.beta.replicate(s, 1);
    VecX af = prev_.alpha_f.replicate(s, 1);
    VecX ap = prev_.alpha_p.replicate(s, 1);
    VecX as = prev_.alpha_s.replicate(s, 1);
    VecX lambda = VecX::Zero(s);

    RomStepResult out;
    RomWork work = evaluate(beta, af, ap, as, lambda);
    const int total = s * (lay_.m + lay_.dim_f + lay_.ns);
    const double tol_abs = set_.abs_tol_scale * std::sqrt(double(total));
    const double tol_rel = set_.rel_tol * std::max(work.norm, 1e-30);
    out.diag.residual_norms.push_back(work.norm);

    auto apply = [&](const VecX& db, const VecX& dloc_f, const VecX& dloc_s, double alpha) {
      VecX nb = beta + alpha * db;
      VecX naf = af, nap = ap, nas = as;
      VecX nl = lambda;
      for (int i = 0; i < s; ++i) {
        naf.segment(i * lay_.nu, lay_.nu) +=
            alpha * dloc_f.segment(i * lay_.dim_f, lay_.nu);
        nap.segment(i * lay_.np, lay_.np) +=
            alpha * dloc_f.segment(i * lay_.dim_f + lay_.nu, lay_.np);
        if (lay_.enclosed) nl[i] += alpha * dloc_f[i * lay_.dim_f + lay_.dim_f - 1];
        nas.segment(i * lay_.ns, lay_.ns) += alpha * dloc_s.segment(i * lay_.ns, lay_.ns);
      }
      return std::make_tuple(nb, naf, nap, nas, nl);
    };

    for (int it = 0; it < set_.max_iters; ++it) {
      if (work.norm < tol_abs || work.norm < tol_rel) {
        out.diag.converged = true;
        break;
      }
      const Lin lin = linearize(work);
      VecX dg, dwf, dws;
      if (!monolithic) {
        Eigen::PartialPivLU<MatX> lu_f(lin.j_ff), lu_s(lin.j_ss);
        const VecX w_star = lu_f.solve(-work.r_fluid);
        const VecX d_star = lu_s.solve(-work.r_solid);
        const MatX g_to_f = lu_f.solve(-lin.j_fg);
        const MatX g_to_s = lu_s.solve(-lin.j_sg);
        const MatX schur = lin.j_gg + lin.j_gf * g_to_f + lin.j_gs * g_to_s;
        const VecX rhs = -work.r_port - lin.j_gf * w_star - lin.j_gs * d_star;
        dg = schur.partialPivLu().solve(rhs);
        require(std::isfinite(dg.lpNorm<Eigen::Infinity>()), Error::Kind::solver,
                "singular reduced interface Schur complement");
        dwf = w_star + g_to_f * dg;
        dws = d_star + g_to_s * dg;
      } else {
        const int nf = s * lay_.dim_f, nsb = s * lay_.ns, ng = s * lay_.m;
        MatX j = MatX::Zero(nf + nsb + ng, nf + nsb + ng);
        j.block(0, 0, nf, nf) = lin.j_ff;
        j.block(0, nf + nsb, nf, ng) = lin.j_fg;
        j.block(nf, nf, nsb, nsb) = lin.j_ss;
        j.block(nf, nf + nsb, nsb, ng) = lin.j_sg;
        j.block(nf + nsb, 0, ng, nf) = lin.j_gf;
        j.block(nf + nsb, nf, ng, nsb) = lin.j_gs;
        j.block(nf + nsb, nf + nsb, ng, ng) = lin.j_gg;
        VecX r(nf + nsb + ng);
        r << work.r_fluid, work.r_solid, work.r_port;
        const VecX dx = j.partialPivLu().solve(-r);
        dwf = dx.head(nf);
        dws = dx.segment(nf, nsb);
        dg = dx.tail(ng);
      }

      double alpha = 1.0;
      for (int ls = 0;; ++ls) {
        try {
          auto [nb, naf, nap, nas, nl] = apply(dg, dwf, dws, alpha);
          RomWork trial = evaluate(nb, naf, nap, nas, nl);
          if (!set_.line_search || trial.norm <= work.norm || ls >= 6) {
            beta = nb;
            af = naf;
            ap = nap;
            as = nas;
            lambda = nl;
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
    }
    if (!out.diag.converged)
      fail(Error::Kind::solver, "reduced Newton did not converge in " +
                                    std::to_string(set_.max_iters) + " iterations");

    const RomStage& last = work.st[s - 1];
    out.state.t = prev_.t + dt_;
    out.state.beta = last.beta;
    out.state.alpha_f = last.alpha_f;
    out.state.alpha_p = last.alpha_p;
    out.state.alpha_s = last.alpha_s;
    out.state.mass_u_prev = last.fb.mass_u;
    out.state.d_prev = last.d;
    out.state.v_prev = last.us;
    out.fields.u = last.u;
    out.fields.p = last.p;
    out.fields.d = last.d;
    out.fields.v = last.us;

    for (int i = 0; i < s; ++i) {
      const VecX tf = gather(work.st[i].u, sys_.sp().vel_part.iface);
      const VecX ts = gather(work.st[i].us, sys_.sp().disp_part.iface);
      out.diag.kinematic_mismatch =
          std::max(out.diag.kinematic_mismatch, (tf - ts).lpNorm<Eigen::Infinity>());
      out.dissipation_integral +=
          dt_ * tab_.b[i] * sys_.fluid->dissipation(work.st[i].u, work.st[i].cfg);
    }
    VecX dmu = (-tab_.A_inv_row_sum[s - 1] / dt_) * prev_.mass_u_prev;
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

  RomWork evaluate_public(const VecX& beta, const VecX& af, const VecX& ap, const VecX& as,
                          const VecX& lambda) const {
    return evaluate(beta, af, ap, as, lambda);
  }

private:
  const RomSystem& rom_;
  const FsiSystem& sys_;
  const RomState& prev_;
  const ButcherTableau& tab_;
  double dt_;
  SolverSettings set_;
  RomLayout lay_;
};

}  // namespace

RomResiduals reduced_stage_system(const RomSystem& rom, const RomState& prev,
                                  const ButcherTableau& tab, double dt, const VecX& beta,
                                  const VecX& alpha_f, const VecX& alpha_p, const VecX& alpha_s,
                                  const VecX& lambda) {
  SolverSettings settings;
  RomStepper stepper(rom, prev, tab, dt, settings);
  const RomWork work = stepper.evaluate_public(beta, alpha_f, alpha_p, alpha_s, lambda);
  RomResiduals out;
  out.port = work.r_port;
  const RomLayout lay(rom, tab.s);
  out.fluid_bubble.resize(tab.s * lay.nu);
  out.divergence.resize(tab.s * (lay.dim_f - lay.nu));
  for (int i = 0; i < tab.s; ++i) {
    out.fluid_bubble.segment(i * lay.nu, lay.nu) =
        work.r_fluid.segment(i * lay.dim_f, lay.nu);
    out.divergence.segment(i * (lay.dim_f - lay.nu), lay.dim_f - lay.nu) =
        work.r_fluid.segment(i * lay.dim_f + lay.nu, lay.dim_f - lay.nu);
  }
  out.solid_bubble = work.r_solid;
  return out;
}

RomStepResult rom_advance_step(const RomSystem& rom, const RomState& state,
                               const ButcherTableau& tab, double dt,
                               const SolverSettings& settings) {
  RomStepper stepper(rom, state, tab, dt, settings);
  return stepper.run(false);
}

RomStepResult rom_oracle_step(const RomSystem& rom, const RomState& state,
                              const ButcherTableau& tab, double dt,
                              const SolverSettings& settings) {
  RomStepper stepper(rom, state, tab, dt, settings);
  return stepper.run(true);
}

EnergyReport energy_report(const FsiSystem& sys, const EnergySample& before,
                           const HfState& after, double dissipation_integral) {
  const EnergySample now = energy_sample(sys, after);
  EnergyReport rep;
  rep.kinetic_fluid = now.kinetic_fluid;
  rep.kinetic_solid = now.kinetic_solid;
  rep.elastic = now.elastic;
  rep.dissipation_integral = dissipation_integral;
  const double scale = std::max({std::abs(now.total()), std::abs(before.total()), 1e-14});
  rep.identity_residual = (now.total() - before.total() + dissipation_integral) / scale;
  return rep;
}

}  // namespace fsi
