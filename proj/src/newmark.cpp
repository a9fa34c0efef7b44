#include "fsi/newmark.hpp"

#include <Eigen/SparseLU>
#include <cmath>

namespace fsi {

void newmark_linear_step(const MatX& m, const MatX& k, double dt, const NewmarkParams& np,
                         VecX& q, VecX& v, VecX& a) {
  const VecX q_pred = q + dt * v + dt * dt * (0.5 - np.beta) * a;
  const MatX lhs = m / (np.beta * dt * dt) + k;
  const VecX q_next = lhs.partialPivLu().solve(m * q_pred / (np.beta * dt * dt));
  const VecX a_next = (q_next - q_pred) / (np.beta * dt * dt);
  v += dt * ((1.0 - np.gamma) * a + np.gamma * a_next);
  q = q_next;
  a = a_next;
}

Bdf2State bdf2_initial_state(const FsiSystem& sys, const HfState& state) {
  Bdf2State st;
  st.now = state;
  // Consistent initial acceleration: M a = -R'_s(d).
  Eigen::SparseLU<SpMat> lu;
  lu.compute(sys.mass_s);
  require(lu.info() == Eigen::Success, Error::Kind::solver, "singular solid mass matrix");
  st.accel = lu.solve(-sys.solid->residual(state.d, state.t));
  st.mass_u_prev = state.mass_u;
  st.g_prev = gather(state.d, sys.sp().disp_part.iface);
  st.have_history = false;
  return st;
}

namespace {

// Unknown layout mirrors the IRK stepper with a single stage.
struct NmLayout {
  int nc, n_in, n_p, n_dir, ns_in, ns_dir, dim_w, dim_d;
  bool enclosed;
  std::vector<int> w_col, mom_row, gpos_f, d_col, smom_row, gpos_s;

  explicit NmLayout(const Spaces& sp) {
    const auto& vp = sp.vel_part;
    const auto& dp = sp.disp_part;
    nc = sp.n_c;
    enclosed = sp.fluid_enclosed;
    n_in = static_cast<int>(vp.interior.size());
    n_p = sp.n_p();
    n_dir = static_cast<int>(vp.dirichlet.size());
    ns_in = static_cast<int>(dp.interior.size());
    ns_dir = static_cast<int>(dp.dirichlet.size());
    dim_w = n_in + n_p + n_dir + (enclosed ? 1 : 0);
    dim_d = ns_in + ns_dir;
    w_col.assign(sp.n_u(), -1);
    mom_row.assign(sp.n_u(), -1);
    gpos_f.assign(sp.n_u(), -1);
    for (int i = 0; i < n_in; ++i) {
      w_col[vp.interior[i]] = i;
      mom_row[vp.interior[i]] = i;
    }
    for (int i = 0; i < n_dir; ++i) w_col[vp.dirichlet[i]] = n_in + n_p + i;
    for (int k = 0; k < nc; ++k) gpos_f[vp.iface[k]] = k;
    d_col.assign(sp.n_s(), -1);
    smom_row.assign(sp.n_s(), -1);
    gpos_s.assign(sp.n_s(), -1);
    for (int i = 0; i < ns_in; ++i) {
      d_col[dp.interior[i]] = i;
      smom_row[dp.interior[i]] = i;
    }
    for (int i = 0; i < ns_dir; ++i) d_col[dp.dirichlet[i]] = ns_in + i;
    for (int k = 0; k < nc; ++k) gpos_s[dp.iface[k]] = k;
  }
};

}  // namespace

StepResult bdf2_newmark_step(const FsiSystem& sys, Bdf2State& state, double dt,
                             const NewmarkParams& np, const SolverSettings& settings) {
  np.validate();
  const Spaces& sp = sys.sp();
  const NmLayout lay(sp);
  const HfState& prev = state.now;
  const double t1 = prev.t + dt;
  const double cd = sys.dirichlet.c(t1);

  // Newmark predictors.
  const VecX d_pred = prev.d + dt * prev.v + dt * dt * (0.5 - np.beta) * state.accel;
  const VecX v_base = prev.v + dt * (1.0 - np.gamma) * state.accel;
  const double acc_coef = 1.0 / (np.beta * dt * dt);
  const double vel_coef = np.gamma / (np.beta * dt);

  // BDF coefficients for the fluid momentum products.
  const double c_now = state.have_history ? 1.5 / dt : 1.0 / dt;
  const double c_prev = state.have_history ? -2.0 / dt : -1.0 / dt;
  const double c_prev2 = state.have_history ? 0.5 / dt : 0.0;
  const VecX g_prev_now = gather(prev.d, sp.disp_part.iface);

  VecX g = g_prev_now;
  VecX w(lay.dim_w);
  for (int k = 0; k < lay.n_in; ++k) w[k] = prev.u[sp.vel_part.interior[k]];
  w.segment(lay.n_in, lay.n_p) = prev.p;
  for (int k = 0; k < lay.n_dir; ++k)
    w[lay.n_in + lay.n_p + k] = prev.u[sp.vel_part.dirichlet[k]];
  if (lay.enclosed) w[lay.dim_w - 1] = 0;
  VecX dl(lay.dim_d);
  for (int k = 0; k < lay.ns_in; ++k) dl[k] = prev.d[sp.disp_part.interior[k]];
  for (int k = 0; k < lay.ns_dir; ++k) dl[lay.ns_in + k] = prev.d[sp.disp_part.dirichlet[k]];

  struct Eval {
    VecX u, p, d, v_s, a_s, omega;
    double lambda = 0;
    AleConfig cfg;
    FluidBlocks fb;
    VecX rf, rs;
    VecX r_g, r_f, r_s;
    double norm = 0;
  };

  auto evaluate = [&](const VecX& gv, const VecX& wv, const VecX& dv) {
    Eval ev;
    ev.d = VecX::Zero(sp.n_s());
    scatter(ev.d, sp.disp_part.iface, gv);
    for (int k = 0; k < lay.ns_in; ++k) ev.d[sp.disp_part.interior[k]] = dv[k];
    for (int k = 0; k < lay.ns_dir; ++k) ev.d[sp.disp_part.dirichlet[k]] = dv[lay.ns_in + k];
    ev.a_s = acc_coef * (ev.d - d_pred);
    ev.v_s = v_base + np.gamma * dt * ev.a_s;

    ev.u = VecX::Zero(sp.n_u());
    scatter(ev.u, sp.vel_part.iface, gather(ev.v_s, sp.disp_part.iface));
    for (int k = 0; k < lay.n_in; ++k) ev.u[sp.vel_part.interior[k]] = wv[k];
    for (int k = 0; k < lay.n_dir; ++k)
      ev.u[sp.vel_part.dirichlet[k]] = wv[lay.n_in + lay.n_p + k];
    ev.p = wv.segment(lay.n_in, lay.n_p);
    ev.lambda = lay.enclosed ? wv[lay.dim_w - 1] : 0.0;

    ev.cfg = settings.frozen_geometry ? ale_reference(sp)
                                      : ale_from_field(sp, sys.ale_cols * gv);
    VecX gdot = c_now * gv + c_prev * g_prev_now + c_prev2 * state.g_prev;
    ev.omega = sys.ale_cols * gdot;

    ev.fb = sys.fluid->blocks(ev.u, ev.p, ev.cfg, ev.omega, t1);
    ev.rf = c_now * ev.fb.mass_u + c_prev * prev.mass_u + c_prev2 * state.mass_u_prev +
            ev.fb.rprime;
    ev.rs = sys.mass_s * ev.a_s + sys.solid->residual(ev.d, t1);

    ev.r_g = gather(ev.rf, sp.vel_part.iface) + gather(ev.rs, sp.disp_part.iface);
    ev.r_f.resize(lay.dim_w);
    for (int k = 0; k < lay.n_in; ++k) ev.r_f[k] = ev.rf[sp.vel_part.interior[k]];
    ev.r_f.segment(lay.n_in, lay.n_p) = ev.fb.div_u;
    if (lay.enclosed) {
      ev.r_f.segment(lay.n_in, lay.n_p) += ev.lambda * sys.m_ref;
      ev.r_f[lay.dim_w - 1] = sys.m_ref.dot(ev.p);
    }
    for (int k = 0; k < lay.n_dir; ++k) {
      const int dof = sp.vel_part.dirichlet[k];
      ev.r_f[lay.n_in + lay.n_p + k] = ev.u[dof] - cd * sys.dirichlet.fluid_profile[dof];
    }
    ev.r_s.resize(lay.dim_d);
    for (int k = 0; k < lay.ns_in; ++k) ev.r_s[k] = ev.rs[sp.disp_part.interior[k]];
    for (int k = 0; k < lay.ns_dir; ++k) {
      const int dof = sp.disp_part.dirichlet[k];
      ev.r_s[lay.ns_in + k] = ev.d[dof] - sys.dirichlet.solid_values[dof];
    }
    ev.norm =
        std::sqrt(ev.r_g.squaredNorm() + ev.r_f.squaredNorm() + ev.r_s.squaredNorm());
    return ev;
  };

  StepResult out;
  Eval ev = evaluate(g, w, dl);
  const int total = lay.nc + lay.dim_w + lay.dim_d;
  const double tol_abs = settings.abs_tol_scale * std::sqrt(double(total));
  const double tol_rel = settings.rel_tol * std::max(ev.norm, 1e-30);
  out.diag.residual_norms.push_back(ev.norm);

  for (int it = 0; it < settings.max_iters; ++it) {
    if (ev.norm < tol_abs || ev.norm < tol_rel) {
      out.diag.converged = true;
      break;
    }
    SpMat dRdu, dRdp, dRdw;
    sys.fluid->jacobians(ev.u, ev.p, ev.cfg, ev.omega, t1, &dRdu, &dRdp, &dRdw);
    const SpMat mass = sys.fluid->mass(ev.cfg);
    const SpMat bdiv = sys.fluid->divergence(ev.cfg);
    const SpMat kst = sys.solid->stiffness(ev.d);
    const MatX wcols = dRdw * sys.ale_cols;

    std::vector<Triplet> tff, tss, tgf, tgs;
    MatX j_fg = MatX::Zero(lay.dim_w, lay.nc);
    MatX j_sg = MatX::Zero(lay.dim_d, lay.nc);
    MatX j_gg = MatX::Zero(lay.nc, lay.nc);

    auto add_fluid_ucols = [&](const SpMat& mat, double factor, double trace_factor) {
      for (int col = 0; col < mat.outerSize(); ++col)
        for (SpMat::InnerIterator itr(mat, col); itr; ++itr) {
          const int r = static_cast<int>(itr.row()), c = static_cast<int>(itr.col());
          const double v = factor * itr.value();
          const int rw = lay.mom_row[r];
          const int rg = lay.gpos_f[r];
          const int cw = lay.w_col[c];
          if (cw >= 0) {
            if (rw >= 0) tff.emplace_back(rw, cw, v);
            if (rg >= 0) tgf.emplace_back(rg, cw, v);
          } else {
            const int cg = lay.gpos_f[c];
            if (rw >= 0) j_fg(rw, cg) += v * trace_factor;
            if (rg >= 0) j_gg(rg, cg) += v * trace_factor;
          }
        }
    };
    // d(rf)/du through mass (BDF weight) and the spatial Jacobian; interface
    // velocity columns chain through the Newmark velocity map u_G = ... + vel_coef g.
    add_fluid_ucols(mass, c_now, vel_coef);
    add_fluid_ucols(dRdu, 1.0, vel_coef);
    for (int col = 0; col < dRdp.outerSize(); ++col)
      for (SpMat::InnerIterator itr(dRdp, col); itr; ++itr) {
        const int rw = lay.mom_row[itr.row()];
        const int rg = lay.gpos_f[itr.row()];
        if (rw >= 0) tff.emplace_back(rw, lay.n_in + itr.col(), itr.value());
        if (rg >= 0) tgf.emplace_back(rg, lay.n_in + itr.col(), itr.value());
      }
    // Mesh velocity channel.
    for (int r = 0; r < sp.n_u(); ++r) {
      const int rw = lay.mom_row[r];
      const int rg = lay.gpos_f[r];
      if (rw < 0 && rg < 0) continue;
      for (int k = 0; k < lay.nc; ++k) {
        const double v = c_now * wcols(r, k);
        if (rw >= 0) j_fg(rw, k) += v;
        if (rg >= 0) j_gg(rg, k) += v;
      }
    }
    // Divergence rows.
    for (int col = 0; col < bdiv.outerSize(); ++col)
      for (SpMat::InnerIterator itr(bdiv, col); itr; ++itr) {
        const int rr = lay.n_in + static_cast<int>(itr.row());
        const int cw = lay.w_col[itr.col()];
        if (cw >= 0)
          tff.emplace_back(rr, cw, itr.value());
        else
          j_fg(rr, lay.gpos_f[itr.col()]) += itr.value() * vel_coef;
      }
    if (lay.enclosed) {
      for (int m = 0; m < lay.n_p; ++m) {
        tff.emplace_back(lay.n_in + m, lay.dim_w - 1, sys.m_ref[m]);
        tff.emplace_back(lay.dim_w - 1, lay.n_in + m, sys.m_ref[m]);
      }
    }
    for (int k = 0; k < lay.n_dir; ++k)
      tff.emplace_back(lay.n_in + lay.n_p + k, lay.n_in + lay.n_p + k, 1.0);

    // Solid rows: M a(d) + R'_s: d-derivative = acc_coef M + K.
    auto add_solid = [&](const SpMat& mat, double factor) {
      for (int col = 0; col < mat.outerSize(); ++col)
        for (SpMat::InnerIterator itr(mat, col); itr; ++itr) {
          const int r = static_cast<int>(itr.row()), c = static_cast<int>(itr.col());
          const double v = factor * itr.value();
          const int rw = lay.smom_row[r];
          const int rg = lay.gpos_s[r];
          if (rw < 0 && rg < 0) continue;
          const int cdx = lay.d_col[c];
          if (cdx >= 0) {
            if (rw >= 0) tss.emplace_back(rw, cdx, v);
            if (rg >= 0) tgs.emplace_back(rg, cdx, v);
          } else {
            const int cg = lay.gpos_s[c];
            if (rw >= 0) j_sg(rw, cg) += v;
            if (rg >= 0) j_gg(rg, cg) += v;
          }
        }
    };
    add_solid(sys.mass_s, acc_coef);
    add_solid(kst, 1.0);
    for (int k = 0; k < lay.ns_dir; ++k)
      tss.emplace_back(lay.ns_in + k, lay.ns_in + k, 1.0);

    // Shape channel by forward differences on the mesh-motion field.
    if (!settings.frozen_geometry) {
      const double eps = settings.fd_step_scale * sys.diameter;
      for (int k = 0; k < lay.nc; ++k) {
        const AleConfig pert =
            ale_from_field_unchecked(sp, ev.cfg.d_tilde + eps * sys.ale_cols.col(k));
        const FluidBlocks fbp = sys.fluid->blocks(ev.u, ev.p, pert, ev.omega, t1);
        const VecX dRp = (fbp.rprime - ev.fb.rprime) / eps;
        const VecX dMu = (fbp.mass_u - ev.fb.mass_u) / eps;
        const VecX dBu = (fbp.div_u - ev.fb.div_u) / eps;
        for (int r = 0; r < sp.n_u(); ++r) {
          const double v = dRp[r] + c_now * dMu[r];
          if (v == 0.0) continue;
          const int rw = lay.mom_row[r];
          const int rg = lay.gpos_f[r];
          if (rw >= 0) j_fg(rw, k) += v;
          if (rg >= 0) j_gg(rg, k) += v;
        }
        for (int m = 0; m < lay.n_p; ++m) j_fg(lay.n_in + m, k) += dBu[m];
      }
    }

    SpMat j_ff(lay.dim_w, lay.dim_w), j_ss(lay.dim_d, lay.dim_d);
    j_ff.setFromTriplets(tff.begin(), tff.end());
    j_ss.setFromTriplets(tss.begin(), tss.end());
    SpMat j_gf(lay.nc, lay.dim_w), j_gs(lay.nc, lay.dim_d);
    j_gf.setFromTriplets(tgf.begin(), tgf.end());
    j_gs.setFromTriplets(tgs.begin(), tgs.end());

    Eigen::SparseLU<SpMat> lu_f, lu_s;
    lu_f.compute(j_ff);
    require(lu_f.info() == Eigen::Success, Error::Kind::solver, "singular fluid local Jacobian");
    lu_s.compute(j_ss);
    require(lu_s.info() == Eigen::Success, Error::Kind::solver, "singular solid local Jacobian");
    const VecX w_star = lu_f.solve(-ev.r_f);
    const VecX d_star = lu_s.solve(-ev.r_s);
    const MatX g_to_f = lu_f.solve(-j_fg);
    const MatX g_to_s = lu_s.solve(-j_sg);
    const MatX schur = j_gg + MatX(j_gf) * g_to_f + MatX(j_gs) * g_to_s;
    const VecX rhs = -ev.r_g - j_gf * w_star - j_gs * d_star;
    const VecX dg = schur.partialPivLu().solve(rhs);

    double alpha = 1.0;
    for (int ls = 0;; ++ls) {
      try {
        Eval trial = evaluate(g + alpha * dg, w + alpha * (w_star + g_to_f * dg),
                              dl + alpha * (d_star + g_to_s * dg));
        if (!settings.line_search || trial.norm <= ev.norm || ls >= 6) {
          g += alpha * dg;
          w += alpha * (w_star + g_to_f * dg);
          dl += alpha * (d_star + g_to_s * dg);
          ev = std::move(trial);
          break;
        }
      } catch (const Error&) {
        if (ls >= 6) throw;
      }
      alpha *= 0.5;
    }
    out.diag.newton_iters = it + 1;
    out.diag.residual_norms.push_back(ev.norm);
  }
  require(out.diag.converged, Error::Kind::solver,
          "BDF2+Newmark Newton did not converge in " + std::to_string(settings.max_iters) +
              " iterations");

  out.state.t = t1;
  out.state.u = ev.u;
  out.state.p = ev.p;
  out.state.d = ev.d;
  out.state.v = ev.v_s;
  out.state.mass_u = ev.fb.mass_u;
  out.dissipation_integral = dt * sys.fluid->dissipation(ev.u, ev.cfg);
  out.inst_residual_f = ev.rf;
  out.diag.kinematic_mismatch = (gather(ev.u, sp.vel_part.iface) -
                                 gather(ev.v_s, sp.disp_part.iface))
                                    .lpNorm<Eigen::Infinity>();

  // Shift history.
  state.mass_u_prev = prev.mass_u;
  state.g_prev = g_prev_now;
  state.accel = ev.a_s;
  state.now = out.state;
  state.have_history = true;
  return out;
}

}  // namespace fsi
