#include "fsi/fluid_assembly.hpp"

namespace fsi {

namespace {

struct QpState {
  Vec2 g[6];      // current-configuration gradients of P2 shapes
  Vec2 u, w;      // velocity and mesh velocity values
  Mat2 grad_u;
  double div_u = 0, div_w = 0, p = 0;
};

inline void qp_state(const SubdomainFe& fe, const AleConfig& ale, const VecX& u, const VecX& p,
                     const VecX& omega, int e, int q, QpState& s) {
  const Mat2& finvt = ale.finv_t(e, q);
  const bool id = ale.identity;
  s.u.setZero();
  s.w.setZero();
  s.grad_u.setZero();
  Mat2 grad_w = Mat2::Zero();
  for (int k = 0; k < 6; ++k) {
    s.g[k] = id ? fe.grad(e, q, k) : Vec2(finvt * fe.grad(e, q, k));
    const int n = fe.nodes[e][k];
    const double nk = fe.shape(q, k);
    const double ux = u[2 * n], uy = u[2 * n + 1];
    s.u[0] += ux * nk;
    s.u[1] += uy * nk;
    s.grad_u(0, 0) += ux * s.g[k][0];
    s.grad_u(0, 1) += ux * s.g[k][1];
    s.grad_u(1, 0) += uy * s.g[k][0];
    s.grad_u(1, 1) += uy * s.g[k][1];
    if (omega.size()) {
      const double wx = omega[2 * n], wy = omega[2 * n + 1];
      s.w[0] += wx * nk;
      s.w[1] += wy * nk;
      grad_w(0, 0) += wx * s.g[k][0];
      grad_w(1, 1) += wy * s.g[k][1];
    }
  }
  s.div_u = s.grad_u.trace();
  s.div_w = grad_w.trace();
  s.p = 0;
  if (p.size())
    for (int k = 0; k < 3; ++k) s.p += p[fe.pnodes[e][k]] * fe.pshape(q, k);
}

}  // namespace

FluidBlocks FluidAssembly::blocks(const VecX& u, const VecX& p, const AleConfig& ale,
                                  const VecX& omega, double t) const {
  const auto& fe = sp_->fluid_fe;
  const double rho = params_.rho, mu = params_.mu;
  FluidBlocks out;
  out.rprime = VecX::Zero(sp_->n_u());
  out.mass_u = VecX::Zero(sp_->n_u());
  out.div_u = VecX::Zero(sp_->n_p());
  QpState s;
  for (int e = 0; e < fe.n_elems(); ++e) {
    const auto& tri = sp_->mesh->triangles[fe.tris[e]];
    const Vec2 a0 = sp_->mesh->nodes[tri.v[0]];
    const Vec2 a1 = sp_->mesh->nodes[tri.v[1]];
    const Vec2 a2 = sp_->mesh->nodes[tri.v[2]];
    for (int q = 0; q < fe.n_q(); ++q) {
      qp_state(fe, ale, u, p, omega, e, q, s);
      const double w = fe.w(e, q) * ale.det(e, q);
      const Mat2 eps = 0.5 * (s.grad_u + s.grad_u.transpose());
      const Vec2 rel = s.u - s.w;
      const Vec2 conv = s.grad_u * rel;
      Vec2 fb = Vec2::Zero();
      if (params_.body_force) {
        Vec2 x = a0 + fe.rule.points[q].x() * (a1 - a0) + fe.rule.points[q].y() * (a2 - a0);
        if (!ale.identity) {
          for (int k = 0; k < 6; ++k) {
            const int n = fe.nodes[e][k];
            x[0] += ale.d_tilde[2 * n] * fe.shape(q, k);
            x[1] += ale.d_tilde[2 * n + 1] * fe.shape(q, k);
          }
        }
        fb = params_.body_force(x, t);
      }
      const double coef = rho * (-s.div_w + 0.5 * s.div_u);
      for (int k = 0; k < 6; ++k) {
        const int n = fe.nodes[e][k];
        const double nk = fe.shape(q, k);
        const Vec2 visc = 2.0 * mu * (eps * s.g[k]);
        for (int c = 0; c < 2; ++c)
          out.rprime[2 * n + c] +=
              w * (visc[c] - s.p * s.g[k][c] +
                   nk * (rho * conv[c] + coef * s.u[c] - fb[c]));
        out.mass_u[2 * n] += w * rho * nk * s.u[0];
        out.mass_u[2 * n + 1] += w * rho * nk * s.u[1];
      }
      for (int k = 0; k < 3; ++k)
        out.div_u[fe.pnodes[e][k]] -= w * fe.pshape(q, k) * s.div_u;
    }
  }
  if (params_.neumann_data) {
    const LineRule lr = gauss_legendre_01(4);
    for (const auto& facet : sp_->fluid_neumann_fe) {
      const Vec2 a = sp_->mesh->nodes[sp_->mesh->facets[facet.facet].v[0]];
      for (std::size_t q = 0; q < lr.points.size(); ++q) {
        double N[3];
        line_p2_shape(lr.points[q], N);
        const Vec2 x = a + lr.points[q] * facet.length * facet.tangent;
        const Vec2 g = params_.neumann_data(x, t);
        const double w = lr.weights[q] * facet.length;
        for (int k = 0; k < 3; ++k)
          for (int c = 0; c < 2; ++c) out.rprime[2 * facet.nodes[k] + c] -= w * N[k] * g[c];
      }
    }
  }
  return out;
}

VecX FluidAssembly::residual(const VecX& u, const VecX& p, const AleConfig& ale,
                             const VecX& omega, double t) const {
  return blocks(u, p, ale, omega, t).rprime;
}

void FluidAssembly::jacobians(const VecX& u, const VecX& p, const AleConfig& ale,
                              const VecX& omega, double t, SpMat* dRdu, SpMat* dRdp,
                              SpMat* dRdw) const {
  (void)t;
  const auto& fe = sp_->fluid_fe;
  const double rho = params_.rho, mu = params_.mu;
  std::vector<Triplet> tu, tp, tw;
  QpState s;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      qp_state(fe, ale, u, p, omega, e, q, s);
      const double w = fe.w(e, q) * ale.det(e, q);
      const Vec2 rel = s.u - s.w;
      const double coef = rho * (-s.div_w + 0.5 * s.div_u);
      for (int k = 0; k < 6; ++k) {
        const int rk = fe.nodes[e][k];
        const double nk = fe.shape(q, k);
        if (dRdu || dRdw) {
          for (int l = 0; l < 6; ++l) {
            const int cl = fe.nodes[e][l];
            const double nl = fe.shape(q, l);
            const double gkgl = s.g[k].dot(s.g[l]);
            const double gl_rel = s.g[l].dot(rel);
            if (dRdu) {
              for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) {
                  double v = mu * s.g[l][c] * s.g[k][d];
                  v += rho * nk * s.grad_u(c, d) * nl;
                  v += 0.5 * rho * nk * s.g[l][d] * s.u[c];
                  if (c == d) {
                    v += mu * gkgl;
                    v += rho * nk * gl_rel;
                    v += coef * nl * nk;
                  }
                  tu.emplace_back(2 * rk + c, 2 * cl + d, w * v);
                }
            }
            if (dRdw) {
              for (int c = 0; c < 2; ++c)
                for (int d = 0; d < 2; ++d) {
                  double v = -rho * nk * s.grad_u(c, d) * nl - rho * nk * s.g[l][d] * s.u[c];
                  tw.emplace_back(2 * rk + c, 2 * cl + d, w * v);
                }
            }
          }
        }
        if (dRdp)
          for (int m = 0; m < 3; ++m)
            for (int c = 0; c < 2; ++c)
              tp.emplace_back(2 * rk + c, fe.pnodes[e][m], -w * fe.pshape(q, m) * s.g[k][c]);
      }
    }
  if (dRdu) {
    dRdu->resize(sp_->n_u(), sp_->n_u());
    dRdu->setFromTriplets(tu.begin(), tu.end());
  }
  if (dRdp) {
    dRdp->resize(sp_->n_u(), sp_->n_p());
    dRdp->setFromTriplets(tp.begin(), tp.end());
  }
  if (dRdw) {
    dRdw->resize(sp_->n_u(), sp_->n_u());
    dRdw->setFromTriplets(tw.begin(), tw.end());
  }
}

SpMat FluidAssembly::mass(const AleConfig& ale) const {
  const auto& fe = sp_->fluid_fe;
  std::vector<Triplet> trip;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * ale.det(e, q) * params_.rho;
      for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l) {
          const double v = w * fe.shape(q, k) * fe.shape(q, l);
          for (int c = 0; c < 2; ++c)
            trip.emplace_back(2 * fe.nodes[e][k] + c, 2 * fe.nodes[e][l] + c, v);
        }
    }
  SpMat m(sp_->n_u(), sp_->n_u());
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat FluidAssembly::divergence(const AleConfig& ale) const {
  const auto& fe = sp_->fluid_fe;
  std::vector<Triplet> trip;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * ale.det(e, q);
      const Mat2& finvt = ale.finv_t(e, q);
      for (int l = 0; l < 6; ++l) {
        const Vec2 gl = ale.identity ? fe.grad(e, q, l) : Vec2(finvt * fe.grad(e, q, l));
        for (int m = 0; m < 3; ++m)
          for (int d = 0; d < 2; ++d)
            trip.emplace_back(fe.pnodes[e][m], 2 * fe.nodes[e][l] + d,
                              -w * fe.pshape(q, m) * gl[d]);
      }
    }
  SpMat b(sp_->n_p(), sp_->n_u());
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

VecX FluidAssembly::mass_times(const AleConfig& ale, const VecX& u) const {
  const auto& fe = sp_->fluid_fe;
  VecX out = VecX::Zero(sp_->n_u());
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * ale.det(e, q) * params_.rho;
      Vec2 uq = Vec2::Zero();
      for (int k = 0; k < 6; ++k) {
        const int n = fe.nodes[e][k];
        uq[0] += u[2 * n] * fe.shape(q, k);
        uq[1] += u[2 * n + 1] * fe.shape(q, k);
      }
      for (int k = 0; k < 6; ++k) {
        const int n = fe.nodes[e][k];
        out[2 * n] += w * fe.shape(q, k) * uq[0];
        out[2 * n + 1] += w * fe.shape(q, k) * uq[1];
      }
    }
  return out;
}

VecX FluidAssembly::div_times(const AleConfig& ale, const VecX& u) const {
  const auto& fe = sp_->fluid_fe;
  VecX out = VecX::Zero(sp_->n_p());
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * ale.det(e, q);
      const Mat2& finvt = ale.finv_t(e, q);
      double div = 0;
      for (int k = 0; k < 6; ++k) {
        const Vec2 g = ale.identity ? fe.grad(e, q, k) : Vec2(finvt * fe.grad(e, q, k));
        const int n = fe.nodes[e][k];
        div += u[2 * n] * g[0] + u[2 * n + 1] * g[1];
      }
      for (int m = 0; m < 3; ++m) out[fe.pnodes[e][m]] -= w * fe.pshape(q, m) * div;
    }
  return out;
}

VecX FluidAssembly::pressure_integrals(const AleConfig& ale) const {
  const auto& fe = sp_->fluid_fe;
  VecX out = VecX::Zero(sp_->n_p());
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * ale.det(e, q);
      for (int m = 0; m < 3; ++m) out[fe.pnodes[e][m]] += w * fe.pshape(q, m);
    }
  return out;
}

double FluidAssembly::dissipation(const VecX& u, const AleConfig& ale) const {
  const auto& fe = sp_->fluid_fe;
  double total = 0;
  QpState s;
  const VecX empty;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      qp_state(fe, ale, u, empty, empty, e, q, s);
      const Mat2 eps = 0.5 * (s.grad_u + s.grad_u.transpose());
      total += fe.w(e, q) * ale.det(e, q) * 2.0 * params_.mu * (eps * eps).trace();
    }
  return total;
}

}  // namespace fsi
