#include "fsi/solid_assembly.hpp"

namespace fsi {

namespace {

// Displacement gradient at a quadrature point.
Mat2 disp_grad(const SubdomainFe& fe, const VecX& d, int e, int q) {
  Mat2 g = Mat2::Zero();
  for (int k = 0; k < 6; ++k) {
    const Vec2 gk = fe.grad(e, q, k);
    const int n = fe.nodes[e][k];
    g(0, 0) += d[2 * n] * gk[0];
    g(0, 1) += d[2 * n] * gk[1];
    g(1, 0) += d[2 * n + 1] * gk[0];
    g(1, 1) += d[2 * n + 1] * gk[1];
  }
  return g;
}

Mat2 piola(const Mat2& h, const SolidParams& p) {
  const double lam = p.lambda(), mu = p.mu();
  if (p.model == SolidModel::linear) {
    const Mat2 eps = 0.5 * (h + h.transpose());
    return 2 * mu * eps + lam * eps.trace() * Mat2::Identity();
  }
  const Mat2 f = Mat2::Identity() + h;
  const Mat2 e = 0.5 * (f.transpose() * f - Mat2::Identity());
  const Mat2 s2 = 2 * mu * e + lam * e.trace() * Mat2::Identity();
  return f * s2;
}

// Directional derivative of the first Piola stress along dh.
Mat2 piola_tangent(const Mat2& h, const Mat2& dh, const SolidParams& p) {
  const double lam = p.lambda(), mu = p.mu();
  if (p.model == SolidModel::linear) {
    const Mat2 deps = 0.5 * (dh + dh.transpose());
    return 2 * mu * deps + lam * deps.trace() * Mat2::Identity();
  }
  const Mat2 f = Mat2::Identity() + h;
  const Mat2 e = 0.5 * (f.transpose() * f - Mat2::Identity());
  const Mat2 s2 = 2 * mu * e + lam * e.trace() * Mat2::Identity();
  const Mat2 de = 0.5 * (dh.transpose() * f + f.transpose() * dh);
  const Mat2 ds2 = 2 * mu * de + lam * de.trace() * Mat2::Identity();
  return dh * s2 + f * ds2;
}

double energy_density(const Mat2& h, const SolidParams& p) {
  const double lam = p.lambda(), mu = p.mu();
  Mat2 e;
  if (p.model == SolidModel::linear) {
    e = 0.5 * (h + h.transpose());
  } else {
    const Mat2 f = Mat2::Identity() + h;
    e = 0.5 * (f.transpose() * f - Mat2::Identity());
  }
  return mu * (e * e).trace() + 0.5 * lam * e.trace() * e.trace();
}

}  // namespace

VecX SolidAssembly::residual(const VecX& d, double t) const {
  const auto& fe = sp_->solid_fe;
  const auto& space = sp_->disp;
  VecX r = VecX::Zero(space.n_dofs);
  for (int e = 0; e < fe.n_elems(); ++e) {
    const Vec2 a0 = sp_->mesh->nodes[sp_->mesh->triangles[fe.tris[e]].v[0]];
    const Vec2 a1 = sp_->mesh->nodes[sp_->mesh->triangles[fe.tris[e]].v[1]];
    const Vec2 a2 = sp_->mesh->nodes[sp_->mesh->triangles[fe.tris[e]].v[2]];
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q);
      const Mat2 pk = piola(disp_grad(fe, d, e, q), params_);
      Vec2 fb = Vec2::Zero();
      if (params_.body_force) {
        const Vec2 xi = fe.rule.points[q];
        fb = params_.body_force(a0 + xi.x() * (a1 - a0) + xi.y() * (a2 - a0), t);
      }
      for (int k = 0; k < 6; ++k) {
        const Vec2 gk = fe.grad(e, q, k);
        const int n = fe.nodes[e][k];
        r[2 * n] += w * (pk(0, 0) * gk[0] + pk(0, 1) * gk[1] - fb[0] * fe.shape(q, k));
        r[2 * n + 1] += w * (pk(1, 0) * gk[0] + pk(1, 1) * gk[1] - fb[1] * fe.shape(q, k));
      }
    }
  }
  if (params_.neumann_data) {
    const LineRule lr = gauss_legendre_01(4);
    for (const auto& facet : sp_->solid_neumann_fe) {
      const Vec2 a = sp_->mesh->nodes[sp_->mesh->facets[facet.facet].v[0]];
      for (std::size_t q = 0; q < lr.points.size(); ++q) {
        double N[3];
        line_p2_shape(lr.points[q], N);
        const Vec2 x = a + lr.points[q] * facet.length * facet.tangent;
        const Vec2 g = params_.neumann_data(x, t);
        const double w = lr.weights[q] * facet.length;
        for (int k = 0; k < 3; ++k) {
          r[2 * facet.nodes[k]] -= w * N[k] * g[0];
          r[2 * facet.nodes[k] + 1] -= w * N[k] * g[1];
        }
      }
    }
  }
  return r;
}

SpMat SolidAssembly::stiffness(const VecX& d) const {
  const auto& fe = sp_->solid_fe;
  const auto& space = sp_->disp;
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(fe.n_elems()) * 144);
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q);
      const Mat2 h = disp_grad(fe, d, e, q);
      for (int l = 0; l < 6; ++l) {
        const Vec2 gl = fe.grad(e, q, l);
        for (int dcomp = 0; dcomp < 2; ++dcomp) {
          Mat2 dh = Mat2::Zero();
          dh(dcomp, 0) = gl[0];
          dh(dcomp, 1) = gl[1];
          const Mat2 dp = piola_tangent(h, dh, params_);
          for (int k = 0; k < 6; ++k) {
            const Vec2 gk = fe.grad(e, q, k);
            for (int c = 0; c < 2; ++c)
              trip.emplace_back(space.dof(fe.nodes[e][k], c), space.dof(fe.nodes[e][l], dcomp),
                                w * (dp(c, 0) * gk[0] + dp(c, 1) * gk[1]));
          }
        }
      }
    }
  SpMat m(space.n_dofs, space.n_dofs);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

SpMat SolidAssembly::mass() const {
  const auto& fe = sp_->solid_fe;
  const auto& space = sp_->disp;
  std::vector<Triplet> trip;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q) * params_.rho;
      for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l) {
          const double v = w * fe.shape(q, k) * fe.shape(q, l);
          for (int c = 0; c < 2; ++c)
            trip.emplace_back(space.dof(fe.nodes[e][k], c), space.dof(fe.nodes[e][l], c), v);
        }
    }
  SpMat m(space.n_dofs, space.n_dofs);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

double SolidAssembly::energy(const VecX& d) const {
  const auto& fe = sp_->solid_fe;
  double total = 0.0;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q)
      total += fe.w(e, q) * energy_density(disp_grad(fe, d, e, q), params_);
  return total;
}

}  // namespace fsi
