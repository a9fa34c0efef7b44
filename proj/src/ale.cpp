#include "fsi/ale.hpp"

#include <algorithm>

namespace fsi {

namespace {

// Plane-strain Lame parameters.
void lame(double E, double nu, double& lambda, double& mu) {
  lambda = E * nu / ((1 + nu) * (1 - 2 * nu));
  mu = E / (2 * (1 + nu));
}

SpMat vector_operator(const SubdomainFe& fe, const FunctionSpace& space,
                      bool elastic, double lambda, double mu) {
  std::vector<Triplet> trip;
  for (int e = 0; e < fe.n_elems(); ++e)
    for (int q = 0; q < fe.n_q(); ++q) {
      const double w = fe.w(e, q);
      for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l) {
          const Vec2 gk = fe.grad(e, q, k), gl = fe.grad(e, q, l);
          if (!elastic) {
            const double v = w * gk.dot(gl);
            for (int c = 0; c < 2; ++c)
              trip.emplace_back(space.dof(fe.nodes[e][k], c), space.dof(fe.nodes[e][l], c), v);
          } else {
            // 2 mu eps(u):eps(v) + lambda div u div v
            for (int c = 0; c < 2; ++c)
              for (int d = 0; d < 2; ++d) {
                double v = mu * gk[d] * gl[c] + lambda * gk[c] * gl[d];
                if (c == d) v += mu * gk.dot(gl);
                trip.emplace_back(space.dof(fe.nodes[e][k], c), space.dof(fe.nodes[e][l], d),
                                  w * v);
              }
          }
        }
    }
  SpMat m(space.n_dofs, space.n_dofs);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

}  // namespace

int ExtensionOperator::n_space() const {
  return kind == ExtensionKind::harmonic_solid ? sp->n_s() : sp->n_u();
}

ExtensionOperator build_extension(ExtensionKind kind, const Spaces& spaces,
                                  const PseudoParams& pseudo) {
  ExtensionOperator op;
  op.kind = kind;
  op.sp = &spaces;
  const bool fluid = kind != ExtensionKind::harmonic_solid;
  const FunctionSpace& space = fluid ? spaces.vel : spaces.disp;
  const DofPartition& part = fluid ? spaces.vel_part : spaces.disp_part;

  std::vector<bool> fixed(space.n_dofs, false);
  op.fixed_dofs = part.iface;  // trace slots first, aligned order
  for (int d : part.iface) fixed[d] = true;
  auto fix = [&](int d) {
    if (!fixed[d]) {
      fixed[d] = true;
      op.fixed_dofs.push_back(d);
    }
  };
  for (int d : part.dirichlet) fix(d);
  if (kind != ExtensionKind::harmonic_fluid) {
    // Clamp every remaining outer-boundary node of the subdomain.
    auto clamp_facets = [&](const std::vector<FacetFe>& facets) {
      for (const auto& f : facets)
        for (int n : f.nodes)
          for (int c = 0; c < 2; ++c) fix(space.dof(n, c));
    };
    if (fluid)
      clamp_facets(spaces.fluid_neumann_fe);
    else
      clamp_facets(spaces.solid_neumann_fe);
  }
  for (int d = 0; d < space.n_dofs; ++d)
    if (!fixed[d]) op.free_dofs.push_back(d);

  double lambda = 0, mu = 0;
  lame(pseudo.E, pseudo.nu, lambda, mu);
  const SpMat k = vector_operator(fluid ? spaces.fluid_fe : spaces.solid_fe, space,
                                  kind == ExtensionKind::pseudo_elastic_fluid, lambda, mu);

  // Extract free-free and free-fixed blocks.
  std::vector<int> pos(space.n_dofs, -1);
  for (std::size_t i = 0; i < op.free_dofs.size(); ++i) pos[op.free_dofs[i]] = static_cast<int>(i);
  std::vector<int> bpos(space.n_dofs, -1);
  for (std::size_t i = 0; i < op.fixed_dofs.size(); ++i)
    bpos[op.fixed_dofs[i]] = static_cast<int>(i);
  std::vector<Triplet> tff, tfb;
  for (int col = 0; col < k.outerSize(); ++col)
    for (SpMat::InnerIterator it(k, col); it; ++it) {
      const int r = pos[it.row()];
      if (r < 0) continue;
      if (pos[it.col()] >= 0)
        tff.emplace_back(r, pos[it.col()], it.value());
      else
        tfb.emplace_back(r, bpos[it.col()], it.value());
    }
  SpMat kff(op.free_dofs.size(), op.free_dofs.size());
  kff.setFromTriplets(tff.begin(), tff.end());
  op.k_fb_.resize(op.free_dofs.size(), op.fixed_dofs.size());
  op.k_fb_.setFromTriplets(tfb.begin(), tfb.end());
  op.lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  op.lu_->compute(kff);
  require(op.lu_->info() == Eigen::Success, Error::Kind::solver,
          "extension operator factorization failed (singular operator)");
  return op;
}

VecX ExtensionOperator::extend_trace(const VecX& trace) const {
  const DofPartition& part =
      (kind == ExtensionKind::harmonic_solid) ? sp->disp_part : sp->vel_part;
  require(trace.size() == part.n_iface(), Error::Kind::internal, "trace length mismatch");
  VecX b = VecX::Zero(fixed_dofs.size());
  b.head(trace.size()) = trace;
  VecX out = VecX::Zero(n_space());
  if (!free_dofs.empty()) {
    const VecX interior = lu_->solve(-(k_fb_ * b));
    for (std::size_t i = 0; i < free_dofs.size(); ++i) out[free_dofs[i]] = interior[i];
  }
  for (std::size_t i = 0; i < fixed_dofs.size(); ++i) out[fixed_dofs[i]] = b[i];
  return out;
}

VecX ExtensionOperator::extend_boundary(const VecX& boundary) const {
  VecX b(fixed_dofs.size());
  for (std::size_t i = 0; i < fixed_dofs.size(); ++i) b[i] = boundary[fixed_dofs[i]];
  VecX out = VecX::Zero(n_space());
  if (!free_dofs.empty()) {
    const VecX interior = lu_->solve(-(k_fb_ * b));
    for (std::size_t i = 0; i < free_dofs.size(); ++i) out[free_dofs[i]] = interior[i];
  }
  for (std::size_t i = 0; i < fixed_dofs.size(); ++i) out[fixed_dofs[i]] = b[i];
  return out;
}

namespace {

AleConfig build_config(const Spaces& spaces, const VecX& d_tilde, bool check) {
  AleConfig cfg;
  cfg.sp = &spaces;
  cfg.d_tilde = d_tilde;
  cfg.identity = (d_tilde.size() == 0) || (d_tilde.lpNorm<Eigen::Infinity>() == 0.0);
  const auto& fe = spaces.fluid_fe;
  cfg.nq = fe.n_q();
  cfg.f_inv_t.resize(static_cast<std::size_t>(fe.n_elems()) * cfg.nq);
  cfg.det_f.resize(cfg.f_inv_t.size());
  cfg.min_det = std::numeric_limits<double>::max();
  for (int e = 0; e < fe.n_elems(); ++e) {
    for (int q = 0; q < cfg.nq; ++q) {
      Mat2 f = Mat2::Identity();
      if (!cfg.identity) {
        for (int k = 0; k < 6; ++k) {
          const Vec2 g = fe.grad(e, q, k);
          const int n = fe.nodes[e][k];
          f(0, 0) += d_tilde[2 * n] * g[0];
          f(0, 1) += d_tilde[2 * n] * g[1];
          f(1, 0) += d_tilde[2 * n + 1] * g[0];
          f(1, 1) += d_tilde[2 * n + 1] * g[1];
        }
      }
      const double det = f.determinant();
      const std::size_t idx = static_cast<std::size_t>(e) * cfg.nq + q;
      cfg.det_f[idx] = det;
      if (det < cfg.min_det) {
        cfg.min_det = det;
        cfg.min_det_elem = e;
      }
      Mat2 inv;
      const double id = 1.0 / det;
      inv << f(1, 1) * id, -f(0, 1) * id, -f(1, 0) * id, f(0, 0) * id;
      cfg.f_inv_t[idx] = inv.transpose();
    }
  }
  if (check)
    require(cfg.min_det > 0.0, Error::Kind::solver,
            "mesh tangling: deformed element " +
                std::to_string(cfg.min_det_elem >= 0 ? fe.tris[cfg.min_det_elem] : -1) +
                " has Jacobian determinant " + std::to_string(cfg.min_det));
  return cfg;
}

}  // namespace

AleConfig ale_from_field(const Spaces& spaces, const VecX& d_tilde) {
  return build_config(spaces, d_tilde, true);
}

AleConfig ale_from_field_unchecked(const Spaces& spaces, const VecX& d_tilde) {
  return build_config(spaces, d_tilde, false);
}

AleConfig ale_from_interface(const Spaces& spaces, const ExtensionOperator& ext,
                             const VecX& trace) {
  require(ext.kind == ExtensionKind::pseudo_elastic_fluid, Error::Kind::internal,
          "mesh motion must use the pseudo-elastic extension");
  return ale_from_field(spaces, ext.extend_trace(trace));
}

AleConfig ale_reference(const Spaces& spaces) {
  return build_config(spaces, VecX::Zero(spaces.n_u()), true);
}

}  // namespace fsi
