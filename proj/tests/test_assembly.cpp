#include <cmath>
#include <random>

#include "doctest.h"
#include "fsi/ale.hpp"
#include "fsi/benchmarks.hpp"
#include "fsi/fluid_assembly.hpp"
#include "fsi/solid_assembly.hpp"
#include "helpers.hpp"

using namespace fsi;

namespace {

VecX random_vec(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

// Nodal interpolation of an analytic vector field onto a P2 vector space.
VecX interpolate(const FunctionSpace& space, const std::function<Vec2(const Vec2&)>& f) {
  VecX v(space.n_dofs);
  for (int n = 0; n < space.n_nodes(); ++n) {
    const Vec2 val = f(space.node_coords[n]);
    v[2 * n] = val[0];
    v[2 * n + 1] = val[1];
  }
  return v;
}

double fit_rate(const std::vector<double>& hs, const std::vector<double>& errs) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = static_cast<int>(hs.size());
  for (int i = 0; i < n; ++i) {
    const double x = std::log(hs[i]), y = std::log(errs[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("solid residual vanishes at rest and under rigid motion") {
  Mesh m = test::square_mesh(3, 3, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  for (SolidModel model : {SolidModel::linear, SolidModel::svk}) {
    SolidParams p;
    p.E = 70.0;
    p.nu = 0.3;
    p.model = model;
    SolidAssembly solid(sp, p);
    CHECK(solid.residual(VecX::Zero(sp.n_s())).norm() == 0.0);

    VecX translation = interpolate(sp.disp, [](const Vec2&) { return Vec2(0.4, -0.2); });
    CHECK(solid.residual(translation).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(solid.energy(translation) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("svk residual is objective under rigid rotation") {
  Mesh m = test::square_mesh(3, 3, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  SolidParams p;
  p.E = 70.0;
  p.model = SolidModel::svk;
  SolidAssembly solid(sp, p);
  const double th = 0.7;
  VecX rot = interpolate(sp.disp, [&](const Vec2& x) {
    return Vec2(std::cos(th) * x.x() - std::sin(th) * x.y() - x.x(),
                std::sin(th) * x.x() + std::cos(th) * x.y() - x.y());
  });
  CHECK(solid.residual(rot).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(std::abs(solid.energy(rot)) < 1e-12);
}

TEST_CASE("solid jacobian matches central finite differences") {
  Mesh m = test::square_mesh(2, 2, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  for (SolidModel model : {SolidModel::linear, SolidModel::svk}) {
    SolidParams p;
    p.E = 10.0;
    p.model = model;
    SolidAssembly solid(sp, p);
    const VecX d = 0.1 * random_vec(sp.n_s(), 7);
    const SpMat k = solid.stiffness(d);

    for (unsigned probe = 0; probe < 6; ++probe) {
      const VecX v = random_vec(sp.n_s(), 100 + probe);
      const double eps = 1e-6;
      const VecX fd = (solid.residual(d + eps * v) - solid.residual(d - eps * v)) / (2 * eps);
      const VecX jv = k * v;
      CHECK((jv - fd).lpNorm<Eigen::Infinity>() <
            1e-6 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
    }
    // Symmetry of the tangent.
    const MatX kd = MatX(k);
    CHECK((kd - kd.transpose()).norm() / kd.norm() < 1e-12);
  }
}

TEST_CASE("svk tangent at zero equals the linear stiffness") {
  Mesh m = test::square_mesh(2, 2, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  SolidParams lin, svk;
  lin.E = svk.E = 25.0;
  lin.model = SolidModel::linear;
  svk.model = SolidModel::svk;
  const MatX kl = MatX(SolidAssembly(sp, lin).stiffness(VecX::Zero(sp.n_s())));
  const MatX ks = MatX(SolidAssembly(sp, svk).stiffness(VecX::Zero(sp.n_s())));
  CHECK((kl - ks).norm() / kl.norm() < 1e-13);

  // The linear-model tangent is state independent.
  const MatX k2 = MatX(SolidAssembly(sp, lin).stiffness(random_vec(sp.n_s(), 3)));
  CHECK((kl - k2).norm() / kl.norm() < 1e-13);
}

TEST_CASE("uniaxial stretch energy has the closed-form value") {
  Mesh m = test::square_mesh(4, 4, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  SolidParams p;
  p.E = 12.0;
  p.nu = 0.25;
  p.model = SolidModel::linear;
  SolidAssembly solid(sp, p);
  const double alpha = 0.13;
  VecX d = interpolate(sp.disp, [&](const Vec2& x) { return Vec2(alpha * x.x(), 0.0); });
  const double expected = (p.mu() + 0.5 * p.lambda()) * alpha * alpha;  // area = 1
  CHECK(solid.energy(d) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("energy directional derivative equals the residual pairing") {
  Mesh m = test::square_mesh(3, 3, Subdomain::solid, 3, 4, 4, 4);
  Spaces sp = build_spaces(m);
  for (SolidModel model : {SolidModel::linear, SolidModel::svk}) {
    SolidParams p;
    p.E = 40.0;
    p.model = model;
    SolidAssembly solid(sp, p);
    const VecX d = 0.05 * random_vec(sp.n_s(), 11);
    const VecX dir = random_vec(sp.n_s(), 12);
    const double eps = 1e-6;
    const double fd = (solid.energy(d + eps * dir) - solid.energy(d - eps * dir)) / (2 * eps);
    const double pairing = dir.dot(solid.residual(d));
    CHECK(fd == doctest::Approx(pairing).epsilon(1e-7));
  }
}

TEST_CASE("solid manufactured solution: residual orthogonality at cubic rate") {
  SolidParams p;
  p.E = 30.0;
  p.nu = 0.3;
  p.model = SolidModel::linear;
  const double lam = p.lambda(), mu = p.mu();
  auto d_exact = [](const Vec2& x) {
    return Vec2(x.x() * x.x() * x.x() + x.y() * x.y(), x.x() * x.y() * x.y());
  };
  // Piola stress of the linear model for the field above.
  auto stress = [&](const Vec2& x) {
    Mat2 h;
    h << 3 * x.x() * x.x(), 2 * x.y(), x.y() * x.y(), 2 * x.x() * x.y();
    const Mat2 eps = 0.5 * (h + h.transpose());
    return Mat2(2 * mu * eps + lam * eps.trace() * Mat2::Identity());
  };
  std::vector<double> hs, errs;
  for (int n : {4, 8, 16}) {
    Mesh m = test::square_mesh(n, n, Subdomain::solid, 3, 4, 4, 4);
    Spaces sp = build_spaces(m);
    SolidParams pm = p;
    // Central-difference divergence of the analytic stress keeps the source
    // term independent of the hand-derived formulas.
    pm.body_force = [&](const Vec2& x, double) {
      const double e = 1e-5;
      Vec2 f;
      f[0] = -((stress(x + Vec2(e, 0))(0, 0) - stress(x - Vec2(e, 0))(0, 0)) / (2 * e) +
               (stress(x + Vec2(0, e))(0, 1) - stress(x - Vec2(0, e))(0, 1)) / (2 * e));
      f[1] = -((stress(x + Vec2(e, 0))(1, 0) - stress(x - Vec2(e, 0))(1, 0)) / (2 * e) +
               (stress(x + Vec2(0, e))(1, 1) - stress(x - Vec2(0, e))(1, 1)) / (2 * e));
      return f;
    };
    pm.neumann_data = [&](const Vec2& x, double) -> Vec2 {
      Vec2 n(0, 0);
      if (std::abs(x.x() - 1.0) < 1e-12) n = Vec2(1, 0);
      if (std::abs(x.y()) < 1e-12) n = Vec2(0, -1);
      if (std::abs(x.y() - 1.0) < 1e-12) n = Vec2(0, 1);
      return stress(x) * n;
    };
    SolidAssembly solid(sp, pm);
    const VecX d = interpolate(sp.disp, d_exact);
    const VecX r = solid.residual(d);
    // Rows with basis support away from the Dirichlet edge.
    double worst = 0;
    std::vector<bool> dir(sp.n_s(), false);
    for (int dof : sp.disp_part.dirichlet) dir[dof] = true;
    for (int dof = 0; dof < sp.n_s(); ++dof)
      if (!dir[dof]) worst = std::max(worst, std::abs(r[dof]));
    hs.push_back(1.0 / n);
    errs.push_back(worst);
  }
  CHECK(fit_rate(hs, errs) > 2.7);
}

TEST_CASE("fluid residual vanishes at rest") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidAssembly fluid(sp, FluidParams{});
  AleConfig ref = ale_reference(sp);
  const VecX zero_u = VecX::Zero(sp.n_u());
  const FluidBlocks b = fluid.blocks(zero_u, VecX::Zero(sp.n_p()), ref, zero_u, 0.0);
  CHECK(b.rprime.norm() == 0.0);
  CHECK(b.mass_u.norm() == 0.0);
  CHECK(b.div_u.norm() == 0.0);
}

TEST_CASE("uniform pressure residual equals the divergence transpose action") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidAssembly fluid(sp, FluidParams{});
  AleConfig ref = ale_reference(sp);
  const VecX p = VecX::Constant(sp.n_p(), 2.5);
  const VecX zero_u = VecX::Zero(sp.n_u());
  const VecX r = fluid.residual(zero_u, p, ref, zero_u, 0.0);
  const SpMat b = fluid.divergence(ref);
  CHECK((r - b.transpose() * p).lpNorm<Eigen::Infinity>() < 1e-13 * p.lpNorm<Eigen::Infinity>());
}

TEST_CASE("fluid jacobians match central finite differences") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidParams fp;
  fp.rho = 1.3;
  fp.mu = 0.02;
  FluidAssembly fluid(sp, fp);
  ExtensionOperator ext = build_extension(ExtensionKind::pseudo_elastic_fluid, sp);
  const AleConfig cfg = ale_from_interface(sp, ext, 0.02 * random_vec(sp.n_c, 17));

  const VecX u = random_vec(sp.n_u(), 1);
  const VecX p = random_vec(sp.n_p(), 2);
  const VecX w = random_vec(sp.n_u(), 3);
  SpMat dRdu, dRdp, dRdw;
  fluid.jacobians(u, p, cfg, w, 0.0, &dRdu, &dRdp, &dRdw);

  const double eps = 1e-6;
  for (unsigned probe = 0; probe < 5; ++probe) {
    const VecX vu = random_vec(sp.n_u(), 40 + probe);
    VecX fd = (fluid.residual(u + eps * vu, p, cfg, w, 0) -
               fluid.residual(u - eps * vu, p, cfg, w, 0)) /
              (2 * eps);
    CHECK((dRdu * vu - fd).lpNorm<Eigen::Infinity>() <
          1e-5 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));

    const VecX vp = random_vec(sp.n_p(), 60 + probe);
    fd = (fluid.residual(u, p + eps * vp, cfg, w, 0) -
          fluid.residual(u, p - eps * vp, cfg, w, 0)) /
         (2 * eps);
    CHECK((dRdp * vp - fd).lpNorm<Eigen::Infinity>() <
          1e-5 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));

    const VecX vw = random_vec(sp.n_u(), 80 + probe);
    fd = (fluid.residual(u, p, cfg, w + eps * vw, 0) -
          fluid.residual(u, p, cfg, w - eps * vw, 0)) /
         (2 * eps);
    CHECK((dRdw * vw - fd).lpNorm<Eigen::Infinity>() <
          1e-5 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
  }
}

TEST_CASE("pressure jacobian is independent of the velocity state") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidAssembly fluid(sp, FluidParams{});
  AleConfig ref = ale_reference(sp);
  SpMat a1, a2;
  const VecX w = VecX::Zero(sp.n_u());
  fluid.jacobians(random_vec(sp.n_u(), 5), VecX::Zero(sp.n_p()), ref, w, 0, nullptr, &a1, nullptr);
  fluid.jacobians(random_vec(sp.n_u(), 6), VecX::Zero(sp.n_p()), ref, w, 0, nullptr, &a2, nullptr);
  CHECK((MatX(a1) - MatX(a2)).norm() < 1e-13 * MatX(a1).norm());
}

TEST_CASE("mass matrix: constant velocity energy and dilation scaling") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidParams fp;
  fp.rho = 1.7;
  FluidAssembly fluid(sp, fp);
  AleConfig ref = ale_reference(sp);
  VecX c(sp.n_u());
  for (int n = 0; n < sp.vel.n_nodes(); ++n) {
    c[2 * n] = 0.8;
    c[2 * n + 1] = -0.1;
  }
  const double area = sp.mesh->subdomain_area(Subdomain::fluid);
  CHECK(c.dot(fluid.mass_times(ref, c)) ==
        doctest::Approx(fp.rho * (0.8 * 0.8 + 0.1 * 0.1) * area).epsilon(1e-12));

  // Uniform dilation x -> alpha x scales the velocity mass by alpha^2 in 2D.
  const double alpha = 1.15;
  VecX d(sp.n_u());
  for (int n = 0; n < sp.vel.n_nodes(); ++n) {
    d[2 * n] = (alpha - 1.0) * sp.vel.node_coords[n].x();
    d[2 * n + 1] = (alpha - 1.0) * sp.vel.node_coords[n].y();
  }
  AleConfig dilated = ale_from_field(sp, d);
  CHECK(c.dot(fluid.mass_times(dilated, c)) ==
        doctest::Approx(alpha * alpha * c.dot(fluid.mass_times(ref, c))).epsilon(1e-12));
}

TEST_CASE("divergence annihilates rigid motions") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidAssembly fluid(sp, FluidParams{});
  AleConfig ref = ale_reference(sp);
  VecX rot(sp.n_u());
  const Vec2 center(0.5, 0.25);
  for (int n = 0; n < sp.vel.n_nodes(); ++n) {
    const Vec2 r = sp.vel.node_coords[n] - center;
    rot[2 * n] = -r.y();
    rot[2 * n + 1] = r.x();
  }
  CHECK(fluid.div_times(ref, rot).lpNorm<Eigen::Infinity>() < 1e-13);
  VecX trans(sp.n_u());
  for (int n = 0; n < sp.vel.n_nodes(); ++n) {
    trans[2 * n] = 1.0;
    trans[2 * n + 1] = -2.0;
  }
  CHECK(fluid.div_times(ref, trans).lpNorm<Eigen::Infinity>() < 1e-13);
}

TEST_CASE("convective energy identity with the consistency term") {
  Mesh m = generate_benchmark(default_geometry(BenchmarkKind::box_isolated));
  Spaces sp = build_spaces(m);
  FluidParams fp;
  fp.rho = 1.0;
  fp.mu = 0.0;  // isolate convection + consistency term
  FluidAssembly fluid(sp, fp);
  AleConfig ref = ale_reference(sp);
  VecX u = VecX::Zero(sp.n_u());
  const VecX vals = random_vec(static_cast<int>(sp.vel_part.interior.size()), 23);
  scatter(u, sp.vel_part.interior, vals);
  const VecX r = fluid.residual(u, VecX::Zero(sp.n_p()), ref, VecX::Zero(sp.n_u()), 0.0);
  const double scale = std::abs(u.dot(fluid.mass_times(ref, u)));
  CHECK(std::abs(u.dot(r)) < 1e-10 * std::max(1.0, scale));
}

TEST_CASE("fluid manufactured solution: residual orthogonality at cubic rate") {
  const double rho = 1.0, mu = 0.7;
  auto u_exact = [](const Vec2& x) {
    return Vec2(x.y() * x.y() * x.y(), x.x() * x.x() * x.x());
  };
  auto p_exact = [](const Vec2& x) { return x.x() * x.x() - 0.5 * x.y(); };
  auto stress = [&](const Vec2& x) {
    Mat2 gu;
    gu << 0, 3 * x.y() * x.y(), 3 * x.x() * x.x(), 0;
    const Mat2 eps = 0.5 * (gu + gu.transpose());
    return Mat2(2 * mu * eps - p_exact(x) * Mat2::Identity());
  };
  auto momentum_source = [&](const Vec2& x, double) {
    const double e = 1e-5;
    Vec2 divs;
    divs[0] = (stress(x + Vec2(e, 0))(0, 0) - stress(x - Vec2(e, 0))(0, 0)) / (2 * e) +
              (stress(x + Vec2(0, e))(0, 1) - stress(x - Vec2(0, e))(0, 1)) / (2 * e);
    divs[1] = (stress(x + Vec2(e, 0))(1, 0) - stress(x - Vec2(e, 0))(1, 0)) / (2 * e) +
              (stress(x + Vec2(0, e))(1, 1) - stress(x - Vec2(0, e))(1, 1)) / (2 * e);
    Mat2 gu;
    gu << 0, 3 * x.y() * x.y(), 3 * x.x() * x.x(), 0;
    const Vec2 conv = rho * gu * u_exact(x);
    return Vec2(conv - divs);
  };

  std::vector<double> hs, errs;
  for (int n : {4, 8, 16}) {
    Mesh m = test::square_mesh(n, n, Subdomain::fluid, 1, 2, 1, 1);
    Spaces sp = build_spaces(m);
    FluidParams fp;
    fp.rho = rho;
    fp.mu = mu;
    fp.body_force = momentum_source;
    fp.neumann_data = [&](const Vec2& x, double) { return Vec2(stress(x) * Vec2(1, 0)); };
    FluidAssembly fluid(sp, fp);
    AleConfig ref = ale_reference(sp);
    VecX u(sp.n_u());
    for (int k = 0; k < sp.vel.n_nodes(); ++k) {
      const Vec2 val = u_exact(sp.vel.node_coords[k]);
      u[2 * k] = val[0];
      u[2 * k + 1] = val[1];
    }
    VecX p(sp.n_p());
    for (int k = 0; k < sp.pres.n_nodes(); ++k) p[k] = p_exact(sp.pres.node_coords[k]);
    const VecX r = fluid.residual(u, p, ref, VecX::Zero(sp.n_u()), 0.0);
    std::vector<bool> dir(sp.n_u(), false);
    for (int dof : sp.vel_part.dirichlet) dir[dof] = true;
    double worst = 0;
    for (int dof = 0; dof < sp.n_u(); ++dof)
      if (!dir[dof]) worst = std::max(worst, std::abs(r[dof]));
    hs.push_back(1.0 / n);
    errs.push_back(worst);
  }
  CHECK(fit_rate(hs, errs) > 2.7);
}
