#include "fsi/postproc.hpp"

#include <algorithm>
#include <cmath>

namespace fsi {

TimeSeries::TimeSeries(std::vector<std::string> channel_names)
    : names(std::move(channel_names)), columns(names.size()) {}

void TimeSeries::add_row(double t, const std::vector<double>& values) {
  require(values.size() == names.size(), Error::Kind::internal, "time series row width mismatch");
  require(times.empty() || t > times.back(), Error::Kind::data,
          "time series times must be strictly increasing");
  times.push_back(t);
  for (std::size_t i = 0; i < values.size(); ++i) columns[i].push_back(values[i]);
}

int TimeSeries::channel(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  fail(Error::Kind::data, "unknown time series channel '" + name + "'");
}

const std::vector<double>& TimeSeries::column(const std::string& name) const {
  return columns[channel(name)];
}

std::vector<int> wetted_force_dofs(const FsiSystem& sys) {
  const Spaces& sp = sys.sp();
  Vec2 lo = sys.mesh.nodes[0], hi = sys.mesh.nodes[0];
  for (const auto& n : sys.mesh.nodes) {
    lo = lo.cwiseMin(n);
    hi = hi.cwiseMax(n);
  }
  const double tol = 1e-9 * sys.diameter;
  std::vector<bool> mark(sp.n_u(), false);
  for (int d : sp.vel_part.iface) mark[d] = true;
  for (const auto& facet : sp.fluid_dirichlet_fe) {
    // A Dirichlet facet on the bounding box is an outer wall, not an obstacle.
    bool outer = true;
    for (int k = 0; k < 2; ++k) {
      const Vec2 x = sp.vel.node_coords[facet.nodes[k]];
      const bool on_box = std::abs(x.x() - lo.x()) < tol || std::abs(x.x() - hi.x()) < tol ||
                          std::abs(x.y() - lo.y()) < tol || std::abs(x.y() - hi.y()) < tol;
      if (!on_box) outer = false;
    }
    if (outer) continue;
    for (int n : facet.nodes)
      for (int c = 0; c < 2; ++c) mark[sp.vel.dof(n, c)] = true;
  }
  std::vector<int> dofs;
  for (int d = 0; d < sp.n_u(); ++d)
    if (mark[d]) dofs.push_back(d);
  return dofs;
}

Vec2 interface_forces(const FsiSystem& sys, const VecX& inst_residual_f) {
  // The residual paired with a unit test field is the traction on the fluid;
  // the reported force is the one exerted by the fluid on the structure.
  Vec2 f = Vec2::Zero();
  for (int d : wetted_force_dofs(sys)) f[d % 2] -= inst_residual_f[d];
  return f;
}

Vec2 traction_direct(const FsiSystem& sys, const VecX& u, const VecX& p) {
  const Spaces& sp = sys.sp();
  const double mu = sys.fluid->params().mu;
  Vec2 total = Vec2::Zero();
  const LineRule lr = gauss_legendre_01(4);

  std::vector<bool> wetted_facet(sys.mesh.facets.size(), false);
  {
    std::vector<bool> mark(sp.n_u(), false);
    for (int d : wetted_force_dofs(sys)) mark[d] = true;
    for (const auto& facet : sp.iface_fe_f) wetted_facet[facet.facet] = true;
    for (const auto& facet : sp.fluid_dirichlet_fe)
      if (mark[sp.vel.dof(facet.nodes[0], 0)] && mark[sp.vel.dof(facet.nodes[1], 0)])
        wetted_facet[facet.facet] = true;
  }

  auto eval_facet = [&](const FacetFe& facet) {
    // Reference coordinates of the facet endpoints within the owner triangle.
    int owner = -1;
    const auto& mesh = sys.mesh;
    const Facet& mf = mesh.facets[facet.facet];
    for (int e = 0; e < sp.fluid_fe.n_elems(); ++e) {
      const auto& tri = mesh.triangles[sp.fluid_fe.tris[e]];
      int found = 0;
      for (int k = 0; k < 3; ++k)
        if (tri.v[k] == mf.v[0] || tri.v[k] == mf.v[1]) ++found;
      if (found == 2) {
        owner = e;
        break;
      }
    }
    require(owner >= 0, Error::Kind::internal, "facet owner not found");
    const auto& tri = mesh.triangles[sp.fluid_fe.tris[owner]];
    auto ref_coord = [&](int vertex) {
      if (tri.v[0] == vertex) return Vec2(0, 0);
      if (tri.v[1] == vertex) return Vec2(1, 0);
      return Vec2(0, 1);
    };
    const Vec2 ra = ref_coord(mf.v[0]), rb = ref_coord(mf.v[1]);
    const Vec2 a = mesh.nodes[tri.v[0]], b = mesh.nodes[tri.v[1]], c = mesh.nodes[tri.v[2]];
    Mat2 aff;
    aff.col(0) = b - a;
    aff.col(1) = c - a;
    const Mat2 inv_t = aff.inverse().transpose();

    for (std::size_t q = 0; q < lr.points.size(); ++q) {
      const Vec2 xi = ra + lr.points[q] * (rb - ra);
      Vec2 dn[6];
      p2_shape_grad(xi, dn);
      double pn[3];
      p1_shape(xi, pn);
      Mat2 grad_u = Mat2::Zero();
      for (int k = 0; k < 6; ++k) {
        const Vec2 g = inv_t * dn[k];
        const int n = sp.vel.local_node[sp.tri_p2[sp.fluid_fe.tris[owner]][k]];
        grad_u(0, 0) += u[2 * n] * g[0];
        grad_u(0, 1) += u[2 * n] * g[1];
        grad_u(1, 0) += u[2 * n + 1] * g[0];
        grad_u(1, 1) += u[2 * n + 1] * g[1];
      }
      double pq = 0;
      for (int k = 0; k < 3; ++k) {
        const int n = sp.pres.local_node[tri.v[k]];
        pq += p[n] * pn[k];
      }
      const Mat2 sigma =
          mu * (grad_u + grad_u.transpose()) - pq * Mat2::Identity();
      // facet.normal points out of the fluid; the force on the structure uses
      // the opposite orientation.
      total -= lr.weights[q] * facet.length * (sigma * facet.normal);
    }
  };
  for (const auto& facet : sp.iface_fe_f)
    if (wetted_facet[facet.facet]) eval_facet(facet);
  for (const auto& facet : sp.fluid_dirichlet_fe)
    if (wetted_facet[facet.facet]) eval_facet(facet);
  return total;
}

Vec2 probe_displacement(const Spaces& sp, const VecX& d, const Vec2& point) {
  const auto& fe = sp.solid_fe;
  const auto& mesh = *sp.mesh;
  for (int e = 0; e < fe.n_elems(); ++e) {
    const auto& tri = mesh.triangles[fe.tris[e]];
    const Vec2 a = mesh.nodes[tri.v[0]], b = mesh.nodes[tri.v[1]], c = mesh.nodes[tri.v[2]];
    Mat2 aff;
    aff.col(0) = b - a;
    aff.col(1) = c - a;
    const Vec2 xi = aff.inverse() * (point - a);
    const double tol = 1e-10;
    if (xi.x() < -tol || xi.y() < -tol || xi.x() + xi.y() > 1 + tol) continue;
    double n[6];
    p2_shape(xi, n);
    Vec2 out = Vec2::Zero();
    for (int k = 0; k < 6; ++k) {
      const int node = fe.nodes[e][k];
      out[0] += d[2 * node] * n[k];
      out[1] += d[2 * node + 1] * n[k];
    }
    return out;
  }
  fail(Error::Kind::data, "probe point (" + std::to_string(point.x()) + ", " +
                              std::to_string(point.y()) + ") is outside the solid domain");
}

Spectrum amplitude_spectrum(const TimeSeries& series, const std::string& channel, double t0,
                            double t1) {
  const auto& x = series.column(channel);
  std::vector<double> window;
  std::vector<double> wt;
  for (std::size_t i = 0; i < series.times.size(); ++i)
    if (series.times[i] >= t0 - 1e-12 && series.times[i] <= t1 + 1e-12) {
      window.push_back(x[i]);
      wt.push_back(series.times[i]);
    }
  const int n = static_cast<int>(window.size());
  require(n >= 4, Error::Kind::data, "spectrum window holds fewer than 4 samples");
  const double dt = wt[1] - wt[0];
  for (int i = 1; i < n; ++i)
    require(std::abs(wt[i] - wt[i - 1] - dt) < 1e-9 * dt, Error::Kind::data,
            "spectrum requires uniform sampling");
  double mean = 0;
  for (double v : window) mean += v;
  mean /= n;
  for (double& v : window) v -= mean;

  Spectrum spec;
  const int nhalf = n / 2;
  for (int k = 0; k <= nhalf; ++k) {
    double re = 0, im = 0;
    for (int j = 0; j < n; ++j) {
      const double ph = -2.0 * M_PI * k * j / n;
      re += window[j] * std::cos(ph);
      im += window[j] * std::sin(ph);
    }
    const double mag = std::hypot(re, im);
    double amp = 2.0 * mag / n;
    if (k == 0 || (n % 2 == 0 && k == nhalf)) amp = mag / n;
    spec.freq.push_back(k / (n * dt));
    spec.amplitude.push_back(amp);
  }
  spec.dominant_bin = 1;
  for (int k = 1; k <= nhalf; ++k)
    if (spec.amplitude[k] > spec.amplitude[spec.dominant_bin]) spec.dominant_bin = k;
  spec.dominant_freq = spec.freq[spec.dominant_bin];
  return spec;
}

ConvergenceFit convergence_fit(const std::vector<double>& dts,
                               const std::vector<double>& errors) {
  require(dts.size() == errors.size() && dts.size() >= 2, Error::Kind::config,
          "convergence fit needs at least two (dt, error) pairs");
  ConvergenceFit fit;
  const int n = static_cast<int>(dts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    require(dts[i] > 0 && errors[i] > 0, Error::Kind::config,
            "convergence fit needs positive dt and error values");
    const double x = std::log(dts[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  fit.rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - fit.rate * sx) / n;
  for (int i = 0; i < n; ++i) {
    const double r = std::log(errors[i]) - (intercept + fit.rate * std::log(dts[i]));
    fit.fit_residual += r * r;
  }
  fit.fit_residual = std::sqrt(fit.fit_residual);
  // Errors sorted by dt must decrease with dt.
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return dts[a] < dts[b]; });
  for (int i = 1; i < n; ++i)
    if (errors[order[i]] < errors[order[i - 1]]) fit.monotone = false;
  return fit;
}

double total_energy(const FsiSystem& sys, const HfState& state) {
  return energy_sample(sys, state).total();
}

}  // namespace fsi
