#include "fsi/spaces.hpp"

#include <algorithm>
#include <map>

namespace fsi {

void p2_shape(const Vec2& xi, double N[6]) {
  const double l0 = 1.0 - xi.x() - xi.y(), l1 = xi.x(), l2 = xi.y();
  N[0] = l0 * (2 * l0 - 1);
  N[1] = l1 * (2 * l1 - 1);
  N[2] = l2 * (2 * l2 - 1);
  N[3] = 4 * l0 * l1;
  N[4] = 4 * l1 * l2;
  N[5] = 4 * l2 * l0;
}

void p2_shape_grad(const Vec2& xi, Vec2 dN[6]) {
  const double l0 = 1.0 - xi.x() - xi.y(), l1 = xi.x(), l2 = xi.y();
  const Vec2 g0(-1, -1), g1(1, 0), g2(0, 1);
  dN[0] = (4 * l0 - 1) * g0;
  dN[1] = (4 * l1 - 1) * g1;
  dN[2] = (4 * l2 - 1) * g2;
  dN[3] = 4 * (l0 * g1 + l1 * g0);
  dN[4] = 4 * (l1 * g2 + l2 * g1);
  dN[5] = 4 * (l2 * g0 + l0 * g2);
}

void p1_shape(const Vec2& xi, double N[3]) {
  N[0] = 1.0 - xi.x() - xi.y();
  N[1] = xi.x();
  N[2] = xi.y();
}

void line_p2_shape(double t, double N[3]) {
  N[0] = (1 - t) * (1 - 2 * t);
  N[1] = t * (2 * t - 1);
  N[2] = 4 * t * (1 - t);
}

VecX gather(const VecX& full, const std::vector<int>& idx) {
  VecX out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = full[idx[i]];
  return out;
}

void scatter(VecX& full, const std::vector<int>& idx, const VecX& values) {
  for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] = values[i];
}

void scatter_add(VecX& full, const std::vector<int>& idx, const VecX& values) {
  for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] += values[i];
}

namespace {

using Edge = std::array<int, 2>;

Edge sorted_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

FunctionSpace make_space(Field field, int components, int n_entities,
                         const std::vector<bool>& present, const std::vector<Vec2>& coords) {
  FunctionSpace sp;
  sp.field = field;
  sp.degree = (field == Field::fluid_pressure) ? 1 : 2;
  sp.components = components;
  sp.local_node.assign(n_entities, -1);
  for (int n = 0; n < n_entities; ++n) {
    if (!present[n]) continue;
    sp.local_node[n] = static_cast<int>(sp.global_node.size());
    sp.global_node.push_back(n);
    sp.node_coords.push_back(coords[n]);
  }
  sp.n_dofs = components * sp.n_nodes();
  return sp;
}

SubdomainFe make_volume_fe(const Mesh& mesh, const Spaces& sp, Subdomain sd, int quad_degree) {
  SubdomainFe fe;
  fe.rule = quadrature_rule(quad_degree);
  const int nq = fe.n_q();
  fe.shape.resize(nq, 6);
  fe.pshape.resize(nq, 3);
  std::vector<std::array<Vec2, 6>> ref_grad(nq);
  for (int q = 0; q < nq; ++q) {
    double N[6], P[3];
    Vec2 dN[6];
    p2_shape(fe.rule.points[q], N);
    p2_shape_grad(fe.rule.points[q], dN);
    p1_shape(fe.rule.points[q], P);
    for (int k = 0; k < 6; ++k) fe.shape(q, k) = N[k];
    for (int k = 0; k < 3; ++k) fe.pshape(q, k) = P[k];
    for (int k = 0; k < 6; ++k) ref_grad[q][k] = dN[k];
  }
  const FunctionSpace& space = (sd == Subdomain::fluid) ? sp.vel : sp.disp;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    if (mesh.triangles[t].subdomain != sd) continue;
    fe.tris.push_back(t);
    std::array<int, 6> loc{};
    for (int k = 0; k < 6; ++k) loc[k] = space.local_node[sp.tri_p2[t][k]];
    fe.nodes.push_back(loc);
    if (sd == Subdomain::fluid) {
      std::array<int, 3> ploc{};
      for (int k = 0; k < 3; ++k) ploc[k] = sp.pres.local_node[mesh.triangles[t].v[k]];
      fe.pnodes.push_back(ploc);
    }
    const Vec2 a = mesh.nodes[mesh.triangles[t].v[0]];
    const Vec2 b = mesh.nodes[mesh.triangles[t].v[1]];
    const Vec2 c = mesh.nodes[mesh.triangles[t].v[2]];
    Mat2 A;
    A.col(0) = b - a;
    A.col(1) = c - a;
    const double det = A.determinant();
    fe.detA.push_back(det);
    const Mat2 invT = A.inverse().transpose();
    for (int q = 0; q < nq; ++q)
      for (int k = 0; k < 6; ++k) fe.dshape.push_back(invT * ref_grad[q][k]);
    const Vec2 gl0(-1, -1), gl1(1, 0), gl2(0, 1);
    fe.pdshape.push_back(invT * gl0);
    fe.pdshape.push_back(invT * gl1);
    fe.pdshape.push_back(invT * gl2);
  }
  return fe;
}

FacetFe make_facet(const Mesh& mesh, const Spaces& sp, const FunctionSpace& space, int fi,
                   int owner_tri) {
  const Facet& f = mesh.facets[fi];
  FacetFe fe;
  fe.facet = fi;
  const Edge e = sorted_edge(f.v[0], f.v[1]);
  // Locate the edge midpoint node through the owning triangle's table.
  int mid = -1;
  const auto& t = mesh.triangles[owner_tri];
  for (int k = 0; k < 3; ++k) {
    if (sorted_edge(t.v[k], t.v[(k + 1) % 3]) == e) mid = sp.tri_p2[owner_tri][3 + k];
  }
  require(mid >= 0, Error::Kind::internal, "facet not an edge of its owner triangle");
  fe.nodes = {space.local_node[f.v[0]], space.local_node[f.v[1]], space.local_node[mid]};
  const Vec2 a = mesh.nodes[f.v[0]], b = mesh.nodes[f.v[1]];
  fe.length = (b - a).norm();
  fe.tangent = (b - a) / fe.length;
  Vec2 n(fe.tangent.y(), -fe.tangent.x());
  const Vec2 centroid = (mesh.nodes[t.v[0]] + mesh.nodes[t.v[1]] + mesh.nodes[t.v[2]]) / 3.0;
  if (n.dot(0.5 * (a + b) - centroid) < 0) n = -n;
  fe.normal = n;
  return fe;
}

}  // namespace

Spaces build_spaces(const Mesh& mesh, int quad_degree) {
  Spaces sp;
  sp.mesh = &mesh;
  sp.n_vertices = static_cast<int>(mesh.nodes.size());
  sp.p2_coords = mesh.nodes;
  sp.tri_p2.resize(mesh.triangles.size());

  std::map<Edge, int> edge_node;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      sp.tri_p2[t][k] = tri.v[k];
      const Edge e = sorted_edge(tri.v[k], tri.v[(k + 1) % 3]);
      auto [it, inserted] = edge_node.emplace(e, static_cast<int>(sp.p2_coords.size()));
      if (inserted) sp.p2_coords.push_back(0.5 * (mesh.nodes[e[0]] + mesh.nodes[e[1]]));
      sp.tri_p2[t][3 + k] = it->second;
    }
  }
  const int n_p2 = static_cast<int>(sp.p2_coords.size());

  std::vector<bool> in_fluid(n_p2, false), in_solid(n_p2, false), vert_fluid(sp.n_vertices, false);
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const bool fluid = mesh.triangles[t].subdomain == Subdomain::fluid;
    for (int k = 0; k < 6; ++k) (fluid ? in_fluid : in_solid)[sp.tri_p2[t][k]] = true;
    if (fluid)
      for (int k = 0; k < 3; ++k) vert_fluid[mesh.triangles[t].v[k]] = true;
  }

  sp.vel = make_space(Field::fluid_velocity, 2, n_p2, in_fluid, sp.p2_coords);
  sp.disp = make_space(Field::solid_displacement, 2, n_p2, in_solid, sp.p2_coords);
  {
    std::vector<bool> pv(vert_fluid.begin(), vert_fluid.end());
    pv.resize(n_p2, false);
    sp.pres = make_space(Field::fluid_pressure, 1, n_p2, pv, sp.p2_coords);
  }

  // Facet node flags drive the partition.
  std::vector<bool> on_iface(n_p2, false), on_fdir(n_p2, false), on_sdir(n_p2, false);
  std::map<Edge, int> facet_mid;  // filled lazily below via triangle tables
  auto facet_p2_nodes = [&](const Facet& f) {
    std::array<int, 3> out{f.v[0], f.v[1], -1};
    auto it = edge_node.find(sorted_edge(f.v[0], f.v[1]));
    require(it != edge_node.end(), Error::Kind::data, "facet is not a triangle edge");
    out[2] = it->second;
    return out;
  };
  int n_fluid_neumann = 0;
  for (const auto& f : mesh.facets) {
    const TagRole role = mesh.facet_role(f);
    for (int n : facet_p2_nodes(f)) {
      if (role == TagRole::interface_boundary) on_iface[n] = true;
      if (role == TagRole::fluid_dirichlet) on_fdir[n] = true;
      if (role == TagRole::solid_dirichlet) on_sdir[n] = true;
    }
    if (role == TagRole::fluid_neumann) ++n_fluid_neumann;
  }
  sp.fluid_enclosed = (n_fluid_neumann == 0);

  // Interface nodes pinned by either field's Dirichlet boundary are assigned
  // to the Dirichlet set of both spaces, keeping the two interface lists
  // aligned and the condensed interface system nonsingular.
  auto build_partition = [&](const FunctionSpace& space, bool fluid) {
    DofPartition part;
    for (int ln = 0; ln < space.n_nodes(); ++ln) {
      const int n = space.global_node[ln];
      const bool own_dir = fluid ? on_fdir[n] : on_sdir[n];
      const bool other_dir = fluid ? on_sdir[n] : on_fdir[n];
      const bool pinned = own_dir || (on_iface[n] && other_dir);
      for (int c = 0; c < 2; ++c) {
        const int d = space.dof(ln, c);
        if (pinned)
          part.dirichlet.push_back(d);
        else if (on_iface[n])
          part.iface.push_back(d);
        else
          part.interior.push_back(d);
      }
    }
    return part;
  };
  sp.vel_part = build_partition(sp.vel, true);
  sp.disp_part = build_partition(sp.disp, false);
  require(sp.vel_part.n_iface() == sp.disp_part.n_iface(), Error::Kind::internal,
          "interface dof lists of fluid and solid do not align");
  sp.n_c = sp.vel_part.n_iface();
  for (int k = 0; k < sp.n_c; ++k) {
    const int fn = sp.vel.global_node[sp.vel.node_of_dof(sp.vel_part.iface[k])];
    const int sn = sp.disp.global_node[sp.disp.node_of_dof(sp.disp_part.iface[k])];
    require(fn == sn, Error::Kind::internal, "interface trace slots are misaligned");
  }

  sp.fluid_fe = make_volume_fe(mesh, sp, Subdomain::fluid, quad_degree);
  sp.solid_fe = make_volume_fe(mesh, sp, Subdomain::solid, quad_degree);

  // Facet tables. Interface facets get both a fluid-side and a solid-side view.
  std::map<Edge, std::array<int, 2>> owner;  // edge -> {fluid tri, solid tri}
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < 3; ++k) {
      auto& o = owner.try_emplace(sorted_edge(tri.v[k], tri.v[(k + 1) % 3]),
                                  std::array<int, 2>{-1, -1}).first->second;
      o[tri.subdomain == Subdomain::fluid ? 0 : 1] = t;
    }
  }
  for (int fi = 0; fi < static_cast<int>(mesh.facets.size()); ++fi) {
    const auto& f = mesh.facets[fi];
    const TagRole role = mesh.facet_role(f);
    const auto& o = owner.at(sorted_edge(f.v[0], f.v[1]));
    switch (role) {
      case TagRole::interface_boundary:
        sp.iface_fe_f.push_back(make_facet(mesh, sp, sp.vel, fi, o[0]));
        sp.iface_fe_s.push_back(make_facet(mesh, sp, sp.disp, fi, o[1]));
        break;
      case TagRole::fluid_neumann:
        sp.fluid_neumann_fe.push_back(make_facet(mesh, sp, sp.vel, fi, o[0]));
        break;
      case TagRole::solid_neumann:
        sp.solid_neumann_fe.push_back(make_facet(mesh, sp, sp.disp, fi, o[1]));
        break;
      case TagRole::fluid_dirichlet:
        sp.fluid_dirichlet_fe.push_back(make_facet(mesh, sp, sp.vel, fi, o[0]));
        break;
      case TagRole::solid_dirichlet:
        break;
    }
  }
  return sp;
}

InnerProduct assemble_inner_product(InnerProductKind kind, const Spaces& sp) {
  InnerProduct ip;
  ip.kind = kind;
  std::vector<Triplet> trip;

  auto h1_gram = [&](const SubdomainFe& fe, const FunctionSpace& space) {
    SpMat g(space.n_dofs, space.n_dofs);
    for (int e = 0; e < fe.n_elems(); ++e) {
      for (int q = 0; q < fe.n_q(); ++q) {
        const double w = fe.w(e, q);
        for (int k = 0; k < 6; ++k)
          for (int l = 0; l < 6; ++l) {
            const double v =
                w * (fe.shape(q, k) * fe.shape(q, l) + fe.grad(e, q, k).dot(fe.grad(e, q, l)));
            for (int c = 0; c < 2; ++c)
              trip.emplace_back(space.dof(fe.nodes[e][k], c), space.dof(fe.nodes[e][l], c), v);
          }
      }
    }
    g.setFromTriplets(trip.begin(), trip.end());
    return g;
  };

  switch (kind) {
    case InnerProductKind::H1_fluid:
      ip.gram = h1_gram(sp.fluid_fe, sp.vel);
      break;
    case InnerProductKind::H1_solid:
      ip.gram = h1_gram(sp.solid_fe, sp.disp);
      break;
    case InnerProductKind::L2_pressure: {
      SpMat g(sp.n_p(), sp.n_p());
      const auto& fe = sp.fluid_fe;
      for (int e = 0; e < fe.n_elems(); ++e)
        for (int q = 0; q < fe.n_q(); ++q) {
          const double w = fe.w(e, q);
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
              trip.emplace_back(fe.pnodes[e][k], fe.pnodes[e][l],
                                w * fe.pshape(q, k) * fe.pshape(q, l));
        }
      g.setFromTriplets(trip.begin(), trip.end());
      ip.gram = g;
      break;
    }
    case InnerProductKind::L2_interface: {
      // Trace mass on the reference interface, in aligned trace-slot numbering.
      std::vector<int> slot_of_vel_dof(sp.n_u(), -1);
      for (int k = 0; k < sp.n_c; ++k) slot_of_vel_dof[sp.vel_part.iface[k]] = k;
      SpMat g(sp.n_c, sp.n_c);
      const LineRule lr = gauss_legendre_01(4);
      for (const auto& facet : sp.iface_fe_f) {
        for (std::size_t q = 0; q < lr.points.size(); ++q) {
          double N[3];
          line_p2_shape(lr.points[q], N);
          const double w = lr.weights[q] * facet.length;
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
              for (int c = 0; c < 2; ++c) {
                const int a = slot_of_vel_dof[sp.vel.dof(facet.nodes[k], c)];
                const int b = slot_of_vel_dof[sp.vel.dof(facet.nodes[l], c)];
                if (a >= 0 && b >= 0) trip.emplace_back(a, b, w * N[k] * N[l]);
              }
        }
      }
      g.setFromTriplets(trip.begin(), trip.end());
      ip.gram = g;
      break;
    }
  }
  return ip;
}

}  // namespace fsi
