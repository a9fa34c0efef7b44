#pragma once

#include <array>
#include <vector>

#include "fsi/mesh.hpp"
#include "fsi/quadrature.hpp"

namespace fsi {

enum class Field { fluid_velocity, fluid_pressure, solid_displacement };

struct FunctionSpace {
  Field field;
  int degree = 2;
  int components = 2;
  int n_dofs = 0;
  std::vector<int> global_node;  // space node -> p2 node id (vertex id for pressure)
  std::vector<int> local_node;   // p2 node id (vertex id) -> space node, -1 if absent
  std::vector<Vec2> node_coords;

  int n_nodes() const { return static_cast<int>(global_node.size()); }
  int dof(int node, int comp) const { return components == 2 ? 2 * node + comp : node; }
  int node_of_dof(int d) const { return components == 2 ? d / 2 : d; }
  int comp_of_dof(int d) const { return components == 2 ? d % 2 : 0; }
};

// Disjoint interface / interior / Dirichlet split of a vector space. The
// interface lists of the fluid-velocity and solid-displacement partitions are
// aligned: slot k refers to the same physical node and component in both.
struct DofPartition {
  std::vector<int> iface;      // size N_c
  std::vector<int> interior;
  std::vector<int> dirichlet;

  int n_iface() const { return static_cast<int>(iface.size()); }
};

// Per-subdomain volume integration tables: space-local P2 connectivity and
// reference-configuration shape data at quadrature points.
struct SubdomainFe {
  std::vector<int> tris;                      // mesh triangle ids
  std::vector<std::array<int, 6>> nodes;      // P2 space nodes per element
  std::vector<std::array<int, 3>> pnodes;     // P1 pressure nodes (fluid only)
  QuadratureRule rule;
  MatX shape;                                 // nq x 6
  MatX pshape;                                // nq x 3
  std::vector<double> detA;                   // per element (affine Jacobian)
  std::vector<Vec2> dshape;                   // [elem][q][k] flattened, size ne*nq*6
  std::vector<Vec2> pdshape;                  // per element: 3 constant P1 gradients

  int n_elems() const { return static_cast<int>(tris.size()); }
  int n_q() const { return static_cast<int>(rule.points.size()); }
  const Vec2& grad(int e, int q, int k) const { return dshape[(e * n_q() + q) * 6 + k]; }
  const Vec2& pgrad(int e, int k) const { return pdshape[e * 3 + k]; }
  double w(int e, int q) const { return rule.weights[q] * detA[e]; }
};

struct FacetFe {
  int facet = -1;
  std::array<int, 3> nodes{};  // space nodes: end a, end b, midpoint
  double length = 0.0;
  Vec2 tangent = Vec2::Zero();
  Vec2 normal = Vec2::Zero();  // outward w.r.t. the owning subdomain
};

struct Spaces {
  const Mesh* mesh = nullptr;

  // P2 node layer: mesh vertices first, then edge nodes.
  int n_vertices = 0;
  std::vector<Vec2> p2_coords;
  std::vector<std::array<int, 6>> tri_p2;  // per mesh triangle (v0,v1,v2,e01,e12,e20)

  FunctionSpace vel, pres, disp;
  DofPartition vel_part, disp_part;
  int n_c = 0;

  SubdomainFe fluid_fe, solid_fe;
  std::vector<FacetFe> iface_fe_f, iface_fe_s;      // interface facets in each numbering
  std::vector<FacetFe> fluid_neumann_fe;            // velocity numbering
  std::vector<FacetFe> solid_neumann_fe;            // displacement numbering
  std::vector<FacetFe> fluid_dirichlet_fe;          // velocity numbering (force extraction)
  bool fluid_enclosed = false;                      // no fluid Neumann boundary

  int n_u() const { return vel.n_dofs; }
  int n_p() const { return pres.n_dofs; }
  int n_s() const { return disp.n_dofs; }
};

Spaces build_spaces(const Mesh& mesh, int quad_degree = 5);

enum class InnerProductKind { L2_interface, H1_fluid, H1_solid, L2_pressure };

struct InnerProduct {
  InnerProductKind kind;
  SpMat gram;  // symmetric positive (semi)definite on the relevant space
};

// All Gram matrices are assembled on the reference configuration.
InnerProduct assemble_inner_product(InnerProductKind kind, const Spaces& spaces);

// Mask helpers.
VecX gather(const VecX& full, const std::vector<int>& idx);
void scatter(VecX& full, const std::vector<int>& idx, const VecX& values);
void scatter_add(VecX& full, const std::vector<int>& idx, const VecX& values);

// P2 shape values / reference gradients on the unit triangle.
void p2_shape(const Vec2& xi, double N[6]);
void p2_shape_grad(const Vec2& xi, Vec2 dN[6]);
void p1_shape(const Vec2& xi, double N[3]);

// Quadratic line shapes on [0,1], nodes (0, 1, 1/2).
void line_p2_shape(double t, double N[3]);

}  // namespace fsi
