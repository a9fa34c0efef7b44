#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsi/core.hpp"

namespace fsi {

enum class Subdomain : int { fluid = 0, solid = 1 };

enum class TagRole : int {
  fluid_dirichlet = 0,
  fluid_neumann = 1,
  solid_dirichlet = 2,
  solid_neumann = 3,
  interface_boundary = 4,
};

const char* to_string(TagRole role);
std::optional<TagRole> tag_role_from_string(const std::string& name);

struct Triangle {
  std::array<int, 3> v;
  Subdomain subdomain;
};

struct Facet {
  std::array<int, 2> v;
  int tag = 0;
};

// Conforming two-subdomain triangulation. Immutable after construction;
// validate() must pass before the mesh is used by any downstream module.
struct Mesh {
  std::vector<Vec2> nodes;
  std::vector<Triangle> triangles;
  std::vector<Facet> facets;
  std::map<int, TagRole> tag_roles;

  TagRole facet_role(const Facet& f) const;
  double signed_area(int tri) const;
  double subdomain_area(Subdomain s) const;

  // Checks orientation, facet/role coverage of both subdomain boundaries and
  // verbatim sharing of every interface facet by one fluid and one solid
  // triangle. Fills the interface pairing table.
  void validate();

  // interface facet index -> (fluid triangle, solid triangle)
  std::vector<std::array<int, 3>> interface_pairing;  // {facet, fluid_tri, solid_tri}

  std::uint64_t hash() const;
};

// Node-index pairing between the fluid and solid sides of the interface.
// In a conforming mesh both sides use the same node ids; matching is done
// by coordinates so that duplicated-node inputs are rejected loudly.
struct InterfaceTraceMap {
  std::vector<std::array<int, 2>> pairs;  // {fluid node, solid node}
};

InterfaceTraceMap interface_trace_map(const Mesh& mesh, double tol = 1e-12);

Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

// Gmsh v2 ASCII subset: $Nodes + $Elements with line (1) and triangle (2)
// entries; physical tags map to subdomains and facet roles via the caller.
Mesh load_gmsh(const std::string& path, const std::vector<int>& fluid_regions,
               const std::vector<int>& solid_regions, const std::map<int, TagRole>& tag_roles);

}  // namespace fsi
