#include "fsi/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fsi {

namespace {

using Edge = std::array<int, 2>;

Edge sorted_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

std::string facet_str(const Facet& f) {
  return "(" + std::to_string(f.v[0]) + "," + std::to_string(f.v[1]) + ") tag " +
         std::to_string(f.tag);
}

}  // namespace

const char* to_string(TagRole role) {
  switch (role) {
    case TagRole::fluid_dirichlet: return "fluid_dirichlet";
    case TagRole::fluid_neumann: return "fluid_neumann";
    case TagRole::solid_dirichlet: return "solid_dirichlet";
    case TagRole::solid_neumann: return "solid_neumann";
    case TagRole::interface_boundary: return "interface";
  }
  return "?";
}

std::optional<TagRole> tag_role_from_string(const std::string& name) {
  for (TagRole r : {TagRole::fluid_dirichlet, TagRole::fluid_neumann, TagRole::solid_dirichlet,
                    TagRole::solid_neumann, TagRole::interface_boundary}) {
    if (name == to_string(r)) return r;
  }
  return std::nullopt;
}

TagRole Mesh::facet_role(const Facet& f) const {
  auto it = tag_roles.find(f.tag);
  require(it != tag_roles.end(), Error::Kind::data,
          "facet " + facet_str(f) + ": tag has no assigned role");
  return it->second;
}

double Mesh::signed_area(int tri) const {
  const auto& t = triangles[tri];
  const Vec2 a = nodes[t.v[0]], b = nodes[t.v[1]], c = nodes[t.v[2]];
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double Mesh::subdomain_area(Subdomain s) const {
  double area = 0.0;
  for (int i = 0; i < static_cast<int>(triangles.size()); ++i)
    if (triangles[i].subdomain == s) area += signed_area(i);
  return area;
}

void Mesh::validate() {
  const int nn = static_cast<int>(nodes.size());
  require(!triangles.empty(), Error::Kind::data, "mesh has no triangles");

  for (int i = 0; i < static_cast<int>(triangles.size()); ++i) {
    for (int k = 0; k < 3; ++k)
      require(triangles[i].v[k] >= 0 && triangles[i].v[k] < nn, Error::Kind::data,
              "triangle " + std::to_string(i) + ": node index out of range");
    const double area = signed_area(i);
    require(area > 0.0, Error::Kind::data,
            "triangle " + std::to_string(i) + ": non-positive signed area " +
                std::to_string(area));
  }
  for (const auto& f : facets) {
    for (int k = 0; k < 2; ++k)
      require(f.v[k] >= 0 && f.v[k] < nn, Error::Kind::data,
              "facet " + facet_str(f) + ": node index out of range");
    facet_role(f);  // every tag must resolve
  }

  // Edge incidence per subdomain.
  std::map<Edge, std::vector<int>> fluid_tris, solid_tris;
  for (int i = 0; i < static_cast<int>(triangles.size()); ++i) {
    const auto& t = triangles[i];
    auto& table = (t.subdomain == Subdomain::fluid) ? fluid_tris : solid_tris;
    for (int k = 0; k < 3; ++k) table[sorted_edge(t.v[k], t.v[(k + 1) % 3])].push_back(i);
  }

  interface_pairing.clear();
  std::map<Edge, int> facet_of_edge;
  for (int fi = 0; fi < static_cast<int>(facets.size()); ++fi) {
    const auto& f = facets[fi];
    const Edge e = sorted_edge(f.v[0], f.v[1]);
    require(facet_of_edge.emplace(e, fi).second, Error::Kind::data,
            "facet " + facet_str(f) + " listed twice");
    const TagRole role = facet_role(f);
    const auto fit = fluid_tris.find(e);
    const auto sit = solid_tris.find(e);
    const int n_f = (fit == fluid_tris.end()) ? 0 : static_cast<int>(fit->second.size());
    const int n_s = (sit == solid_tris.end()) ? 0 : static_cast<int>(sit->second.size());
    if (role == TagRole::interface_boundary) {
      require(n_f == 1 && n_s == 1, Error::Kind::data,
              "interface facet " + facet_str(f) + " not shared verbatim by one fluid and one "
              "solid triangle (fluid count " + std::to_string(n_f) + ", solid count " +
              std::to_string(n_s) + ")");
      interface_pairing.push_back({fi, fit->second[0], sit->second[0]});
    } else if (role == TagRole::fluid_dirichlet || role == TagRole::fluid_neumann) {
      require(n_f == 1 && n_s == 0, Error::Kind::data,
              "facet " + facet_str(f) + " tagged " + to_string(role) +
                  " is not a fluid boundary edge");
    } else {
      require(n_s == 1 && n_f == 0, Error::Kind::data,
              "facet " + facet_str(f) + " tagged " + to_string(role) +
                  " is not a solid boundary edge");
    }
  }

  // Every subdomain boundary edge must carry exactly one role.
  auto check_covered = [&](const std::map<Edge, std::vector<int>>& own,
                           const std::map<Edge, std::vector<int>>& other, const char* name) {
    for (const auto& [e, tris] : own) {
      const bool shared = other.count(e) > 0;
      const bool boundary = (tris.size() == 1);
      if (!boundary && !shared) continue;
      require(tris.size() == 1, Error::Kind::data,
              std::string(name) + " edge (" + std::to_string(e[0]) + "," + std::to_string(e[1]) +
                  ") has " + std::to_string(tris.size()) + " incident triangles");
      require(facet_of_edge.count(e) == 1, Error::Kind::data,
              std::string(name) + " boundary edge (" + std::to_string(e[0]) + "," +
                  std::to_string(e[1]) + ") carries no facet tag");
    }
  };
  check_covered(fluid_tris, solid_tris, "fluid");
  check_covered(solid_tris, fluid_tris, "solid");
}

std::uint64_t Mesh::hash() const {
  Fnv1a h;
  h.add(std::int64_t(nodes.size()));
  for (const auto& p : nodes) {
    h.add(p.x());
    h.add(p.y());
  }
  h.add(std::int64_t(triangles.size()));
  for (const auto& t : triangles) {
    for (int v : t.v) h.add(std::int64_t(v));
    h.add(std::int64_t(t.subdomain));
  }
  h.add(std::int64_t(facets.size()));
  for (const auto& f : facets) {
    h.add(std::int64_t(f.v[0]));
    h.add(std::int64_t(f.v[1]));
    h.add(std::int64_t(f.tag));
  }
  for (const auto& [tag, role] : tag_roles) {
    h.add(std::int64_t(tag));
    h.add(std::int64_t(role));
  }
  return h.value();
}

InterfaceTraceMap interface_trace_map(const Mesh& mesh, double tol) {
  // Fluid-side interface nodes: facet endpoints as used by the adjacent fluid
  // triangle. Solid side: the geometrically matching endpoints of the adjacent
  // solid triangle, located by coordinates.
  std::map<int, int> fluid_to_solid;
  for (const auto& f : mesh.facets) {
    if (mesh.facet_role(f) != TagRole::interface_boundary) continue;
    for (int end = 0; end < 2; ++end) {
      const int fn = f.v[end];
      const Vec2 x = mesh.nodes[fn];
      int best = -1;
      double best_d = std::numeric_limits<double>::max();
      for (const auto& t : mesh.triangles) {
        if (t.subdomain != Subdomain::solid) continue;
        for (int k = 0; k < 3; ++k) {
          const double d = (mesh.nodes[t.v[k]] - x).norm();
          if (d < best_d) {
            best_d = d;
            best = t.v[k];
          }
        }
      }
      require(best >= 0 && best_d <= tol, Error::Kind::data,
              "unmatched interface node " + std::to_string(fn) + " (closest solid node " +
                  (best >= 0 ? std::to_string(best) : std::string("none")) + " at distance " +
                  std::to_string(best_d) + ")");
      auto it = fluid_to_solid.find(fn);
      if (it != fluid_to_solid.end())
        require(it->second == best, Error::Kind::data,
                "interface node " + std::to_string(fn) + " matches two solid nodes");
      else
        fluid_to_solid.emplace(fn, best);
    }
  }
  // Bijectivity.
  std::map<int, int> solid_seen;
  InterfaceTraceMap out;
  for (const auto& [fn, sn] : fluid_to_solid) {
    require(solid_seen.emplace(sn, fn).second, Error::Kind::data,
            "solid interface node " + std::to_string(sn) + " matched twice");
    out.pairs.push_back({fn, sn});
  }
  return out;
}

namespace {

struct LineReader {
  std::ifstream in;
  int lineno = 0;
  std::string path;

  explicit LineReader(const std::string& p) : in(p), path(p) {
    require(in.good(), Error::Kind::data, "cannot open mesh file " + p);
  }
  // Next non-empty, non-comment line.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++lineno;
      const auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      bool blank = true;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
      if (!blank) return true;
    }
    return false;
  }
  [[noreturn]] void fail_here(const std::string& msg) {
    fail(Error::Kind::data, path + ":" + std::to_string(lineno) + ": " + msg);
  }
};

}  // namespace

Mesh load_mesh(const std::string& path) {
  LineReader r(path);
  std::string line;
  require(r.next(line), Error::Kind::data, path + ": empty file");
  {
    std::istringstream ss(line);
    std::string word;
    int version = 0;
    ss >> word >> version;
    if (word != "fsimesh" || version != 1) r.fail_here("expected header 'fsimesh 1'");
  }
  Mesh mesh;
  bool have_roles = false;
  while (r.next(line)) {
    std::istringstream ss(line);
    std::string section;
    long count = 0;
    ss >> section >> count;
    if (ss.fail() || count < 0) r.fail_here("expected '<SECTION> <count>'");
    if (section == "NODES") {
      mesh.nodes.reserve(count);
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of NODES section");
        std::istringstream ns(line);
        double x = 0, y = 0;
        ns >> x >> y;
        if (ns.fail()) r.fail_here("expected 'x y'");
        mesh.nodes.emplace_back(x, y);
      }
    } else if (section == "TRIANGLES") {
      mesh.triangles.reserve(count);
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of TRIANGLES section");
        std::istringstream ts(line);
        int a, b, c, s;
        ts >> a >> b >> c >> s;
        if (ts.fail() || (s != 0 && s != 1)) r.fail_here("expected 'v0 v1 v2 subdomain(0|1)'");
        mesh.triangles.push_back({{a, b, c}, static_cast<Subdomain>(s)});
      }
    } else if (section == "FACETS") {
      mesh.facets.reserve(count);
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of FACETS section");
        std::istringstream fs(line);
        int a, b, tag;
        fs >> a >> b >> tag;
        if (fs.fail()) r.fail_here("expected 'a b tag'");
        mesh.facets.push_back({{a, b}, tag});
      }
    } else if (section == "TAGROLES") {
      have_roles = true;
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of TAGROLES section");
        std::istringstream rs(line);
        int tag;
        std::string name;
        rs >> tag >> name;
        if (rs.fail()) r.fail_here("expected 'tag role'");
        auto role = tag_role_from_string(name);
        if (!role) r.fail_here("unknown role '" + name + "'");
        mesh.tag_roles[tag] = *role;
      }
    } else {
      r.fail_here("unknown section '" + section + "'");
    }
  }
  if (!have_roles) {
    // Canonical tag assignment used by the generators.
    mesh.tag_roles = {{1, TagRole::fluid_dirichlet},
                      {2, TagRole::fluid_neumann},
                      {3, TagRole::solid_dirichlet},
                      {4, TagRole::solid_neumann},
                      {5, TagRole::interface_boundary}};
  }
  mesh.validate();
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), Error::Kind::data, "cannot write mesh file " + path);
  out.precision(17);
  out << "fsimesh 1\n";
  out << "NODES " << mesh.nodes.size() << "\n";
  for (const auto& p : mesh.nodes) out << p.x() << " " << p.y() << "\n";
  out << "TRIANGLES " << mesh.triangles.size() << "\n";
  for (const auto& t : mesh.triangles)
    out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << static_cast<int>(t.subdomain)
        << "\n";
  out << "FACETS " << mesh.facets.size() << "\n";
  for (const auto& f : mesh.facets) out << f.v[0] << " " << f.v[1] << " " << f.tag << "\n";
  out << "TAGROLES " << mesh.tag_roles.size() << "\n";
  for (const auto& [tag, role] : mesh.tag_roles) out << tag << " " << to_string(role) << "\n";
}

Mesh load_gmsh(const std::string& path, const std::vector<int>& fluid_regions,
               const std::vector<int>& solid_regions, const std::map<int, TagRole>& tag_roles) {
  LineReader r(path);
  std::string line;
  Mesh mesh;
  mesh.tag_roles = tag_roles;
  std::map<long, int> node_id;  // gmsh id -> dense index
  auto is_fluid = [&](int phys) {
    return std::find(fluid_regions.begin(), fluid_regions.end(), phys) != fluid_regions.end();
  };
  auto is_solid = [&](int phys) {
    return std::find(solid_regions.begin(), solid_regions.end(), phys) != solid_regions.end();
  };
  while (r.next(line)) {
    if (line.rfind("$MeshFormat", 0) == 0) {
      if (!r.next(line)) r.fail_here("missing format line");
      std::istringstream ss(line);
      double version = 0;
      ss >> version;
      if (ss.fail() || version < 2.0 || version >= 3.0)
        r.fail_here("unsupported Gmsh format version (need 2.x ASCII)");
      if (!r.next(line) || line.rfind("$EndMeshFormat", 0) != 0)
        r.fail_here("expected $EndMeshFormat");
    } else if (line.rfind("$Nodes", 0) == 0) {
      if (!r.next(line)) r.fail_here("missing node count");
      long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of $Nodes");
        std::istringstream ss(line);
        long id;
        double x, y, z;
        ss >> id >> x >> y >> z;
        if (ss.fail()) r.fail_here("expected 'id x y z'");
        node_id[id] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.emplace_back(x, y);
      }
      if (!r.next(line) || line.rfind("$EndNodes", 0) != 0) r.fail_here("expected $EndNodes");
    } else if (line.rfind("$Elements", 0) == 0) {
      if (!r.next(line)) r.fail_here("missing element count");
      long count = std::stol(line);
      for (long i = 0; i < count; ++i) {
        if (!r.next(line)) r.fail_here("unexpected end of $Elements");
        std::istringstream ss(line);
        long id;
        int type, ntags;
        ss >> id >> type >> ntags;
        if (ss.fail()) r.fail_here("expected 'id type ntags ...'");
        std::vector<int> tags(ntags);
        for (int k = 0; k < ntags; ++k) ss >> tags[k];
        const int phys = ntags > 0 ? tags[0] : 0;
        auto read_node = [&]() {
          long gid;
          ss >> gid;
          if (ss.fail()) r.fail_here("missing node id");
          auto it = node_id.find(gid);
          if (it == node_id.end()) r.fail_here("element references unknown node");
          return it->second;
        };
        if (type == 1) {
          int a = read_node(), b = read_node();
          mesh.facets.push_back({{a, b}, phys});
        } else if (type == 2) {
          int a = read_node(), b = read_node(), c = read_node();
          Subdomain sd;
          if (is_fluid(phys))
            sd = Subdomain::fluid;
          else if (is_solid(phys))
            sd = Subdomain::solid;
          else
            r.fail_here("triangle physical region " + std::to_string(phys) +
                        " mapped to neither fluid nor solid");
          mesh.triangles.push_back({{a, b, c}, sd});
        } else {
          r.fail_here("unsupported element type " + std::to_string(type));
        }
      }
      if (!r.next(line) || line.rfind("$EndElements", 0) != 0)
        r.fail_here("expected $EndElements");
    } else if (line.rfind("$", 0) == 0) {
      // Skip unknown sections ($PhysicalNames etc).
      const std::string end = "$End" + line.substr(1);
      while (r.next(line) && line.rfind(end, 0) != 0) {
      }
    } else {
      r.fail_here("unexpected content outside section");
    }
  }
  mesh.validate();
  return mesh;
}

std::string hex_string(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace fsi
