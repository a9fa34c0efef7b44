#include "fsi/benchmarks.hpp"
#include <functional>

#include <algorithm>
#include <cmath>

namespace fsi {

namespace {

constexpr int kTagFluidDir = 1;
constexpr int kTagFluidNeu = 2;
constexpr int kTagSolidDir = 3;
constexpr int kTagSolidNeu = 4;
constexpr int kTagInterface = 5;

// Cell membership in the structured grid.
enum class Cell { fluid, solid, hole };

// Breakpoint list for one axis: feature coordinates, each span subdivided to
// target size h. Feature coordinates are kept exactly.
std::vector<double> axis_points(std::vector<double> features, double h) {
  std::sort(features.begin(), features.end());
  features.erase(std::unique(features.begin(), features.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 features.end());
  std::vector<double> pts;
  pts.push_back(features.front());
  for (std::size_t i = 0; i + 1 < features.size(); ++i) {
    const double a = features[i], b = features[i + 1];
    const int n = generator_subdivisions(b - a, h);
    for (int k = 1; k <= n; ++k) pts.push_back(k == n ? b : a + (b - a) * k / n);
  }
  return pts;
}

struct GridBuilder {
  std::vector<double> xs, ys;
  std::vector<Cell> cells;  // (nx) * (ny), column-major in i

  int nx() const { return static_cast<int>(xs.size()) - 1; }
  int ny() const { return static_cast<int>(ys.size()) - 1; }
  Cell& cell(int i, int j) { return cells[i + static_cast<std::size_t>(nx()) * j]; }
  Cell at(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx() || j >= ny()) return Cell::hole;  // outside = no cell
    return cells[i + static_cast<std::size_t>(nx()) * j];
  }

  // Outer boundary role by side; interior fluid/hole and solid/hole contacts
  // are resolved by the callbacks.
  Mesh build(const std::function<int(int side, Cell c, double x0, double x1, double y0,
                                     double y1)>& outer_tag,
             int fluid_hole_tag, int solid_hole_tag) {
    Mesh mesh;
    const int npx = nx() + 1;
    std::vector<int> node_of(static_cast<std::size_t>(npx) * (ny() + 1), -1);
    auto node = [&](int i, int j) {
      int& id = node_of[i + static_cast<std::size_t>(npx) * j];
      if (id < 0) {
        id = static_cast<int>(mesh.nodes.size());
        mesh.nodes.emplace_back(xs[i], ys[j]);
      }
      return id;
    };
    for (int j = 0; j < ny(); ++j)
      for (int i = 0; i < nx(); ++i) {
        const Cell c = at(i, j);
        if (c == Cell::hole) continue;
        const Subdomain sd = (c == Cell::fluid) ? Subdomain::fluid : Subdomain::solid;
        const int v00 = node(i, j), v10 = node(i + 1, j);
        const int v11 = node(i + 1, j + 1), v01 = node(i, j + 1);
        mesh.triangles.push_back({{v00, v10, v11}, sd});
        mesh.triangles.push_back({{v00, v11, v01}, sd});
      }

    auto emit = [&](int a, int b, int tag) { mesh.facets.push_back({{a, b}, tag}); };
    auto pair_tag = [&](Cell a, Cell b) -> int {
      // Facet between two present-or-absent cells; -1 = internal, no facet.
      if (a == b) return -1;
      if ((a == Cell::fluid && b == Cell::solid) || (a == Cell::solid && b == Cell::fluid))
        return kTagInterface;
      const Cell present = (a == Cell::hole) ? b : a;
      return present == Cell::fluid ? fluid_hole_tag : solid_hole_tag;
    };
    // Vertical edges between (i-1,j) and (i,j); i from 0..nx.
    for (int j = 0; j < ny(); ++j)
      for (int i = 0; i <= nx(); ++i) {
        const Cell left = at(i - 1, j), right = at(i, j);
        if (left == Cell::hole && right == Cell::hole) continue;
        int tag;
        if (i == 0)
          tag = outer_tag(0, right, xs[0], xs[0], ys[j], ys[j + 1]);
        else if (i == nx())
          tag = outer_tag(1, left, xs[i], xs[i], ys[j], ys[j + 1]);
        else
          tag = pair_tag(left, right);
        if (tag >= 0) emit(node(i, j), node(i, j + 1), tag);
      }
    // Horizontal edges between (i,j-1) and (i,j).
    for (int j = 0; j <= ny(); ++j)
      for (int i = 0; i < nx(); ++i) {
        const Cell below = at(i, j - 1), above = at(i, j);
        if (below == Cell::hole && above == Cell::hole) continue;
        int tag;
        if (j == 0)
          tag = outer_tag(2, above, xs[i], xs[i + 1], ys[0], ys[0]);
        else if (j == ny())
          tag = outer_tag(3, below, xs[i], xs[i + 1], ys[j], ys[j]);
        else
          tag = pair_tag(below, above);
        if (tag >= 0) emit(node(i, j), node(i + 1, j), tag);
      }

    mesh.tag_roles = {{kTagFluidDir, TagRole::fluid_dirichlet},
                      {kTagFluidNeu, TagRole::fluid_neumann},
                      {kTagSolidDir, TagRole::solid_dirichlet},
                      {kTagSolidNeu, TagRole::solid_neumann},
                      {kTagInterface, TagRole::interface_boundary}};
    mesh.validate();
    return mesh;
  }
};

}  // namespace

int generator_subdivisions(double length, double h) {
  return std::max(1, static_cast<int>(std::ceil(length / h - 1e-9)));
}

const char* to_string(BenchmarkKind kind) {
  switch (kind) {
    case BenchmarkKind::vertical_beam: return "vertical_beam";
    case BenchmarkKind::turek_fsi3: return "turek_fsi3";
    case BenchmarkKind::box_isolated: return "box_isolated";
  }
  return "?";
}

std::optional<BenchmarkKind> benchmark_from_string(const std::string& name) {
  for (BenchmarkKind k :
       {BenchmarkKind::vertical_beam, BenchmarkKind::turek_fsi3, BenchmarkKind::box_isolated})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

BenchmarkGeometry default_geometry(BenchmarkKind kind) {
  BenchmarkGeometry g;
  g.kind = kind;
  switch (kind) {
    case BenchmarkKind::vertical_beam:
      g.channel_length = 3.0;
      g.channel_height = 1.0;
      g.beam_x0 = 1.4;
      g.beam_x1 = 1.6;
      g.beam_y0 = 0.0;
      g.beam_y1 = 0.6;
      g.h = 0.1;
      break;
    case BenchmarkKind::turek_fsi3:
      g.channel_length = 1.6;
      g.channel_height = 0.6;
      g.cyl_cx = 0.3;
      g.cyl_cy = 0.3;
      g.cyl_r = 0.1;
      g.beam_x0 = 0.3;
      g.beam_x1 = 0.75;
      g.beam_y0 = 0.27;
      g.beam_y1 = 0.33;
      g.h = 0.05;
      break;
    case BenchmarkKind::box_isolated:
      g.channel_length = 1.0;   // box width
      g.channel_height = 0.5;   // fluid depth
      g.beam_x0 = 0.0;
      g.beam_x1 = 1.0;
      g.beam_y0 = 0.5;          // solid strip on top of the fluid
      g.beam_y1 = 0.75;
      g.h = 0.1;
      break;
  }
  return g;
}

Mesh generate_benchmark(const BenchmarkGeometry& geo) {
  require(geo.h > 0, Error::Kind::config, "mesh size h must be positive");
  require(geo.channel_length > 0 && geo.channel_height > 0, Error::Kind::config,
          "channel dimensions must be positive");
  require(geo.beam_x1 > geo.beam_x0 && geo.beam_y1 > geo.beam_y0, Error::Kind::config,
          "beam dimensions must be positive");

  GridBuilder gb;
  const double L = geo.channel_length, H = geo.channel_height;

  switch (geo.kind) {
    case BenchmarkKind::vertical_beam: {
      require(geo.beam_x0 > 0 && geo.beam_x1 < L, Error::Kind::config,
              "beam must lie strictly inside the channel in x");
      require(geo.beam_y0 == 0.0 && geo.beam_y1 < H, Error::Kind::config,
              "vertical beam must be clamped at the bottom wall and not reach the top");
      gb.xs = axis_points({0.0, geo.beam_x0, geo.beam_x1, L}, geo.h);
      gb.ys = axis_points({0.0, geo.beam_y1, H}, geo.h);
      gb.cells.assign(static_cast<std::size_t>(gb.nx()) * gb.ny(), Cell::fluid);
      for (int j = 0; j < gb.ny(); ++j)
        for (int i = 0; i < gb.nx(); ++i) {
          const double cx = 0.5 * (gb.xs[i] + gb.xs[i + 1]);
          const double cy = 0.5 * (gb.ys[j] + gb.ys[j + 1]);
          if (cx > geo.beam_x0 && cx < geo.beam_x1 && cy > geo.beam_y0 && cy < geo.beam_y1)
            gb.cell(i, j) = Cell::solid;
        }
      // Sides: 0=left(inlet), 1=right(outlet), 2=bottom, 3=top.
      return gb.build(
          [&](int side, Cell c, double, double, double, double) {
            if (c == Cell::solid) return kTagSolidDir;  // bottom clamp
            if (side == 1) return kTagFluidNeu;
            return kTagFluidDir;
          },
          kTagFluidDir, kTagSolidDir);
    }
    case BenchmarkKind::box_isolated: {
      const double W = geo.beam_x1 - geo.beam_x0;
      require(std::abs(geo.beam_x0) < 1e-12 && std::abs(W - L) < 1e-12, Error::Kind::config,
              "box_isolated solid strip must span the full box width");
      require(std::abs(geo.beam_y0 - H) < 1e-12, Error::Kind::config,
              "box_isolated solid strip must sit on top of the fluid box");
      gb.xs = axis_points({0.0, L}, geo.h);
      gb.ys = axis_points({0.0, H, geo.beam_y1}, geo.h);
      gb.cells.assign(static_cast<std::size_t>(gb.nx()) * gb.ny(), Cell::fluid);
      for (int j = 0; j < gb.ny(); ++j)
        for (int i = 0; i < gb.nx(); ++i) {
          const double cy = 0.5 * (gb.ys[j] + gb.ys[j + 1]);
          if (cy > H) gb.cell(i, j) = Cell::solid;
        }
      return gb.build(
          [&](int, Cell c, double, double, double, double) {
            return c == Cell::fluid ? kTagFluidDir : kTagSolidNeu;
          },
          kTagFluidDir, kTagSolidNeu);
    }
    case BenchmarkKind::turek_fsi3: {
      require(geo.cyl_r > 0, Error::Kind::config, "cylinder radius must be positive");
      require(geo.beam_y0 > 0 && geo.beam_y1 < H && geo.beam_x1 < L, Error::Kind::config,
              "beam must lie strictly inside the channel");
      gb.xs = axis_points({0.0, geo.beam_x0, geo.beam_x1, L}, geo.h);
      gb.ys = axis_points({0.0, geo.beam_y0, geo.beam_y1, H}, geo.h);
      gb.cells.assign(static_cast<std::size_t>(gb.nx()) * gb.ny(), Cell::fluid);
      // The rigid cylinder is approximated by the removed grid cells whose
      // center lies inside the circle; its boundary is a no-slip polygon at
      // the mesh resolution.
      int n_solid = 0, n_clamped = 0;
      for (int j = 0; j < gb.ny(); ++j)
        for (int i = 0; i < gb.nx(); ++i) {
          const double cx = 0.5 * (gb.xs[i] + gb.xs[i + 1]);
          const double cy = 0.5 * (gb.ys[j] + gb.ys[j + 1]);
          const bool in_beam = cx > geo.beam_x0 && cx < geo.beam_x1 && cy > geo.beam_y0 &&
                               cy < geo.beam_y1;
          const bool in_cyl = std::hypot(cx - geo.cyl_cx, cy - geo.cyl_cy) < geo.cyl_r;
          if (in_cyl)
            gb.cell(i, j) = Cell::hole;
          else if (in_beam)
            gb.cell(i, j) = Cell::solid;
        }
      for (int j = 0; j < gb.ny(); ++j)
        for (int i = 0; i < gb.nx(); ++i) {
          if (gb.at(i, j) != Cell::solid) continue;
          ++n_solid;
          if (gb.at(i - 1, j) == Cell::hole || gb.at(i + 1, j) == Cell::hole ||
              gb.at(i, j - 1) == Cell::hole || gb.at(i, j + 1) == Cell::hole)
            ++n_clamped;
        }
      require(n_solid > 0, Error::Kind::config, "beam contains no cells at this resolution");
      require(n_clamped > 0, Error::Kind::config,
              "beam is not attached to the cylinder at this resolution");
      return gb.build(
          [&](int side, Cell c, double, double, double, double) {
            if (c == Cell::solid) return kTagSolidDir;
            return side == 1 ? kTagFluidNeu : kTagFluidDir;
          },
          kTagFluidDir, kTagSolidDir);
    }
  }
  fail(Error::Kind::internal, "unreachable");
}

}  // namespace fsi
