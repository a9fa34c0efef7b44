#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "fsi/benchmarks.hpp"
#include "fsi/mesh.hpp"

namespace fsi::test {

// Two triangles sharing the edge (0,0)-(1,0); fluid below, solid above.
// outer_fluid_tag / outer_solid_tag select the boundary conditions.
inline Mesh minimal_pair(int fluid_tag_left = 2, int fluid_tag_right = 2, int solid_tag = 4) {
  Mesh m;
  m.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(0.5, -1), Vec2(0.5, 1)};
  m.triangles = {{{0, 2, 1}, Subdomain::fluid}, {{0, 1, 3}, Subdomain::solid}};
  m.facets = {{{0, 1}, 5}, {{0, 2}, fluid_tag_left}, {{2, 1}, fluid_tag_right},
              {{1, 3}, solid_tag}, {{3, 0}, solid_tag}};
  m.tag_roles = {{1, TagRole::fluid_dirichlet},
                 {2, TagRole::fluid_neumann},
                 {3, TagRole::solid_dirichlet},
                 {4, TagRole::solid_neumann},
                 {5, TagRole::interface_boundary}};
  m.validate();
  return m;
}

// Single fluid triangle, all edges outflow.
inline Mesh one_fluid_triangle() {
  Mesh m;
  m.nodes = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  m.triangles = {{{0, 1, 2}, Subdomain::fluid}};
  m.facets = {{{0, 1}, 2}, {{1, 2}, 2}, {{2, 0}, 2}};
  m.tag_roles = {{2, TagRole::fluid_neumann}};
  m.validate();
  return m;
}

// Structured single-subdomain unit-square mesh [0,1]^2 with per-side tags
// (left, right, bottom, top).
inline Mesh square_mesh(int nx, int ny, Subdomain sd, int left, int right, int bottom, int top) {
  Mesh m;
  auto id = [&](int i, int j) { return i + (nx + 1) * j; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.emplace_back(static_cast<double>(i) / nx, static_cast<double>(j) / ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      m.triangles.push_back({{id(i, j), id(i + 1, j), id(i + 1, j + 1)}, sd});
      m.triangles.push_back({{id(i, j), id(i + 1, j + 1), id(i, j + 1)}, sd});
    }
  for (int j = 0; j < ny; ++j) {
    m.facets.push_back({{id(0, j), id(0, j + 1)}, left});
    m.facets.push_back({{id(nx, j), id(nx, j + 1)}, right});
  }
  for (int i = 0; i < nx; ++i) {
    m.facets.push_back({{id(i, 0), id(i + 1, 0)}, bottom});
    m.facets.push_back({{id(i, ny), id(i + 1, ny)}, top});
  }
  m.tag_roles = {{1, TagRole::fluid_dirichlet},
                 {2, TagRole::fluid_neumann},
                 {3, TagRole::solid_dirichlet},
                 {4, TagRole::solid_neumann}};
  m.validate();
  return m;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("fsikit_test_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline std::string write_file(const TempDir& dir, const std::string& name,
                              const std::string& content) {
  const std::string p = dir.file(name);
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace fsi::test
