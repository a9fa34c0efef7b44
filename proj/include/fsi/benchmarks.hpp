#pragma once

#include "fsi/mesh.hpp"

namespace fsi {

enum class BenchmarkKind { vertical_beam, turek_fsi3, box_isolated };

// Structured-generator geometry. All lengths positive; the beam must fit
// strictly inside the channel. Grid lines are snapped to every feature edge
// so the generated mesh is conforming by construction.
struct BenchmarkGeometry {
  BenchmarkKind kind = BenchmarkKind::vertical_beam;
  double channel_length = 3.0;
  double channel_height = 1.0;
  // Solid rectangle [beam_x0, beam_x1] x [beam_y0, beam_y1].
  double beam_x0 = 1.4, beam_x1 = 1.6;
  double beam_y0 = 0.0, beam_y1 = 0.6;
  // Rigid cylinder (removed cells), turek_fsi3 only.
  double cyl_cx = 0.3, cyl_cy = 0.3, cyl_r = 0.1;
  double h = 0.1;
};

BenchmarkGeometry default_geometry(BenchmarkKind kind);
std::optional<BenchmarkKind> benchmark_from_string(const std::string& name);
const char* to_string(BenchmarkKind kind);

Mesh generate_benchmark(const BenchmarkGeometry& geo);

// Number of subdivisions the generator uses for a span at target size h.
int generator_subdivisions(double length, double h);

}  // namespace fsi
