#pragma once

#include "fsi/coupled_solver.hpp"

namespace fsi {

struct SnapshotRecord {
  double t = 0;
  double c_dir = 0;
  VecX u, p, d;
};

struct SnapshotSet {
  std::uint64_t mesh_hash = 0;
  std::uint64_t params_hash = 0;
  int stride = 1;
  std::vector<SnapshotRecord> records;

  void append_step(const StepResult& step, std::uint64_t mesh, std::uint64_t params);
  // Parametric training concatenates runs on the same mesh.
  void merge(const SnapshotSet& other);
  void save(const std::string& path) const;
  static SnapshotSet load(const std::string& path);
};

struct PodResult {
  MatX modes;            // G-orthonormal columns
  VecX singular_values;  // non-increasing
  int retained = 0;
  double discarded_energy = 0;  // fraction
};

// Method of snapshots in the G inner product; energy truncation criterion.
PodResult pod(const MatX& snapshots, const SpMat& gram, double tol_pod);

struct ReducedBasis {
  std::uint64_t mesh_hash = 0;
  double tol_pod = 0;
  int m = 0, n_u0 = 0, n_p = 0, n_s = 0;
  MatX psi;      // N_c x m, orthonormal in L2(interface)
  MatX ext_f;    // N_u x m, trace-matching harmonic port extensions
  MatX ext_s;    // N_s x m
  MatX z_f;      // N_u x (n_u0 + n_p), H1-orthonormal incl. supremizers
  MatX z_s;      // N_s x n_s, H1-orthonormal
  MatX z_p;      // N_p x n_p, L2-orthonormal
  VecX lift_dir; // N_u, inflow lifting with zero interface trace

  int n_u() const { return n_u0 + n_p; }
  int total_modes() const { return m + n_u() + n_p + n_s; }
};

ReducedBasis build_basis(const FsiSystem& sys, const SnapshotSet& snapshots, double tol_pod);

// Asserts the orthonormality / trace invariants; throws on violation.
void validate_basis(const FsiSystem& sys, const ReducedBasis& basis);

void save_basis(const ReducedBasis& basis, const std::string& path);
// expected_mesh_hash == 0 skips the mesh check.
ReducedBasis load_basis(const std::string& path, std::uint64_t expected_mesh_hash);

// Smallest singular value of the reduced divergence coupling Z_p^T B Z_f on
// the reference configuration (bases orthonormal in their norms).
double reduced_infsup(const FsiSystem& sys, const MatX& z_f, const MatX& z_p);

// Projection error of the snapshot set in the combined H1 x L2 norm,
// relative to the snapshot norm; the reference value for ROM accuracy.
double snapshot_projection_error(const FsiSystem& sys, const ReducedBasis& basis,
                                 const SnapshotSet& snapshots);

}  // namespace fsi
