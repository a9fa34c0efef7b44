#pragma once

#include <Eigen/SparseLU>
#include <memory>

#include "fsi/spaces.hpp"

namespace fsi {

struct PseudoParams {
  double E = 1.0;
  double nu = 0.3;
};

enum class ExtensionKind {
  pseudo_elastic_fluid,  // mesh motion; clamps the whole outer fluid boundary
  harmonic_fluid,        // velocity lifting; natural on the Neumann boundary
  harmonic_solid,        // port extension; clamps the whole outer solid boundary
};

// Factorized linear map from interface trace values to a full-space field that
// vanishes on the operator's clamped boundary set. The factorization is reused
// for every trace and for Dirichlet liftings.
class ExtensionOperator {
public:
  ExtensionKind kind;
  const Spaces* sp = nullptr;
  std::vector<int> free_dofs;   // solved for
  std::vector<int> fixed_dofs;  // prescribed (interface slots first, in order)

  // Full-space field from aligned interface trace values (length N_c).
  VecX extend_trace(const VecX& trace) const;
  // Full-space field from values prescribed on all fixed dofs; `boundary` is a
  // full-space vector read only at fixed dofs.
  VecX extend_boundary(const VecX& boundary) const;

  int n_space() const;

private:
  friend ExtensionOperator build_extension(ExtensionKind, const Spaces&, const PseudoParams&);
  SpMat k_fb_;  // free x fixed coupling
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

ExtensionOperator build_extension(ExtensionKind kind, const Spaces& spaces,
                                  const PseudoParams& pseudo = {});

// Deformed fluid configuration: P2 pseudo-displacement field plus cached
// per-quadrature-point deformation data.
struct AleConfig {
  const Spaces* sp = nullptr;
  VecX d_tilde;                 // length N_u
  bool identity = true;
  std::vector<Mat2> f_inv_t;    // per (elem, q): inverse transpose of I + grad d
  std::vector<double> det_f;    // per (elem, q)
  double min_det = 1.0;
  int min_det_elem = -1;

  const Mat2& finv_t(int e, int q) const { return f_inv_t[e * nq + q]; }
  double det(int e, int q) const { return det_f[e * nq + q]; }
  int nq = 0;
};

// Throws on tangling (det <= 0 anywhere), reporting the worst element.
AleConfig ale_from_field(const Spaces& spaces, const VecX& d_tilde);
AleConfig ale_from_interface(const Spaces& spaces, const ExtensionOperator& ext,
                             const VecX& trace);
AleConfig ale_reference(const Spaces& spaces);

// Evaluates the same deformation cache without the positivity check; used by
// finite-difference probes around a valid configuration.
AleConfig ale_from_field_unchecked(const Spaces& spaces, const VecX& d_tilde);

}  // namespace fsi
