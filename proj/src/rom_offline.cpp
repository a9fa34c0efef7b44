#include "fsi/rom_offline.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <fstream>

namespace fsi {

void SnapshotSet::append_step(const StepResult& step, std::uint64_t mesh, std::uint64_t params) {
  if (records.empty()) {
    mesh_hash = mesh;
    params_hash = params;
  } else {
    require(mesh_hash == mesh, Error::Kind::data, "snapshot set spans two meshes");
  }
  for (const auto& stage : step.stages) {
    SnapshotRecord rec;
    rec.t = stage.t;
    rec.c_dir = stage.c_dir;
    rec.u = stage.u;
    rec.p = stage.p;
    rec.d = stage.d;
    records.push_back(std::move(rec));
  }
}

void SnapshotSet::merge(const SnapshotSet& other) {
  if (records.empty()) {
    *this = other;
    return;
  }
  require(mesh_hash == other.mesh_hash, Error::Kind::data,
          "cannot merge snapshot sets from different meshes");
  records.insert(records.end(), other.records.begin(), other.records.end());
}

namespace {

constexpr char kSnapMagic[8] = {'F', 'S', 'S', 'N', 'A', 'P', '1', '\0'};
constexpr char kBasisMagic[8] = {'F', 'S', 'R', 'O', 'M', 'B', '1', '\0'};

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const std::string& path) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  require(in.good(), Error::Kind::data, "corrupt or truncated file " + path);
}

void write_vec(std::ofstream& out, const VecX& v) {
  const std::int64_t n = v.size();
  write_bytes(out, &n, sizeof n);
  write_bytes(out, v.data(), sizeof(double) * n);
}

VecX read_vec(std::ifstream& in, const std::string& path) {
  std::int64_t n = 0;
  read_bytes(in, &n, sizeof n, path);
  require(n >= 0 && n < (1ll << 40), Error::Kind::data, "corrupt vector header in " + path);
  VecX v(n);
  read_bytes(in, v.data(), sizeof(double) * n, path);
  return v;
}

void write_mat(std::ofstream& out, const MatX& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  write_bytes(out, &r, sizeof r);
  write_bytes(out, &c, sizeof c);
  write_bytes(out, m.data(), sizeof(double) * r * c);
}

MatX read_mat(std::ifstream& in, const std::string& path) {
  std::int64_t r = 0, c = 0;
  read_bytes(in, &r, sizeof r, path);
  read_bytes(in, &c, sizeof c, path);
  require(r >= 0 && c >= 0 && r * c < (1ll << 40), Error::Kind::data,
          "corrupt matrix header in " + path);
  MatX m(r, c);
  read_bytes(in, m.data(), sizeof(double) * r * c, path);
  return m;
}

}  // namespace

void SnapshotSet::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::data, "cannot write snapshot file " + path);
  write_bytes(out, kSnapMagic, 8);
  const std::int64_t version = 1, count = static_cast<std::int64_t>(records.size());
  write_bytes(out, &version, sizeof version);
  write_bytes(out, &mesh_hash, sizeof mesh_hash);
  write_bytes(out, &params_hash, sizeof params_hash);
  const std::int64_t stride64 = stride;
  write_bytes(out, &stride64, sizeof stride64);
  write_bytes(out, &count, sizeof count);
  // Record index: byte offsets, written after a placeholder scan.
  std::vector<std::int64_t> offsets(records.size(), 0);
  const auto index_pos = out.tellp();
  write_bytes(out, offsets.data(), sizeof(std::int64_t) * offsets.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    offsets[i] = static_cast<std::int64_t>(out.tellp());
    const auto& r = records[i];
    write_bytes(out, &r.t, sizeof r.t);
    write_bytes(out, &r.c_dir, sizeof r.c_dir);
    write_vec(out, r.u);
    write_vec(out, r.p);
    write_vec(out, r.d);
  }
  out.seekp(index_pos);
  write_bytes(out, offsets.data(), sizeof(std::int64_t) * offsets.size());
}

SnapshotSet SnapshotSet::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Error::Kind::data, "cannot open snapshot file " + path);
  char magic[8];
  read_bytes(in, magic, 8, path);
  require(std::equal(magic, magic + 8, kSnapMagic), Error::Kind::data,
          path + ": not a snapshot file");
  std::int64_t version = 0, count = 0, stride64 = 1;
  SnapshotSet set;
  read_bytes(in, &version, sizeof version, path);
  require(version == 1, Error::Kind::data, path + ": unsupported snapshot version");
  read_bytes(in, &set.mesh_hash, sizeof set.mesh_hash, path);
  read_bytes(in, &set.params_hash, sizeof set.params_hash, path);
  read_bytes(in, &stride64, sizeof stride64, path);
  read_bytes(in, &count, sizeof count, path);
  set.stride = static_cast<int>(stride64);
  require(count >= 0 && count < (1 << 26), Error::Kind::data, path + ": corrupt record count");
  std::vector<std::int64_t> offsets(count);
  if (count) read_bytes(in, offsets.data(), sizeof(std::int64_t) * count, path);
  set.records.resize(count);
  for (std::int64_t i = 0; i < count; ++i) {
    auto& r = set.records[i];
    read_bytes(in, &r.t, sizeof r.t, path);
    read_bytes(in, &r.c_dir, sizeof r.c_dir, path);
    r.u = read_vec(in, path);
    r.p = read_vec(in, path);
    r.d = read_vec(in, path);
  }
  return set;
}

PodResult pod(const MatX& snapshots, const SpMat& gram, double tol_pod) {
  require(snapshots.cols() >= 1, Error::Kind::config, "POD needs at least one snapshot");
  require(tol_pod >= 0.0 && tol_pod < 1.0, Error::Kind::config, "tol_pod must lie in [0, 1)");
  const MatX gs = gram * snapshots;
  const MatX corr = snapshots.transpose() * gs;
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (corr + corr.transpose()));
  const int k = static_cast<int>(snapshots.cols());
  // Eigenvalues ascending; traverse descending.
  VecX lambda(k);
  MatX v(k, k);
  for (int i = 0; i < k; ++i) {
    lambda[i] = std::max(es.eigenvalues()[k - 1 - i], 0.0);
    v.col(i) = es.eigenvectors().col(k - 1 - i);
  }
  const double total = lambda.sum();
  require(total > 0.0, Error::Kind::data, "POD of an all-zero snapshot set");
  // Numerical rank guard: spurious eigenvalues below machine precision of
  // the dominant one cannot be normalized into modes.
  const double floor_val = lambda[0] * 1e-13;
  int rank = 0;
  while (rank < k && lambda[rank] > floor_val) ++rank;

  double tail = 0.0;
  for (int i = rank; i < k; ++i) tail += lambda[i];
  int retained = rank;
  for (int r = rank; r >= 1; --r) {
    if ((tail + lambda[r - 1]) / total <= tol_pod) {
      tail += lambda[r - 1];
      retained = r - 1;
    } else {
      break;
    }
  }
  retained = std::max(retained, 1);

  PodResult out;
  out.retained = retained;
  out.singular_values = lambda.head(rank).cwiseSqrt();
  out.modes.resize(snapshots.rows(), retained);
  double discarded = 0.0;
  for (int i = retained; i < k; ++i) discarded += lambda[i];
  out.discarded_energy = discarded / total;
  for (int j = 0; j < retained; ++j) {
    out.modes.col(j) = snapshots * (v.col(j) / std::sqrt(lambda[j]));
    // Deterministic sign: the entry of largest magnitude is positive.
    int arg = 0;
    for (int i = 1; i < out.modes.rows(); ++i)
      if (std::abs(out.modes(i, j)) > std::abs(out.modes(arg, j))) arg = i;
    if (out.modes(arg, j) < 0) out.modes.col(j) = -out.modes.col(j);
  }
  return out;
}

namespace {

// Modified Gram-Schmidt in the G inner product.
void orthonormalize(MatX& basis, const SpMat& gram) {
  for (int j = 0; j < basis.cols(); ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < j; ++i) {
        const double proj = basis.col(i).dot(gram * basis.col(j));
        basis.col(j) -= proj * basis.col(i);
      }
    const double norm = std::sqrt(basis.col(j).dot(gram * basis.col(j)));
    require(norm > 1e-12, Error::Kind::solver,
            "basis orthonormalization hit a (numerically) dependent column");
    basis.col(j) /= norm;
  }
}

}  // namespace

ReducedBasis build_basis(const FsiSystem& sys, const SnapshotSet& snapshots, double tol_pod) {
  const Spaces& sp = sys.sp();
  require(!snapshots.records.empty(), Error::Kind::data, "empty snapshot set");
  require(snapshots.mesh_hash == sys.mesh.hash(), Error::Kind::data,
          "snapshot mesh hash does not match the current mesh");
  const int k = static_cast<int>(snapshots.records.size());

  const InnerProduct g_iface = assemble_inner_product(InnerProductKind::L2_interface, sp);
  const InnerProduct g_h1f = assemble_inner_product(InnerProductKind::H1_fluid, sp);
  const InnerProduct g_h1s = assemble_inner_product(InnerProductKind::H1_solid, sp);
  const InnerProduct g_l2p = assemble_inner_product(InnerProductKind::L2_pressure, sp);

  ReducedBasis basis;
  basis.mesh_hash = snapshots.mesh_hash;
  basis.tol_pod = tol_pod;

  // Port modes from interface displacement traces.
  MatX traces(sp.n_c, k);
  for (int j = 0; j < k; ++j)
    traces.col(j) = gather(snapshots.records[j].d, sp.disp_part.iface);
  const PodResult port = pod(traces, g_iface.gram, tol_pod);
  basis.psi = port.modes;
  basis.m = port.retained;
  basis.ext_f.resize(sp.n_u(), basis.m);
  basis.ext_s.resize(sp.n_s(), basis.m);
  for (int j = 0; j < basis.m; ++j) {
    basis.ext_f.col(j) = sys.ext_hf.extend_trace(basis.psi.col(j));
    basis.ext_s.col(j) = sys.ext_hs.extend_trace(basis.psi.col(j));
  }

  // Inflow lifting (zero when the profile is zero).
  basis.lift_dir = sys.ext_hf.extend_boundary(sys.dirichlet.fluid_profile);

  // Lifted bubble snapshots must have zero interface and Dirichlet traces.
  MatX fluid_bubbles(sp.n_u(), k), solid_bubbles(sp.n_s(), k);
  double fluid_scale = 0;
  for (int j = 0; j < k; ++j) fluid_scale = std::max(fluid_scale,
      snapshots.records[j].u.lpNorm<Eigen::Infinity>());
  for (int j = 0; j < k; ++j) {
    const auto& rec = snapshots.records[j];
    VecX ul = rec.u - rec.c_dir * basis.lift_dir -
              sys.ext_hf.extend_trace(gather(rec.u, sp.vel_part.iface));
    const double trace_err =
        std::max(gather(ul, sp.vel_part.iface).lpNorm<Eigen::Infinity>(),
                 gather(ul, sp.vel_part.dirichlet).lpNorm<Eigen::Infinity>());
    require(trace_err <= 1e-10 * std::max(1.0, fluid_scale), Error::Kind::data,
            "lifted fluid snapshot keeps a boundary trace of " + std::to_string(trace_err) +
                " (Dirichlet data is not separable as c_dir(t) * profile)");
    fluid_bubbles.col(j) = ul;
    solid_bubbles.col(j) =
        rec.d - sys.ext_hs.extend_trace(gather(rec.d, sp.disp_part.iface));
  }
  const PodResult fres = pod(fluid_bubbles, g_h1f.gram, tol_pod);
  basis.n_u0 = fres.retained;
  const PodResult sres = pod(solid_bubbles, g_h1s.gram, tol_pod);
  basis.z_s = sres.modes;
  basis.n_s = sres.retained;

  MatX pressures(sp.n_p(), k);
  for (int j = 0; j < k; ++j) pressures.col(j) = snapshots.records[j].p;
  const PodResult pres = pod(pressures, g_l2p.gram, tol_pod);
  basis.z_p = pres.modes;
  basis.n_p = pres.retained;

  // Supremizer enrichment: H1 solves with zero trace on interface and
  // Dirichlet boundaries, one per pressure mode.
  const SpMat bref = sys.fluid->divergence(ale_reference(sp));
  std::vector<int> free_dofs = sp.vel_part.interior;
  std::vector<int> pos(sp.n_u(), -1);
  for (std::size_t i = 0; i < free_dofs.size(); ++i) pos[free_dofs[i]] = static_cast<int>(i);
  std::vector<Triplet> trip;
  for (int c = 0; c < g_h1f.gram.outerSize(); ++c)
    for (SpMat::InnerIterator it(g_h1f.gram, c); it; ++it)
      if (pos[it.row()] >= 0 && pos[it.col()] >= 0)
        trip.emplace_back(pos[it.row()], pos[it.col()], it.value());
  SpMat kff(free_dofs.size(), free_dofs.size());
  kff.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SpMat> lu;
  lu.compute(kff);
  require(lu.info() == Eigen::Success, Error::Kind::solver, "singular supremizer operator");

  basis.z_f.resize(sp.n_u(), basis.n_u0 + basis.n_p);
  basis.z_f.leftCols(basis.n_u0) = fres.modes;
  for (int j = 0; j < basis.n_p; ++j) {
    const VecX rhs_full = bref.transpose() * basis.z_p.col(j);
    const VecX rhs = gather(rhs_full, free_dofs);
    VecX s = VecX::Zero(sp.n_u());
    const VecX sf = lu.solve(rhs);
    scatter(s, free_dofs, sf);
    basis.z_f.col(basis.n_u0 + j) = s;
  }
  orthonormalize(basis.z_f, g_h1f.gram);

  validate_basis(sys, basis);
  return basis;
}

void validate_basis(const FsiSystem& sys, const ReducedBasis& basis) {
  const Spaces& sp = sys.sp();
  const InnerProduct g_iface = assemble_inner_product(InnerProductKind::L2_interface, sp);
  const InnerProduct g_h1f = assemble_inner_product(InnerProductKind::H1_fluid, sp);
  const InnerProduct g_h1s = assemble_inner_product(InnerProductKind::H1_solid, sp);
  const InnerProduct g_l2p = assemble_inner_product(InnerProductKind::L2_pressure, sp);

  auto check_orthonormal = [](const MatX& z, const SpMat& g, const char* what) {
    if (z.cols() == 0) return;
    const MatX gram = z.transpose() * (g * z);
    const double err = (gram - MatX::Identity(z.cols(), z.cols())).lpNorm<Eigen::Infinity>();
    require(err < 1e-9, Error::Kind::data,
            std::string(what) + " basis lost orthonormality (defect " + std::to_string(err) +
                ")");
  };
  check_orthonormal(basis.psi, g_iface.gram, "port");
  check_orthonormal(basis.z_f, g_h1f.gram, "fluid bubble");
  check_orthonormal(basis.z_s, g_h1s.gram, "solid bubble");
  check_orthonormal(basis.z_p, g_l2p.gram, "pressure");

  for (int j = 0; j < basis.m; ++j) {
    require((gather(basis.ext_f.col(j), sp.vel_part.iface) - basis.psi.col(j)).norm() == 0.0,
            Error::Kind::data, "fluid port extension trace mismatch");
    require((gather(basis.ext_s.col(j), sp.disp_part.iface) - basis.psi.col(j)).norm() == 0.0,
            Error::Kind::data, "solid port extension trace mismatch");
  }
  auto check_zero_trace = [&](const MatX& z, const std::vector<int>& idx, const char* what) {
    for (int j = 0; j < z.cols(); ++j)
      require(gather(z.col(j), idx).lpNorm<Eigen::Infinity>() < 1e-9, Error::Kind::data,
              std::string(what) + " column carries a nonzero boundary trace");
  };
  check_zero_trace(basis.z_f, sp.vel_part.iface, "fluid bubble");
  check_zero_trace(basis.z_f, sp.vel_part.dirichlet, "fluid bubble");
  check_zero_trace(basis.z_s, sp.disp_part.iface, "solid bubble");
  check_zero_trace(basis.z_s, sp.disp_part.dirichlet, "solid bubble");
  MatX lift(sp.n_u(), 1);
  lift.col(0) = basis.lift_dir;
  if (basis.lift_dir.norm() > 0) check_zero_trace(lift, sp.vel_part.iface, "inflow lifting");
}

void save_basis(const ReducedBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), Error::Kind::data, "cannot write basis file " + path);
  write_bytes(out, kBasisMagic, 8);
  const std::int64_t version = 1;
  write_bytes(out, &version, sizeof version);
  write_bytes(out, &basis.mesh_hash, sizeof basis.mesh_hash);
  write_bytes(out, &basis.tol_pod, sizeof basis.tol_pod);
  const std::int64_t dims[4] = {basis.m, basis.n_u0, basis.n_p, basis.n_s};
  write_bytes(out, dims, sizeof dims);
  write_mat(out, basis.psi);
  write_mat(out, basis.ext_f);
  write_mat(out, basis.ext_s);
  write_mat(out, basis.z_f);
  write_mat(out, basis.z_s);
  write_mat(out, basis.z_p);
  write_vec(out, basis.lift_dir);
}

ReducedBasis load_basis(const std::string& path, std::uint64_t expected_mesh_hash) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), Error::Kind::data, "cannot open basis file " + path);
  char magic[8];
  read_bytes(in, magic, 8, path);
  require(std::equal(magic, magic + 8, kBasisMagic), Error::Kind::data,
          path + ": not a reduced-basis file");
  std::int64_t version = 0;
  read_bytes(in, &version, sizeof version, path);
  require(version == 1, Error::Kind::data, path + ": unsupported basis version");
  ReducedBasis basis;
  read_bytes(in, &basis.mesh_hash, sizeof basis.mesh_hash, path);
  require(expected_mesh_hash == 0 || basis.mesh_hash == expected_mesh_hash, Error::Kind::data,
          path + ": basis was built for a different mesh");
  read_bytes(in, &basis.tol_pod, sizeof basis.tol_pod, path);
  std::int64_t dims[4];
  read_bytes(in, dims, sizeof dims, path);
  basis.m = static_cast<int>(dims[0]);
  basis.n_u0 = static_cast<int>(dims[1]);
  basis.n_p = static_cast<int>(dims[2]);
  basis.n_s = static_cast<int>(dims[3]);
  basis.psi = read_mat(in, path);
  basis.ext_f = read_mat(in, path);
  basis.ext_s = read_mat(in, path);
  basis.z_f = read_mat(in, path);
  basis.z_s = read_mat(in, path);
  basis.z_p = read_mat(in, path);
  basis.lift_dir = read_vec(in, path);
  return basis;
}

double reduced_infsup(const FsiSystem& sys, const MatX& z_f, const MatX& z_p) {
  if (z_f.cols() == 0 || z_p.cols() == 0) return 0.0;
  const SpMat bref = sys.fluid->divergence(ale_reference(sys.sp()));
  const MatX coupling = z_p.transpose() * (bref * z_f);
  Eigen::JacobiSVD<MatX> svd(coupling);
  return svd.singularValues().minCoeff();
}

double snapshot_projection_error(const FsiSystem& sys, const ReducedBasis& basis,
                                 const SnapshotSet& snapshots) {
  const Spaces& sp = sys.sp();
  const InnerProduct g_h1f = assemble_inner_product(InnerProductKind::H1_fluid, sp);
  const InnerProduct g_l2p = assemble_inner_product(InnerProductKind::L2_pressure, sp);
  const InnerProduct g_iface = assemble_inner_product(InnerProductKind::L2_interface, sp);
  double num = 0, den = 0;
  for (const auto& rec : snapshots.records) {
    // Velocity: lift + port part + fluid bubble projection.
    const VecX trace = gather(rec.u, sp.vel_part.iface);
    const VecX beta_dot = basis.psi.transpose() * (g_iface.gram * trace);
    VecX residual_u = rec.u - rec.c_dir * basis.lift_dir - basis.ext_f * beta_dot;
    residual_u -= basis.z_f * (basis.z_f.transpose() * (g_h1f.gram * residual_u));
    // Port truncation leaves an interface trace; measure it in H1 through the
    // harmonic extension of the trace defect.
    const VecX trace_defect = gather(residual_u, sp.vel_part.iface);
    if (trace_defect.lpNorm<Eigen::Infinity>() > 0) {
      const VecX corr = sys.ext_hf.extend_trace(trace_defect);
      residual_u -= corr;
      residual_u -= basis.z_f * (basis.z_f.transpose() * (g_h1f.gram * residual_u));
      num += corr.dot(g_h1f.gram * corr);
    }
    num += residual_u.dot(g_h1f.gram * residual_u);
    VecX residual_p = rec.p - basis.z_p * (basis.z_p.transpose() * (g_l2p.gram * rec.p));
    num += residual_p.dot(g_l2p.gram * residual_p);
    den += rec.u.dot(g_h1f.gram * rec.u) + rec.p.dot(g_l2p.gram * rec.p);
  }
  require(den > 0, Error::Kind::data, "projection error of an all-zero snapshot set");
  return std::sqrt(num / den);
}

}  // namespace fsi
