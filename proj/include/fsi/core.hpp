#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsi {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Error with a category used to map onto CLI exit codes.
class Error : public std::runtime_error {
public:
  enum class Kind { config, solver, data, internal };
  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

[[noreturn]] inline void fail(Error::Kind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, Error::Kind kind, const std::string& msg) {
  if (!cond) fail(kind, msg);
}

// FNV-1a, used for mesh/config fingerprints embedded in output files.
class Fnv1a {
public:
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ull;
    }
  }
  void add(const std::string& s) { add(s.data(), s.size()); }
  void add(double x) { add(&x, sizeof x); }
  void add(std::int64_t x) { add(&x, sizeof x); }
  std::uint64_t value() const { return h_; }

private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

std::string hex_string(std::uint64_t h);

inline constexpr const char* kCodeVersion = "fsikit 1.0.0";

}  // namespace fsi
