#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace jesbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Axis-aligned box domain.
struct Bounds {
  Vector lower;
  Vector upper;

  Bounds() = default;
  Bounds(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw std::invalid_argument("Bounds: dimension mismatch");
    if ((upper.array() < lower.array()).any()) throw std::invalid_argument("Bounds: upper < lower");
  }

  static Bounds unit_cube(Eigen::Index dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

  Eigen::Index dim() const { return lower.size(); }
  Vector range() const { return upper - lower; }

  bool contains(const Vector& x, double tol = 0.0) const {
    if (x.size() != dim()) return false;
    return ((x.array() >= lower.array() - tol) && (x.array() <= upper.array() + tol)).all();
  }

  Vector clamp(const Vector& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

  /// Map a point from [0,1]^D into the box.
  Vector from_unit(const Vector& u) const { return lower + (u.array() * range().array()).matrix(); }
};

/// SplitMix64 finalizer; used to derive independent stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

inline void check_dim(const Vector& x, Eigen::Index dim, const char* where) {
  if (x.size() != dim)
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (got " + std::to_string(x.size()) +
                                ", expected " + std::to_string(dim) + ")");
}

}  // namespace jesbo
