#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "latred/error.hpp"
#include "latred/matrix.hpp"
#include "latred/random.hpp"

namespace latred {

// Absolute tolerance on |det B| below which a basis is treated as singular.
inline constexpr double kDetTolerance = 1e-12;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Invertible n x n real matrix; column i is the basis vector b_i.
class Basis {
 public:
  explicit Basis(RealMatrix m) : m_(std::move(m)) {
    if (!m_.is_square() || m_.rows() == 0) {
      throw DimensionMismatchError("basis must be a non-empty square matrix");
    }
    for (double x : m_.data()) {
      if (!std::isfinite(x)) throw SingularBasisError("basis has non-finite entries");
    }
    if (!(std::abs(determinant(m_)) > kDetTolerance)) {
      throw SingularBasisError("basis is singular: |det| <= 1e-12");
    }
  }

  static Basis identity(std::size_t n) { return Basis(RealMatrix::identity(n)); }

  std::size_t n() const noexcept { return m_.rows(); }
  const RealMatrix& matrix() const noexcept { return m_; }
  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  std::vector<double> vector(std::size_t i) const { return m_.column(i); }

  double vector_norm(std::size_t i) const { return norm(m_.column(i)); }

  // beta = max_i |b_i|.
  double max_norm() const {
    double beta = 0.0;
    for (std::size_t i = 0; i < n(); ++i) beta = std::max(beta, vector_norm(i));
    return beta;
  }

 private:
  RealMatrix m_;
};

// Symmetric positive-definite Gram matrix G = B^T B.
class GramMatrix {
 public:
  explicit GramMatrix(RealMatrix g) : g_(std::move(g)) {
    if (!g_.is_square() || g_.rows() == 0) {
      throw DimensionMismatchError("Gram matrix must be a non-empty square matrix");
    }
    const std::size_t n = g_.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (g_(i, j) != g_(j, i)) throw NonSymmetricError("Gram matrix is not symmetric");
    // Leading principal minors are the running products of Cholesky pivots.
    RealMatrix l(n, n, 0.0);
    double minor = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      double d = g_(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
      minor *= d;
      if (!(d > 0.0) || !(minor > kDetTolerance)) {
        throw SingularBasisError("Gram matrix is not positive definite");
      }
      l(j, j) = std::sqrt(d);
      for (std::size_t i = j + 1; i < n; ++i) {
        double s = g_(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        l(i, j) = s / l(j, j);
      }
    }
  }

  std::size_t n() const noexcept { return g_.rows(); }
  const RealMatrix& matrix() const noexcept { return g_; }
  double operator()(std::size_t r, std::size_t c) const { return g_(r, c); }

 private:
  RealMatrix g_;
};

// Exact integer matrix with determinant +1 or -1.
class UnimodularMatrix {
 public:
  explicit UnimodularMatrix(IntMatrix q) : q_(std::move(q)) {
    if (!q_.is_square() || q_.rows() == 0) {
      throw DimensionMismatchError("unimodular matrix must be a non-empty square matrix");
    }
    det_ = latred::determinant(q_);
    if (det_ != 1 && det_ != -1) {
      throw DomainError("matrix is not unimodular: det = " + det_.str());
    }
  }

  static UnimodularMatrix identity(std::size_t n) {
    return UnimodularMatrix(IntMatrix::identity(n));
  }

  // H with H(perm[c], c) = signs[c]; a member of the hyperoctahedral group.
  static UnimodularMatrix signed_permutation(const std::vector<std::size_t>& perm,
                                             const std::vector<int>& signs) {
    const std::size_t n = perm.size();
    if (signs.size() != n) throw DimensionMismatchError("signs and permutation differ in length");
    std::vector<bool> seen(n, false);
    IntMatrix h(n, n, BigInt(0));
    for (std::size_t c = 0; c < n; ++c) {
      if (perm[c] >= n || seen[perm[c]]) throw DomainError("not a permutation");
      if (signs[c] != 1 && signs[c] != -1) throw DomainError("signs must be +1 or -1");
      seen[perm[c]] = true;
      h(perm[c], c) = signs[c];
    }
    return UnimodularMatrix(std::move(h));
  }

  std::size_t n() const noexcept { return q_.rows(); }
  const IntMatrix& matrix() const noexcept { return q_; }
  const BigInt& operator()(std::size_t r, std::size_t c) const { return q_(r, c); }
  const BigInt& det() const noexcept { return det_; }

  friend UnimodularMatrix operator*(const UnimodularMatrix& a, const UnimodularMatrix& b) {
    return UnimodularMatrix(a.q_ * b.q_);
  }
  friend bool operator==(const UnimodularMatrix& a, const UnimodularMatrix& b) {
    return a.q_ == b.q_;
  }

 private:
  IntMatrix q_;
  BigInt det_;
};

// delta(B) = prod_i |b_i| / |det B|.
inline double orthogonality_defect(const Basis& b) {
  const double det = std::abs(determinant(b.matrix()));
  if (!(det > kDetTolerance)) throw SingularBasisError("singular basis");
  double prod = 1.0;
  for (std::size_t i = 0; i < b.n(); ++i) prod *= b.vector_norm(i);
  return prod / det;
}

// sum_i log|b_i| - log|det B|.
inline double log_defect(const Basis& b) {
  const double log_det = log_abs_determinant(b.matrix());
  if (!(std::exp(log_det) > kDetTolerance)) throw SingularBasisError("singular basis");
  double acc = 0.0;
  for (std::size_t i = 0; i < b.n(); ++i) acc += std::log(b.vector_norm(i));
  return acc - log_det;
}

// G = B^T B, symmetrized so G(i, j) == G(j, i) bit-for-bit.
inline GramMatrix gram(const Basis& b) {
  RealMatrix g = b.matrix().transpose() * b.matrix();
  const std::size_t n = g.rows();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double s = 0.5 * (g(i, j) + g(j, i));
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return GramMatrix(std::move(g));
}

// B Q: the same lattice in a new basis.
inline Basis apply_unimodular(const Basis& b, const UnimodularMatrix& q) {
  if (b.n() != q.n()) throw DimensionMismatchError("basis and unimodular matrix dimensions differ");
  return Basis(multiply(b.matrix(), q.matrix()));
}

inline UnimodularMatrix random_signed_permutation(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("dimension must be positive");
  Rng rng({seed, 0x5167ULL});
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(perm[i], perm[j]);
  }
  std::vector<int> signs(n);
  for (auto& s : signs) s = (rng.next_u64() & 1U) ? -1 : 1;
  return UnimodularMatrix::signed_permutation(perm, signs);
}

}  // namespace latred
