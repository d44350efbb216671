#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "latred/error.hpp"
#include "latred/lattice.hpp"
#include "latred/matrix.hpp"

namespace latred {

// Identity plus an integer row i and an integer column j (i != j):
//   E = I + e_i a^T + b e_j^T,   a[i] = 0,  b[i] = b[j] = 0.
// The entry at (i, j) lives in a[j]. det E = 1 for every choice of a and b.
class ExtendedGaussMove {
 public:
  ExtendedGaussMove(std::size_t n, std::size_t i, std::size_t j, std::vector<BigInt> row_values,
                    std::vector<BigInt> col_values)
      : n_(n), i_(i), j_(j), a_(std::move(row_values)), b_(std::move(col_values)) {
    if (i_ >= n_ || j_ >= n_ || i_ == j_) throw DomainError("move indices must be distinct and < n");
    if (a_.size() != n_ || b_.size() != n_) throw DimensionMismatchError("move vectors must have length n");
    if (a_[i_] != 0) throw DomainError("row values must vanish on the diagonal");
    if (b_[i_] != 0 || b_[j_] != 0) {
      throw DomainError("column values must vanish on the diagonal and the intersection");
    }
  }

  static ExtendedGaussMove identity(std::size_t n) {
    return {n, 0, std::size_t{n > 1 ? 1u : 0u}, std::vector<BigInt>(n, 0), std::vector<BigInt>(n, 0)};
  }

  // Row-only move I + e_i row^T (row[i] ignored).
  static ExtendedGaussMove row_move(std::size_t i, std::vector<BigInt> row) {
    const std::size_t n = row.size();
    row[i] = 0;
    const std::size_t j = i == 0 ? 1 : 0;
    return {n, i, j, std::move(row), std::vector<BigInt>(n, 0)};
  }

  // Column-only move I + col e_j^T (col[j] ignored). The row index is put on
  // the first nonzero entry so the intersection holds it.
  static ExtendedGaussMove column_move(std::size_t j, std::vector<BigInt> col) {
    const std::size_t n = col.size();
    col[j] = 0;
    std::size_t i = j == 0 ? 1 : 0;
    for (std::size_t r = 0; r < n; ++r) {
      if (r != j && col[r] != 0) {
        i = r;
        break;
      }
    }
    std::vector<BigInt> a(n, 0);
    a[j] = col[i];
    col[i] = 0;
    return {n, i, j, std::move(a), std::move(col)};
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t row_index() const noexcept { return i_; }
  std::size_t col_index() const noexcept { return j_; }
  const std::vector<BigInt>& row_values() const noexcept { return a_; }
  const std::vector<BigInt>& col_values() const noexcept { return b_; }

  bool is_identity() const {
    for (std::size_t k = 0; k < n_; ++k)
      if (a_[k] != 0 || b_[k] != 0) return false;
    return true;
  }

  IntMatrix matrix() const {
    IntMatrix e = IntMatrix::identity(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      if (k != i_) e(i_, k) = a_[k];
      if (k != i_ && k != j_) e(k, j_) = b_[k];
    }
    return e;
  }

  friend bool operator==(const ExtendedGaussMove&, const ExtendedGaussMove&) = default;

 private:
  std::size_t n_;
  std::size_t i_;
  std::size_t j_;
  std::vector<BigInt> a_;
  std::vector<BigInt> b_;
};

// Identity plus a single off-diagonal integer (an integer shear).
struct GaussMove {
  std::size_t n = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  BigInt value = 0;

  ExtendedGaussMove extended() const {
    std::vector<BigInt> a(n, 0);
    a[j] = value;
    return {n, i, j, std::move(a), std::vector<BigInt>(n, 0)};
  }

  IntMatrix matrix() const {
    IntMatrix e = IntMatrix::identity(n);
    e(i, j) = value;
    return e;
  }

  GaussMove inverse() const { return {n, i, j, -value}; }

  friend bool operator==(const GaussMove&, const GaussMove&) = default;
};

inline UnimodularMatrix materialize(const ExtendedGaussMove& move) {
  return UnimodularMatrix(move.matrix());
}

// E^{-1} = I - e_i a^T - b e_j^T + (a.b) e_i e_j^T, again a single extended
// move on the same (i, j).
inline std::vector<ExtendedGaussMove> invert_move(const ExtendedGaussMove& move) {
  const std::size_t n = move.n();
  const auto& a = move.row_values();
  const auto& b = move.col_values();
  BigInt ab = 0;
  for (std::size_t k = 0; k < n; ++k) ab += a[k] * b[k];
  std::vector<BigInt> ra(n), rb(n);
  for (std::size_t k = 0; k < n; ++k) {
    ra[k] = -a[k];
    rb[k] = -b[k];
  }
  ra[move.col_index()] += ab;
  return {ExtendedGaussMove(n, move.row_index(), move.col_index(), std::move(ra), std::move(rb))};
}

// Ordered product T_1 T_2 ... T_k of materialized moves.
inline IntMatrix product(std::span<const ExtendedGaussMove> moves, std::size_t n) {
  IntMatrix acc = IntMatrix::identity(n);
  for (const auto& m : moves) {
    if (m.n() != n) throw DimensionMismatchError("move dimension differs from product dimension");
    acc = acc * m.matrix();
  }
  return acc;
}

}  // namespace latred
