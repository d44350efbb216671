#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "latred/error.hpp"
#include "latred/gauss_moves.hpp"
#include "latred/lattice.hpp"
#include "latred/matrix.hpp"
#include "latred/number_theory.hpp"

namespace latred {

// Search bound for the coprimifying shear coefficient.
inline constexpr std::int64_t kCoprimeSearchLimit = 1'000'000;

// Q = T_1 T_2 ... T_k.
struct MoveFactorization {
  std::vector<ExtendedGaussMove> moves;
  UnimodularMatrix target;
  std::size_t induction_moves = 0;  // moves emitted while peeling dimensions n..4
  std::size_t base_moves = 0;       // shears for the leading block of size <= 3
};

inline bool verify_factorization(const MoveFactorization& f) {
  return product(f.moves, f.target.n()) == f.target.matrix();
}

namespace detail {

inline std::vector<BigInt> leading_row(const IntMatrix& w, std::size_t row, std::size_t len) {
  std::vector<BigInt> u(len);
  for (std::size_t c = 0; c < len; ++c) u[c] = w(row, c);
  return u;
}

// Shear on the leading m x m block making the nonzero entries among the first
// m-1 slots of row m-1 coprime; returns the move (if any) already applied to w.
inline std::optional<GaussMove> coprimify_row(IntMatrix& w, std::size_t m) {
  const std::size_t n = w.rows();
  const std::size_t last = m - 1;
  std::vector<BigInt> u = leading_row(w, last, m);
  const std::span<const BigInt> head(u.data(), last);
  if (gcd_of(head) == 1) return std::nullopt;

  auto apply = [&](const GaussMove& g) {
    // W E with E = I + value e_last e_p^T: column p += value * column last.
    for (std::size_t r = 0; r < n; ++r) w(r, g.j) += g.value * w(r, g.i);
    return g;
  };

  const auto nonzero = std::count_if(head.begin(), head.end(), [](const BigInt& v) { return v != 0; });
  const BigInt& un = u[last];
  if (nonzero < 2) {
    for (std::size_t p = 0; p < last; ++p) {
      if (u[p] == 0) return apply({n, last, p, BigInt(1)});
    }
  }

  // Shift the first nonzero slot by t * u_last, t = 0, 1, -1, 2, -2, ...
  std::size_t p = 0;
  while (p < last && u[p] == 0) ++p;
  if (p == last) throw InternalError("row has no nonzero leading entry");
  BigInt others = 0;
  for (std::size_t c = 0; c < last; ++c) {
    if (c != p && u[c] != 0) others = gcd(others, u[c]);
  }
  for (std::int64_t step = 1; step <= 2 * kCoprimeSearchLimit; ++step) {
    const std::int64_t t = (step % 2 == 1) ? (step + 1) / 2 : -(step / 2);
    const BigInt shifted = u[p] + t * un;
    if (gcd(others, shifted) == 1) return apply({n, last, p, BigInt(t)});
  }
  throw InternalError("no coprimifying shear within the search bound");
}

}  // namespace detail

// Right-multiplies Q by at most one Gauss move so that the nonzero entries
// among Q[n-1][0..n-2] are coprime.
inline std::pair<std::optional<GaussMove>, UnimodularMatrix> coprimify_last_row(
    const UnimodularMatrix& q) {
  if (q.n() < 2) throw DomainError("coprimify_last_row needs n >= 2");
  if (q.det() != 1) throw NotSpecialLinearError("matrix must have determinant +1");
  IntMatrix w = q.matrix();
  auto move = detail::coprimify_row(w, q.n());
  return {std::move(move), UnimodularMatrix(std::move(w))};
}

// Moves peeling one dimension off the leading m x m block of W.
struct InductionStage {
  std::size_t dim = 0;
  std::vector<ExtendedGaussMove> right;       // W <- W E, in order
  std::optional<ExtendedGaussMove> left;      // W <- L W, applied last
};

// Turns the leading block of W = A (+) I into A' (+) I with A' of size m-1, by
// (1) a coprimifying shear, (2) a column move with Bezout coefficients making
// the corner 1, (3) a row move clearing the last row, (4) a left column move
// clearing the last column. Trivial moves are skipped.
inline InductionStage eliminate_last_dimension(IntMatrix& w, std::size_t m) {
  const std::size_t n = w.rows();
  const std::size_t last = m - 1;
  InductionStage stage{m, {}, std::nullopt};

  if (w(last, last) != 1) {
    if (auto g = detail::coprimify_row(w, m)) stage.right.push_back(g->extended());
  }

  std::vector<BigInt> u = detail::leading_row(w, last, m);
  if (u[last] != 1) {
    const std::vector<BigInt> coeffs =
        multi_bezout(std::span<const BigInt>(u.data(), last), BigInt(1) - u[last]);
    std::vector<BigInt> col(n, 0);
    for (std::size_t r = 0; r < last; ++r) col[r] = coeffs[r];
    for (std::size_t r = 0; r < n; ++r) {
      BigInt add = 0;
      for (std::size_t c = 0; c < last; ++c) add += w(r, c) * coeffs[c];
      w(r, last) += add;
    }
    stage.right.push_back(ExtendedGaussMove::column_move(last, std::move(col)));
    u = detail::leading_row(w, last, m);
  }
  if (u[last] != 1) throw InternalError("Bezout step did not produce a unit corner");

  if (std::any_of(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(last),
                  [](const BigInt& v) { return v != 0; })) {
    std::vector<BigInt> row(n, 0);
    for (std::size_t c = 0; c < last; ++c) row[c] = -u[c];
    for (std::size_t c = 0; c < last; ++c) {
      if (row[c] == 0) continue;
      for (std::size_t r = 0; r < n; ++r) w(r, c) += row[c] * w(r, last);
    }
    stage.right.push_back(ExtendedGaussMove::row_move(last, std::move(row)));
  }

  std::vector<BigInt> col(n, 0);
  bool any = false;
  for (std::size_t r = 0; r < last; ++r) {
    col[r] = -w(r, last);
    any = any || col[r] != 0;
  }
  if (any) {
    // L W with L = I + col e_last^T: row r += col[r] * row last.
    for (std::size_t r = 0; r < last; ++r) {
      if (col[r] == 0) continue;
      for (std::size_t c = 0; c < n; ++c) w(r, c) += col[r] * w(last, c);
    }
    stage.left = ExtendedGaussMove::column_move(last, std::move(col));
  }
  return stage;
}

// Shear factorization of the leading m x m block (m <= 3 in practice) of a
// matrix that is the identity outside it. Row reduction by integer shears;
// a pivot is moved with two shears and pairs of -1 on the diagonal are
// removed with the rotation [[0,-1],[1,0]] applied twice.
inline std::vector<GaussMove> shear_factor_block(IntMatrix a, std::size_t m) {
  const std::size_t n = a.rows();
  std::vector<GaussMove> ops;  // left multiplications, in application order
  auto row_add = [&](std::size_t dst, std::size_t src, const BigInt& v) {
    if (v == 0) return;
    for (std::size_t c = 0; c < n; ++c) a(dst, c) += v * a(src, c);
    ops.push_back({n, dst, src, v});
  };

  for (std::size_t c = 0; c < m; ++c) {
    for (;;) {
      std::size_t pivot = m;
      std::size_t count = 0;
      for (std::size_t r = c; r < m; ++r) {
        if (a(r, c) == 0) continue;
        ++count;
        if (pivot == m || abs(a(r, c)) < abs(a(pivot, c))) pivot = r;
      }
      if (count == 0) throw InternalError("singular block in shear factorization");
      if (count == 1) {
        if (pivot != c) {
          row_add(c, pivot, BigInt(1));
          row_add(pivot, c, BigInt(-1));
        }
        break;
      }
      for (std::size_t r = c; r < m; ++r) {
        if (r == pivot || a(r, c) == 0) continue;
        row_add(r, pivot, BigInt(-(a(r, c) / a(pivot, c))));
      }
    }
  }
  for (std::size_t c = 1; c < m; ++c) {
    for (std::size_t r = 0; r < c; ++r) {
      if (a(r, c) != 0) row_add(r, c, BigInt(-a(r, c) * a(c, c)));
    }
  }
  std::vector<std::size_t> negative;
  for (std::size_t c = 0; c < m; ++c) {
    if (a(c, c) == -1) negative.push_back(c);
    else if (a(c, c) != 1) throw InternalError("diagonal entry is not a unit");
  }
  if (negative.size() % 2 != 0) throw NotSpecialLinearError("block has determinant -1");
  for (std::size_t k = 0; k < negative.size(); k += 2) {
    const std::size_t p = negative[k], q = negative[k + 1];
    for (int rep = 0; rep < 2; ++rep) {
      row_add(p, q, BigInt(-1));
      row_add(q, p, BigInt(1));
      row_add(p, q, BigInt(-1));
    }
  }
  if (a != IntMatrix::identity(n)) throw InternalError("shear reduction did not reach the identity");

  // E_r ... E_1 A = I  =>  A = E_1^{-1} ... E_r^{-1}.
  std::vector<GaussMove> out;
  out.reserve(ops.size());
  for (const auto& op : ops) out.push_back(op.inverse());
  return out;
}

inline std::vector<GaussMove> base_case_factor(const UnimodularMatrix& q) {
  if (q.n() > 3) throw DomainError("base case handles n <= 3");
  if (q.det() != 1) throw NotSpecialLinearError("matrix must have determinant +1");
  return shear_factor_block(q.matrix(), q.n());
}

// Factors Q in SL_n(Z) into extended Gauss moves: n-3 induction stages of at
// most four moves each, then shears for the remaining 3 x 3 block.
inline MoveFactorization factor(const UnimodularMatrix& q) {
  if (q.det() != 1) {
    throw NotSpecialLinearError(
        "factor requires det = +1; use factor_signed() to fold a det = -1 input into a column sign flip");
  }
  const std::size_t n = q.n();
  MoveFactorization f{{}, q};
  if (n == 1) return f;

  // Invariant: Q = (left...) W (right...).
  IntMatrix w = q.matrix();
  std::vector<ExtendedGaussMove> left;
  std::vector<ExtendedGaussMove> right_reversed;
  for (std::size_t m = n; m >= 4; --m) {
    InductionStage stage = eliminate_last_dimension(w, m);
    for (const auto& e : stage.right) {
      // W = W' E^{-1}, so E^{-1} joins the front of the right factor.
      for (auto& inv : invert_move(e)) right_reversed.push_back(std::move(inv));
      ++f.induction_moves;
    }
    if (stage.left) {
      for (auto& inv : invert_move(*stage.left)) left.push_back(std::move(inv));
      ++f.induction_moves;
    }
  }
  const std::vector<GaussMove> base = shear_factor_block(std::move(w), std::min<std::size_t>(n, 3));
  f.base_moves = base.size();

  f.moves = std::move(left);
  for (const auto& g : base) f.moves.push_back(g.extended());
  f.moves.insert(f.moves.end(), std::make_move_iterator(right_reversed.rbegin()),
                 std::make_move_iterator(right_reversed.rend()));
  return f;
}

struct SignedFactorization {
  MoveFactorization factorization;  // factors Q diag(1, ..., 1, -1) when flipped
  bool last_column_negated = false;
};

// GL_n(Z) wrapper: a det = -1 input is first multiplied on the right by
// diag(1, ..., 1, -1); the flip is reported rather than encoded as a move.
inline SignedFactorization factor_signed(const UnimodularMatrix& q) {
  if (q.det() == 1) return {factor(q), false};
  IntMatrix flipped = q.matrix();
  for (std::size_t r = 0; r < q.n(); ++r) flipped(r, q.n() - 1) = -flipped(r, q.n() - 1);
  return {factor(UnimodularMatrix(std::move(flipped))), true};
}

}  // namespace latred
