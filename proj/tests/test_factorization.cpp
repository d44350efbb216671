#include <vector>

#include <gtest/gtest.h>

#include "latred/factorization.hpp"
#include "latred/random.hpp"

using namespace latred;

namespace {

// Product of `count` random shears I + v e_i e_j^T with v in [-3, 3].
UnimodularMatrix random_sl(std::size_t n, std::uint64_t seed, int count = 20) {
  Rng rng(seed);
  IntMatrix q = IntMatrix::identity(n);
  for (int s = 0; s < count; ++s) {
    const std::size_t i = rng.uniform_int(0, static_cast<std::int64_t>(n) - 1);
    std::size_t j = rng.uniform_int(0, static_cast<std::int64_t>(n) - 2);
    if (j >= i) ++j;
    q = q * GaussMove{n, i, j, rng.uniform_int(-3, 3)}.matrix();
  }
  return UnimodularMatrix(std::move(q));
}

IntMatrix integer(std::size_t n, std::initializer_list<long> v) {
  IntMatrix m(n, n);
  auto it = v.begin();
  for (auto& x : m.data()) x = *it++;
  return m;
}

}  // namespace

TEST(Factor, IdentityHasNoMoves) {
  for (std::size_t n : {1, 2, 3, 6}) {
    const MoveFactorization f = factor(UnimodularMatrix::identity(n));
    EXPECT_TRUE(f.moves.empty());
    EXPECT_TRUE(verify_factorization(f));
  }
}

TEST(Factor, RejectsDeterminantMinusOne) {
  const UnimodularMatrix flip(integer(2, {0, 1, 1, 0}));
  try {
    factor(flip);
    FAIL() << "expected NotSpecialLinearError";
  } catch (const NotSpecialLinearError& e) {
    EXPECT_NE(std::string(e.what()).find("factor_signed"), std::string::npos);
  }
}

TEST(Factor, SignedWrapperFlipsTheLastColumn) {
  const UnimodularMatrix q(integer(3, {0, 1, 0, 1, 0, 0, 0, 0, 1}));
  const SignedFactorization s = factor_signed(q);
  EXPECT_TRUE(s.last_column_negated);
  EXPECT_TRUE(verify_factorization(s.factorization));
  IntMatrix back = product(s.factorization.moves, 3);
  for (std::size_t r = 0; r < 3; ++r) back(r, 2) = -back(r, 2);
  EXPECT_TRUE(back == q.matrix());
  EXPECT_FALSE(factor_signed(UnimodularMatrix::identity(3)).last_column_negated);
}

TEST(Factor, SmallBlocksUseShears) {
  const UnimodularMatrix rot(integer(2, {0, -1, 1, 0}));
  const MoveFactorization f = factor(rot);
  EXPECT_TRUE(verify_factorization(f));
  EXPECT_EQ(f.induction_moves, 0u);
  const UnimodularMatrix neg(integer(3, {-1, 0, 0, 0, -1, 0, 0, 0, 1}));
  EXPECT_TRUE(verify_factorization(factor(neg)));
}

TEST(Factor, RoundTripOnRandomShearProducts) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const std::size_t n = 2 + seed % 7;
    const UnimodularMatrix q = random_sl(n, seed);
    const MoveFactorization f = factor(q);
    ASSERT_TRUE(verify_factorization(f)) << "n " << n << " seed " << seed;
    if (n >= 4) EXPECT_LE(f.induction_moves, 4 * (n - 3));
    EXPECT_EQ(f.moves.size(), f.induction_moves + f.base_moves);
  }
}

TEST(Factor, LargeEntries) {
  const UnimodularMatrix q = random_sl(5, 77, 120);
  const MoveFactorization f = factor(q);
  EXPECT_TRUE(verify_factorization(f));
  EXPECT_LE(f.induction_moves, 8u);
}

TEST(Factor, CornerAlreadyOneSkipsWork) {
  // Identity in the last row and column: every stage is trivial.
  IntMatrix m = IntMatrix::identity(5);
  m(0, 1) = 4;
  m(2, 0) = -3;
  const MoveFactorization f = factor(UnimodularMatrix(m));
  EXPECT_EQ(f.induction_moves, 0u);
  EXPECT_TRUE(verify_factorization(f));
}

TEST(Coprimify, ProducesCoprimeRow) {
  // Last row (2, 4, 1): gcd of the head is 2.
  const UnimodularMatrix q(integer(3, {1, 0, 0, 0, 1, 0, 2, 4, 1}));
  auto [move, w] = coprimify_last_row(q);
  ASSERT_TRUE(move.has_value());
  EXPECT_EQ(gcd(w(2, 0), w(2, 1)), 1);
  EXPECT_TRUE(w.matrix() == q.matrix() * move->matrix());
  const UnimodularMatrix ok(integer(3, {1, 0, 0, 0, 1, 0, 2, 3, 1}));
  EXPECT_FALSE(coprimify_last_row(ok).first.has_value());
}

TEST(Coprimify, SingleNonzeroEntry) {
  // Last row (0, 3, 1): one nonzero entry, so a zero slot receives the last column.
  const UnimodularMatrix q(integer(3, {1, 0, 0, 0, 1, 0, 0, 3, 1}));
  auto [move, w] = coprimify_last_row(q);
  ASSERT_TRUE(move.has_value());
  EXPECT_EQ(gcd(w(2, 0), w(2, 1)), 1);
}

TEST(Coprimify, RandomInputs) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 3 + seed % 5;
    const UnimodularMatrix q = random_sl(n, 1000 + seed, 40);
    auto [move, w] = coprimify_last_row(q);
    std::vector<BigInt> head;
    for (std::size_t c = 0; c + 1 < n; ++c) head.push_back(w(n - 1, c));
    EXPECT_EQ(gcd_of(head), 1) << "seed " << seed;
    EXPECT_EQ(w.det(), 1);
  }
}

TEST(BaseCase, RejectsLargeOrNegativeInputs) {
  EXPECT_THROW(base_case_factor(UnimodularMatrix::identity(4)), DomainError);
  EXPECT_THROW(base_case_factor(UnimodularMatrix(integer(2, {0, 1, 1, 0}))), NotSpecialLinearError);
}
