#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "latred/harness.hpp"
#include "latred/policy.hpp"

using namespace latred;

namespace {

RealMatrix conjugate(const RealMatrix& g, const UnimodularMatrix& h) {
  const RealMatrix hr = to_real(h.matrix());
  return hr.transpose() * g * hr;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
  double m = 0;
  for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

// Symmetrized product so that conjugated inputs are exactly symmetric.
RealMatrix symmetric(const RealMatrix& g) {
  RealMatrix s = g;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) s(i, j) = 0.5 * (g(i, j) + g(j, i));
  return s;
}

PolicyParams trained_like(std::uint64_t seed) {
  // Heavier head weights than the initialization, so that all channels matter.
  PolicyParams p = PolicyParams::initialize({}, seed);
  std::vector<double> theta = p.flatten();
  Rng rng(seed + 1);
  for (double& x : theta) x += 0.3 * rng.normal();
  p.assign(theta);
  return p;
}

}  // namespace

TEST(PairGraph, NodesAndClasses) {
  const PairGraph g(4);
  EXPECT_EQ(g.size(), 12u);
  for (std::size_t u = 0; u < g.size(); ++u) {
    const auto [i, j] = g.nodes()[u];
    EXPECT_EQ(g.node_index(i, j), u);
    // Class sizes: n - 2 for same row / same column, n - 1 for the crossed ones.
    for (std::size_t c = 0; c < PairGraph::kClasses; ++c) {
      std::size_t members = 0;
      for (std::size_t v = 0; v < g.size(); ++v) members += (u != v && g.in_class(c, u, v));
      EXPECT_EQ(members, c < 2 ? 2u : 3u);
    }
  }
  // (0, 1) and (2, 3) share no index.
  EXPECT_FALSE(g.adjacent(g.node_index(0, 1), g.node_index(2, 3)));
  EXPECT_TRUE(g.adjacent(g.node_index(0, 1), g.node_index(1, 0)));
  EXPECT_THROW(PairGraph(1), DomainError);
  EXPECT_THROW(g.node_index(2, 2), DomainError);
}

TEST(PolicyParams, InitializationIsSeededAndValidated) {
  const PolicyParams a = PolicyParams::initialize({}, 3), b = PolicyParams::initialize({}, 3);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == PolicyParams::initialize({}, 4));
  EXPECT_EQ(a.tensors().back().name, "head.bias");
  EXPECT_EQ(a.tensors().back().value.data, (std::vector<double>{1.0, 0.0, 0.0}));
  PolicyParams c = a;
  c.assign(a.flatten());
  EXPECT_TRUE(c == a);
  EXPECT_THROW(c.assign({1.0}), ShapeError);
  auto tensors = a.tensors();
  tensors[0].value = ad::Tensor({2, 2});
  EXPECT_THROW(PolicyParams(a.config(), tensors), ShapeError);
}

TEST(Scores, ZeroDiagonalAndInitialPattern) {
  const PolicyParams p = PolicyParams::initialize({}, 0);
  const GramMatrix g = gram(generate_basis(5, 1));
  const RealMatrix m = forward_scores(g, p);
  double tr = 0;
  for (std::size_t i = 0; i < 5; ++i) tr += g(i, i);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(m(i, i), 0.0);
    for (std::size_t j = 0; j < 5; ++j) {
      // rho starts near (1, 0, 0): M is close to the normalized Gram matrix.
      if (i != j) EXPECT_NEAR(m(i, j), g(i, j) / (tr / 5), 0.1 * std::abs(g(i, j) / (tr / 5)) + 0.05);
    }
  }
  EXPECT_THROW(forward_scores(RealMatrix{{1.0, 0.5}, {0.4, 1.0}}, p), NonSymmetricError);
}

TEST(Scores, HyperoctahedralEquivariance) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const std::size_t n = seed % 2 ? 8 : 4;
    const PolicyParams p = trained_like(seed);
    const RealMatrix g = gram(generate_basis(n, seed)).matrix();
    const RealMatrix m = forward_scores(g, p);
    for (std::uint64_t k = 0; k < 20; ++k) {
      const UnimodularMatrix h = random_signed_permutation(n, 100 * seed + k);
      const RealMatrix lhs = forward_scores(symmetric(conjugate(g, h)), p);
      const RealMatrix rhs = conjugate(m, h);
      EXPECT_LE(max_abs_diff(lhs, rhs), 1e-6);
    }
  }
}

TEST(Scores, ScaleAndLeftOrthogonalInvariance) {
  const PolicyParams p = trained_like(9);
  const Basis b = generate_basis(4, 2);
  const RealMatrix m = forward_scores(gram(b), p);
  RealMatrix scaled = gram(b).matrix();
  for (double& x : scaled.data()) x *= 37.0;
  EXPECT_LE(max_abs_diff(forward_scores(scaled, p), m), 1e-6);
  const double c = std::cos(0.4), s = std::sin(0.4);
  RealMatrix u = RealMatrix::identity(4);
  u(0, 0) = c;
  u(0, 1) = -s;
  u(1, 0) = s;
  u(1, 1) = c;
  EXPECT_LE(max_abs_diff(forward_scores(gram(Basis(u * b.matrix())), p), m), 1e-6);
}

TEST(IndexDistribution, ProportionalToAbsoluteScores) {
  RealMatrix m{{0.0, -1.0, 3.0}, {0.0, 0.0, 2.0}, {4.0, 0.0, 0.0}};
  const IndexDistribution d = index_distribution(m);
  ASSERT_EQ(d.indices.size(), 6u);
  EXPECT_FALSE(d.degenerate);
  double total = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    const auto [i, j] = d.indices[k];
    EXPECT_NEAR(d.probabilities[k], std::abs(m(i, j)) / 10.0, 1e-15);
    total += d.probabilities[k];
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
  const IndexDistribution z = index_distribution(RealMatrix(3, 3, 0.0));
  EXPECT_TRUE(z.degenerate);
  for (double q : z.probabilities) EXPECT_DOUBLE_EQ(q, 1.0 / 6);
}

TEST(Sampling, MovesAreUnimodularAndMatchTheTape) {
  const PolicyParams p = trained_like(5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 2 + seed % 6;
    const Basis b = generate_basis(n, seed);
    const PolicyOutput out = sample_move(gram(b), p, seed);
    EXPECT_EQ(materialize(out.move).det(), 1);
    EXPECT_EQ(out.move.row_index(), out.i);
    EXPECT_EQ(out.move.col_index(), out.j);
    EXPECT_LE(out.log_probability, 0.0);

    const PairGraph graph(n);
    ad::Tape tape;
    const auto w = place(tape, p, false);
    Rng rng(seed);
    const ad::Var g = tape.constant(to_tensor(gram(b).matrix()));
    const PolicyStep step = policy_step(graph, p, w, g, rng);
    const RealMatrix exact = to_real(step.exact.matrix());
    for (std::size_t k = 0; k < n * n; ++k) EXPECT_EQ(step.move.value().data[k], exact.data()[k]);
  }
}

TEST(Sampling, SingleEntryFillIsAGaussMove) {
  PolicyConfig cfg;
  cfg.move_fill = MoveFill::single_entry;
  PolicyParams p = PolicyParams::initialize(cfg, 1);
  std::vector<double> theta = p.flatten();
  theta.back() = 0.0;
  theta[theta.size() - 3] = 4.0;  // rho_1 = 4: large entries
  p.assign(theta);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PolicyOutput out = sample_move(gram(generate_basis(4, seed)), p, seed);
    const IntMatrix m = out.move.matrix();
    std::size_t off = 0;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 4; ++c)
        if (r != c && m(r, c) != 0) ++off;
    EXPECT_LE(off, 1u);
  }
  EXPECT_EQ(move_fill_from_string("single_entry"), MoveFill::single_entry);
  EXPECT_THROW(move_fill_from_string("diagonal"), DomainError);
}

TEST(Sampling, EmpiricalIndexFrequencies) {
  const PolicyParams p = trained_like(2);
  const GramMatrix g = gram(generate_basis(3, 4));
  const IndexDistribution d = index_distribution(forward_scores(g, p));
  std::map<std::pair<std::size_t, std::size_t>, int> hits;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) {
    const PolicyOutput out = sample_move(g, p, s);
    ++hits[{out.i, out.j}];
  }
  for (std::size_t k = 0; k < d.indices.size(); ++k) {
    const double q = d.probabilities[k];
    EXPECT_NEAR(hits[d.indices[k]] / double(draws), q, 4 * std::sqrt(q * (1 - q) / draws) + 1e-3);
  }
}

TEST(Sampling, DegenerateScoresFallBackToUniform) {
  PolicyParams p = PolicyParams::initialize({}, 0);
  std::vector<double> theta = p.flatten();
  for (std::size_t k = theta.size() - 3 - 3 * 32; k < theta.size(); ++k) theta[k] = 0.0;
  p.assign(theta);
  const PolicyOutput out = sample_move(gram(generate_basis(4, 0)), p, 0);
  EXPECT_TRUE(out.distribution.degenerate);
  EXPECT_TRUE(out.move.is_identity());
}

TEST(Rollout, PreservesVolumeAndTracksTheExactTransform) {
  const PolicyParams p = PolicyParams::initialize({}, 7);
  const PolicyParams wild = trained_like(7);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 2 + seed % 6;
    const Basis b = generate_basis(n, seed);
    const RolloutResult r = rollout(b, p, n, seed);
    ASSERT_EQ(r.moves.size(), n);
    EXPECT_TRUE(r.transform.matrix() == product(r.moves, n));
    EXPECT_NEAR(log_abs_determinant(r.final_basis.matrix()), log_abs_determinant(b.matrix()), 1e-6);
    EXPECT_NEAR(r.step_losses.back(), log_defect(r.final_basis), 1e-6 * (1 + r.step_losses.back()));
    for (double l : r.step_losses) EXPECT_GE(l, -1e-9);
    // Large scores give huge integer entries; the transform stays exact.
    const RolloutResult w = rollout(b, wild, n, seed);
    EXPECT_TRUE(w.transform.matrix() == product(w.moves, n));
    EXPECT_EQ(w.transform.det(), 1);
  }
  EXPECT_THROW(rollout(generate_basis(3, 0), p, 0, 0), DomainError);
}

TEST(Rollout, DeterministicGivenSeed) {
  const PolicyParams p = trained_like(1);
  const Basis b = generate_basis(5, 5);
  const RolloutResult a = rollout(b, p, 5, 11), c = rollout(b, p, 5, 11);
  EXPECT_EQ(a.step_losses, c.step_losses);
  EXPECT_TRUE(a.transform == c.transform);
}

TEST(Rollout, GradientMatchesReplayedSurrogate) {
  const PolicyParams p = trained_like(3);
  Rng rng(8);
  for (std::uint64_t t = 0; t < 3; ++t) {
    std::vector<double> dir(p.parameter_count());
    double nrm = 0;
    for (double& x : dir) {
      x = rng.normal();
      nrm += x * x;
    }
    for (double& x : dir) x /= std::sqrt(nrm);
    const GradientCheck c = directional_gradient_check(p, generate_basis(4, t), 4, 50 + t, dir, 1e-5);
    EXPECT_NEAR(c.analytic, c.numeric, 1e-4 * std::max(std::abs(c.numeric), 1e-8));
  }
}

TEST(Rollout, DeterminantTermCarriesNoGradient) {
  // Scaling the basis shifts every log|b_i| and log|det| but not the loss
  // or its gradient.
  const PolicyParams p = trained_like(4);
  const Basis b = generate_basis(4, 3);
  RealMatrix scaled = b.matrix();
  for (double& x : scaled.data()) x *= 3.0;
  const PairGraph graph(4);
  auto grad = [&](const Basis& basis) {
    Rng rng(9);
    return rollout_gradient(p, graph, basis, 4, rng, {}, LossAggregation::mean_over_steps);
  };
  const RolloutGradient g1 = grad(b), g2 = grad(Basis(scaled));
  EXPECT_NEAR(g1.loss, g2.loss, 1e-9);
  for (std::size_t k = 0; k < g1.grad.size(); ++k) EXPECT_NEAR(g1.grad[k], g2.grad[k], 1e-7 * (1 + std::abs(g1.grad[k])));
}
