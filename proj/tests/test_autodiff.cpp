#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "latred/autodiff.hpp"
#include "latred/random.hpp"

using namespace latred;
using namespace latred::ad;

namespace {

using Op = std::function<Var(Tape&, const Var&)>;

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(s);
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

// Reverse-mode gradient of sum(w o op(x)) against central differences.
void check_gradient(const Op& op, Shape in, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                    double tol = 1e-6) {
  Rng rng(seed);
  const Tensor x0 = random_tensor(in, rng, lo, hi);
  Tensor w;
  auto eval = [&](const Tensor& x, Tensor* grad) {
    Tape t;
    Var xv = t.variable(x);
    Var y = op(t, xv);
    if (w.size() == 0) w = random_tensor(y.shape(), rng);
    Var loss = sum(mul(y, t.constant(w)));
    if (grad) {
      t.backward(loss);
      *grad = t.gradient(xv);
    }
    return loss.value().item();
  };
  Tensor g;
  eval(x0, &g);
  const double h = 1e-6;
  for (std::size_t k = 0; k < x0.size(); ++k) {
    Tensor xp = x0, xm = x0;
    xp.data[k] += h;
    xm.data[k] -= h;
    const double fd = (eval(xp, nullptr) - eval(xm, nullptr)) / (2 * h);
    EXPECT_NEAR(g.data[k], fd, tol * (1 + std::abs(fd))) << "entry " << k;
  }
}

}  // namespace

TEST(Autodiff, ElementwiseBinaryOps) {
  check_gradient([](Tape& t, const Var& x) { return add(x, mul(x, x)); }, {3, 2}, 1);
  check_gradient([](Tape& t, const Var& x) { return sub(scale(x, 3.0), transpose(transpose(x))); },
                 {2, 3}, 2);
  check_gradient([](Tape& t, const Var& x) {
    return scale_by(x, sum(x));
  }, {2, 2}, 3);
}

TEST(Autodiff, MatmulAndTranspose) {
  check_gradient([](Tape& t, const Var& x) { return matmul(x, transpose(x)); }, {3, 4}, 4);
  check_gradient([](Tape& t, const Var& x) { return matmul(transpose(x), x); }, {3, 2}, 5);
  Rng rng(6);
  const Tensor c = random_tensor({4, 2}, rng);
  check_gradient([c](Tape& t, const Var& x) { return matmul(x, t.constant(c)); }, {3, 4}, 7);
}

TEST(Autodiff, GatherScatterAndConcat) {
  check_gradient([](Tape& t, const Var& x) { return gather(x, {0, 3, 3, 5}, {2, 2}); }, {2, 3}, 8);
  check_gradient([](Tape& t, const Var& x) { return scatter(x, {1, 2, 4}, {3, 2}); }, {3, 1}, 9);
  check_gradient([](Tape& t, const Var& x) { return hconcat({x, scale(x, 2.0), exp(x)}); }, {3, 1}, 10);
}

TEST(Autodiff, Reductions) {
  check_gradient([](Tape& t, const Var& x) { return col_sum(x); }, {3, 4}, 11);
  check_gradient([](Tape& t, const Var& x) { return row_sum(x); }, {3, 4}, 12);
  check_gradient([](Tape& t, const Var& x) { return diag(x); }, {4, 1}, 13);
  check_gradient([](Tape& t, const Var& x) { return add_row(mul(x, x), col_sum(x)); }, {1, 3}, 14);
}

TEST(Autodiff, UnaryFunctions) {
  check_gradient([](Tape& t, const Var& x) { return log(x); }, {2, 3}, 15, 0.5, 2.0);
  check_gradient([](Tape& t, const Var& x) { return sqrt(x); }, {2, 3}, 16, 0.5, 2.0);
  check_gradient([](Tape& t, const Var& x) { return reciprocal(x); }, {2, 3}, 17, 0.5, 2.0);
  check_gradient([](Tape& t, const Var& x) { return tanh(x); }, {2, 3}, 18);
  check_gradient([](Tape& t, const Var& x) { return abs(x); }, {2, 3}, 19, 0.1, 1.0);
  check_gradient([](Tape& t, const Var& x) { return abs(x); }, {2, 3}, 20, -1.0, -0.1);
  check_gradient([](Tape& t, const Var& x) { return elementwise_even(x, fn::logcosh); }, {2, 3}, 21);
  check_gradient([](Tape& t, const Var& x) { return elementwise_odd(x, fn::tanh); }, {2, 3}, 22);
  check_gradient([](Tape& t, const Var& x) { return softmax(x); }, {5, 1}, 23);
}

TEST(Autodiff, EvenAndOddWrappers) {
  Tape t;
  Var x = t.constant(Tensor({1, 2}, std::vector<double>{-0.7, 0.7}));
  const std::vector<double> e = elementwise_even(x, fn::logcosh).value().data;
  const std::vector<double> o = elementwise_odd(x, fn::tanh).value().data;
  EXPECT_DOUBLE_EQ(e[0], e[1]);
  EXPECT_DOUBLE_EQ(o[0], -o[1]);
}

TEST(Autodiff, ErrorsAndGradientAccumulation) {
  Tape t;
  Var x = t.variable(Tensor({2, 2}, 1.0));
  EXPECT_THROW(t.backward(x), ShapeError);
  EXPECT_THROW(log(t.constant(Tensor({1, 1}, -1.0))), DomainError);
  EXPECT_THROW(add(x, t.constant(Tensor({1, 2}))), ShapeError);
  // x used twice: gradients add.
  Var loss = sum(add(x, x));
  t.backward(loss);
  for (double g : t.gradient(x).data) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(Autodiff, ConstantsAndDetachCarryNoGradient) {
  Tape t;
  Var x = t.variable(Tensor({1, 1}, 3.0));
  Var loss = add(mul(x, detach(x)), t.constant(Tensor::scalar(1.0)));
  t.backward(loss);
  EXPECT_DOUBLE_EQ(t.gradient(x).item(), 3.0);
}

TEST(Autodiff, StraightThroughForwardsHardValueAndSoftGradient) {
  Tape t;
  Var x = t.variable(Tensor({2, 1}, std::vector<double>{0.2, 0.9}));
  Var st = straight_through(Tensor({2, 1}, std::vector<double>{0.0, 1.0}), scale(x, 2.0));
  EXPECT_EQ(st.value().data[0], 0.0);
  EXPECT_EQ(st.value().data[1], 1.0);
  t.backward(sum(st));
  for (double g : t.gradient(x).data) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(GumbelSoftmax, HardSampleFrequenciesMatchSoftmax) {
  Tape t;
  const std::vector<double> p = {0.1, 0.2, 0.3, 0.4};
  Tensor lg({4, 1});
  for (std::size_t k = 0; k < 4; ++k) lg.data[k] = std::log(p[k]) + 5.0;
  Var logits = t.constant(lg);
  Rng rng(31);
  std::vector<int> hits(4, 0);
  const int draws = 40000;
  for (int s = 0; s < draws; ++s) {
    Tape local;
    ++hits[gumbel_softmax_sample(local.constant(lg), 0.3, rng).index];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double se = std::sqrt(p[k] * (1 - p[k]) / draws);
    EXPECT_NEAR(hits[k] / double(draws), p[k], 4 * se);
  }
}

TEST(GumbelSoftmax, ForcedIndexAndRelaxedGradient) {
  Rng a(5), b(5);
  Tape t;
  Var logits = t.variable(Tensor({3, 1}, std::vector<double>{0.1, 0.5, -0.2}));
  GumbelSample s = gumbel_softmax_sample(logits, 1.0, a, 2);
  EXPECT_EQ(s.index, 2u);
  EXPECT_EQ(s.hard.data[2], 1.0);
  // Soft part sums to one and the gradient of the chosen coordinate flows.
  double total = 0;
  for (double v : s.soft.value().data) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  t.backward(sum(mul(s.value, t.constant(Tensor({3, 1}, std::vector<double>{0, 0, 1})))));
  double gsum = 0;
  for (double g : t.gradient(logits).data) gsum += g;
  EXPECT_NEAR(gsum, 0.0, 1e-12);  // softmax is shift invariant
  EXPECT_THROW(gumbel_softmax_sample(logits, 0.0, b), DomainError);
}

TEST(StochasticRound, UnbiasedAndIntegral) {
  Rng rng(41);
  const std::vector<double> inputs = {0.3, -1.75, 2.5, 7.01};
  for (double x : inputs) {
    double s = 0, s2 = 0;
    const int draws = 50000;
    for (int k = 0; k < draws; ++k) {
      Tape t;
      const double v = stochastic_round(t.constant(Tensor::scalar(x)), 1.0, rng).value.value().item();
      ASSERT_EQ(v, std::round(v));
      ASSERT_TRUE(v == std::floor(x) || v == std::ceil(x));
      s += v;
      s2 += v * v;
    }
    const double mean = s / draws;
    const double f = x - std::floor(x);
    const double se = std::sqrt(f * (1 - f) / draws);
    EXPECT_NEAR(mean, x, 3 * se + 1e-12) << x;
  }
}

TEST(StochasticRound, IntegersPassThroughAndReplayIsExact) {
  Rng rng(2);
  Tape t;
  Var x = t.variable(Tensor({3, 1}, std::vector<double>{-2.0, 0.4, 3.6}));
  RoundingSample first = stochastic_round(x, 0.5, rng);
  EXPECT_EQ(first.value.value().data[0], -2.0);
  Rng other(999);
  RoundingSample again = stochastic_round(x, 0.5, other, {&first.lower, &first.up});
  EXPECT_EQ(again.value.value().data, first.value.value().data);
}

TEST(StochasticRound, RelaxedGradientMatchesReplayedSurrogate) {
  // With the noise fixed (same seed) and the decision replayed, the gradient
  // is that of sigmoid((logit(f) + g) / T) as a function of x.
  const double x0 = 0.37, temp = 0.7;
  auto soft_value = [&](double x) {
    Rng rng(17);
    const double g_up = rng.gumbel(), g_down = rng.gumbel();
    const double f = x - std::floor(x0);
    const double z = (std::log(f) - std::log1p(-f) + g_up - g_down) / temp;
    return 1.0 / (1.0 + std::exp(-z));
  };
  Tape t;
  Var x = t.variable(Tensor::scalar(x0));
  Rng rng(17);
  RoundingSample s = stochastic_round(x, temp, rng);
  t.backward(sum(s.value));
  const double h = 1e-6;
  EXPECT_NEAR(t.gradient(x).item(), (soft_value(x0 + h) - soft_value(x0 - h)) / (2 * h), 1e-6);
}

TEST(DirectionalFd, QuadraticIsExact) {
  auto f = [](const std::vector<double>& v) { return v[0] * v[0] + 3 * v[1]; };
  EXPECT_NEAR(directional_fd(f, {1.0, 2.0}, {1.0, 1.0}, 1e-3), 5.0, 1e-9);
}
