#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latred/autodiff.hpp"
#include "latred/error.hpp"
#include "latred/expm.hpp"
#include "latred/lattice.hpp"
#include "latred/lll.hpp"
#include "latred/policy.hpp"
#include "latred/random.hpp"

namespace latred {

// Stream tags separating the independent random streams of an experiment.
enum class Stream : std::uint64_t {
  dataset = 0xda7a,
  train = 0x7a1e,
  test = 0x7e57,
  eval = 0xe7a1,
  init = 0x1217,
};

// B = exp(A).
inline Basis basis_from_exponent(const RealMatrix& a) { return Basis(expm(a)); }

// B = exp(A) with A_ij ~ Uniform[0, 1) i.i.d.; det B = e^{tr A} > 0.
inline Basis generate_basis(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw DomainError("generate_basis needs n >= 2");
  Rng rng(seed);
  RealMatrix a(n, n);
  for (double& x : a.data()) x = rng.uniform();
  return basis_from_exponent(a);
}

struct DatasetSpec {
  std::size_t n = 4;
  std::size_t train_per_epoch = 1000;
  std::size_t test_count = 4000;
  std::uint64_t seed = 0;
};

// The frozen test set: a pure function of (n, test_count, seed).
inline std::vector<Basis> test_set(const DatasetSpec& spec) {
  std::vector<Basis> out;
  out.reserve(spec.test_count);
  for (std::size_t i = 0; i < spec.test_count; ++i) {
    out.push_back(generate_basis(spec.n, stream_key({spec.seed, std::uint64_t(Stream::test), i})));
  }
  return out;
}

inline Basis training_basis(const DatasetSpec& spec, std::size_t epoch, std::size_t index) {
  return generate_basis(spec.n,
                        stream_key({spec.seed, std::uint64_t(Stream::train), epoch, index}));
}

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t k = 0;  // 0 means k = n
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double temperature = 1.0;
  LossAggregation aggregation = LossAggregation::mean_over_steps;
  std::size_t batch_size = 50;   // optimizer steps per epoch = train_per_epoch / batch_size
  std::size_t eval_every = 10;   // test-set evaluation period in epochs (0: only at the end)
  std::size_t eval_count = 0;    // test matrices used for the curve (0: the full test set)
  std::uint64_t seed = 0;
  PolicyConfig policy;
};

inline std::size_t steps_for(const TrainConfig& cfg, std::size_t n) { return cfg.k ? cfg.k : n; }

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
  std::size_t count = 0;
};

// Fixed-order summation, so the result depends only on the values.
inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  double acc = 0.0;
  for (double x : v) acc += x;
  s.mean = acc / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

class Adam {
 public:
  Adam(const PolicyParams& params, double lr, double beta1, double beta2, double eps)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(params.parameter_count(), 0.0), v_(params.parameter_count(), 0.0) {}

  void step(PolicyParams& params, const std::vector<double>& grad) {
    ++t_;
    std::vector<double> theta = params.flatten();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grad[k];
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grad[k] * grad[k];
      theta[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
    params.assign(theta);
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<double> m_, v_;
};

// Plain gradient descent, the alternative optimizer choice.
class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}
  void step(PolicyParams& params, const std::vector<double>& grad) {
    std::vector<double> theta = params.flatten();
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= lr_ * grad[k];
    params.assign(theta);
  }

 private:
  double lr_;
};

struct RolloutGradient {
  double loss = 0.0;
  std::vector<double> grad;  // flattened, parameter order
};

// Loss and straight-through gradient of one training rollout.
inline RolloutGradient rollout_gradient(const PolicyParams& params, const PairGraph& graph,
                                        const Basis& basis, std::size_t k, Rng& rng,
                                        const PolicyOptions& options, LossAggregation aggregation) {
  ad::Tape tape;
  const auto w = place(tape, params, true);
  TapeRollout r = rollout_on_tape(tape, graph, params, w, basis, k, rng, options, aggregation);
  tape.backward(r.loss);
  RolloutGradient out;
  out.loss = r.loss.value().item();
  out.grad.reserve(params.parameter_count());
  for (const auto& v : w) {
    const ad::Tensor g = tape.gradient(v);
    out.grad.insert(out.grad.end(), g.data.begin(), g.data.end());
  }
  return out;
}

struct GradientCheck {
  double analytic = 0.0;  // <reverse-mode gradient, direction>
  double numeric = 0.0;   // central difference of the replayed surrogate
};

// Directional check of the rollout-loss gradient. The rollout is drawn once;
// the surrogate replays its discrete decisions with the same noise, passing
// them through hard + soft - recorded soft, so it is smooth in the parameters
// and its derivative is the straight-through gradient.
inline GradientCheck directional_gradient_check(const PolicyParams& params, const Basis& basis,
                                                std::size_t k, std::uint64_t seed,
                                                const std::vector<double>& direction, double step,
                                                PolicyOptions options = {},
                                                LossAggregation aggregation = LossAggregation::mean_over_steps) {
  if (direction.size() != params.parameter_count()) throw ShapeError("direction has the wrong length");
  const PairGraph graph(basis.n());
  options.surrogate = false;
  std::vector<StepDecisions> decisions;
  GradientCheck out;
  {
    ad::Tape tape;
    const auto w = place(tape, params, true);
    Rng rng(seed);
    TapeRollout r = rollout_on_tape(tape, graph, params, w, basis, k, rng, options, aggregation);
    tape.backward(r.loss);
    std::size_t off = 0;
    for (const auto& v : w) {
      for (double g : tape.gradient(v).data) out.analytic += g * direction[off++];
    }
    decisions = std::move(r.decisions);
  }
  options.surrogate = true;
  PolicyParams probe = params;
  auto surrogate = [&](const std::vector<double>& theta) {
    probe.assign(theta);
    ad::Tape tape;
    const auto w = place(tape, probe, false);
    Rng rng(seed);
    return rollout_on_tape(tape, graph, probe, w, basis, k, rng, options, aggregation, &decisions)
        .loss.value()
        .item();
  };
  out.numeric = ad::directional_fd(surrogate, params.flatten(), direction, step);
  return out;
}

// Final log-defect of each basis after a policy rollout; sample i uses the
// stream (seed, eval, i).
inline std::vector<double> policy_log_defects(const PolicyParams& params,
                                              const std::vector<Basis>& bases, std::size_t k,
                                              std::uint64_t seed, const PolicyOptions& options = {}) {
  std::vector<double> out;
  out.reserve(bases.size());
  if (bases.empty()) return out;
  const PairGraph graph(bases.front().n());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    ad::Tape tape;
    const auto w = place(tape, params, false);
    Rng rng({seed, std::uint64_t(Stream::eval), i});
    TapeRollout r = rollout_on_tape(tape, graph, params, w, bases[i], k, rng, options);
    out.push_back(r.step_losses.back());
  }
  return out;
}

inline std::vector<double> lll_log_defects(const std::vector<Basis>& bases, const LllParams& p = {}) {
  std::vector<double> out;
  out.reserve(bases.size());
  for (const auto& b : bases) out.push_back(log_defect(lll_reduce(b, p).reduced));
  return out;
}

inline std::vector<double> identity_log_defects(const std::vector<Basis>& bases) {
  std::vector<double> out;
  out.reserve(bases.size());
  for (const auto& b : bases) out.push_back(log_defect(b));
  return out;
}

struct CurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<Summary> test;  // present on evaluation epochs
  Summary lll;
};

struct TrainResult {
  PolicyParams params;
  std::vector<CurvePoint> curve;
};

using ProgressFn = std::function<void(const CurvePoint&)>;

// Self-supervised training: every epoch draws fresh bases, runs k-step
// rollouts, averages the per-step log-defects, and takes one optimizer step
// per mini-batch. Deterministic given the seeds.
inline TrainResult train(const DatasetSpec& spec, const TrainConfig& cfg,
                         const ProgressFn& progress = {},
                         std::optional<PolicyParams> initial = std::nullopt) {
  if (!(cfg.learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
  if (cfg.batch_size == 0) throw DomainError("batch size must be positive");
  const std::size_t n = spec.n;
  const std::size_t k = steps_for(cfg, n);
  const PairGraph graph(n);
  PolicyParams params = initial ? *initial : PolicyParams::initialize(cfg.policy, cfg.seed);
  Adam adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
  Sgd sgd(cfg.learning_rate);
  if (cfg.optimizer != "adam" && cfg.optimizer != "sgd") {
    throw DomainError("unknown optimizer '" + cfg.optimizer + "'");
  }
  const PolicyOptions options{cfg.temperature, SampleMode::stochastic};

  TrainResult result{params, {}};
  if (cfg.epochs == 0) return result;

  std::vector<Basis> tests = test_set(spec);
  if (cfg.eval_count && cfg.eval_count < tests.size()) {
    tests.erase(tests.begin() + static_cast<std::ptrdiff_t>(cfg.eval_count), tests.end());
  }
  const Summary lll = summarize(lll_log_defects(tests));

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < spec.train_per_epoch; start += cfg.batch_size) {
      const std::size_t stop = std::min(spec.train_per_epoch, start + cfg.batch_size);
      std::vector<double> grad(params.parameter_count(), 0.0);
      for (std::size_t idx = start; idx < stop; ++idx) {
        const Basis b = training_basis(spec, epoch, idx);
        Rng rng({cfg.seed, std::uint64_t(Stream::train), epoch, idx});
        RolloutGradient rg;
        try {
          rg = rollout_gradient(params, graph, b, k, rng, options, cfg.aggregation);
        } catch (const DomainError& e) {
          // Numeric breakdown inside the rollout (NaN scores, overflowing moves).
          throw DivergenceError(std::string("rollout failed: ") + e.what(), static_cast<int>(epoch), cfg.seed);
        } catch (const SingularBasisError& e) {
          throw DivergenceError(std::string("rollout failed: ") + e.what(), static_cast<int>(epoch), cfg.seed);
        } catch (const NonSymmetricError& e) {
          throw DivergenceError(std::string("rollout failed: ") + e.what(), static_cast<int>(epoch), cfg.seed);
        }
        if (!std::isfinite(rg.loss) || !std::all_of(rg.grad.begin(), rg.grad.end(), [](double g) { return std::isfinite(g); })) {
          throw DivergenceError("non-finite training loss", static_cast<int>(epoch), cfg.seed);
        }
        epoch_loss += rg.loss;
        for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += rg.grad[p];
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : grad) g *= inv;
      if (cfg.optimizer == "adam") adam.step(params, grad);
      else sgd.step(params, grad);
      if (!params.all_finite()) {
        throw DivergenceError("non-finite parameters", static_cast<int>(epoch), cfg.seed);
      }
    }
    CurvePoint point;
    point.epoch = epoch + 1;
    point.train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(spec.train_per_epoch, 1));
    point.lll = lll;
    const bool last = epoch + 1 == cfg.epochs;
    if (last || (cfg.eval_every && (epoch + 1) % cfg.eval_every == 0)) {
      point.test = summarize(policy_log_defects(params, tests, k, cfg.seed, options));
    }
    if (progress) progress(point);
    result.curve.push_back(point);
  }
  result.params = std::move(params);
  return result;
}

struct EvalReport {
  std::size_t n = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> policy;    // final log-defect per test matrix
  std::vector<double> lll;
  std::vector<double> identity;  // no reduction
  Summary policy_summary, lll_summary, identity_summary;
  double policy_seconds = 0.0;
  double lll_seconds = 0.0;
};

inline void resummarize(EvalReport& r) {
  r.policy_summary = summarize(r.policy);
  r.lll_summary = summarize(r.lll);
  r.identity_summary = summarize(r.identity);
}

inline EvalReport evaluate(const PolicyParams& params, const std::vector<Basis>& tests,
                           std::size_t k, std::uint64_t seed, const PolicyOptions& options = {},
                           const LllParams& lll_params = {}) {
  EvalReport r;
  r.n = tests.empty() ? 0 : tests.front().n();
  r.k = k ? k : r.n;
  r.seed = seed;
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  r.policy = policy_log_defects(params, tests, r.k, seed, options);
  auto t1 = clock::now();
  r.lll = lll_log_defects(tests, lll_params);
  auto t2 = clock::now();
  r.identity = identity_log_defects(tests);
  r.policy_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.lll_seconds = std::chrono::duration<double>(t2 - t1).count();
  resummarize(r);
  return r;
}

// One method's worst subset and both methods' statistics on it.
struct WorstSubset {
  std::string selected_by;        // "lll" or "policy"
  std::vector<std::size_t> indices;  // test-set positions, worst first
  Summary policy, lll;
};

struct WorstPReport {
  double p = 0.0;
  std::size_t size = 0;
  WorstSubset by_lll;
  WorstSubset by_policy;
};

// Top ceil(p N) matrices by one method's log-defect (descending, ties by
// index) with both methods evaluated on each subset.
inline WorstPReport worst_p_analysis(const EvalReport& report, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
  const std::size_t total = report.policy.size();
  if (total == 0 || report.lll.size() != total) throw EmptyReportError("report has no matrices");
  // The small slack keeps ceil exact when p N is an integer in decimal.
  const auto size = static_cast<std::size_t>(std::ceil(p * static_cast<double>(total) - 1e-9));
  WorstPReport out{p, size, {}, {}};
  auto build = [&](const std::vector<double>& key, const std::string& name) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    order.resize(size);
    WorstSubset s{name, order, {}, {}};
    // Statistics sum in test-set order, so p = 1 reproduces the full-set block.
    std::sort(order.begin(), order.end());
    std::vector<double> pv, lv;
    for (std::size_t i : order) {
      pv.push_back(report.policy[i]);
      lv.push_back(report.lll[i]);
    }
    s.policy = summarize(pv);
    s.lll = summarize(lv);
    return s;
  };
  out.by_lll = build(report.lll, "lll");
  out.by_policy = build(report.policy, "policy");
  return out;
}

}  // namespace latred
