#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "latred/autodiff.hpp"
#include "latred/error.hpp"
#include "latred/gauss_moves.hpp"
#include "latred/lattice.hpp"
#include "latred/matrix.hpp"
#include "latred/random.hpp"

namespace latred {

// Ordered index pairs (i, j), i != j, as nodes of a message-passing graph.
// Two nodes are adjacent when they share an index; the four share patterns
// of a neighbour (i', j') of (i, j) are the adjacency classes
//   0: i' = i,   1: j' = j,   2: j' = i,   3: i' = j.
class PairGraph {
 public:
  static constexpr std::size_t kClasses = 4;

  explicit PairGraph(std::size_t n) : n_(n) {
    if (n < 2) throw DomainError("pair graph needs n >= 2");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) nodes_.emplace_back(i, j);
    const std::size_t count = nodes_.size();
    for (const auto& [i, j] : nodes_) {
      flat_ij_.push_back(i * n + j);
      flat_ii_.push_back(i * n + i);
      flat_jj_.push_back(j * n + j);
    }
    for (std::size_t c = 0; c < kClasses; ++c) {
      ad::Tensor a({count, count}, 0.0);
      for (std::size_t u = 0; u < count; ++u) {
        std::size_t members = 0;
        for (std::size_t v = 0; v < count; ++v) {
          if (u != v && in_class(c, u, v)) ++members;
        }
        for (std::size_t v = 0; v < count && members; ++v) {
          if (u != v && in_class(c, u, v)) a(u, v) = 1.0 / static_cast<double>(members);
        }
      }
      mean_aggregation_[c] = std::move(a);
    }
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& nodes() const noexcept { return nodes_; }

  std::size_t node_index(std::size_t i, std::size_t j) const {
    if (i == j || i >= n_ || j >= n_) throw DomainError("not an off-diagonal index pair");
    return i * (n_ - 1) + (j < i ? j : j - 1);
  }

  bool adjacent(std::size_t u, std::size_t v) const {
    if (u == v) return false;
    for (std::size_t c = 0; c < kClasses; ++c)
      if (in_class(c, u, v)) return true;
    return false;
  }

  bool in_class(std::size_t c, std::size_t u, std::size_t v) const {
    const auto [i, j] = nodes_[u];
    const auto [ii, jj] = nodes_[v];
    switch (c) {
      case 0: return ii == i;
      case 1: return jj == j;
      case 2: return jj == i;
      case 3: return ii == j;
      default: return false;
    }
  }

  const std::vector<std::size_t>& flat_ij() const noexcept { return flat_ij_; }
  const std::vector<std::size_t>& flat_ii() const noexcept { return flat_ii_; }
  const std::vector<std::size_t>& flat_jj() const noexcept { return flat_jj_; }
  // Row-normalized adjacency of class c (mean over the class members).
  const ad::Tensor& mean_aggregation(std::size_t c) const { return mean_aggregation_[c]; }

 private:
  std::size_t n_;
  std::vector<std::pair<std::size_t, std::size_t>> nodes_;
  std::vector<std::size_t> flat_ij_, flat_ii_, flat_jj_;
  std::array<ad::Tensor, kClasses> mean_aggregation_;
};

// How the sampled index turns into a move: the full row i and column j of the
// rounded score matrix, or only the single entry (i, j) (a plain Gauss move).
enum class MoveFill { row_col, single_entry };

inline std::string to_string(MoveFill f) {
  return f == MoveFill::row_col ? "row_col" : "single_entry";
}
inline MoveFill move_fill_from_string(const std::string& s) {
  if (s == "row_col") return MoveFill::row_col;
  if (s == "single_entry") return MoveFill::single_entry;
  throw DomainError("unknown move_fill '" + s + "'");
}

struct PolicyConfig {
  std::size_t layers = 3;
  std::size_t width = 32;
  MoveFill move_fill = MoveFill::row_col;
};

struct NamedTensor {
  std::string name;
  ad::Tensor value;
};

// Invariant node channels: G_ii, G_jj, (G^2)_ii, (G^2)_jj, |G_ij|, |cos(b_i, b_j)|.
inline constexpr std::size_t kInvariantChannels = 6;
// Covariant node channels (G^p)_ij for p = 1, 2, 3.
inline constexpr std::size_t kCovariantChannels = 3;

// Parameters of the equivariant scorer. Weights are shared across nodes, so
// one parameter set serves every dimension n.
class PolicyParams {
 public:
  PolicyParams() = default;
  PolicyParams(PolicyConfig config, std::vector<NamedTensor> tensors)
      : config_(config), tensors_(std::move(tensors)) {
    validate();
  }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases; the head
  // starts at rho = (1, 0, 0) plus small noise so the initial scores follow
  // the off-diagonal pattern of G.
  static PolicyParams initialize(const PolicyConfig& config, std::uint64_t seed) {
    Rng rng({seed, 0x1217ULL});
    const std::size_t d = config.width;
    std::vector<NamedTensor> t;
    auto uniform = [&](const std::string& name, std::size_t rows, std::size_t cols, double bound) {
      ad::Tensor w({rows, cols});
      for (auto& x : w.data) x = rng.uniform(-bound, bound);
      t.push_back({name, std::move(w)});
    };
    auto zeros = [&](const std::string& name, std::size_t cols) {
      t.push_back({name, ad::Tensor({1, cols}, 0.0)});
    };
    uniform("embed.weight", kInvariantChannels, d, 1.0 / std::sqrt(double(kInvariantChannels)));
    zeros("embed.bias", d);
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      uniform(p + "self", d, d, 1.0 / std::sqrt(double(d)));
      for (std::size_t c = 0; c < PairGraph::kClasses; ++c) {
        uniform(p + "class" + std::to_string(c), d, d, 1.0 / std::sqrt(double(d)));
      }
      zeros(p + "bias", d);
    }
    uniform("head.weight", d, kCovariantChannels, 0.01 / std::sqrt(double(d)));
    t.push_back({"head.bias", ad::Tensor({1, kCovariantChannels}, std::vector<double>{1.0, 0.0, 0.0})});
    return PolicyParams(config, std::move(t));
  }

  const PolicyConfig& config() const noexcept { return config_; }
  const std::vector<NamedTensor>& tensors() const noexcept { return tensors_; }
  std::vector<NamedTensor>& tensors() noexcept { return tensors_; }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& t : tensors_) c += t.value.size();
    return c;
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& t : tensors_) out.insert(out.end(), t.value.data.begin(), t.value.data.end());
    return out;
  }

  void assign(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw ShapeError("parameter vector has the wrong length");
    std::size_t off = 0;
    for (auto& t : tensors_) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                flat.begin() + static_cast<std::ptrdiff_t>(off + t.value.size()), t.value.data.begin());
      off += t.value.size();
    }
  }

  bool all_finite() const {
    for (const auto& t : tensors_)
      for (double x : t.value.data)
        if (!std::isfinite(x)) return false;
    return true;
  }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (std::size_t k = 0; k < a.tensors_.size(); ++k) {
      if (a.tensors_[k].name != b.tensors_[k].name ||
          !(a.tensors_[k].value.shape == b.tensors_[k].value.shape) ||
          a.tensors_[k].value.data != b.tensors_[k].value.data)
        return false;
    }
    return a.config_.layers == b.config_.layers && a.config_.width == b.config_.width &&
           a.config_.move_fill == b.config_.move_fill;
  }

 private:
  void validate() const {
    const std::size_t d = config_.width;
    const std::size_t expected = 2 + config_.layers * (2 + PairGraph::kClasses) + 2;
    if (tensors_.size() != expected) throw ShapeError("unexpected number of parameter tensors");
    auto check = [&](std::size_t k, std::size_t r, std::size_t c) {
      if (!(tensors_[k].value.shape == ad::Shape{r, c})) {
        throw ShapeError("parameter " + tensors_[k].name + " has shape " +
                         ad::to_string(tensors_[k].value.shape));
      }
    };
    std::size_t k = 0;
    check(k++, kInvariantChannels, d);
    check(k++, 1, d);
    for (std::size_t l = 0; l < config_.layers; ++l) {
      for (std::size_t c = 0; c < 1 + PairGraph::kClasses; ++c) check(k++, d, d);
      check(k++, 1, d);
    }
    check(k++, d, kCovariantChannels);
    check(k++, 1, kCovariantChannels);
  }

  PolicyConfig config_;
  std::vector<NamedTensor> tensors_;
};

// Parameter tensors placed on a tape as differentiable leaves (or constants).
inline std::vector<ad::Var> place(ad::Tape& tape, const PolicyParams& params, bool differentiable) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors().size());
  for (const auto& t : params.tensors()) {
    vars.push_back(differentiable ? tape.variable(t.value) : tape.constant(t.value));
  }
  return vars;
}

namespace detail {

inline ad::Var trace_mean(const ad::Var& g, const PairGraph& graph) {
  const std::size_t n = graph.n();
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i * n + i;
  return ad::scale(ad::sum(ad::gather(g, diag, {n, 1})), 1.0 / static_cast<double>(n));
}

// X / (trace(X) / n).
inline ad::Var trace_normalize(const ad::Var& x, const PairGraph& graph) {
  return ad::scale_by(x, ad::reciprocal(trace_mean(x, graph)));
}

}  // namespace detail

// Score matrix M (n x n, zero diagonal) on the tape. Equivariant under
// G -> H^T G H for signed permutations H: the network only sees invariant
// node channels, and each score is a combination of covariant channels
// (G^p)_ij weighted by functions of those invariants.
inline ad::Var score_matrix(const PairGraph& graph, const PolicyParams& params,
                            const std::vector<ad::Var>& w, const ad::Var& g) {
  const std::size_t n = graph.n();
  const std::size_t count = graph.size();
  if (!(g.shape() == ad::Shape{n, n})) throw ShapeError("Gram matrix dimension does not match graph");
  ad::Tape& tape = *g.tape();

  const ad::Var g1 = detail::trace_normalize(g, graph);
  const ad::Var g2 = detail::trace_normalize(ad::matmul(g1, g1), graph);
  const ad::Var g3 = detail::trace_normalize(ad::matmul(g2, g1), graph);

  const ad::Shape col{count, 1};
  const ad::Var gii = ad::gather(g1, graph.flat_ii(), col);
  const ad::Var gjj = ad::gather(g1, graph.flat_jj(), col);
  const ad::Var gij = ad::gather(g1, graph.flat_ij(), col);
  const ad::Var abs_gij = ad::abs(gij);
  const ad::Var abs_cos = ad::mul(abs_gij, ad::reciprocal(ad::sqrt(ad::mul(gii, gjj))));
  const ad::Var features = ad::hconcat({gii, gjj, ad::gather(g2, graph.flat_ii(), col),
                                        ad::gather(g2, graph.flat_jj(), col), abs_gij, abs_cos});
  const ad::Var covariant = ad::hconcat(
      {gij, ad::gather(g2, graph.flat_ij(), col), ad::gather(g3, graph.flat_ij(), col)});

  std::size_t k = 0;
  ad::Var h = ad::elementwise_even(ad::add_row(ad::matmul(features, w[k]), w[k + 1]), ad::fn::logcosh);
  k += 2;
  for (std::size_t l = 0; l < params.config().layers; ++l) {
    ad::Var pre = ad::matmul(h, w[k++]);
    for (std::size_t c = 0; c < PairGraph::kClasses; ++c) {
      const ad::Var agg = ad::matmul(tape.constant(graph.mean_aggregation(c)), h);
      pre = ad::add(pre, ad::matmul(agg, w[k++]));
    }
    pre = ad::add_row(pre, w[k++]);
    h = ad::add(h, ad::elementwise_even(pre, ad::fn::logcosh));
  }
  const ad::Var rho = ad::add_row(ad::matmul(h, w[k]), w[k + 1]);
  const ad::Var m_nodes = ad::row_sum(ad::mul(covariant, rho));
  return ad::scatter(m_nodes, graph.flat_ij(), {n, n});
}

// Deterministic score map M(G).
inline RealMatrix forward_scores(const GramMatrix& g, const PolicyParams& params) {
  const std::size_t n = g.n();
  const PairGraph graph(n);
  ad::Tape tape;
  const auto w = place(tape, params, false);
  const ad::Var gv = tape.constant(ad::Tensor({n, n}, std::vector<double>(g.matrix().data().begin(),
                                                                          g.matrix().data().end())));
  const ad::Tensor& m = score_matrix(graph, params, w, gv).value();
  RealMatrix out(n, n);
  std::copy(m.data.begin(), m.data.end(), out.data().begin());
  return out;
}

// Validates symmetry first; a non-symmetric input raises NonSymmetricError.
inline RealMatrix forward_scores(const RealMatrix& g, const PolicyParams& params) {
  return forward_scores(GramMatrix(g), params);
}

// Below this total |M| mass the scores are treated as degenerate.
inline constexpr double kDegenerateScoreMass = 1e-12;

struct IndexDistribution {
  std::vector<std::pair<std::size_t, std::size_t>> indices;  // row-major off-diagonal order
  std::vector<double> probabilities;
  bool degenerate = false;  // all-zero scores: uniform fallback
};

inline IndexDistribution index_distribution(const RealMatrix& m) {
  if (!m.is_square() || m.rows() < 2) throw DimensionMismatchError("score matrix must be square, n >= 2");
  const std::size_t n = m.rows();
  IndexDistribution d;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        d.indices.emplace_back(i, j);
        total += std::abs(m(i, j));
      }
  const double count = static_cast<double>(d.indices.size());
  d.degenerate = total < kDegenerateScoreMass;
  for (const auto& [i, j] : d.indices) {
    d.probabilities.push_back(d.degenerate ? 1.0 / count : std::abs(m(i, j)) / total);
  }
  return d;
}

// How moves are drawn: stochastic (Gumbel index + stochastic rounding) or
// greedy (most probable index, nearest rounding).
enum class SampleMode { stochastic, greedy };

struct PolicyOptions {
  double temperature = 1.0;
  SampleMode mode = SampleMode::stochastic;
  // With replayed decisions: route them through hard + soft - recorded soft,
  // a smooth surrogate whose gradient is the straight-through gradient.
  bool surrogate = false;
};

// Recorded discrete decisions of one step, enough to replay it exactly.
struct StepDecisions {
  std::size_t node = 0;
  ad::Tensor lower;       // per node
  ad::Tensor up;          // per node
  ad::Tensor index_soft;  // relaxed one-hot at the time of the draw
  ad::Tensor round_soft;  // relaxed rounding probabilities
};

struct PolicyStep {
  ad::Var scores;        // M, n x n
  ad::Var move;          // T, n x n: exact integers forward, relaxed backward
  std::size_t i = 0;
  std::size_t j = 0;
  ExtendedGaussMove exact;
  StepDecisions decisions;
  bool degenerate = false;
};

// Relative floor added to |M| before taking logs so zero scores keep finite
// logits.
inline constexpr double kLogitFloor = 1e-12;

inline PolicyStep policy_step(const PairGraph& graph, const PolicyParams& params,
                              const std::vector<ad::Var>& w, const ad::Var& g, Rng& rng,
                              const PolicyOptions& options = {},
                              const StepDecisions* replay = nullptr) {
  ad::Tape& tape = *g.tape();
  const std::size_t n = graph.n();
  const std::size_t count = graph.size();
  const ad::Var scores = score_matrix(graph, params, w, g);
  const ad::Var m_nodes = ad::gather(scores, graph.flat_ij(), {count, 1});

  double total = 0.0;
  for (double x : m_nodes.value().data) total += std::abs(x);
  const bool degenerate = total < kDegenerateScoreMass;
  if (degenerate) {
    std::cerr << R"({"event":"warning","message":"degenerate policy scores, sampling the index uniformly"})" << '\n';
  }

  // Index selection over the off-diagonal entries with p_ij proportional to |M_ij|.
  ad::Var logits;
  if (degenerate) {
    logits = tape.constant(ad::Tensor({count, 1}, 0.0));
  } else {
    // log|M_ij| differs from log p_ij by a constant, which softmax ignores.
    const double floor = kLogitFloor * total / static_cast<double>(count);
    logits = ad::log(ad::add(ad::abs(m_nodes), tape.constant(ad::Tensor({count, 1}, floor))));
  }
  std::optional<std::size_t> forced;
  if (replay) forced = replay->node;
  if (options.mode == SampleMode::greedy && !replay) {
    const auto& lv = logits.value().data;
    forced = static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) - lv.begin());
  }
  const bool anchored = replay && options.surrogate;
  ad::GumbelSample pick = ad::gumbel_softmax_sample(logits, options.temperature, rng, forced,
                                                    anchored ? &replay->index_soft : nullptr);

  // Stochastic rounding of every off-diagonal score.
  ad::RoundingReplay rr;
  ad::Tensor greedy_lower, greedy_up;
  if (replay) {
    rr = {&replay->lower, &replay->up, anchored ? &replay->round_soft : nullptr};
  } else if (options.mode == SampleMode::greedy) {
    greedy_lower = ad::Tensor(m_nodes.shape());
    greedy_up = ad::Tensor(m_nodes.shape());
    for (std::size_t k = 0; k < count; ++k) {
      const double x = m_nodes.value().data[k];
      greedy_lower.data[k] = std::floor(x);
      greedy_up.data[k] = std::round(x) - std::floor(x);
    }
    rr = {&greedy_lower, &greedy_up, nullptr};
  }
  ad::RoundingSample rounded = ad::stochastic_round(m_nodes, options.temperature, rng, rr);

  const ad::Var y = ad::scatter(pick.value, graph.flat_ij(), {n, n});
  const ad::Var r0 = ad::scatter(rounded.value, graph.flat_ij(), {n, n});
  const ad::Var eye = tape.constant(ad::Tensor::identity(n));
  ad::Var move;
  if (params.config().move_fill == MoveFill::row_col) {
    // T = I + diag(Y 1) R0 + R0 diag(1^T Y) - Y o R0.
    const ad::Var rows = ad::matmul(ad::diag(ad::row_sum(y)), r0);
    const ad::Var cols = ad::matmul(r0, ad::diag(ad::transpose(ad::col_sum(y))));
    move = ad::sub(ad::add(eye, ad::add(rows, cols)), ad::mul(y, r0));
  } else {
    move = ad::add(eye, ad::mul(y, r0));
  }

  const auto [i, j] = graph.nodes()[pick.index];
  std::vector<BigInt> a(n, 0), b(n, 0);
  auto rounded_at = [&](std::size_t r, std::size_t c) {
    return rounded.value.value().data[graph.node_index(r, c)];
  };
  if (params.config().move_fill == MoveFill::row_col) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l != i) a[l] = to_bigint(rounded_at(i, l));
      if (l != i && l != j) b[l] = to_bigint(rounded_at(l, j));
    }
  } else {
    a[j] = to_bigint(rounded_at(i, j));
  }
  return {scores,
          move,
          i,
          j,
          ExtendedGaussMove(n, i, j, std::move(a), std::move(b)),
          {pick.index, rounded.lower, rounded.up, pick.soft.value(), rounded.soft},
          degenerate};
}

enum class LossAggregation { mean_over_steps, final_step };

// log delta of the basis on the tape, with log|det| supplied as a constant.
inline ad::Var log_defect_on_tape(const ad::Var& basis, double log_abs_det) {
  const ad::Var sq = ad::col_sum(ad::mul(basis, basis));
  const ad::Var half_logs = ad::scale(ad::sum(ad::log(sq)), 0.5);
  return ad::sub(half_logs, basis.tape()->constant(ad::Tensor::scalar(log_abs_det)));
}

inline ad::Tensor to_tensor(const RealMatrix& m) {
  return ad::Tensor({m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

struct TapeRollout {
  ad::Var loss;                        // aggregated training loss
  std::vector<double> step_losses;     // log delta(B_s), s = 1..k
  std::vector<ExtendedGaussMove> moves;
  std::vector<StepDecisions> decisions;
  ad::Var final_basis;
};

// k recursive policy steps B_s = B_{s-1} T_s with T_s = phi(B_{s-1}^T B_{s-1}).
// When `replay` is given its decisions are reused step by step.
inline TapeRollout rollout_on_tape(ad::Tape& tape, const PairGraph& graph,
                                   const PolicyParams& params, const std::vector<ad::Var>& w,
                                   const Basis& basis, std::size_t k, Rng& rng,
                                   const PolicyOptions& options = {},
                                   LossAggregation aggregation = LossAggregation::mean_over_steps,
                                   const std::vector<StepDecisions>* replay = nullptr) {
  if (k == 0) throw DomainError("rollout needs k >= 1");
  if (basis.n() != graph.n()) throw DimensionMismatchError("basis dimension differs from graph");
  const double log_det = log_abs_determinant(basis.matrix());
  ad::Var b = tape.constant(to_tensor(basis.matrix()));
  TapeRollout out;
  std::vector<ad::Var> losses;
  for (std::size_t s = 0; s < k; ++s) {
    const ad::Var bt = ad::transpose(b);
    const ad::Var prod = ad::matmul(bt, b);
    const ad::Var g = ad::scale(ad::add(prod, ad::transpose(prod)), 0.5);
    const StepDecisions* rep = replay ? &(*replay)[s] : nullptr;
    PolicyStep step = policy_step(graph, params, w, g, rng, options, rep);
    b = ad::matmul(b, step.move);
    const ad::Var loss = log_defect_on_tape(b, log_det);
    if (!std::isfinite(loss.value().item())) throw SingularBasisError("rollout produced a singular basis");
    losses.push_back(loss);
    out.step_losses.push_back(loss.value().item());
    out.moves.push_back(std::move(step.exact));
    out.decisions.push_back(std::move(step.decisions));
  }
  if (aggregation == LossAggregation::final_step) {
    out.loss = losses.back();
  } else {
    ad::Var acc = losses.front();
    for (std::size_t s = 1; s < losses.size(); ++s) acc = ad::add(acc, losses[s]);
    out.loss = ad::scale(acc, 1.0 / static_cast<double>(losses.size()));
  }
  out.final_basis = b;
  return out;
}

struct RolloutResult {
  std::vector<ExtendedGaussMove> moves;
  std::vector<double> step_losses;   // log delta after each move
  UnimodularMatrix transform;        // exact T_1 ... T_k
  Basis final_basis;                 // B T_1 ... T_k
};

inline RolloutResult rollout(const Basis& basis, const PolicyParams& params, std::size_t k,
                             std::uint64_t seed, const PolicyOptions& options = {}) {
  const PairGraph graph(basis.n());
  ad::Tape tape;
  const auto w = place(tape, params, false);
  Rng rng({seed, 0x7011ULL});
  TapeRollout r = rollout_on_tape(tape, graph, params, w, basis, k, rng, options);
  UnimodularMatrix q(product(r.moves, basis.n()));
  Basis final_basis = apply_unimodular(basis, q);
  return {std::move(r.moves), std::move(r.step_losses), std::move(q), std::move(final_basis)};
}

struct PolicyOutput {
  RealMatrix scores;
  IndexDistribution distribution;
  std::size_t i = 0;
  std::size_t j = 0;
  ExtendedGaussMove move;
  double log_probability = 0.0;  // log p_ij of the sampled index
};

// One sampled extended Gauss move for the basis with Gram matrix G.
inline PolicyOutput sample_move(const GramMatrix& g, const PolicyParams& params, std::uint64_t seed,
                                const PolicyOptions& options = {}) {
  const std::size_t n = g.n();
  const PairGraph graph(n);
  ad::Tape tape;
  const auto w = place(tape, params, false);
  Rng rng({seed, 0x5a3bULL});
  const ad::Var gv = tape.constant(to_tensor(g.matrix()));
  PolicyStep step = policy_step(graph, params, w, gv, rng, options);
  RealMatrix m(n, n);
  std::copy(step.scores.value().data.begin(), step.scores.value().data.end(), m.data().begin());
  IndexDistribution dist = index_distribution(m);
  const double p = dist.probabilities[graph.node_index(step.i, step.j)];
  return {std::move(m), std::move(dist), step.i, step.j, std::move(step.exact), std::log(p)};
}

}  // namespace latred
