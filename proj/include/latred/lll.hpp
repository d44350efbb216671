#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "latred/error.hpp"
#include "latred/lattice.hpp"
#include "latred/matrix.hpp"

namespace latred {

// Slack used when certifying the size and Lovasz conditions in floating point.
inline constexpr double kConditionTolerance = 1e-9;

struct GramSchmidtState {
  RealMatrix bstar;              // column i is b*_i
  RealMatrix mu;                 // mu(i, j) for i > j, 1 on the diagonal, 0 above
  std::vector<double> sqnorms;   // |b*_i|^2
};

struct LllParams {
  double lovasz_delta = 0.75;
  // 0 selects the default cap derived from n and beta.
  std::size_t max_iterations = 0;
};

// Default safety cap 10 n^2 (2 + 3 ceil(log2(1 + beta))).
inline std::size_t default_iteration_cap(std::size_t n, double beta) {
  const double bits = std::ceil(std::log2(1.0 + beta));
  return static_cast<std::size_t>(10.0 * static_cast<double>(n * n) * (2.0 + 3.0 * bits));
}

// Round half away from zero.
inline double round_nearest(double x) { return std::round(x); }

namespace detail {

inline GramSchmidtState gram_schmidt(const RealMatrix& b) {
  const std::size_t n = b.cols();
  GramSchmidtState gs{RealMatrix(b.rows(), n, 0.0), RealMatrix::identity(n),
                      std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v = b.column(i);
    const std::vector<double> bi = v;
    for (std::size_t j = 0; j < i; ++j) {
      const std::vector<double> bj = gs.bstar.column(j);
      const double mu = dot(bi, bj) / gs.sqnorms[j];
      gs.mu(i, j) = mu;
      for (std::size_t r = 0; r < v.size(); ++r) v[r] -= mu * bj[r];
    }
    gs.sqnorms[i] = dot(v, v);
    if (!(gs.sqnorms[i] > 0.0)) throw SingularBasisError("linearly dependent basis vectors");
    for (std::size_t r = 0; r < v.size(); ++r) gs.bstar(r, i) = v[r];
  }
  return gs;
}

}  // namespace detail

inline GramSchmidtState gram_schmidt(const Basis& b) { return detail::gram_schmidt(b.matrix()); }

struct SiegelViolation {
  std::string condition;  // "size" or "lovasz"
  std::size_t i = 0;
  std::size_t j = 0;
  double value = 0.0;     // |mu_ij| for size; ratio minus threshold for lovasz
};

struct SiegelReport {
  bool reduced = true;
  std::vector<SiegelViolation> violations;
};

inline SiegelReport is_siegel_reduced(const Basis& b, const LllParams& params = {}) {
  const GramSchmidtState gs = gram_schmidt(b);
  SiegelReport report;
  const std::size_t n = b.n();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double m = std::abs(gs.mu(i, j));
      if (m > 0.5 + kConditionTolerance) {
        report.violations.push_back({"size", i, j, m});
      }
    }
    if (i == 0) continue;
    const double ratio = gs.sqnorms[i] / gs.sqnorms[i - 1];
    const double threshold = params.lovasz_delta - gs.mu(i, i - 1) * gs.mu(i, i - 1);
    if (ratio < threshold - kConditionTolerance) {
      report.violations.push_back({"lovasz", i, i - 1, ratio - threshold});
    }
  }
  report.reduced = report.violations.empty();
  return report;
}

struct LllResult {
  Basis reduced;
  UnimodularMatrix transform;
  std::size_t iterations = 0;
  std::size_t size_reductions = 0;
  std::size_t swaps = 0;
};

// LLL reduction. Gram-Schmidt is recomputed after every size-reduction step
// and after every swap; the unimodular transform is accumulated exactly and
// the returned basis is recomputed as B Q.
inline LllResult lll_reduce(const Basis& input, const LllParams& params = {}) {
  if (!(params.lovasz_delta > 0.25 && params.lovasz_delta <= 1.0)) {
    throw DomainError("lovasz_delta must lie in (1/4, 1]");
  }
  const std::size_t n = input.n();
  const std::size_t cap = params.max_iterations ? params.max_iterations
                                                : default_iteration_cap(n, input.max_norm());
  RealMatrix b = input.matrix();
  IntMatrix q = IntMatrix::identity(n);
  LllResult stats{input, UnimodularMatrix::identity(n)};

  GramSchmidtState gs = detail::gram_schmidt(b);
  std::size_t k = 1;
  while (k < n) {
    if (++stats.iterations > cap) {
      throw IterationCapError("LLL exceeded " + std::to_string(cap) + " iterations");
    }
    for (std::size_t jj = k; jj-- > 0;) {
      if (std::abs(gs.mu(k, jj)) > 0.5) {
        const double r = round_nearest(gs.mu(k, jj));
        const BigInt rq = to_bigint(r);
        for (std::size_t row = 0; row < n; ++row) {
          b(row, k) -= r * b(row, jj);
          q(row, k) -= rq * q(row, jj);
        }
        ++stats.size_reductions;
        gs = detail::gram_schmidt(b);
      }
    }
    const double mu = gs.mu(k, k - 1);
    if (gs.sqnorms[k] >= (params.lovasz_delta - mu * mu) * gs.sqnorms[k - 1]) {
      ++k;
    } else {
      b.swap_columns(k, k - 1);
      q.swap_columns(k, k - 1);
      ++stats.swaps;
      k = std::max<std::size_t>(k - 1, 1);
      gs = detail::gram_schmidt(b);
    }
  }

  UnimodularMatrix transform(std::move(q));
  Basis reduced(multiply(input.matrix(), transform.matrix()));
  return {std::move(reduced), std::move(transform), stats.iterations, stats.size_reductions,
          stats.swaps};
}

// 2^(n(n-1)/4): the orthogonality-defect bound for Siegel-reduced bases.
inline double defect_bound(std::size_t n) {
  if (n == 0) throw DomainError("dimension must be positive");
  return std::exp2(static_cast<double>(n * (n - 1)) / 4.0);
}

}  // namespace latred
