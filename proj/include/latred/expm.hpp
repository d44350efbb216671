#pragma once

#include <cmath>
#include <cstddef>

#include "latred/matrix.hpp"

namespace latred {

inline double norm1(const RealMatrix& a) {
  double best = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) s += std::abs(a(r, c));
    best = std::max(best, s);
  }
  return best;
}

// exp(A) by scaling and squaring: A is scaled by 2^-s until |A|_1 <= 1/2,
// the Taylor series is summed until the next term is below 1e-17 of the
// partial sum, and the result is squared s times.
inline RealMatrix expm(const RealMatrix& a) {
  if (!a.is_square()) throw DimensionMismatchError("expm of non-square matrix");
  const std::size_t n = a.rows();
  const double nrm = norm1(a);
  int s = 0;
  if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const double factor = std::ldexp(1.0, -s);
  RealMatrix x(n, n);
  for (std::size_t k = 0; k < x.data().size(); ++k) x.data()[k] = a.data()[k] * factor;

  RealMatrix result = RealMatrix::identity(n);
  RealMatrix term = RealMatrix::identity(n);
  for (int k = 1; k < 64; ++k) {
    term = term * x;
    for (double& v : term.data()) v /= static_cast<double>(k);
    result = result + term;
    if (norm1(term) <= 1e-17 * norm1(result)) break;
  }
  for (int k = 0; k < s; ++k) result = result * result;
  return result;
}

}  // namespace latred
