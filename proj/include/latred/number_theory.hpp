#pragma once

#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "latred/error.hpp"
#include "latred/matrix.hpp"

namespace latred {

inline BigInt abs(const BigInt& x) { return x < 0 ? BigInt(-x) : x; }

inline BigInt gcd(BigInt a, BigInt b) {
  a = abs(a);
  b = abs(b);
  while (b != 0) {
    BigInt r = a % b;
    a = std::move(b);
    b = std::move(r);
  }
  return a;
}

// gcd of the entries; zeros do not contribute and an all-zero input gives 0.
inline BigInt gcd_of(std::span<const BigInt> values) {
  BigInt g = 0;
  for (const auto& v : values) {
    if (v != 0) g = gcd(g, v);
  }
  return g;
}

// Returns (g, x, y) with a x + b y = g = gcd(a, b) >= 0.
inline std::tuple<BigInt, BigInt, BigInt> extended_gcd(const BigInt& a, const BigInt& b) {
  BigInt old_r = a, r = b;
  BigInt old_s = 1, s = 0;
  BigInt old_t = 0, t = 1;
  while (r != 0) {
    const BigInt quotient = old_r / r;
    BigInt tmp = old_r - quotient * r;
    old_r = std::move(r);
    r = std::move(tmp);
    tmp = old_s - quotient * s;
    old_s = std::move(s);
    s = std::move(tmp);
    tmp = old_t - quotient * t;
    old_t = std::move(t);
    t = std::move(tmp);
  }
  if (old_r < 0) {
    old_r = -old_r;
    old_s = -old_s;
    old_t = -old_t;
  }
  return {old_r, old_s, old_t};
}

// Coefficients c with sum_k c_k values_k == target, built by folding the
// two-term extended Euclid over the list.
inline std::vector<BigInt> multi_bezout(std::span<const BigInt> values, const BigInt& target) {
  std::vector<BigInt> coeffs(values.size(), BigInt(0));
  BigInt g = 0;
  bool any = false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] == 0) continue;
    if (!any) {
      g = abs(values[k]);
      coeffs[k] = values[k] < 0 ? -1 : 1;
      any = true;
      continue;
    }
    auto [h, x, y] = extended_gcd(g, values[k]);
    for (std::size_t m = 0; m < k; ++m) coeffs[m] *= x;
    coeffs[k] = y;
    g = h;
  }
  if (!any) throw InfeasibleError("all values are zero");
  if (target % g != 0) {
    throw InfeasibleError("gcd " + g.str() + " does not divide " + target.str());
  }
  const BigInt scale = target / g;
  for (auto& c : coeffs) c *= scale;
  return coeffs;
}

}  // namespace latred
