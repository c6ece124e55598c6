// SPDX-License-Identifier: Apache-2.0
//
// Test-only dense matrix exponential (scaling and squaring + Taylor), used as
// the independent oracle for finite-time occupation probabilities of small
// continuous-time chains.  Never included by library code.
#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mott::testsupport {

inline std::vector<double> mat_mul(const std::vector<double>& a,
                                   const std::vector<double>& b, std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  return c;
}

inline std::vector<double> expm(std::vector<double> a, std::size_t n) {
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::abs(a[i * n + j]);
    norm = std::max(norm, row);
  }
  int squarings = 0;
  while (norm > 0.5) {
    norm /= 2.0;
    ++squarings;
  }
  const double scale = std::ldexp(1.0, -squarings);
  for (auto& v : a) v *= scale;

  std::vector<double> result(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) result[i * n + i] = 1.0;
  std::vector<double> term(result);
  for (int k = 1; k <= 24; ++k) {
    term = mat_mul(term, a, n);
    for (auto& v : term) v /= static_cast<double>(k);
    for (std::size_t i = 0; i < n * n; ++i) result[i] += term[i];
  }
  for (int s = 0; s < squarings; ++s) result = mat_mul(result, result, n);
  return result;
}

}  // namespace mott::testsupport
