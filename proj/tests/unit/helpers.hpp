#pragma once

#include <random>

#include "phonoflux/core.hpp"

namespace testing {

inline phonoflux::OperatorMatrix random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  phonoflux::OperatorMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = {g(rng), g(rng)};
  return 0.5 * (a + a.adjoint());
}

inline phonoflux::OperatorMatrix random_complex(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  phonoflux::OperatorMatrix a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = {g(rng), g(rng)};
  return a;
}

// Random full-rank density matrix.
inline phonoflux::DensityMatrix random_density(int n, std::mt19937_64& rng) {
  const phonoflux::OperatorMatrix a = random_complex(n, n, rng);
  phonoflux::OperatorMatrix rho = a * a.adjoint();
  rho /= rho.trace();
  return phonoflux::DensityMatrix(rho);
}

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace testing
