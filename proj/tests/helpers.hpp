#pragma once

#include <random>

#include "qmb/hilbert.hpp"

namespace qmb::testing {

inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

inline CMat random_hermitian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
  return 0.5 * (m + m.adjoint());
}

inline CMat random_unitary(int n, std::mt19937_64& rng) { return expm_hermitian(random_hermitian(n, rng), 1.0); }

}  // namespace qmb::testing
