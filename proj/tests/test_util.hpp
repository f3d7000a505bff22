#pragma once

// Shared helpers for the unit tests. Random inputs come from std::mt19937_64
// so that they are independent of the library's own generator.

#include <cmath>
#include <random>

#include "qtomo/linalg.hpp"
#include "qtomo/states.hpp"

namespace qtomo::test {

inline CVector random_ket(int dim, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  CVector c(dim);
  for (int a = 0; a < dim; ++a) c(a) = Complex(n(g), n(g));
  return c / c.norm();
}

/// s x r Ginibre amplitudes normalized to unit trace.
inline CMatrix random_amplitudes(int dim, int rank, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  CMatrix l(dim, rank);
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < rank; ++b) l(a, b) = Complex(n(g), n(g));
  return l / l.norm();
}

inline DensityMatrix random_state(int dim, int rank, std::mt19937_64& g) {
  const CMatrix l = random_amplitudes(dim, rank, g);
  return DensityMatrix::normalized(l * l.adjoint());
}

inline double max_abs(const CMatrix& m) {
  return m.cwiseAbs().maxCoeff();
}

}  // namespace qtomo::test
