#pragma once

#include <random>

#include "tikreg/linalg.hpp"

namespace tikreg::test {

inline Matrix random_matrix(std::mt19937_64& g, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> d;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(g);
  return m;
}

/// G Gᵀ + shift·I, well conditioned for shift ~ n.
inline SymMatrix random_spd(std::mt19937_64& g, Eigen::Index n, double shift = 1.0) {
  const Matrix a = random_matrix(g, n, n);
  Matrix m = a * a.transpose();
  m.diagonal().array() += shift;
  return SymMatrix(m);
}

/// Rank-deficient PSD matrix G Gᵀ with G n×rank.
inline SymMatrix random_psd(std::mt19937_64& g, Eigen::Index n, Eigen::Index rank) {
  const Matrix a = random_matrix(g, n, rank);
  return SymMatrix(a * a.transpose());
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double d = b.norm();
  return (a - b).norm() / (d > 0 ? d : 1.0);
}

}  // namespace tikreg::test
