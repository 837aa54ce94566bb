#pragma once

// Dense symmetric linear algebra used by every risk and learner formula.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

#include "tikreg/kernels.hpp"

namespace tikreg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised when a numerical routine cannot deliver its postcondition
/// (non-convergence, indefiniteness, singularity).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A square matrix that is exactly symmetric. Construction symmetrizes the
/// input as (M + Mᵀ)/2 so entries[i][j] == entries[j][i] bit-for-bit.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix zero(Eigen::Index n);
  static SymMatrix identity(Eigen::Index n);
  static SymMatrix diagonal(const Vector& d);

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

struct SpectralDecomp {
  Vector eigenvalues;  ///< descending
  Matrix eigenvectors; ///< columns are orthonormal eigenvectors
};

inline constexpr double kDefaultClampTol = 1e-10;

SpectralDecomp sym_eig(const SymMatrix& m);

/// Symmetric PSD square root with negative eigenvalues above
/// -clamp_tol * λ_max clamped to zero. Throws NumericalError("not PSD")
/// otherwise.
SymMatrix psd_sqrt(const SymMatrix& m, double clamp_tol = kDefaultClampTol);

/// m with all negative eigenvalues set to zero; returns the most negative
/// eigenvalue seen through min_eigenvalue when non-null.
SymMatrix clamp_psd(const SymMatrix& m, double* min_eigenvalue = nullptr);

/// Solves m X = rhs for symmetric positive definite m.
Matrix solve_spd(const SymMatrix& m, const Matrix& rhs);

/// tr(a b) without forming the product.
double trace_product(const Matrix& a, const Matrix& b);

/// Frobenius inner product Σ a∘b (= tr(a bᵀ)).
double frobenius_dot(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);

/// c = a * b through the dispatched gemm kernel.
Matrix multiply(const Matrix& a, const Matrix& b);

/// c = aᵀ * b through the dispatched gemm kernel.
Matrix multiply_tn(const Matrix& a, const Matrix& b);

inline kernels::ConstView view(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
          static_cast<std::size_t>(m.cols())};
}

inline kernels::MutView mut_view(Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()),
          static_cast<std::size_t>(m.cols())};
}

}  // namespace tikreg
