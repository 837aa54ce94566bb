#include "tikreg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tikreg {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("SymMatrix: matrix is " + shape(m) + ", not square");
  m_ = Matrix(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m_(i, i) = m(i, i);
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m_(i, j) = v;
      m_(j, i) = v;
    }
  }
}

SymMatrix SymMatrix::zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

SymMatrix SymMatrix::identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

SymMatrix SymMatrix::diagonal(const Vector& d) {
  return SymMatrix(Matrix(d.asDiagonal()));
}

SpectralDecomp sym_eig(const SymMatrix& m) {
  const Matrix& a = m.matrix();
  if (!a.allFinite()) {
    throw NumericalError("sym_eig: non-finite entries in " + std::to_string(m.dim()) + "x" +
                         std::to_string(m.dim()) + " matrix");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("sym_eig: eigen-solver did not converge for dimension " +
                         std::to_string(m.dim()));
  }
  SpectralDecomp out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

SymMatrix psd_sqrt(const SymMatrix& m, double clamp_tol) {
  if (m.dim() == 0) return m;
  const SpectralDecomp d = sym_eig(m);
  const double lmax = d.eigenvalues(0);
  const double lmin = d.eigenvalues(d.eigenvalues.size() - 1);
  if (lmin < -clamp_tol * std::max(lmax, 0.0)) {
    std::ostringstream os;
    os << "psd_sqrt: matrix is not PSD (smallest eigenvalue " << lmin << ", largest " << lmax
       << ", tolerance " << clamp_tol << ")";
    throw NumericalError(os.str());
  }
  const Vector roots = d.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return SymMatrix(d.eigenvectors * roots.asDiagonal() * d.eigenvectors.transpose());
}

SymMatrix clamp_psd(const SymMatrix& m, double* min_eigenvalue) {
  const SpectralDecomp d = sym_eig(m);
  if (min_eigenvalue) {
    *min_eigenvalue = d.eigenvalues.size() ? d.eigenvalues(d.eigenvalues.size() - 1) : 0.0;
  }
  const Vector clamped = d.eigenvalues.cwiseMax(0.0);
  return SymMatrix(d.eigenvectors * clamped.asDiagonal() * d.eigenvectors.transpose());
}

Matrix solve_spd(const SymMatrix& m, const Matrix& rhs) {
  if (rhs.rows() != m.dim()) {
    throw DimensionError("solve_spd: rhs is " + shape(rhs) + " but matrix has dimension " +
                         std::to_string(m.dim()));
  }
  Eigen::LLT<Matrix> llt(m.matrix());
  if (llt.info() != Eigen::Success) {
    const SpectralDecomp d = sym_eig(m);
    std::ostringstream os;
    os << "solve_spd: matrix is not positive definite (smallest eigenvalue "
       << d.eigenvalues(d.eigenvalues.size() - 1) << ")";
    throw NumericalError(os.str());
  }
  Matrix x = llt.solve(rhs);
  if (!x.allFinite()) throw NumericalError("solve_spd: solution has non-finite entries");
  return x;
}

double trace_product(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.cols() || a.cols() != b.rows()) {
    throw DimensionError("trace_product: shapes " + shape(a) + " and " + shape(b) + " do not chain");
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) s += a(i, j) * b(j, i);
  }
  return s;
}

double frobenius_dot(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("frobenius_dot: shapes " + shape(a) + " and " + shape(b) + " differ");
  }
  return kernels::dot({a.data(), static_cast<std::size_t>(a.size())},
                      {b.data(), static_cast<std::size_t>(b.size())});
}

double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_dot(a, a)); }

Matrix multiply(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  kernels::gemm(kernels::Op::None, view(a), view(b), mut_view(c), 1.0);
  return c;
}

Matrix multiply_tn(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.cols(), b.cols());
  kernels::gemm(kernels::Op::Transpose, view(a), view(b), mut_view(c), 1.0);
  return c;
}

}  // namespace tikreg
