#include "tikreg/tikhonov.hpp"

#include <sstream>

namespace tikreg {

namespace {

void require_dim(const char* who, Eigen::Index got, int want) {
  if (got != want) {
    throw DimensionError(std::string(who) + ": dimension " + std::to_string(got) + " does not match N=" +
                         std::to_string(want));
  }
}

}  // namespace

ProblemInstance::ProblemInstance(ForwardOp forward, PriorModel prior, NoiseModel noise)
    : forward_(std::move(forward)), prior_(std::move(prior)), noise_(noise) {
  require_dim("ProblemInstance forward operator", forward_.matrix.rows(), prior_.grid().n());
  require_dim("ProblemInstance forward operator", forward_.matrix.cols(), prior_.grid().n());
  noise_.validate(prior_.grid());
  prior_cov_ = prior_.coefficient_covariance();
  prior_cov_root_ = psd_sqrt(prior_cov_);
  noise_cov_ = noise_.coefficient_covariance(prior_.grid());
}

Matrix tikhonov_gain(const SymMatrix& b_squared, const ProblemInstance& inst) {
  require_dim("tikhonov_gain", b_squared.dim(), inst.n());
  const Matrix& a = inst.forward().matrix;
  const Matrix ab2 = multiply(a, b_squared.matrix());
  const SymMatrix gram(inst.noise_cov().matrix() + multiply(ab2, a.transpose()));
  // W = B²Aᵀ G⁻¹ with G symmetric, so Wᵀ = G⁻¹ (A B²).
  return solve_spd(gram, ab2).transpose();
}

AffineReconstructor build_reconstructor(const RegPair& pair, const ProblemInstance& inst) {
  require_dim("build_reconstructor", pair.h.coeffs.size(), inst.n());
  const Matrix& b = pair.b.matrix();
  Matrix w = tikhonov_gain(SymMatrix(multiply(b, b)), inst);
  Vector offset = pair.h.coeffs - w * (inst.forward().matrix * pair.h.coeffs);
  return {std::move(w), GridSignal(inst.grid(), std::move(offset))};
}

GridSignal reconstruct(const AffineReconstructor& r, const GridSignal& y) {
  if (r.w.cols() != y.coeffs.size() || r.w.rows() != r.b.coeffs.size()) {
    throw DimensionError("reconstruct: datum of length " + std::to_string(y.coeffs.size()) +
                         " does not fit a " + std::to_string(r.w.rows()) + "x" + std::to_string(r.w.cols()) +
                         " reconstructor");
  }
  return {r.b.grid, r.w * y.coeffs + r.b.coeffs};
}

double expected_risk(const AffineReconstructor& r, const ProblemInstance& inst) {
  const int n = inst.n();
  require_dim("expected_risk", r.w.rows(), n);
  require_dim("expected_risk", r.w.cols(), n);
  require_dim("expected_risk", r.b.coeffs.size(), n);
  Matrix e = multiply(r.w, inst.forward().matrix);
  e.diagonal().array() -= 1.0;
  const double prior_term = frobenius_dot(multiply(e, inst.prior_cov().matrix()), e);
  const double noise_term = frobenius_dot(multiply(r.w, inst.noise_cov().matrix()), r.w);
  const Vector bias = e * inst.prior().mean.coeffs + r.b.coeffs;
  const double risk = (prior_term + noise_term + bias.squaredNorm()) / n;
  if (risk < -1e-12) {
    std::ostringstream os;
    os << "expected_risk: negative risk " << risk << " (inconsistent covariances)";
    throw NumericalError(os.str());
  }
  return risk < 0.0 ? 0.0 : risk;
}

RegPair optimal_pair(const ProblemInstance& inst) {
  return {inst.prior().mean, inst.prior_cov_root()};
}

double minimal_risk(const ProblemInstance& inst) {
  const Matrix& root = inst.prior_cov_root().matrix();
  const Matrix a_root = multiply(inst.forward().matrix, root);
  const Matrix p = solve_spd(inst.noise_cov(), a_root);  // Σ_ε⁻¹ A Σ^{1/2}
  Matrix k = multiply_tn(a_root, p);                     // Σ^{1/2}AᵀΣ_ε⁻¹AΣ^{1/2}
  k.diagonal().array() += 1.0;
  const Matrix solved = solve_spd(SymMatrix(k), root);
  const double risk = trace_product(root, solved) / inst.n();
  return risk < 0.0 && risk > -1e-12 ? 0.0 : risk;
}

double normal_equation_residual(const AffineReconstructor& r, const ProblemInstance& inst) {
  const Matrix& a = inst.forward().matrix;
  const Matrix& cov = inst.prior_cov().matrix();
  const Matrix cov_at = multiply(cov, a.transpose());
  const Matrix lhs = multiply(r.w, multiply(a, cov_at) + inst.noise_cov().matrix());
  const double denom = frobenius_norm(cov_at);
  if (denom == 0.0) return frobenius_norm(lhs);
  return frobenius_norm(lhs - cov_at) / denom;
}

Matrix optimal_gain_sqrt_form(const ProblemInstance& inst) {
  const Matrix& root = inst.prior_cov_root().matrix();
  const Matrix a_root = multiply(inst.forward().matrix, root);
  const Matrix p = solve_spd(inst.noise_cov(), a_root);
  Matrix k = multiply_tn(a_root, p);
  k.diagonal().array() += 1.0;
  // Σ^{1/2} K⁻¹ (Σ_ε⁻¹ A Σ^{1/2})ᵀ
  return multiply(root, solve_spd(SymMatrix(k), p.transpose()));
}

Matrix optimal_gain_covariance_form(const ProblemInstance& inst) {
  const Matrix& a = inst.forward().matrix;
  const Matrix a_cov = multiply(a, inst.prior_cov().matrix());
  const SymMatrix gram(multiply(a_cov, a.transpose()) + inst.noise_cov().matrix());
  return solve_spd(gram, a_cov).transpose();
}

}  // namespace tikreg
