#pragma once

// Generalized Tikhonov reconstruction x̂ = W y + b for a regularization pair
// (h, B), its closed-form expected risk, and the optimal pair (μ, Σ_x^{1/2}).
//
// All matrices here live in pixel-coefficient space (see model.hpp). Risks
// are reported in function-space units, i.e. with the (1/N)-weighted norm.

#include "tikreg/linalg.hpp"
#include "tikreg/model.hpp"

namespace tikreg {

/// Offset h and PSD operator B of the penalty ‖B⁻¹(x − h)‖².
/// B is expressed in coefficient units: B² is a coefficient covariance.
struct RegPair {
  GridSignal h;
  SymMatrix b;
};

struct AffineReconstructor {
  Matrix w;
  GridSignal b;
};

/// y = A x + ε with a known prior and white noise. Coefficient-space
/// covariances are derived once on construction.
class ProblemInstance {
 public:
  ProblemInstance(ForwardOp forward, PriorModel prior, NoiseModel noise);

  const ForwardOp& forward() const { return forward_; }
  const PriorModel& prior() const { return prior_; }
  const NoiseModel& noise() const { return noise_; }
  const Grid& grid() const { return prior_.grid(); }
  int n() const { return grid().n(); }

  /// Covariance of x̄ (N·S²).
  const SymMatrix& prior_cov() const { return prior_cov_; }
  /// PSD square root of prior_cov().
  const SymMatrix& prior_cov_root() const { return prior_cov_root_; }
  /// Covariance of ε̄ (σ²N·I).
  const SymMatrix& noise_cov() const { return noise_cov_; }

 private:
  ForwardOp forward_;
  PriorModel prior_;
  NoiseModel noise_;
  SymMatrix prior_cov_;
  SymMatrix prior_cov_root_;
  SymMatrix noise_cov_;
};

/// W = B²Aᵀ(Σ_ε + A B² Aᵀ)⁻¹ for a given B² (coefficient units).
Matrix tikhonov_gain(const SymMatrix& b_squared, const ProblemInstance& inst);

AffineReconstructor build_reconstructor(const RegPair& pair, const ProblemInstance& inst);

GridSignal reconstruct(const AffineReconstructor& r, const GridSignal& y);

/// tr[(WA−I)Σ_x(WA−I)ᵀ] + tr[WΣ_εWᵀ] + ‖(WA−I)μ + b‖², in function units.
double expected_risk(const AffineReconstructor& r, const ProblemInstance& inst);

/// (μ, Σ_x^{1/2}); depends on the prior only.
RegPair optimal_pair(const ProblemInstance& inst);

/// tr(Σ_x^{1/2}(Σ_x^{1/2}AᵀΣ_ε⁻¹AΣ_x^{1/2} + I)⁻¹Σ_x^{1/2}), function units.
double minimal_risk(const ProblemInstance& inst);

/// ‖W(AΣ_xAᵀ + Σ_ε) − Σ_xAᵀ‖_F / ‖Σ_xAᵀ‖_F.
double normal_equation_residual(const AffineReconstructor& r, const ProblemInstance& inst);

/// Optimal gain through the square-root form
/// Σ^{1/2}(Σ^{1/2}AᵀΣ_ε⁻¹AΣ^{1/2} + I)⁻¹Σ^{1/2}AᵀΣ_ε⁻¹.
Matrix optimal_gain_sqrt_form(const ProblemInstance& inst);

/// Optimal gain through the covariance form Σ_xAᵀ(AΣ_xAᵀ + Σ_ε)⁻¹.
Matrix optimal_gain_covariance_form(const ProblemInstance& inst);

}  // namespace tikreg
