#pragma once

// Pixel discretization of L²(𝕋¹), the prior / noise / forward models built
// on it, and the orthonormal Haar transform.
//
// Conventions. A function u is stored by its cell averages ū (pixel
// coefficients), so ‖u‖² = (1/N) Σ ūᵢ². Operator matrices (cov_sqrt, the
// forward map) act on ū directly. Covariances handed to the estimator code
// are covariances of coefficient vectors: a prior with operator square root S
// has coefficient covariance N·S², white noise of level σ has σ²N·I.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tikreg/linalg.hpp"
#include "tikreg/rng.hpp"

namespace tikreg {

class Grid {
 public:
  explicit Grid(int n);
  int n() const { return n_; }
  bool power_of_two() const { return (n_ & (n_ - 1)) == 0; }
  /// Cell midpoint (i + 1/2)/N.
  double midpoint(int i) const { return (i + 0.5) / n_; }
  bool operator==(const Grid&) const = default;

 private:
  int n_;
};

struct GridSignal {
  Grid grid;
  Vector coeffs;

  GridSignal(Grid g, Vector c);
  static GridSignal zero(Grid g) { return GridSignal(g, Vector::Zero(g.n())); }

  /// ‖u‖²_X = (1/N) Σ ūᵢ².
  double norm_squared() const;
  double norm() const;
};

enum class ComponentDist { Gaussian, Uniform };
enum class NoiseBasis { Pixel, Haar };
enum class ForwardKind { Identity, CirculantBlur, Custom };

using ScalarFunction = std::function<double(double)>;

struct PriorModel {
  GridSignal mean;
  SymMatrix cov_sqrt;  ///< operator matrix S; samples are μ̄ + √N·S·ν
  ComponentDist dist = ComponentDist::Gaussian;

  PriorModel(GridSignal mean, SymMatrix cov_sqrt, ComponentDist dist = ComponentDist::Gaussian);

  /// Prior with operator covariance `covariance` (function-space units);
  /// stores its PSD square root.
  static PriorModel from_covariance(GridSignal mean, const SymMatrix& covariance,
                                    ComponentDist dist = ComponentDist::Gaussian);

  const Grid& grid() const { return mean.grid; }
  /// N·S², the covariance of the coefficient vector x̄.
  SymMatrix coefficient_covariance() const;
};

struct NoiseModel {
  double sigma = 0.05;
  ComponentDist dist = ComponentDist::Gaussian;
  NoiseBasis basis = NoiseBasis::Pixel;

  /// Throws if the model cannot be used on `grid` (σ ≤ 0, Haar on non-dyadic N).
  void validate(const Grid& grid) const;
  /// σ²N·I.
  SymMatrix coefficient_covariance(const Grid& grid) const;
};

struct ForwardOp {
  Matrix matrix;
  ForwardKind kind = ForwardKind::Custom;

  static ForwardOp identity(const Grid& grid);
  static ForwardOp custom(Matrix m);
  int dim() const { return static_cast<int>(matrix.rows()); }
};

/// Cell values by the midpoint rule: ūᵢ = f((i + 1/2)/N).
GridSignal pixel_coeffs(const ScalarFunction& f, const Grid& grid);

/// Distance from t to the nearest integer, i.e. |t| on the torus, in [0, 1/2].
double torus_distance(double t);

/// k(t) = (1 − exp(−(c/t)⁴))·χ_(−c,c)(t) on the torus, with k(0) = 1.
ScalarFunction paper_kernel(double c);

/// Circulant matrix Mᵢⱼ = k(d(i, j)/N)/N with d the cyclic index distance.
SymMatrix convolution_operator(const ScalarFunction& k, const Grid& grid);

/// Square root of the smoothness prior with per-mode variance
/// (1 + 4π|k|²)^(−s) on the real Fourier modes of the grid. Requires s > 1/2.
SymMatrix laplacian_prior_cov_sqrt(double s, const Grid& grid);

/// Exact cell averages of t ↦ 1 − |2t − 1|.
GridSignal triangle_mean(const Grid& grid);

/// Row-normalized circulant Gaussian bump of the given width (in [0,1) units).
ForwardOp blur_operator(double width, const Grid& grid);

/// One unit-variance draw from `dist`.
double draw_component(ComponentDist dist, RandomStream& rng);

GridSignal sample_prior(const PriorModel& prior, RandomStream& rng);
GridSignal sample_noise(const NoiseModel& noise, const Grid& grid, RandomStream& rng);

/// Fills `out` (rows = samples, cols = N) with prior draws. Draw order is
/// sample-major: the stream is consumed exactly as by repeated single draws.
void sample_prior_block(const PriorModel& prior, RandomStream& rng, Matrix& out);
void sample_noise_block(const NoiseModel& noise, const Grid& grid, RandomStream& rng, Matrix& out);

/// Orthonormal discrete Haar transform, coarsest coefficient first.
std::vector<double> haar_forward(std::span<const double> v);
std::vector<double> haar_inverse(std::span<const double> w);
void haar_forward_inplace(std::span<double> v, std::span<double> scratch);
void haar_inverse_inplace(std::span<double> w, std::span<double> scratch);

/// Dense N×N matrix of haar_forward.
Matrix haar_matrix(int n);

}  // namespace tikreg
