#pragma once

// Learning a regularizer from samples: the unsupervised plug-in estimator
// (empirical mean and covariance of x alone) and the supervised closed-form
// empirical risk minimizer projected back onto the Tikhonov family.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tikreg/tikhonov.hpp"

namespace tikreg {

struct TrainingSet {
  std::vector<GridSignal> xs;
  std::vector<GridSignal> ys;

  std::size_t m() const { return xs.size(); }
  /// Throws DimensionError on unpaired samples or mixed grids.
  void validate() const;
};

struct MeanCov {
  GridSignal mean;
  SymMatrix cov;
};

/// 1/m-normalized centered moments.
struct EmpiricalMoments {
  MeanCov x;
  MeanCov y;
  Matrix cov_yx;  ///< (1/m) Σ (yⱼ − ŷ)(xⱼ − μ̂)ᵀ
  std::size_t m = 0;

  Matrix cov_xy() const { return cov_yx.transpose(); }
};

/// Streaming accumulator of first and second moments. Samples are shifted by
/// the first observation before accumulation, which keeps the one-pass
/// covariance free of cancellation when the mean dominates the spread.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(Grid grid, bool track_y = true);

  /// Rows of `xs` (and `ys`) are samples.
  void add_block(const Matrix& xs, const Matrix* ys = nullptr);
  void add(const GridSignal& x);
  void add(const GridSignal& x, const GridSignal& y);

  std::size_t count() const { return count_; }
  /// Mean and covariance of the x samples; needs at least one sample.
  MeanCov x_moments() const;
  /// Full joint moments; needs at least two samples and y tracking.
  EmpiricalMoments finalize() const;

 private:
  Grid grid_;
  bool track_y_;
  std::size_t count_ = 0;
  Vector shift_x_, shift_y_;
  std::vector<double> sum_x_, sum_y_;
  Matrix sxx_, syy_, syx_;
  Matrix scratch_x_, scratch_y_;
};

EmpiricalMoments empirical_moments(const TrainingSet& data);

/// Mean and covariance of xs (m ≥ 2).
MeanCov sample_mean_cov(std::span<const GridSignal> xs);

/// Exact population moments of (x, y) under the instance.
EmpiricalMoments population_moments(const ProblemInstance& inst);

/// (μ̂, Σ̂_x^{1/2}) from x samples only.
RegPair unsupervised_pair(std::span<const GridSignal> xs);
RegPair unsupervised_pair(const MeanCov& x_moments);

/// Affine empirical risk minimizer W = Σ̂_xy Σ̂_y⁻¹, b = μ̂ − Wŷ.
AffineReconstructor erm_affine(const TrainingSet& data);
AffineReconstructor erm_affine(const EmpiricalMoments& moments);

/// (1/m) Σ ‖W yⱼ + b − xⱼ‖²_X.
double empirical_risk(const AffineReconstructor& r, const TrainingSet& data);

struct SupervisedEstimate {
  AffineReconstructor erm;        ///< unconstrained affine minimizer
  AffineReconstructor projected;  ///< W′ from the symmetric part M′ of M
  SymMatrix m_sym;                ///< M′ after clamping to PSD
  double m_min_eigenvalue = 0.0;  ///< most negative eigenvalue of M′ before clamping
  bool clamp_warning = false;     ///< M′ had an eigenvalue below −1e-8·λ_max
  double risk = 0.0;              ///< expected risk of `projected`
  double risk_erm = 0.0;          ///< expected risk of `erm`
};

inline constexpr double kMClampTol = 1e-8;
inline constexpr double kMaxConditionNumber = 1e12;

/// Solves W(Σ_ε + A M Aᵀ) = M Aᵀ for M, symmetrizes, clamps to PSD and
/// rebuilds W′ = M′Aᵀ(Σ_ε + AM′Aᵀ)⁻¹ with offset μ̂ − W′ŷ. Requires an
/// invertible forward operator.
SupervisedEstimate supervised_fit(const EmpiricalMoments& moments, const ProblemInstance& inst);

double supervised_risk_value(const TrainingSet& data, const ProblemInstance& inst);

struct ConcentrationRow {
  std::size_t m = 0;
  double mean_dev_mu = 0.0;     ///< average ‖μ̂ − μ‖_X
  double mean_dev_sigma = 0.0;  ///< average Hilbert–Schmidt ‖Σ̂_x − Σ_x‖
};

/// Averages the deviations of the empirical mean and covariance over `reps`
/// independent samples for each m. Cells run in parallel on their own
/// streams, so the output does not depend on `threads`.
std::vector<ConcentrationRow> concentration_curve(const PriorModel& prior, std::span<const std::size_t> ms,
                                                  int reps, std::uint64_t seed, unsigned threads = 0);

}  // namespace tikreg
