#pragma once

// Seeded Monte-Carlo sweeps of the excess risk of both learners over sample
// sizes and grid sizes, with repetition statistics and log-log slope fits.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tikreg/learn.hpp"

namespace tikreg {

/// Noise model of a sweep; the prior is Gaussian in every case.
enum class NoiseCase {
  GaussGauss,        ///< (a) Gaussian pixel white noise
  GaussUniform,      ///< (b) uniform pixel white noise
  GaussHaarUniform,  ///< (c) uniform white noise in the Haar basis
};

char case_letter(NoiseCase c);
/// Accepts "a"/"b"/"c"; throws std::invalid_argument otherwise.
NoiseCase parse_case(const std::string& s);
NoiseModel noise_model_for(NoiseCase c, double sigma);

struct PriorSpec {
  enum class Kind { PaperConvolution, Laplacian } kind = Kind::PaperConvolution;
  double kernel_c = 0.2;
  double laplacian_s = 2.0;
};

struct ForwardSpec {
  enum class Kind { Identity, Blur } kind = Kind::Identity;
  double blur_width = 0.01;
};

/// Sample sizes of the reference tables: 3·10³ … 3·10⁵, log-spaced.
inline const std::vector<std::size_t> kTableSampleSizes{3000, 6463, 13925, 30000, 64633, 139248, 300000};

struct SweepConfig {
  NoiseCase noise_case = NoiseCase::GaussGauss;
  std::vector<int> grid_sizes{64, 256};
  std::vector<std::size_t> sample_sizes = kTableSampleSizes;
  int reps = 30;
  std::uint64_t master_seed = 0;
  double sigma = 0.05;
  PriorSpec prior;
  ForwardSpec forward;
  unsigned threads = 0;  ///< 0 = hardware concurrency; never affects results

  static SweepConfig paper_default();
  /// Desk-scale profile: reps 10, m ≤ 10⁵, N ∈ {32, 64}.
  static SweepConfig quick();

  void validate() const;
  /// Stable textual form of every result-affecting field (threads excluded).
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Prior, noise and forward operator for grid size n.
ProblemInstance make_instance(const SweepConfig& cfg, int n);

struct SweepCell {
  int n = 0;
  std::size_t m_index = 0;
  std::size_t m = 0;
  int rep = 0;
  double excess_sup_raw = 0.0;
  double excess_unsup_raw = 0.0;
  bool ok = false;
  bool clamp_warning = false;
  std::string error;

  double excess_sup() const { return excess_sup_raw > 0.0 ? excess_sup_raw : 0.0; }
  double excess_unsup() const { return excess_unsup_raw > 0.0 ? excess_unsup_raw : 0.0; }
};

struct SummaryRow {
  int n = 0;
  std::size_t m = 0;
  double mean_sup = 0.0;
  double std_sup = 0.0;
  double mean_unsup = 0.0;
  double std_unsup = 0.0;
  std::size_t count = 0;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepCell> cells;      ///< sorted by (N, m, rep)
  std::vector<SummaryRow> summary;   ///< sorted by (N, m)
  std::map<int, double> minimal_risk;
  std::map<int, SlopeFit> slope_sup;
  std::map<int, SlopeFit> slope_unsup;
  std::size_t clamp_warnings = 0;
  std::size_t failed_cells = 0;
  bool interrupted = false;
};

struct SweepControl {
  const std::atomic<bool>* cancel = nullptr;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Runs every (N, m, rep) cell. Each cell draws from its own stream
/// derive_seed(master_seed, {N, m_index, rep}), so results are bitwise
/// independent of the thread count and schedule. Failing cells are recorded;
/// more than 10% failures raise NumericalError.
SweepResult run_sweep(const SweepConfig& cfg, const SweepControl& control = {});

/// Computes one cell; exposed for tests and the reconstruct command.
SweepCell run_cell(const SweepConfig& cfg, const ProblemInstance& inst, double min_risk, std::size_t m_index,
                   int rep);

/// Draws a training set of size m from the instance.
TrainingSet draw_training_set(const ProblemInstance& inst, std::size_t m, RandomStream& rng);

/// Per-(N, m) mean and sample standard deviation of the clamped excesses.
std::vector<SummaryRow> summarize(std::span<const SweepCell> cells);

/// Least squares of log(value) against log(m).
SlopeFit fit_slope(std::span<const double> ms, std::span<const double> values);

struct DiscretizationRow {
  std::size_t m = 0;
  double ratio_sup = 0.0;
  double ratio_unsup = 0.0;
};

struct DiscretizationReport {
  int coarse_n = 0;
  int fine_n = 0;
  std::vector<DiscretizationRow> rows;
  double slope_diff_sup = 0.0;
  double slope_diff_unsup = 0.0;
  bool unsup_ratio_flag = false;  ///< some unsupervised ratio outside [1/2, 2]
  bool sup_ratio_flag = false;    ///< informational: small-m supervised gap
  bool slope_flag_sup = false;    ///< |slope difference| > 0.15
  bool slope_flag_unsup = false;
};

inline constexpr double kMaxUnsupRatio = 2.0;
inline constexpr double kMaxSlopeDiff = 0.15;

/// Compares the finest against the coarsest grid in the result.
DiscretizationReport compare_discretizations(const SweepResult& res);

}  // namespace tikreg
