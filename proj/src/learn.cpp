#include "tikreg/learn.hpp"

#include <algorithm>
#include <sstream>

#include "tikreg/parallel.hpp"

namespace tikreg {

namespace {

constexpr Eigen::Index kBlock = 256;

std::string insufficient_sample(std::size_t m, int n) {
  std::ostringstream os;
  os << "insufficient sample: empirical data covariance is singular (m=" << m << ", N=" << n << ")";
  return os.str();
}

SymMatrix from_upper(const Matrix& upper, double scale, const Vector& d) {
  const Eigen::Index n = upper.rows();
  Matrix full(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      const double v = upper(i, j) * scale - d(i) * d(j);
      full(i, j) = v;
      full(j, i) = v;
    }
  }
  return SymMatrix(full);
}

}  // namespace

void TrainingSet::validate() const {
  if (xs.size() != ys.size()) {
    throw DimensionError("TrainingSet: " + std::to_string(xs.size()) + " signals paired with " +
                         std::to_string(ys.size()) + " data");
  }
  if (xs.empty()) return;
  const Grid g = xs.front().grid;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (!(xs[j].grid == g) || !(ys[j].grid == g)) {
      throw DimensionError("TrainingSet: sample " + std::to_string(j) + " is on a different grid");
    }
  }
}

MomentAccumulator::MomentAccumulator(Grid grid, bool track_y)
    : grid_(grid),
      track_y_(track_y),
      sum_x_(grid.n(), 0.0),
      sum_y_(track_y ? grid.n() : 0, 0.0),
      sxx_(Matrix::Zero(grid.n(), grid.n())) {
  if (track_y_) {
    syy_ = Matrix::Zero(grid.n(), grid.n());
    syx_ = Matrix::Zero(grid.n(), grid.n());
  }
}

void MomentAccumulator::add_block(const Matrix& xs, const Matrix* ys) {
  const int n = grid_.n();
  if (xs.cols() != n) throw DimensionError("MomentAccumulator: sample block has wrong width");
  if (track_y_ && (!ys || ys->rows() != xs.rows() || ys->cols() != n)) {
    throw DimensionError("MomentAccumulator: y block missing or mismatched");
  }
  if (xs.rows() == 0) return;
  if (count_ == 0) {
    shift_x_ = xs.row(0).transpose();
    if (track_y_) shift_y_ = ys->row(0).transpose();
  }
  scratch_x_ = xs;
  scratch_x_.rowwise() -= shift_x_.transpose();
  kernels::add_column_sums(view(scratch_x_), sum_x_);
  kernels::gram_upper(view(scratch_x_), mut_view(sxx_), 1.0);
  if (track_y_) {
    scratch_y_ = *ys;
    scratch_y_.rowwise() -= shift_y_.transpose();
    kernels::add_column_sums(view(scratch_y_), sum_y_);
    kernels::gram_upper(view(scratch_y_), mut_view(syy_), 1.0);
    kernels::gemm(kernels::Op::Transpose, view(scratch_y_), view(scratch_x_), mut_view(syx_), 1.0);
  }
  count_ += static_cast<std::size_t>(xs.rows());
}

void MomentAccumulator::add(const GridSignal& x) {
  if (track_y_) throw std::logic_error("MomentAccumulator: this accumulator expects paired samples");
  add_block(Matrix(x.coeffs.transpose()));
}

void MomentAccumulator::add(const GridSignal& x, const GridSignal& y) {
  const Matrix yb = y.coeffs.transpose();
  add_block(Matrix(x.coeffs.transpose()), track_y_ ? &yb : nullptr);
}

MeanCov MomentAccumulator::x_moments() const {
  if (count_ == 0) throw std::invalid_argument("MomentAccumulator: no samples");
  const double inv = 1.0 / static_cast<double>(count_);
  const Vector d = Eigen::Map<const Vector>(sum_x_.data(), grid_.n()) * inv;
  return {GridSignal(grid_, shift_x_ + d), from_upper(sxx_, inv, d)};
}

EmpiricalMoments MomentAccumulator::finalize() const {
  if (!track_y_) throw std::logic_error("MomentAccumulator: y moments were not tracked");
  if (count_ < 2) {
    throw std::invalid_argument("empirical moments need at least 2 samples, got " + std::to_string(count_));
  }
  const double inv = 1.0 / static_cast<double>(count_);
  const Vector dx = Eigen::Map<const Vector>(sum_x_.data(), grid_.n()) * inv;
  const Vector dy = Eigen::Map<const Vector>(sum_y_.data(), grid_.n()) * inv;
  EmpiricalMoments out{
      {GridSignal(grid_, shift_x_ + dx), from_upper(sxx_, inv, dx)},
      {GridSignal(grid_, shift_y_ + dy), from_upper(syy_, inv, dy)},
      syx_ * inv - dy * dx.transpose(),
      count_,
  };
  return out;
}

EmpiricalMoments empirical_moments(const TrainingSet& data) {
  data.validate();
  if (data.m() < 2) {
    throw std::invalid_argument("empirical_moments: need at least 2 samples, got " + std::to_string(data.m()));
  }
  const Grid g = data.xs.front().grid;
  MomentAccumulator acc(g);
  for (std::size_t j = 0; j < data.m(); ++j) acc.add(data.xs[j], data.ys[j]);
  return acc.finalize();
}

MeanCov sample_mean_cov(std::span<const GridSignal> xs) {
  if (xs.size() < 2) {
    throw std::invalid_argument("sample_mean_cov: need at least 2 samples, got " + std::to_string(xs.size()));
  }
  MomentAccumulator acc(xs.front().grid, false);
  for (const GridSignal& x : xs) {
    if (!(x.grid == xs.front().grid)) throw DimensionError("sample_mean_cov: mixed grids");
    acc.add(x);
  }
  return acc.x_moments();
}

EmpiricalMoments population_moments(const ProblemInstance& inst) {
  const Matrix& a = inst.forward().matrix;
  const Matrix a_cov = multiply(a, inst.prior_cov().matrix());
  return {
      {inst.prior().mean, inst.prior_cov()},
      {GridSignal(inst.grid(), a * inst.prior().mean.coeffs),
       SymMatrix(multiply(a_cov, a.transpose()) + inst.noise_cov().matrix())},
      a_cov,
      0,
  };
}

RegPair unsupervised_pair(std::span<const GridSignal> xs) { return unsupervised_pair(sample_mean_cov(xs)); }

RegPair unsupervised_pair(const MeanCov& x_moments) { return {x_moments.mean, psd_sqrt(x_moments.cov)}; }

AffineReconstructor erm_affine(const TrainingSet& data) { return erm_affine(empirical_moments(data)); }

AffineReconstructor erm_affine(const EmpiricalMoments& mo) {
  const int n = mo.x.mean.grid.n();
  if (mo.m > 0 && mo.m <= static_cast<std::size_t>(n)) throw NumericalError(insufficient_sample(mo.m, n));
  Matrix w;
  try {
    w = solve_spd(mo.y.cov, mo.cov_yx).transpose();
  } catch (const NumericalError&) {
    throw NumericalError(insufficient_sample(mo.m, n));
  }
  Vector b = mo.x.mean.coeffs - w * mo.y.mean.coeffs;
  return {std::move(w), GridSignal(mo.x.mean.grid, std::move(b))};
}

double empirical_risk(const AffineReconstructor& r, const TrainingSet& data) {
  data.validate();
  if (data.m() == 0) throw std::invalid_argument("empirical_risk: empty training set");
  double total = 0.0;
  for (std::size_t j = 0; j < data.m(); ++j) {
    total += (r.w * data.ys[j].coeffs + r.b.coeffs - data.xs[j].coeffs).squaredNorm();
  }
  return total / (static_cast<double>(data.m()) * data.xs.front().grid.n());
}

SupervisedEstimate supervised_fit(const EmpiricalMoments& mo, const ProblemInstance& inst) {
  const int n = inst.n();
  const Grid grid(n);
  SupervisedEstimate est{erm_affine(mo), {Matrix(), GridSignal::zero(grid)}, SymMatrix::zero(n), 0.0, false, 0.0,
                         0.0};
  const Matrix& w = est.erm.w;
  const Matrix& a = inst.forward().matrix;

  Matrix residual_map = -multiply(w, a);
  residual_map.diagonal().array() += 1.0;
  Eigen::PartialPivLU<Matrix> lu(residual_map);
  if (lu.rcond() * kMaxConditionNumber < 1.0) {
    std::ostringstream os;
    os << "supervised_fit: I - W A is ill-conditioned (reciprocal condition " << lu.rcond() << ")";
    throw NumericalError(os.str());
  }
  // (I − WA) M Aᵀ = W Σ_ε.
  Matrix m_at = lu.solve(multiply(w, inst.noise_cov().matrix()));
  Matrix m;
  if (inst.forward().kind == ForwardKind::Identity) {
    m = std::move(m_at);
  } else {
    Eigen::PartialPivLU<Matrix> alu(a);
    if (alu.rcond() * kMaxConditionNumber < 1.0) {
      throw NumericalError("supervised_fit: forward operator is not invertible; M cannot be extracted");
    }
    m = alu.solve(Matrix(m_at.transpose())).transpose();
  }

  const SpectralDecomp d = sym_eig(SymMatrix(m));
  const double lmax = d.eigenvalues(0);
  est.m_min_eigenvalue = d.eigenvalues(n - 1);
  est.clamp_warning = est.m_min_eigenvalue < -kMClampTol * std::max(lmax, 0.0);
  const Vector clamped = d.eigenvalues.cwiseMax(0.0);
  est.m_sym = SymMatrix(d.eigenvectors * clamped.asDiagonal() * d.eigenvectors.transpose());

  Matrix wp = tikhonov_gain(est.m_sym, inst);
  Vector bp = mo.x.mean.coeffs - wp * mo.y.mean.coeffs;
  est.projected = {std::move(wp), GridSignal(inst.grid(), std::move(bp))};
  est.risk = expected_risk(est.projected, inst);
  est.risk_erm = expected_risk(est.erm, inst);
  return est;
}

double supervised_risk_value(const TrainingSet& data, const ProblemInstance& inst) {
  return supervised_fit(empirical_moments(data), inst).risk;
}

std::vector<ConcentrationRow> concentration_curve(const PriorModel& prior, std::span<const std::size_t> ms,
                                                  int reps, std::uint64_t seed, unsigned threads) {
  if (reps < 1) throw std::invalid_argument("concentration_curve: reps must be >= 1");
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (ms[i] == 0) throw std::invalid_argument("concentration_curve: sample sizes must be positive");
    if (i > 0 && ms[i] <= ms[i - 1]) throw std::invalid_argument("concentration_curve: sample sizes must ascend");
  }
  const Grid grid = prior.grid();
  const int n = grid.n();
  const Matrix cov = prior.coefficient_covariance().matrix();
  const std::size_t r = static_cast<std::size_t>(reps);
  std::vector<double> dev_mu(ms.size() * r), dev_sigma(ms.size() * r);

  // Largest m first so the tail of the schedule is short.
  std::vector<std::size_t> order(ms.size() * r);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;

  parallel_for(order.size(), threads, [&](std::size_t k) {
    const std::size_t cell = order[k];
    const std::size_t mi = cell / r;
    const std::size_t rep = cell % r;
    RandomStream rng(derive_seed(seed, {mi, rep}));
    MomentAccumulator acc(grid, false);
    Matrix block;
    for (std::size_t left = ms[mi]; left > 0;) {
      const Eigen::Index b = static_cast<Eigen::Index>(std::min<std::size_t>(left, kBlock));
      if (block.rows() != b) block.resize(b, n);
      sample_prior_block(prior, rng, block);
      acc.add_block(block);
      left -= static_cast<std::size_t>(b);
    }
    const MeanCov mc = acc.x_moments();
    dev_mu[cell] = GridSignal(grid, mc.mean.coeffs - prior.mean.coeffs).norm();
    dev_sigma[cell] = frobenius_norm(mc.cov.matrix() - cov) / n;
  });

  std::vector<ConcentrationRow> rows;
  for (std::size_t mi = 0; mi < ms.size(); ++mi) {
    ConcentrationRow row{ms[mi], 0.0, 0.0};
    for (std::size_t rep = 0; rep < r; ++rep) {
      row.mean_dev_mu += dev_mu[mi * r + rep];
      row.mean_dev_sigma += dev_sigma[mi * r + rep];
    }
    row.mean_dev_mu /= reps;
    row.mean_dev_sigma /= reps;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tikreg
