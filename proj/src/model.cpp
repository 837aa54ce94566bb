#include "tikreg/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tikreg {

namespace {

void require_dyadic(std::size_t n, const char* who) {
  if (n == 0 || (n & (n - 1)) != 0) {
    throw DimensionError(std::string(who) + ": length " + std::to_string(n) + " is not a power of 2");
  }
}

}  // namespace

Grid::Grid(int n) : n_(n) {
  if (n < 1) throw DimensionError("Grid: N must be positive, got " + std::to_string(n));
}

GridSignal::GridSignal(Grid g, Vector c) : grid(g), coeffs(std::move(c)) {
  if (coeffs.size() != grid.n()) {
    throw DimensionError("GridSignal: " + std::to_string(coeffs.size()) + " coefficients on an N=" +
                         std::to_string(grid.n()) + " grid");
  }
}

double GridSignal::norm_squared() const { return coeffs.squaredNorm() / grid.n(); }

double GridSignal::norm() const { return std::sqrt(norm_squared()); }

PriorModel::PriorModel(GridSignal m, SymMatrix s, ComponentDist d)
    : mean(std::move(m)), cov_sqrt(std::move(s)), dist(d) {
  if (cov_sqrt.dim() != mean.grid.n()) {
    throw DimensionError("PriorModel: covariance square root has dimension " +
                         std::to_string(cov_sqrt.dim()) + ", mean has " + std::to_string(mean.grid.n()));
  }
}

PriorModel PriorModel::from_covariance(GridSignal mean, const SymMatrix& covariance, ComponentDist dist) {
  return PriorModel(std::move(mean), psd_sqrt(covariance), dist);
}

SymMatrix PriorModel::coefficient_covariance() const {
  const Matrix& s = cov_sqrt.matrix();
  return SymMatrix(static_cast<double>(grid().n()) * multiply(s, s));
}

void NoiseModel::validate(const Grid& grid) const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("NoiseModel: sigma must be positive and finite, got " + std::to_string(sigma));
  }
  if (basis == NoiseBasis::Haar && !grid.power_of_two()) {
    throw DimensionError("NoiseModel: Haar-basis noise needs N a power of 2, got N=" + std::to_string(grid.n()));
  }
}

SymMatrix NoiseModel::coefficient_covariance(const Grid& grid) const {
  return SymMatrix(Matrix::Identity(grid.n(), grid.n()) * (sigma * sigma * grid.n()));
}

ForwardOp ForwardOp::identity(const Grid& grid) {
  return {Matrix::Identity(grid.n(), grid.n()), ForwardKind::Identity};
}

ForwardOp ForwardOp::custom(Matrix m) {
  if (m.rows() != m.cols()) throw DimensionError("ForwardOp: forward matrix must be square");
  return {std::move(m), ForwardKind::Custom};
}

GridSignal pixel_coeffs(const ScalarFunction& f, const Grid& grid) {
  Vector c(grid.n());
  for (int i = 0; i < grid.n(); ++i) c(i) = f(grid.midpoint(i));
  return {grid, std::move(c)};
}

double torus_distance(double t) {
  double r = std::fmod(std::abs(t), 1.0);
  return r > 0.5 ? 1.0 - r : r;
}

ScalarFunction paper_kernel(double c) {
  if (!(c > 0.0 && c <= 0.5)) throw std::invalid_argument("paper_kernel: c must lie in (0, 0.5]");
  return [c](double t) {
    const double d = torus_distance(t);
    if (d == 0.0) return 1.0;
    if (d >= c) return 0.0;
    const double q = c / d;
    return 1.0 - std::exp(-(q * q) * (q * q));
  };
}

SymMatrix convolution_operator(const ScalarFunction& k, const Grid& grid) {
  const int n = grid.n();
  // One kernel evaluation per cyclic offset keeps the matrix exactly circulant.
  std::vector<double> row(n);
  for (int d = 0; d < n; ++d) {
    const int dist = std::min(d, n - d);
    row[d] = k(static_cast<double>(dist) / n) / n;
  }
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = row[(j - i + n) % n];
  }
  return SymMatrix(m);
}

SymMatrix laplacian_prior_cov_sqrt(double s, const Grid& grid) {
  if (!(s > 0.5)) {
    throw std::invalid_argument("laplacian_prior_cov_sqrt: s must exceed 1/2 (trace-class prior), got " +
                                std::to_string(s));
  }
  const int n = grid.n();
  const double pi = std::numbers::pi;
  auto lambda = [&](int k) { return std::pow(1.0 + 4.0 * pi * k * k, -0.5 * s); };
  Matrix out = Matrix::Zero(n, n);
  auto add_mode = [&](const Vector& v, double l) { out.noalias() += l * v * v.transpose(); };

  add_mode(Vector::Constant(n, 1.0 / std::sqrt(static_cast<double>(n))), lambda(0));
  const double scale = std::sqrt(2.0 / n);
  for (int k = 1; 2 * k < n; ++k) {
    Vector c(n), sn(n);
    for (int j = 0; j < n; ++j) {
      const double phase = 2.0 * pi * k * j / n;
      c(j) = scale * std::cos(phase);
      sn(j) = scale * std::sin(phase);
    }
    add_mode(c, lambda(k));
    add_mode(sn, lambda(k));
  }
  if (n % 2 == 0 && n > 1) {
    Vector alt(n);
    for (int j = 0; j < n; ++j) alt(j) = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(static_cast<double>(n));
    add_mode(alt, lambda(n / 2));
  }
  return SymMatrix(out);
}

GridSignal triangle_mean(const Grid& grid) {
  // Antiderivative of 1 − |2t − 1| on [0, 1].
  auto antiderivative = [](double t) {
    return t <= 0.5 ? t * t : 0.25 + (2.0 * (t - 0.5) - (t * t - 0.25));
  };
  const int n = grid.n();
  Vector c(n);
  for (int i = 0; i < n; ++i) {
    const double a = static_cast<double>(i) / n;
    const double b = static_cast<double>(i + 1) / n;
    c(i) = (antiderivative(b) - antiderivative(a)) * n;
  }
  return {grid, std::move(c)};
}

ForwardOp blur_operator(double width, const Grid& grid) {
  if (!(width > 0.0 && width < 0.5)) throw std::invalid_argument("blur_operator: width must lie in (0, 0.5)");
  const int n = grid.n();
  std::vector<double> row(n);
  double total = 0.0;
  for (int d = 0; d < n; ++d) {
    const double t = static_cast<double>(std::min(d, n - d)) / n;
    row[d] = std::exp(-0.5 * (t / width) * (t / width));
    total += row[d];
  }
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = row[(j - i + n) % n] / total;
  }
  return {SymMatrix(m).matrix(), ForwardKind::CirculantBlur};
}

double draw_component(ComponentDist dist, RandomStream& rng) {
  static const double kHalfWidth = std::sqrt(3.0);
  return dist == ComponentDist::Gaussian ? rng.normal() : rng.uniform(-kHalfWidth, kHalfWidth);
}

void sample_prior_block(const PriorModel& prior, RandomStream& rng, Matrix& out) {
  const int n = prior.grid().n();
  if (out.cols() != n) throw DimensionError("sample_prior_block: output has wrong column count");
  Matrix nu(out.rows(), n);
  for (Eigen::Index s = 0; s < nu.rows(); ++s) {
    for (int i = 0; i < n; ++i) nu(s, i) = draw_component(prior.dist, rng);
  }
  for (Eigen::Index s = 0; s < out.rows(); ++s) out.row(s) = prior.mean.coeffs.transpose();
  // Row s of out gains √N·S·ν_s; with samples as rows this is ν·Sᵀ = ν·S.
  kernels::gemm(kernels::Op::None, view(nu), view(prior.cov_sqrt.matrix()), mut_view(out),
                std::sqrt(static_cast<double>(n)));
}

void sample_noise_block(const NoiseModel& noise, const Grid& grid, RandomStream& rng, Matrix& out) {
  noise.validate(grid);
  const int n = grid.n();
  if (out.cols() != n) throw DimensionError("sample_noise_block: output has wrong column count");
  const double scale = noise.sigma * std::sqrt(static_cast<double>(n));
  std::vector<double> scratch(n);
  for (Eigen::Index s = 0; s < out.rows(); ++s) {
    double* row = out.row(s).data();
    for (int i = 0; i < n; ++i) row[i] = draw_component(noise.dist, rng);
    if (noise.basis == NoiseBasis::Haar) haar_inverse_inplace({row, static_cast<std::size_t>(n)}, scratch);
    for (int i = 0; i < n; ++i) row[i] *= scale;
  }
}

GridSignal sample_prior(const PriorModel& prior, RandomStream& rng) {
  Matrix block(1, prior.grid().n());
  sample_prior_block(prior, rng, block);
  return {prior.grid(), block.row(0).transpose()};
}

GridSignal sample_noise(const NoiseModel& noise, const Grid& grid, RandomStream& rng) {
  Matrix block(1, grid.n());
  sample_noise_block(noise, grid, rng, block);
  return {grid, block.row(0).transpose()};
}

void haar_forward_inplace(std::span<double> v, std::span<double> scratch) {
  require_dyadic(v.size(), "haar_forward");
  if (scratch.size() < v.size()) throw DimensionError("haar_forward: scratch too small");
  const double r = std::numbers::sqrt2 / 2.0;
  for (std::size_t len = v.size(); len > 1; len /= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      scratch[i] = (v[2 * i] + v[2 * i + 1]) * r;
      scratch[half + i] = (v[2 * i] - v[2 * i + 1]) * r;
    }
    std::copy_n(scratch.begin(), len, v.begin());
  }
}

void haar_inverse_inplace(std::span<double> w, std::span<double> scratch) {
  require_dyadic(w.size(), "haar_inverse");
  if (scratch.size() < w.size()) throw DimensionError("haar_inverse: scratch too small");
  const double r = std::numbers::sqrt2 / 2.0;
  for (std::size_t len = 2; len <= w.size(); len *= 2) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      scratch[2 * i] = (w[i] + w[half + i]) * r;
      scratch[2 * i + 1] = (w[i] - w[half + i]) * r;
    }
    std::copy_n(scratch.begin(), len, w.begin());
  }
}

std::vector<double> haar_forward(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end()), scratch(v.size());
  haar_forward_inplace(out, scratch);
  return out;
}

std::vector<double> haar_inverse(std::span<const double> w) {
  std::vector<double> out(w.begin(), w.end()), scratch(w.size());
  haar_inverse_inplace(out, scratch);
  return out;
}

Matrix haar_matrix(int n) {
  Matrix w(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const std::vector<double> col = haar_forward(e);
    for (int i = 0; i < n; ++i) w(i, j) = col[i];
  }
  return w;
}

}  // namespace tikreg
