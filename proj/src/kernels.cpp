#include "tikreg/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace tikreg::kernels {

namespace {

void check_gemm_shapes(Op op_a, ConstView a, ConstView b, MutView c) {
  const std::size_t m = op_a == Op::None ? a.rows : a.cols;
  const std::size_t k = op_a == Op::None ? a.cols : a.rows;
  if (m != c.rows || k != b.rows || b.cols != c.cols) {
    throw std::invalid_argument("kernels::gemm: shape mismatch (op(a) " + std::to_string(m) + "x" +
                                std::to_string(k) + ", b " + std::to_string(b.rows) + "x" +
                                std::to_string(b.cols) + ", c " + std::to_string(c.rows) + "x" +
                                std::to_string(c.cols) + ")");
  }
}

Backend detect() {
  if (const char* env = std::getenv("TIKREG_KERNELS")) {
    if (std::string_view(env) == "scalar") return Backend::Scalar;
  }
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool avx2_supported() {
#if TIKREG_HAVE_AVX2_KERNELS && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

Backend set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported()) b = Backend::Scalar;
  current().store(b, std::memory_order_relaxed);
  return b;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kernels::dot: length mismatch");
#if TIKREG_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::dot(a.data(), b.data(), a.size());
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha) {
  check_gemm_shapes(op_a, a, b, c);
#if TIKREG_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::gemm(op_a, a, b, c, alpha);
#endif
  scalar::gemm(op_a, a, b, c, alpha);
}

void gram_upper(ConstView a, MutView c, double alpha) {
  if (c.rows != a.cols || c.cols != a.cols) {
    throw std::invalid_argument("kernels::gram_upper: output must be " + std::to_string(a.cols) +
                                " square");
  }
#if TIKREG_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::gram_upper(a, c, alpha);
#endif
  scalar::gram_upper(a, c, alpha);
}

void add_column_sums(ConstView a, std::span<double> out) {
  if (out.size() != a.cols) throw std::invalid_argument("kernels::add_column_sums: length mismatch");
#if TIKREG_HAVE_AVX2_KERNELS
  if (active_backend() == Backend::Avx2) return avx2::add_column_sums(a, out.data());
#endif
  scalar::add_column_sums(a, out.data());
}

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha) {
  const std::size_t k_len = op_a == Op::None ? a.cols : a.rows;
  const std::size_t ars = op_a == Op::None ? a.stride : 1;
  const std::size_t acs = op_a == Op::None ? 1 : a.stride;
  for (std::size_t i = 0; i < c.rows; ++i) {
    double* crow = c.data + i * c.stride;
    for (std::size_t k = 0; k < k_len; ++k) {
      const double aik = alpha * a.data[i * ars + k * acs];
      const double* brow = b.data + k * b.stride;
      for (std::size_t j = 0; j < c.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

void gram_upper(ConstView a, MutView c, double alpha) {
  const std::size_t n = a.cols;
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* row = a.data + k * a.stride;
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = alpha * row[i];
      double* crow = c.data + i * c.stride;
      for (std::size_t j = i; j < n; ++j) crow[j] += aki * row[j];
    }
  }
}

void add_column_sums(ConstView a, double* out) {
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* row = a.data + k * a.stride;
    for (std::size_t j = 0; j < a.cols; ++j) out[j] += row[j];
  }
}

}  // namespace scalar

}  // namespace tikreg::kernels
