#pragma once

// Dense arithmetic kernels behind the moment accumulators, sample synthesis
// and risk traces. Every kernel has a portable scalar reference and, on x86-64,
// an AVX2+FMA variant. The variant is picked once at startup from CPUID and
// can be overridden for testing.

#include <cstddef>
#include <span>
#include <string_view>

namespace tikreg::kernels {

enum class Backend { Scalar, Avx2 };

/// Row-major read-only view: element (r, c) lives at data[r * stride + c].
struct ConstView {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;
};

struct MutView {
  double* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t stride = 0;

  operator ConstView() const { return {data, rows, cols, stride}; }
};

enum class Op { None, Transpose };

/// Backend currently used by the dispatching entry points.
Backend active_backend();

/// Forces a backend. Selecting Avx2 on a CPU without AVX2/FMA falls back to
/// Scalar; the return value is what was actually installed.
Backend set_backend(Backend b);

/// True when the running CPU supports the AVX2 path.
bool avx2_supported();

std::string_view backend_name(Backend b);

double dot(std::span<const double> a, std::span<const double> b);

/// c += alpha * op(a) * b.
void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha);

/// c += alpha * aᵀ a, updating at least the upper triangle (j >= i) of the
/// square view c. Entries strictly below the diagonal are unspecified.
void gram_upper(ConstView a, MutView c, double alpha);

/// Column sums of a added into out (out.size() == a.cols).
void add_column_sums(ConstView a, std::span<double> out);

// Direct access to the individual backends, used by equivalence tests.
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha);
void gram_upper(ConstView a, MutView c, double alpha);
void add_column_sums(ConstView a, double* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define TIKREG_HAVE_AVX2_KERNELS 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha);
void gram_upper(ConstView a, MutView c, double alpha);
void add_column_sums(ConstView a, double* out);
}  // namespace avx2
#else
#define TIKREG_HAVE_AVX2_KERNELS 0
#endif

}  // namespace tikreg::kernels
