// AVX2 + FMA kernels. This translation unit is the only one compiled with
// -mavx2 -mfma; it must not instantiate inline code shared with other units.

#include "tikreg/kernels.hpp"

#include <immintrin.h>

namespace tikreg::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// c[i0..i0+4, j0..j0+8) += alpha * sum_k A(i, k) * B(k, j)
// with A(i, k) = a[i * ars + k * acs].
inline void tile_4x8(const double* a, std::size_t ars, std::size_t acs, const double* b,
                     std::size_t bs, std::size_t k_len, double* c, std::size_t cs, double alpha) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t k = 0; k < k_len; ++k) {
    const double* brow = b + k * bs;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    const double* acol = a + k * acs;
    __m256d av = _mm256_broadcast_sd(acol);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(acol + ars);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(acol + 2 * ars);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(acol + 3 * ars);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  const __m256d al = _mm256_set1_pd(alpha);
  double* r = c;
  _mm256_storeu_pd(r, _mm256_fmadd_pd(al, c00, _mm256_loadu_pd(r)));
  _mm256_storeu_pd(r + 4, _mm256_fmadd_pd(al, c01, _mm256_loadu_pd(r + 4)));
  r += cs;
  _mm256_storeu_pd(r, _mm256_fmadd_pd(al, c10, _mm256_loadu_pd(r)));
  _mm256_storeu_pd(r + 4, _mm256_fmadd_pd(al, c11, _mm256_loadu_pd(r + 4)));
  r += cs;
  _mm256_storeu_pd(r, _mm256_fmadd_pd(al, c20, _mm256_loadu_pd(r)));
  _mm256_storeu_pd(r + 4, _mm256_fmadd_pd(al, c21, _mm256_loadu_pd(r + 4)));
  r += cs;
  _mm256_storeu_pd(r, _mm256_fmadd_pd(al, c30, _mm256_loadu_pd(r)));
  _mm256_storeu_pd(r + 4, _mm256_fmadd_pd(al, c31, _mm256_loadu_pd(r + 4)));
}

inline void tile_1x4(const double* a, std::size_t acs, const double* b, std::size_t bs,
                     std::size_t k_len, double* c, double alpha) {
  __m256d acc = _mm256_setzero_pd();
  for (std::size_t k = 0; k < k_len; ++k) {
    acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + k * acs), _mm256_loadu_pd(b + k * bs), acc);
  }
  _mm256_storeu_pd(c, _mm256_fmadd_pd(_mm256_set1_pd(alpha), acc, _mm256_loadu_pd(c)));
}

inline void cell(const double* a, std::size_t acs, const double* b, std::size_t bs,
                 std::size_t k_len, double* c, double alpha) {
  double s = 0.0;
  for (std::size_t k = 0; k < k_len; ++k) s += a[k * acs] * b[k * bs];
  *c += alpha * s;
}

// Fills row i of c over columns [j_begin, j_end) without the 4x8 tile.
inline void row_span(const double* a, std::size_t ars, std::size_t acs, const double* b,
                     std::size_t bs, std::size_t k_len, double* c, std::size_t cs, std::size_t i,
                     std::size_t j_begin, std::size_t j_end, double alpha) {
  std::size_t j = j_begin;
  for (; j + 4 <= j_end; j += 4) tile_1x4(a + i * ars, acs, b + j, bs, k_len, c + i * cs + j, alpha);
  for (; j < j_end; ++j) cell(a + i * ars, acs, b + j, bs, k_len, c + i * cs + j, alpha);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemm(Op op_a, ConstView a, ConstView b, MutView c, double alpha) {
  const std::size_t k_len = op_a == Op::None ? a.cols : a.rows;
  const std::size_t ars = op_a == Op::None ? a.stride : 1;
  const std::size_t acs = op_a == Op::None ? 1 : a.stride;
  const std::size_t m = c.rows;
  const std::size_t p = c.cols;
  const std::size_t p8 = p - p % 8;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < p8; j += 8) {
      tile_4x8(a.data + i * ars, ars, acs, b.data + j, b.stride, k_len, c.data + i * c.stride + j,
               c.stride, alpha);
    }
    for (std::size_t r = i; r < i + 4; ++r) {
      row_span(a.data, ars, acs, b.data, b.stride, k_len, c.data, c.stride, r, p8, p, alpha);
    }
  }
  for (; i < m; ++i) row_span(a.data, ars, acs, b.data, b.stride, k_len, c.data, c.stride, i, 0, p, alpha);
}

void gram_upper(ConstView a, MutView c, double alpha) {
  // op(A)(i, k) = a[k][i]; B = a.
  const std::size_t n = a.cols;
  const std::size_t k_len = a.rows;
  const std::size_t ars = 1;
  const std::size_t acs = a.stride;
  const std::size_t n8 = n - n % 8;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const std::size_t j_first = i - i % 8;
    for (std::size_t j = j_first; j < n8; j += 8) {
      tile_4x8(a.data + i, ars, acs, a.data + j, a.stride, k_len, c.data + i * c.stride + j,
               c.stride, alpha);
    }
    for (std::size_t r = i; r < i + 4; ++r) {
      const std::size_t from = r > n8 ? r : n8;
      row_span(a.data, ars, acs, a.data, a.stride, k_len, c.data, c.stride, r, from, n, alpha);
    }
  }
  for (; i < n; ++i) row_span(a.data, ars, acs, a.data, a.stride, k_len, c.data, c.stride, i, i, n, alpha);
}

void add_column_sums(ConstView a, double* out) {
  const std::size_t n = a.cols;
  const std::size_t n4 = n - n % 4;
  for (std::size_t j = 0; j < n4; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < a.rows; ++k) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a.data + k * a.stride + j));
    _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j), acc));
  }
  for (std::size_t j = n4; j < n; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.rows; ++k) s += a.data[k * a.stride + j];
    out[j] += s;
  }
}

}  // namespace tikreg::kernels::avx2
