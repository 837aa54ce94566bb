#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "tikreg/kernels.hpp"
#include "tikreg/linalg.hpp"

using namespace tikreg;
namespace k = tikreg::kernels;

namespace {

// Independent triple loop, accumulated in long double.
Matrix naive_gemm(bool trans_a, const Matrix& a, const Matrix& b) {
  const Matrix op = trans_a ? Matrix(a.transpose()) : a;
  Matrix c(op.rows(), b.cols());
  for (Eigen::Index i = 0; i < op.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (Eigen::Index p = 0; p < op.cols(); ++p) s += static_cast<long double>(op(i, p)) * b(p, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

// Views into the interior of a larger buffer, so strides differ from widths.
struct Padded {
  Matrix buf;
  Eigen::Index r, c;
  Padded(std::mt19937_64& g, Eigen::Index rows, Eigen::Index cols)
      : buf(test::random_matrix(g, rows + 2, cols + 5)), r(rows), c(cols) {}
  k::ConstView view() const {
    return {buf.data() + buf.cols() + 1, static_cast<std::size_t>(r), static_cast<std::size_t>(c),
            static_cast<std::size_t>(buf.cols())};
  }
  Matrix dense() const { return buf.block(1, 1, r, c); }
};

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("scalar gemm matches a naive product for both transpose modes") {
    std::mt19937_64 g(1);
    for (auto [m, kk, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {17, 9, 13}, {8, 8, 8}, {33, 65, 31}}) {
      const Matrix a = test::random_matrix(g, m, kk);
      const Matrix at = test::random_matrix(g, kk, m);
      const Matrix b = test::random_matrix(g, kk, n);
      Matrix c = Matrix::Zero(m, n);
      k::scalar::gemm(k::Op::None, view(a), view(b), mut_view(c), 1.0);
      CHECK(test::rel_err(c, naive_gemm(false, a, b)) < 1e-14);
      Matrix ct = Matrix::Zero(m, n);
      k::scalar::gemm(k::Op::Transpose, view(at), view(b), mut_view(ct), 1.0);
      CHECK(test::rel_err(ct, naive_gemm(true, at, b)) < 1e-14);
    }
  }

  TEST_CASE("gemm accumulates and scales by alpha") {
    std::mt19937_64 g(2);
    const Matrix a = test::random_matrix(g, 4, 3), b = test::random_matrix(g, 3, 5);
    Matrix c = Matrix::Ones(4, 5);
    k::gemm(k::Op::None, view(a), view(b), mut_view(c), -2.0);
    CHECK(test::rel_err(c, Matrix(Matrix::Ones(4, 5) - 2.0 * a * b)) < 1e-14);
  }

  TEST_CASE("gemm rejects mismatched shapes") {
    Matrix a(2, 3), b(4, 2), c(2, 2);
    CHECK_THROWS_AS(k::gemm(k::Op::None, view(a), view(b), mut_view(c), 1.0), std::invalid_argument);
  }

#if TIKREG_HAVE_AVX2_KERNELS
  TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!k::avx2_supported()) {
      MESSAGE("CPU lacks AVX2/FMA; equivalence not exercised");
      return;
    }
    std::mt19937_64 g(3);
    for (auto [m, kk, n] : {std::tuple{1, 1, 1}, {3, 2, 5}, {4, 8, 8}, {5, 17, 9}, {13, 31, 23}, {64, 64, 64},
                            {67, 130, 71}}) {
      for (k::Op op : {k::Op::None, k::Op::Transpose}) {
        const Padded a = op == k::Op::None ? Padded(g, m, kk) : Padded(g, kk, m);
        const Padded b(g, kk, n);
        Matrix c0 = test::random_matrix(g, m, n);
        Matrix c1 = c0;
        k::scalar::gemm(op, a.view(), b.view(), mut_view(c0), 0.75);
        k::avx2::gemm(op, a.view(), b.view(), mut_view(c1), 0.75);
        CHECK(test::rel_err(c1, c0) < 1e-13);
      }
      const Padded a(g, m, n);
      Matrix s0 = Matrix::Zero(n, n), s1 = Matrix::Zero(n, n);
      k::scalar::gram_upper(a.view(), mut_view(s0), 1.5);
      k::avx2::gram_upper(a.view(), mut_view(s1), 1.5);
      const Matrix ref = 1.5 * a.dense().transpose() * a.dense();
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
          CHECK(s0(i, j) == doctest::Approx(ref(i, j)).epsilon(1e-12).scale(ref.norm()));
          CHECK(s1(i, j) == doctest::Approx(s0(i, j)).epsilon(1e-13).scale(ref.norm()));
        }
      std::vector<double> sum0(n, 1.0), sum1(n, 1.0);
      k::scalar::add_column_sums(a.view(), sum0.data());
      k::avx2::add_column_sums(a.view(), sum1.data());
      for (Eigen::Index j = 0; j < n; ++j) CHECK(sum1[j] == doctest::Approx(sum0[j]).epsilon(1e-13));
    }
    for (std::size_t len : {0u, 1u, 3u, 4u, 15u, 16u, 17u, 1001u}) {
      std::vector<double> x(len), y(len);
      std::normal_distribution<double> d;
      for (std::size_t i = 0; i < len; ++i) x[i] = d(g), y[i] = d(g);
      const double r0 = k::scalar::dot(x.data(), y.data(), len);
      const double r1 = k::avx2::dot(x.data(), y.data(), len);
      CHECK(r1 == doctest::Approx(r0).epsilon(1e-13).scale(static_cast<double>(len) + 1.0));
    }
  }
#endif

  TEST_CASE("backend selection is switchable and reported") {
    BackendGuard guard;
    CHECK(k::set_backend(k::Backend::Scalar) == k::Backend::Scalar);
    CHECK(k::active_backend() == k::Backend::Scalar);
    CHECK(k::backend_name(k::Backend::Scalar) == "scalar");
    const k::Backend got = k::set_backend(k::Backend::Avx2);
    CHECK(got == (k::avx2_supported() ? k::Backend::Avx2 : k::Backend::Scalar));
  }

  TEST_CASE("dispatched results agree across backends") {
    BackendGuard guard;
    std::mt19937_64 g(4);
    const Matrix a = test::random_matrix(g, 37, 29), b = test::random_matrix(g, 29, 41);
    k::set_backend(k::Backend::Scalar);
    const Matrix c0 = multiply(a, b);
    k::set_backend(k::Backend::Avx2);
    const Matrix c1 = multiply(a, b);
    CHECK(test::rel_err(c1, c0) < 1e-13);
  }
}
