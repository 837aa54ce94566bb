#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "tikreg/tikhonov.hpp"

using namespace tikreg;

namespace {

ProblemInstance scalar_instance() {
  const Grid g(1);
  return {ForwardOp::identity(g), PriorModel(GridSignal(g, Vector::Constant(1, 0.3)), SymMatrix::identity(1)),
          NoiseModel{1.0}};
}

ProblemInstance paper_instance(int n, bool blur = false, double sigma = 0.05) {
  const Grid g(n);
  return {blur ? blur_operator(0.02, g) : ForwardOp::identity(g),
          PriorModel(triangle_mean(g), convolution_operator(paper_kernel(0.2), g)), NoiseModel{sigma}};
}

// Monte-Carlo mean of ‖R(y) − x‖²_X.
double mc_risk(const AffineReconstructor& r, const ProblemInstance& inst, int draws, std::uint64_t seed) {
  RandomStream rng(seed);
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const GridSignal x = sample_prior(inst.prior(), rng);
    const GridSignal e = sample_noise(inst.noise(), inst.grid(), rng);
    const GridSignal y(inst.grid(), inst.forward().matrix * x.coeffs + e.coeffs);
    sum += GridSignal(inst.grid(), reconstruct(r, y).coeffs - x.coeffs).norm_squared();
  }
  return sum / draws;
}

}  // namespace

TEST_SUITE("tikhonov") {
  TEST_CASE("scalar ground truth") {
    const ProblemInstance inst = scalar_instance();
    CHECK(inst.prior_cov()(0, 0) == 1.0);
    CHECK(inst.noise_cov()(0, 0) == 1.0);
    const AffineReconstructor r = build_reconstructor(optimal_pair(inst), inst);
    CHECK(r.w(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(r.b.coeffs(0) == doctest::Approx(0.15).epsilon(1e-14));
    CHECK(std::abs(minimal_risk(inst) - 0.5) <= 1e-14);
    CHECK(std::abs(expected_risk(r, inst) - 0.5) <= 1e-14);

    const RegPair unit{GridSignal::zero(Grid(1)), SymMatrix::identity(1)};
    const AffineReconstructor u = build_reconstructor(unit, inst);
    CHECK(u.w(0, 0) == doctest::Approx(0.5));
    CHECK(u.b.coeffs(0) == 0.0);
  }

  TEST_CASE("zero B ignores the data") {
    const ProblemInstance inst = paper_instance(16);
    const GridSignal h(inst.grid(), Vector::LinSpaced(16, -1.0, 1.0));
    const AffineReconstructor r = build_reconstructor({h, SymMatrix::zero(16)}, inst);
    CHECK(r.w.norm() == 0.0);
    CHECK(r.b.coeffs == h.coeffs);
    const GridSignal y(inst.grid(), Vector::Constant(16, 7.0));
    CHECK(reconstruct(r, y).coeffs == h.coeffs);
  }

  TEST_CASE("isotropic B gives a diagonal shrinkage gain") {
    const int n = 8;
    const Grid g(n);
    const double sigma = 0.1, c = 0.3;
    const ProblemInstance inst(ForwardOp::identity(g), PriorModel(triangle_mean(g), SymMatrix::identity(n)),
                               NoiseModel{sigma});
    const RegPair pair{GridSignal::zero(g), SymMatrix(std::sqrt(c) * Matrix::Identity(n, n))};
    const AffineReconstructor r = build_reconstructor(pair, inst);
    const double want = c / (c + sigma * sigma * n);
    CHECK(test::rel_err(r.w, want * Matrix::Identity(n, n)) < 1e-14);
  }

  TEST_CASE("reconstruct examples") {
    const ProblemInstance inst = paper_instance(16);
    const Grid g = inst.grid();
    const GridSignal y(g, Vector::LinSpaced(16, 0.0, 1.0));
    const AffineReconstructor ident{Matrix::Identity(16, 16), GridSignal::zero(g)};
    CHECK(reconstruct(ident, y).coeffs == y.coeffs);
    const AffineReconstructor opt = build_reconstructor(optimal_pair(inst), inst);
    const GridSignal clean(g, inst.forward().matrix * inst.prior().mean.coeffs);
    CHECK((reconstruct(opt, clean).coeffs - inst.prior().mean.coeffs).norm() < 1e-12);
    CHECK_THROWS_AS(reconstruct(ident, GridSignal::zero(Grid(8))), DimensionError);
  }

  TEST_CASE("expected risk of simple reconstructors") {
    for (int n : {4, 32}) {
      const ProblemInstance inst = paper_instance(n);
      const Grid g = inst.grid();
      const AffineReconstructor ident{Matrix::Identity(n, n), GridSignal::zero(g)};
      const double sigma2n = 0.05 * 0.05 * n;
      CHECK(expected_risk(ident, inst) == doctest::Approx(sigma2n).epsilon(1e-13));
      CHECK(mc_risk(ident, inst, 100000, 30) == doctest::Approx(sigma2n).epsilon(0.02));

      const AffineReconstructor mean_only{Matrix::Zero(n, n), inst.prior().mean};
      CHECK(expected_risk(mean_only, inst) ==
            doctest::Approx(inst.prior_cov().matrix().trace() / n).epsilon(1e-13));
    }
  }

  TEST_CASE("minimal risk examples") {
    // Coefficient covariance diag(2, 1), noise I, A = I: per-mode 2/3 + 1/2,
    // reported with the 1/N weight of the X-norm.
    const Grid g(2);
    Vector d(2);
    d << 1.0, 0.5;
    const ProblemInstance inst(ForwardOp::identity(g),
                               PriorModel::from_covariance(GridSignal::zero(g), SymMatrix::diagonal(d)),
                               NoiseModel{std::sqrt(0.5)});
    CHECK(inst.prior_cov()(0, 0) == doctest::Approx(2.0));
    CHECK(inst.noise_cov()(1, 1) == doctest::Approx(1.0));
    CHECK(minimal_risk(inst) == doctest::Approx((2.0 / 3.0 + 0.5) / 2.0).epsilon(1e-14));

    const ProblemInstance base = paper_instance(32, true);
    const ProblemInstance dim(ForwardOp::custom(1e-6 * base.forward().matrix), base.prior(), base.noise());
    const double tr = base.prior_cov().matrix().trace() / 32;
    CHECK(minimal_risk(dim) == doctest::Approx(tr).epsilon(1e-4));
    CHECK(minimal_risk(base) > 0.0);
    CHECK(minimal_risk(base) < tr);
  }

  TEST_CASE("optimal reconstructor satisfies the normal equation") {
    for (int n : {8, 64}) {
      for (bool blur : {false, true}) {
        const ProblemInstance inst = paper_instance(n, blur);
        const AffineReconstructor opt = build_reconstructor(optimal_pair(inst), inst);
        CHECK(normal_equation_residual(opt, inst) <= 1e-10);
        const AffineReconstructor zero{Matrix::Zero(n, n), GridSignal::zero(inst.grid())};
        CHECK(normal_equation_residual(zero, inst) == doctest::Approx(1.0).epsilon(1e-14));

        std::mt19937_64 gen(31);
        Matrix e = test::random_matrix(gen, n, n);
        e /= e.norm();
        auto perturbed = [&](double delta) {
          AffineReconstructor r = opt;
          r.w += delta * e;
          return normal_equation_residual(r, inst);
        };
        CHECK(perturbed(1e-2) / perturbed(1e-3) == doctest::Approx(10.0).epsilon(1e-3));
      }
    }
  }

  TEST_CASE("minimal risk equals the risk of the optimal pair") {
    for (int n : {8, 32, 128}) {
      for (bool blur : {false, true}) {
        const ProblemInstance inst = paper_instance(n, blur);
        const double lstar = minimal_risk(inst);
        const double risk = expected_risk(build_reconstructor(optimal_pair(inst), inst), inst);
        CHECK(risk == doctest::Approx(lstar).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("optimal pair is the prior mean and covariance root, independent of A") {
    const ProblemInstance a = paper_instance(32, false);
    const ProblemInstance b = paper_instance(32, true);
    const RegPair pa = optimal_pair(a), pb = optimal_pair(b);
    CHECK(pa.h.coeffs == a.prior().mean.coeffs);
    CHECK(pa.h.coeffs == pb.h.coeffs);
    CHECK(pa.b.matrix() == pb.b.matrix());
    CHECK(test::rel_err(pa.b.matrix() * pa.b.matrix(), a.prior_cov().matrix()) <= 1e-10);
  }

  TEST_CASE("no random pair beats the optimal pair") {
    const int n = 8;
    std::mt19937_64 gen(32);
    for (bool blur : {false, true}) {
      const ProblemInstance inst = paper_instance(n, blur);
      const double lstar = minimal_risk(inst);
      for (int trial = 0; trial < 50; ++trial) {
        const SymMatrix b = psd_sqrt(test::random_psd(gen, n, 1 + trial % n));
        const GridSignal h(inst.grid(), inst.prior().mean.coeffs + test::random_matrix(gen, n, 1) * 0.1);
        const double risk = expected_risk(build_reconstructor({h, b}, inst), inst);
        CHECK(risk >= lstar - 1e-12);
        CHECK(risk > lstar * (1.0 + 1e-9));
      }
    }
  }

  TEST_CASE("perturbing B on one direction strictly increases the risk") {
    for (bool blur : {false, true}) {
      const ProblemInstance inst = paper_instance(16, blur);
      Matrix b2 = inst.prior_cov().matrix();
      b2(0, 0) += 1.0;
      const RegPair pair{inst.prior().mean, psd_sqrt(SymMatrix(b2))};
      CHECK(expected_risk(build_reconstructor(pair, inst), inst) > minimal_risk(inst) * (1.0 + 1e-9));
    }
  }

  TEST_CASE("square-root and covariance forms agree") {
    std::mt19937_64 gen(33);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 4 + 6 * trial;
      const Grid g(n);
      const SymMatrix cov = test::random_psd(gen, n, n - trial % 3);
      const Matrix a = trial % 2 ? Matrix(test::random_matrix(gen, n, n)) : Matrix(blur_operator(0.05, g).matrix);
      const ProblemInstance inst(ForwardOp::custom(a), PriorModel::from_covariance(triangle_mean(g), cov),
                                 NoiseModel{0.05 + 0.02 * trial});
      const Matrix wa = optimal_gain_sqrt_form(inst);
      const Matrix wb = optimal_gain_covariance_form(inst);
      CHECK(test::rel_err(wa, wb) <= 1e-10);
      const Matrix wt = build_reconstructor(optimal_pair(inst), inst).w;
      CHECK(test::rel_err(wt, wb) <= 1e-10);
    }
  }

  TEST_CASE("closed-form risk matches Monte Carlo") {
    const ProblemInstance inst = paper_instance(32);
    const AffineReconstructor opt = build_reconstructor(optimal_pair(inst), inst);
    CHECK(mc_risk(opt, inst, 100000, 34) == doctest::Approx(expected_risk(opt, inst)).epsilon(0.02));
  }

  TEST_CASE("dimension mismatches are rejected") {
    const ProblemInstance inst = paper_instance(8);
    CHECK_THROWS_AS(build_reconstructor({GridSignal::zero(Grid(4)), SymMatrix::zero(4)}, inst), DimensionError);
    CHECK_THROWS_AS(expected_risk({Matrix::Zero(4, 4), GridSignal::zero(Grid(4))}, inst), DimensionError);
    CHECK_THROWS(ProblemInstance(ForwardOp::identity(Grid(4)), paper_instance(8).prior(), NoiseModel{0.05}));
  }
}
