#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "qtomo/error.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"
#include "test_util.hpp"

using namespace qtomo;

namespace {

CVector ket(std::initializer_list<Complex> v) {
  CVector c(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const auto& x : v) c(i++) = x;
  return c;
}

}  // namespace

TEST(DensityMatrix, BasisAndSuperposition) {
  const DensityMatrix h = density_from_pure(ket({1.0, 0.0}));
  EXPECT_NEAR(h.matrix()(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(h.matrix()(1, 1)), 0.0, 1e-15);
  const double a = 1.0 / std::numbers::sqrt2;
  const DensityMatrix plus = density_from_pure(ket({a, a}));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(plus.matrix()(i, j).real(), 0.5, 1e-15);
}

TEST(DensityMatrix, RejectsNonUnitVector) {
  EXPECT_THROW(density_from_pure(ket({0.5, 0.0})), InvalidArgument);
}

TEST(DensityMatrix, RejectsBadTraceAndHermiticity) {
  CMatrix m = CMatrix::Identity(2, 2);
  EXPECT_THROW(DensityMatrix{m}, InvalidArgument);
  m = CMatrix::Identity(2, 2) * 0.5;
  m(0, 1) = Complex(0.1, 0.0);
  EXPECT_THROW(DensityMatrix{m}, InvalidArgument);
}

TEST(DensityMatrix, ClampsTinyNegativeEigenvalues) {
  CMatrix m(2, 2);
  m << 1.0 + 5e-11, 0.0, 0.0, -5e-11;
  const DensityMatrix rho(m);
  EXPECT_GE(rho.eigenvalues().minCoeff(), 0.0);
  EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-15);
  m << 1.0 + 1e-6, 0.0, 0.0, -1e-6;
  try {
    DensityMatrix bad(m);
    FAIL() << "expected PositivityViolation";
  } catch (const PositivityViolation& e) {
    EXPECT_NEAR(e.most_negative(), -1e-6, 1e-12);
  }
}

TEST(NamedStates, GhzWithNoise) {
  const DensityMatrix rho = named_state("ghz_noise", 4, {.noise_weight = 0.5});
  CMatrix expect = CMatrix::Identity(16, 16) * (0.5 / 16.0);
  expect(0, 0) += 0.25;
  expect(15, 15) += 0.25;
  expect(0, 15) += 0.25;
  expect(15, 0) += 0.25;
  EXPECT_LT(test::max_abs(rho.matrix() - expect), 1e-14);
}

TEST(NamedStates, QuquartFamilyAndWhiteNoise) {
  const DensityMatrix q = ququart_family(1.0, 0.0, 0.7, 0.0);
  EXPECT_NEAR(q.matrix()(0, 0).real(), 1.0, 1e-14);
  EXPECT_NEAR(purity(q), 1.0, 1e-14);
  EXPECT_THROW(ququart_family(1.0, 1.0, 0.0, 0.0), InvalidArgument);
  const DensityMatrix w = named_state("white_noise", 1);
  EXPECT_LT(test::max_abs(w.matrix() - CMatrix::Identity(2, 2) * 0.5), 1e-15);
  EXPECT_THROW(named_state("nope", 1), InvalidArgument);
}

TEST(Functionals, FidelityExamples) {
  const DensityMatrix h = density_from_pure(ket({1.0, 0.0}));
  const DensityMatrix v = density_from_pure(ket({0.0, 1.0}));
  EXPECT_NEAR(fidelity(h, h), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(h, v), 0.0, 1e-12);
  EXPECT_NEAR(fidelity(h, white_noise(2)), 0.5, 1e-12);
  EXPECT_THROW(fidelity(h, white_noise(4)), DimensionMismatch);
}

TEST(Functionals, PurityEntropyConcurrence) {
  EXPECT_NEAR(purity(white_noise(2)), 0.5, 1e-15);
  CMatrix m(2, 2);
  m << 0.9, 0.0, 0.0, 0.1;
  const double oracle = -0.9 * std::log2(0.9) - 0.1 * std::log2(0.1);
  EXPECT_NEAR(entropy(DensityMatrix(m)), oracle, 1e-14);
  EXPECT_NEAR(oracle, 0.46899559358928117, 1e-15);
  const double a = 1.0 / std::numbers::sqrt2;
  EXPECT_NEAR(concurrence_pure(ket({a, 0.0, 0.0, -a})), 1.0, 1e-15);
  EXPECT_NEAR(concurrence_pure(ket({1.0, 0.0, 0.0, 0.0})), 0.0, 1e-15);
}

// Property: fidelity bounds, symmetry and the pure-state shortcut.
TEST(FunctionalProperties, FidelityOnRandomStates) {
  std::mt19937_64 g(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int s = 2 + trial % 4;
    const DensityMatrix a = test::random_state(s, 1 + trial % s, g);
    const DensityMatrix b = test::random_state(s, 1 + (trial / 2) % s, g);
    const double f = fidelity(a, b);
    EXPECT_GE(f, -1e-12);
    EXPECT_LE(f, 1.0 + 1e-12);
    EXPECT_NEAR(f, fidelity(b, a), 1e-10);
    EXPECT_NEAR(fidelity(a, a), 1.0, 1e-10);
    const CVector c = test::random_ket(s, g);
    const Complex direct = c.adjoint() * b.matrix() * c;
    EXPECT_NEAR(fidelity(density_from_pure(c), b), direct.real(), 1e-10);
    EXPECT_NEAR(fidelity_pure(c, b), direct.real(), 1e-10);
  }
}

TEST(Purification, Examples) {
  const double a = 1.0 / std::numbers::sqrt2;
  const PurifiedState p = purify(density_from_pure(ket({a, a})));
  ASSERT_EQ(p.rank(), 1);
  EXPECT_NEAR(std::abs(p.amplitudes()(0, 0) - a), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(p.amplitudes()(1, 0) - a), 0.0, 1e-12);

  const PurifiedState w = purify(white_noise(2));
  ASSERT_EQ(w.rank(), 2);
  CMatrix expect = CMatrix::Identity(2, 2) * a;
  EXPECT_LT(test::max_abs(w.amplitudes() - expect), 1e-12);

  EXPECT_EQ(purify(ququart_family(a, a, 0.0, 0.5)).rank(), 2);
}

TEST(Purification, ForcedRankBelowSupportIsAnError) {
  RankSelection sel{RankPolicy::forced, 1, 1e-10};
  EXPECT_THROW(purify(white_noise(2), sel), InvalidArgument);
}

// Property: L L^dagger = rho, Cholesky gauge shape, gauge invariance.
TEST(PurificationProperties, GaugeAndReconstruction) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int s = 2 + trial % 5;
    const int r = 1 + trial % s;
    const DensityMatrix rho = test::random_state(s, r, g);
    const PurifiedState p = purify(rho);
    ASSERT_EQ(p.rank(), r);
    const CMatrix& l = p.amplitudes();
    EXPECT_LT(test::max_abs(l * l.adjoint() - rho.matrix()), 1e-10);
    for (int k = 0; k < r; ++k) {
      for (int a = 0; a < k; ++a) EXPECT_EQ(l(a, k), Complex(0.0, 0.0));
      EXPECT_EQ(l(k, k).imag(), 0.0);
      EXPECT_GE(l(k, k).real(), 0.0);
    }
    // Random r x r unitary from QR of a Ginibre matrix.
    const CMatrix z = test::random_amplitudes(r, r, g);
    const CMatrix v = Eigen::HouseholderQR<CMatrix>(z).householderQ();
    const PurifiedState moved = p.gauge_transformed(v);
    EXPECT_LT(test::max_abs(moved.density().matrix() - rho.matrix()), 1e-12);
    const DensityMatrix ref = test::random_state(s, s, g);
    EXPECT_NEAR(fidelity(ref, moved.density()), fidelity(ref, rho), 1e-12);
    EXPECT_LT(test::max_abs(moved.canonical().amplitudes() - l), 1e-9);
  }
}

TEST(Bloch, Examples) {
  for (int s : {2, 3, 4}) {
    const BlochVector v = bloch_from_density(white_noise(s));
    EXPECT_LT(v.components.cwiseAbs().maxCoeff(), 1e-15);
  }
  const BlochVector pure = bloch_from_density(density_from_pure(ket({0.6, Complex(0.0, 0.8)})));
  EXPECT_NEAR(pure.components.norm(), 1.0 / std::numbers::sqrt2, 1e-14);

  BlochVector bad{3, RVector::Zero(8)};
  bad.components(0) = 0.9;
  EXPECT_THROW(density_from_bloch(bad), PositivityViolation);
}

TEST(BlochProperties, BasisOrthonormalAndRoundTrip) {
  for (int s = 2; s <= 5; ++s) {
    const auto basis = traceless_basis(s);
    ASSERT_EQ(static_cast<int>(basis.size()), s * s - 1);
    for (std::size_t j = 0; j < basis.size(); ++j) {
      EXPECT_NEAR(std::abs(basis[j].trace()), 0.0, 1e-14);
      EXPECT_LT(test::max_abs(basis[j] - basis[j].adjoint()), 1e-15);
      for (std::size_t k = 0; k < basis.size(); ++k) {
        const Complex t = (basis[j] * basis[k]).trace();
        EXPECT_NEAR(std::abs(t - Complex(j == k ? 1.0 : 0.0)), 0.0, 1e-12);
      }
    }
  }
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int s = 2 + trial % 4;
    const DensityMatrix rho = test::random_state(s, 1 + trial % s, g);
    const DensityMatrix back = density_from_bloch(bloch_from_density(rho));
    EXPECT_LT(test::max_abs(back.matrix() - rho.matrix()), 1e-12);
  }
}

TEST(Spectral, WeightsSumToOne) {
  SpectralModel m;
  m.center_wavelength = 702.0;
  m.bandwidth = 5.0;
  for (int n : {2, 11, 201, 1000}) {
    m.samples = n;
    double total = 0.0;
    for (const auto& [lambda, w] : spectral_samples(m)) total += w;
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
  m.samples = 1;
  EXPECT_THROW(spectral_samples(m), InvalidArgument);
}

TEST(Spectral, LimitingCases) {
  const CVector h = ket({1.0, 0.0});
  SpectralModel m;
  m.center_wavelength = 702.0;
  m.plates = {{200.0 * std::numbers::pi + std::numbers::pi / 2, std::numbers::pi / 4}};
  m.bandwidth = 0.0;
  EXPECT_NEAR(purity(decohered_qubit(m, h)), 1.0, 1e-12);

  // A delay far beyond the coherence length leaves an almost white state.
  m.plates = {{2.0e4 * std::numbers::pi, std::numbers::pi / 4}};
  m.bandwidth = 3.0;
  const DensityMatrix rho = decohered_qubit(m, h);
  EXPECT_LT(std::abs(rho.matrix()(0, 1)), 1e-3);
  EXPECT_NEAR(rho.matrix()(0, 0).real(), 0.5, 1e-3);
}

// Oracle: direct trapezoid integration of the same sinc^2 spectrum on a grid
// ten times finer, with the plate matrix written out by hand.
TEST(Spectral, IntermediateBandwidthMatchesFineIntegration) {
  const CVector h = ket({1.0, 0.0});
  SpectralModel m;
  m.center_wavelength = 702.0;
  m.bandwidth = 0.6;
  const double d0 = 800.0 * std::numbers::pi;
  const double angle = std::numbers::pi / 4;
  m.plates = {{d0, angle}};
  const double p_lib = purity(decohered_qubit(m, h));
  EXPECT_GT(p_lib, 0.5 + 1e-3);
  EXPECT_LT(p_lib, 1.0 - 1e-3);

  const int n = 10 * (m.samples - 1) + 1;
  CMatrix rho = CMatrix::Zero(2, 2);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = -3.0 + 6.0 * k / (n - 1);
    const double arg = std::numbers::pi * x;
    double w = arg == 0.0 ? 1.0 : std::pow(std::sin(arg) / arg, 2);
    if (k == 0 || k == n - 1) w *= 0.5;
    const double d = d0 * m.center_wavelength / (m.center_wavelength + x * m.bandwidth);
    const Complex t(std::cos(d), std::sin(d) * std::cos(2 * angle));
    const Complex r(0.0, std::sin(d) * std::sin(2 * angle));
    CVector phi(2);
    phi << t * h(0) + r * h(1), -std::conj(r) * h(0) + std::conj(t) * h(1);
    rho += w * phi * phi.adjoint();
    total += w;
  }
  rho /= total;
  const double p_oracle = (rho * rho).trace().real();
  EXPECT_NEAR(p_lib, p_oracle, 1e-3);
}

TEST(SpectralProperties, TraceAndPurityMonotoneAt45Degrees) {
  const CVector h = ket({1.0, 0.0});
  SpectralModel m;
  m.center_wavelength = 702.0;
  m.plates = {{400.0 * std::numbers::pi, std::numbers::pi / 4}};
  double last = 1.0 + 1e-12;
  for (double bw : {0.0, 0.2, 0.5, 1.0, 2.0, 4.0}) {
    m.bandwidth = bw;
    for (int samples : {2, 51, 201}) {
      m.samples = samples;
      EXPECT_NEAR(decohered_qubit(m, h).matrix().trace().real(), 1.0, 1e-12);
    }
    m.samples = 201;
    const double p = purity(decohered_qubit(m, h));
    EXPECT_LE(p, last + 1e-9) << "bandwidth " << bw;
    last = p;
  }
}
