#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "qtomo/analysis.hpp"
#include "qtomo/error.hpp"
#include "qtomo/protocols.hpp"
#include "test_util.hpp"

using namespace qtomo;

namespace {

constexpr double kPi = std::numbers::pi;

CVector h_ket() {
  CVector c(2);
  c << 1.0, 0.0;
  return c;
}

}  // namespace

TEST(Polyhedron, RowCounts) {
  EXPECT_EQ(polyhedron_protocol(Solid::tetrahedron, 1).size(), 4);
  EXPECT_EQ(polyhedron_protocol(Solid::fullerene, 1).size(), 32);
  const Protocol oct2 = polyhedron_protocol(Solid::octahedron, 2);
  EXPECT_EQ(oct2.size(), 64);
  EXPECT_EQ(oct2.dim(), 4);
  const int faces[] = {4, 6, 8, 12, 20, 32, 60};
  int i = 0;
  for (Solid s : {Solid::tetrahedron, Solid::cube, Solid::octahedron, Solid::dodecahedron,
                  Solid::icosahedron, Solid::fullerene, Solid::pentakis_dodecahedron}) {
    EXPECT_EQ(face_count(s), faces[i]);
    EXPECT_EQ(polyhedron_protocol(s, 1).size(), faces[i]);
    EXPECT_EQ(solid_from_name(solid_name(s)), s);
    ++i;
  }
  EXPECT_THROW(solid_from_name("rhombicuboctahedron"), InvalidArgument);
}

TEST(Polyhedron, DirectionsAreUnitAndCentral) {
  for (Solid s : {Solid::tetrahedron, Solid::cube, Solid::octahedron, Solid::dodecahedron,
                  Solid::icosahedron, Solid::fullerene, Solid::pentakis_dodecahedron}) {
    Eigen::Vector3d total = Eigen::Vector3d::Zero();
    for (const auto& n : face_directions(s)) {
      EXPECT_NEAR(n.norm(), 1.0, 1e-12);
      total += n;
    }
    EXPECT_LT(total.norm(), 1e-10) << solid_name(s);
  }
}

TEST(Polyhedron, EveryProtocolClosesUnity) {
  for (Solid s : {Solid::tetrahedron, Solid::cube, Solid::octahedron, Solid::dodecahedron,
                  Solid::icosahedron, Solid::fullerene, Solid::pentakis_dodecahedron}) {
    for (int l = 1; l <= 2; ++l) {
      const UnityCheck u = unity_check(polyhedron_protocol(s, l), 1e-8);
      EXPECT_TRUE(u.holds) << solid_name(s) << " l=" << l << " dev " << u.deviation;
    }
  }
}

TEST(Waveplate, Examples) {
  EXPECT_LT(test::max_abs(waveplate_unitary(0.0, 0.7) - CMatrix::Identity(2, 2)), 1e-15);
  const double d = 0.37;
  const CMatrix g = waveplate_unitary(d, 0.0);
  EXPECT_NEAR(std::abs(g(0, 0) - std::polar(1.0, d)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g(1, 1) - std::polar(1.0, -d)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(g(0, 1)), 0.0, 1e-15);
  const CMatrix swap = waveplate_unitary(kPi / 2, kPi / 4);
  EXPECT_NEAR(std::abs(swap(0, 0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(swap(0, 1) - Complex(0.0, 1.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(swap(1, 0) - Complex(0.0, 1.0)), 0.0, 1e-15);
}

TEST(WaveplateProperties, UnitaryAndSelfInverse) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double d = u(g), a = u(g);
    const CMatrix w = waveplate_unitary(d, a);
    EXPECT_LT(test::max_abs(w * w.adjoint() - CMatrix::Identity(2, 2)), 1e-12);
    EXPECT_LT(test::max_abs(waveplate_unitary(-d, a) * w - CMatrix::Identity(2, 2)), 1e-12);
  }
}

TEST(Waveplate, ThicknessAndReduction) {
  const WaveplateSpec w = WaveplateSpec::from_thickness(0.5, 0.009, 702e-6, 0.1);
  EXPECT_NEAR(w.delta, kPi * 0.5 * 0.009 / 702e-6, 1e-9);
  EXPECT_NEAR(w.angle, 0.1, 0.0);
  const double r = w.reduced_delta();
  EXPECT_GE(r, 0.0);
  EXPECT_LT(r, kPi);
  EXPECT_NEAR(std::remainder(w.delta - r, kPi), 0.0, 1e-9);
}

TEST(PlateProtocols, RowCounts) {
  EXPECT_EQ(b9_protocol(kPi / 3).size(), 9);
  EXPECT_EQ(b36_protocol(kPi / 3).size(), 36);
  const Protocol b144 = b144_protocol(1.0, 2.0);
  EXPECT_EQ(b144.size(), 144);
  EXPECT_EQ(b144.dim(), 4);
  EXPECT_EQ(b144_protocol(1.0, 2.0, true).size(), 12);

  ArmSpec arm;
  arm.plates = {{kPi / 3, 0.0}};
  for (int k = 0; k < 9; ++k) arm.rotations.push_back(k * kPi / 9);
  arm.analyzer = analyzer_vector("V");
  EXPECT_EQ(two_arm_plate_protocol(arm, arm).size(), 81);
  EXPECT_EQ(two_arm_plate_protocol(arm, arm, true).size(), 9);
}

// Row j of B9 is <V| G(delta, 20 deg * j) = (-r*, t*), written out by hand.
TEST(PlateProtocols, B9RowsMatchHandFormula) {
  const double d = 0.8;
  const Protocol p = b9_protocol(d);
  for (int j = 0; j < 9; ++j) {
    const double a = j * kPi / 9;
    const Complex t(std::cos(d), std::sin(d) * std::cos(2 * a));
    const Complex r(0.0, std::sin(d) * std::sin(2 * a));
    const CVector& row = p.row(j).components.front().row;
    EXPECT_NEAR(std::abs(row(0) + std::conj(r)), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(row(1) - std::conj(t)), 0.0, 1e-14);
  }
}

TEST(NamedProtocols, RowCounts) {
  EXPECT_EQ(named_protocol("J4").size(), 4);
  EXPECT_EQ(named_protocol("R4").size(), 4);
  EXPECT_EQ(named_protocol("J16").size(), 16);
  EXPECT_EQ(named_protocol("R16").size(), 16);
  EXPECT_EQ(named_protocol("kosut8").size(), 8);
  EXPECT_THROW(named_protocol("J5"), InvalidArgument);
}

TEST(NamedProtocols, KosutRowsComeInOrthogonalPairs) {
  const Protocol k = named_protocol("kosut8");
  for (int j = 0; j < 8; j += 2) {
    const CVector& a = k.row(j).components.front().row;
    const CVector& b = k.row(j + 1).components.front().row;
    EXPECT_NEAR(std::abs(a.dot(b)), 0.0, 1e-12) << "pair " << j / 2;
    EXPECT_NEAR(a.norm(), 1.0, 1e-12);
  }
}

TEST(Intensities, Examples) {
  const RVector j4 = intensities(named_protocol("J4"), density_from_pure(h_ket()));
  ASSERT_EQ(j4.size(), 4);
  EXPECT_NEAR(j4(0), 1.0, 1e-14);
  EXPECT_NEAR(j4(1), 0.0, 1e-14);
  EXPECT_NEAR(j4(2), 0.5, 1e-14);
  EXPECT_NEAR(j4(3), 0.5, 1e-14);

  const Protocol tet = polyhedron_protocol(Solid::tetrahedron, 1);
  EXPECT_NEAR(intensities(tet, density_from_pure(h_ket())).sum(), 2.0, 1e-12);

  const Protocol b144 = b144_protocol(1.1, 0.4);
  const RVector w = intensities(b144, white_noise(4));
  for (int j = 0; j < b144.size(); ++j)
    EXPECT_NEAR(w(j), b144.row(j).intensity_operator().trace().real() / 4.0, 1e-14);

  EXPECT_THROW(intensities(tet, white_noise(4)), DimensionMismatch);
}

// Regression: the density and amplitude paths and B vec(rho) must agree.
TEST(IntensityProperties, AllEvaluationPathsAgree) {
  std::mt19937_64 g(21);
  const Protocol protocols[] = {named_protocol("kosut8"), b144_protocol(1.3, 0.7),
                                polyhedron_protocol(Solid::cube, 2), b9_protocol(1.1)};
  for (const Protocol& p : protocols) {
    for (int trial = 0; trial < 10; ++trial) {
      const int s = p.dim();
      const CMatrix l = test::random_amplitudes(s, 1 + trial % s, g);
      const DensityMatrix rho = DensityMatrix::normalized(l * l.adjoint());
      const RVector a = intensities(p, rho);
      const RVector b = intensities(p, l);
      EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
      // tr(Lambda rho) with the operator built independently.
      for (int j = 0; j < p.size(); ++j) {
        const double direct = (p.row(j).intensity_operator() * rho.matrix()).trace().real();
        EXPECT_NEAR(a(j), direct, 1e-12);
        EXPECT_GE(a(j), -1e-15);
      }
      const CVector vec = Eigen::Map<const CVector>(rho.matrix().data(), s * s);
      const CVector bv = measurement_matrix(p).matrix() * vec;
      const RVector t = p.exposures();
      for (int j = 0; j < p.size(); ++j) {
        EXPECT_NEAR(bv(j).real(), t(j) * a(j), 1e-12);
        EXPECT_NEAR(bv(j).imag(), 0.0, 1e-12);
      }
    }
  }
}

TEST(IntensityProperties, TensorPowerFactorizes) {
  std::mt19937_64 g(9);
  const Protocol one = polyhedron_protocol(Solid::dodecahedron, 1);
  const Protocol two = polyhedron_protocol(Solid::dodecahedron, 2);
  for (int trial = 0; trial < 20; ++trial) {
    const CVector a = test::random_ket(2, g), b = test::random_ket(2, g);
    CVector ab(4);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) ab(2 * i + k) = a(i) * b(k);
    const RVector la = intensities(one, density_from_pure(a));
    const RVector lb = intensities(one, density_from_pure(b));
    const RVector lab = intensities(two, density_from_pure(ab));
    for (int i = 0; i < one.size(); ++i)
      for (int k = 0; k < one.size(); ++k)
        EXPECT_NEAR(lab(i * one.size() + k), la(i) * lb(k), 1e-12);
  }
}

TEST(IntensityProperties, RotatedDirectionsKeepTheSpectrum) {
  std::mt19937_64 g(13);
  std::normal_distribution<double> n;
  for (Solid s : {Solid::tetrahedron, Solid::octahedron, Solid::icosahedron}) {
    const RVector ref = analyze(polyhedron_protocol(s, 1)).singular_values;
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Quaterniond q(n(g), n(g), n(g), n(g));
      const Eigen::Matrix3d rot = q.normalized().toRotationMatrix();
      std::vector<Eigen::Vector3d> dirs;
      for (const auto& d : face_directions(s)) dirs.push_back(rot * d);
      const RVector sv = analyze(direction_protocol(dirs, 1)).singular_values;
      EXPECT_LT((sv - ref).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(Unity, Examples) {
  const UnityCheck tet = unity_check(polyhedron_protocol(Solid::tetrahedron, 1));
  ASSERT_TRUE(tet.holds);
  ASSERT_TRUE(tet.intensity.has_value());
  EXPECT_NEAR(*tet.intensity, 2.0, 1e-12);
  EXPECT_FALSE(unity_check(named_protocol("J4")).holds);
  Protocol single(2, {ProtocolRow::pure(h_ket())});
  EXPECT_FALSE(unity_check(single).holds);
}

TEST(Normalization, Examples) {
  const Protocol tet = polyhedron_protocol(Solid::tetrahedron, 1);
  const DensityMatrix h = density_from_pure(h_ket());
  const Protocol scaled = normalize_exposures(tet, h, 1e6);
  const double total = intensities(scaled, h).dot(scaled.exposures());
  EXPECT_NEAR(total / 1e6, 1.0, 1e-12);
  EXPECT_TRUE(unity_check(scaled).holds);
  EXPECT_THROW(normalize_exposures(tet, h, 0.0), InvalidArgument);

  CVector v(2);
  v << 0.0, 1.0;
  const Protocol blind(2, {ProtocolRow::pure(h_ket())});
  EXPECT_THROW(normalize_exposures(blind, density_from_pure(v), 1e3), InvalidArgument);
}

TEST(ProtocolValidation, RejectsBadRows) {
  EXPECT_THROW(Protocol(2, {}), InvalidArgument);
  EXPECT_THROW(Protocol(2, {ProtocolRow::pure(h_ket(), -1.0)}), InvalidArgument);
  CVector three = CVector::Zero(3);
  three(0) = 1.0;
  EXPECT_THROW(Protocol(2, {ProtocolRow::pure(three)}), DimensionMismatch);
}
