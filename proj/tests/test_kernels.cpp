#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qtomo/kernels.hpp"

using namespace qtomo::kernels;

namespace {

struct Planes {
  std::vector<double> re, im;
  RowPlanes view(std::size_t rows, std::size_t cols) const { return {rows, cols, re, im}; }
};

Planes random_planes(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> z;
  Planes p;
  p.re.resize(n);
  p.im.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.re[i] = z(g);
    p.im[i] = z(g);
  }
  return p;
}

std::vector<double> positive(std::size_t n, std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::vector<double> w(n);
  for (auto& x : w) x = u(g);
  return w;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << i;
}

}  // namespace

// Odd sizes exercise the vector tails.
TEST(Kernels, ScalarMatchesNaiveLoops) {
  std::mt19937_64 g(1);
  for (std::size_t rows : {1u, 3u, 4u, 9u, 37u}) {
    const std::size_t cols = 3;
    const Planes x = random_planes(rows * cols, g);
    const Planes v = random_planes(cols, g);
    std::vector<double> ore(rows), oim(rows);
    scalar::complex_matvec(x.view(rows, cols), v.re, v.im, ore, oim);
    for (std::size_t j = 0; j < rows; ++j) {
      double re = 0.0, im = 0.0;
      for (std::size_t l = 0; l < cols; ++l) {
        const double a = x.re[l * rows + j], b = x.im[l * rows + j];
        re += a * v.re[l] - b * v.im[l];
        im += a * v.im[l] + b * v.re[l];
      }
      EXPECT_NEAR(ore[j], re, 1e-12);
      EXPECT_NEAR(oim[j], im, 1e-12);
    }
    const auto w = positive(rows, g);
    std::vector<double> gre(cols * cols), gim(cols * cols);
    scalar::weighted_gram_complex(x.view(rows, cols), w, gre, gim);
    for (std::size_t a = 0; a < cols; ++a)
      for (std::size_t b = 0; b < cols; ++b) {
        double re = 0.0, im = 0.0;
        for (std::size_t j = 0; j < rows; ++j) {
          const double xr = x.re[a * rows + j], xi = -x.im[a * rows + j];
          const double yr = x.re[b * rows + j], yi = x.im[b * rows + j];
          re += w[j] * (xr * yr - xi * yi);
          im += w[j] * (xr * yi + xi * yr);
        }
        EXPECT_NEAR(gre[b * cols + a], re, 1e-12);
        EXPECT_NEAR(gim[b * cols + a], im, 1e-12);
      }
  }
}

#if defined(QTOMO_HAVE_AVX2)
TEST(Kernels, Avx2MatchesScalar) {
  if (!isa_available(Isa::avx2)) GTEST_SKIP() << "CPU lacks AVX2";
  std::mt19937_64 g(2);
  for (std::size_t rows : {1u, 2u, 5u, 8u, 13u, 64u, 101u}) {
    for (std::size_t cols : {2u, 4u, 8u}) {
      const Planes x = random_planes(rows * cols, g);
      const Planes v = random_planes(cols, g);
      std::vector<double> a_re(rows), a_im(rows), b_re(rows), b_im(rows);
      scalar::complex_matvec(x.view(rows, cols), v.re, v.im, a_re, a_im);
      avx2::complex_matvec(x.view(rows, cols), v.re, v.im, b_re, b_im);
      expect_close(a_re, b_re, 1e-12);
      expect_close(a_im, b_im, 1e-12);

      std::vector<double> s_abs(rows, 1.0), v_abs(rows, 1.0);
      scalar::accumulate_abs2(a_re, a_im, s_abs);
      avx2::accumulate_abs2(a_re, a_im, v_abs);
      expect_close(s_abs, v_abs, 1e-12);

      const auto w = positive(rows, g);
      std::vector<double> s_gre(cols * cols), s_gim(cols * cols), v_gre(cols * cols),
          v_gim(cols * cols);
      scalar::weighted_gram_complex(x.view(rows, cols), w, s_gre, s_gim);
      avx2::weighted_gram_complex(x.view(rows, cols), w, v_gre, v_gim);
      expect_close(s_gre, v_gre, 1e-10);
      expect_close(s_gim, v_gim, 1e-10);

      const std::size_t n = 2 * cols;
      std::vector<double> gr(rows * n);
      std::normal_distribution<double> z;
      for (auto& q : gr) q = z(g);
      std::vector<double> s_h(n * n, 0.5), v_h(n * n, 0.5);
      scalar::weighted_gram_real(gr, rows, n, w, s_h);
      avx2::weighted_gram_real(gr, rows, n, w, v_h);
      expect_close(s_h, v_h, 1e-10);
    }
  }
}
#endif

TEST(Kernels, ForcedIsaControlsDispatch) {
  force_isa(Isa::scalar);
  EXPECT_EQ(active_isa(), Isa::scalar);
  force_isa(Isa::avx2);
  EXPECT_EQ(active_isa(), isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar);
  force_isa(std::nullopt);
  EXPECT_TRUE(isa_available(Isa::scalar));
  EXPECT_STREQ(isa_name(Isa::scalar), "scalar");
}
