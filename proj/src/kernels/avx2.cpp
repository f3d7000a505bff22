// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "qtomo/kernels.hpp"

#include <immintrin.h>

namespace qtomo::kernels::avx2 {

namespace {

double hsum(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void complex_matvec(const RowPlanes& x, std::span<const double> v_re,
                    std::span<const double> v_im, std::span<double> out_re,
                    std::span<double> out_im) noexcept {
  const std::size_t m = x.rows;
  const std::size_t m4 = m & ~std::size_t{3};
  for (std::size_t j = 0; j < m; ++j) out_re[j] = out_im[j] = 0.0;
  for (std::size_t l = 0; l < x.cols; ++l) {
    const double vr = v_re[l];
    const double vi = v_im[l];
    const __m256d pr = _mm256_set1_pd(vr);
    const __m256d pi = _mm256_set1_pd(vi);
    const double* xr = x.re.data() + l * m;
    const double* xi = x.im.data() + l * m;
    std::size_t j = 0;
    for (; j < m4; j += 4) {
      const __m256d a = _mm256_loadu_pd(xr + j);
      const __m256d b = _mm256_loadu_pd(xi + j);
      __m256d r = _mm256_loadu_pd(out_re.data() + j);
      __m256d i = _mm256_loadu_pd(out_im.data() + j);
      r = _mm256_fmadd_pd(a, pr, r);
      r = _mm256_fnmadd_pd(b, pi, r);
      i = _mm256_fmadd_pd(a, pi, i);
      i = _mm256_fmadd_pd(b, pr, i);
      _mm256_storeu_pd(out_re.data() + j, r);
      _mm256_storeu_pd(out_im.data() + j, i);
    }
    for (; j < m; ++j) {
      out_re[j] += xr[j] * vr - xi[j] * vi;
      out_im[j] += xr[j] * vi + xi[j] * vr;
    }
  }
}

void accumulate_abs2(std::span<const double> re, std::span<const double> im,
                     std::span<double> out) noexcept {
  const std::size_t m = out.size();
  const std::size_t m4 = m & ~std::size_t{3};
  std::size_t j = 0;
  for (; j < m4; j += 4) {
    const __m256d a = _mm256_loadu_pd(re.data() + j);
    const __m256d b = _mm256_loadu_pd(im.data() + j);
    __m256d o = _mm256_loadu_pd(out.data() + j);
    o = _mm256_fmadd_pd(a, a, o);
    o = _mm256_fmadd_pd(b, b, o);
    _mm256_storeu_pd(out.data() + j, o);
  }
  for (; j < m; ++j) out[j] += re[j] * re[j] + im[j] * im[j];
}

void weighted_gram_complex(const RowPlanes& x, std::span<const double> w,
                           std::span<double> out_re, std::span<double> out_im) noexcept {
  const std::size_t m = x.rows;
  const std::size_t m4 = m & ~std::size_t{3};
  const std::size_t n = x.cols;
  for (std::size_t b = 0; b < n; ++b) {
    const double* br = x.re.data() + b * m;
    const double* bi = x.im.data() + b * m;
    for (std::size_t a = 0; a <= b; ++a) {
      const double* ar = x.re.data() + a * m;
      const double* ai = x.im.data() + a * m;
      __m256d accr = _mm256_setzero_pd();
      __m256d acci = _mm256_setzero_pd();
      std::size_t j = 0;
      for (; j < m4; j += 4) {
        const __m256d wv = _mm256_loadu_pd(w.data() + j);
        const __m256d xar = _mm256_mul_pd(wv, _mm256_loadu_pd(ar + j));
        const __m256d xai = _mm256_mul_pd(wv, _mm256_loadu_pd(ai + j));
        const __m256d xbr = _mm256_loadu_pd(br + j);
        const __m256d xbi = _mm256_loadu_pd(bi + j);
        accr = _mm256_fmadd_pd(xar, xbr, accr);
        accr = _mm256_fmadd_pd(xai, xbi, accr);
        acci = _mm256_fmadd_pd(xar, xbi, acci);
        acci = _mm256_fnmadd_pd(xai, xbr, acci);
      }
      double sr = hsum(accr);
      double si = hsum(acci);
      for (; j < m; ++j) {
        sr += w[j] * (ar[j] * br[j] + ai[j] * bi[j]);
        si += w[j] * (ar[j] * bi[j] - ai[j] * br[j]);
      }
      out_re[b * n + a] = sr;
      out_im[b * n + a] = si;
      out_re[a * n + b] = sr;
      out_im[a * n + b] = -si;
    }
  }
}

void weighted_gram_real(std::span<const double> g, std::size_t rows, std::size_t n,
                        std::span<const double> w, std::span<double> out) noexcept {
  const std::size_t n4 = n & ~std::size_t{3};
  for (std::size_t j = 0; j < rows; ++j) {
    const double* gj = g.data() + j * n;
    for (std::size_t a = 0; a < n; ++a) {
      const double s = w[j] * gj[a];
      const __m256d sv = _mm256_set1_pd(s);
      double* row = out.data() + a * n;
      std::size_t b = 0;
      for (; b < n4; b += 4)
        _mm256_storeu_pd(row + b,
                         _mm256_fmadd_pd(sv, _mm256_loadu_pd(gj + b), _mm256_loadu_pd(row + b)));
      for (; b < n; ++b) row[b] += s * gj[b];
    }
  }
}

}  // namespace qtomo::kernels::avx2
