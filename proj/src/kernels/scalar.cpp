#include "qtomo/kernels.hpp"

namespace qtomo::kernels::scalar {

void complex_matvec(const RowPlanes& x, std::span<const double> v_re,
                    std::span<const double> v_im, std::span<double> out_re,
                    std::span<double> out_im) noexcept {
  const std::size_t m = x.rows;
  for (std::size_t j = 0; j < m; ++j) out_re[j] = out_im[j] = 0.0;
  for (std::size_t l = 0; l < x.cols; ++l) {
    const double vr = v_re[l];
    const double vi = v_im[l];
    const double* xr = x.re.data() + l * m;
    const double* xi = x.im.data() + l * m;
    for (std::size_t j = 0; j < m; ++j) {
      out_re[j] += xr[j] * vr - xi[j] * vi;
      out_im[j] += xr[j] * vi + xi[j] * vr;
    }
  }
}

void accumulate_abs2(std::span<const double> re, std::span<const double> im,
                     std::span<double> out) noexcept {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += re[j] * re[j] + im[j] * im[j];
}

void weighted_gram_complex(const RowPlanes& x, std::span<const double> w,
                           std::span<double> out_re, std::span<double> out_im) noexcept {
  const std::size_t m = x.rows;
  const std::size_t n = x.cols;
  for (std::size_t b = 0; b < n; ++b) {
    const double* br = x.re.data() + b * m;
    const double* bi = x.im.data() + b * m;
    for (std::size_t a = 0; a <= b; ++a) {
      const double* ar = x.re.data() + a * m;
      const double* ai = x.im.data() + a * m;
      double sr = 0.0;
      double si = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
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
  for (std::size_t j = 0; j < rows; ++j) {
    const double* gj = g.data() + j * n;
    for (std::size_t a = 0; a < n; ++a) {
      const double s = w[j] * gj[a];
      double* row = out.data() + a * n;
      for (std::size_t b = 0; b < n; ++b) row[b] += s * gj[b];
    }
  }
}

}  // namespace qtomo::kernels::scalar
