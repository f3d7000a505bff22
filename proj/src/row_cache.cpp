#include "row_cache.hpp"

#include <algorithm>

#include "qtomo/error.hpp"
#include "qtomo/kernels.hpp"

namespace qtomo::detail {

RowCache::RowCache(const Protocol& p) : rows_(p.size()), dim_(p.dim()), t_(p.exposures()) {
  for (int j = 0; j < rows_; ++j)
    for (const auto& c : p.row(j).components) {
      owner_.push_back(j);
      weight_.push_back(c.weight);
    }
  comps_ = owner_.size();
  re_.resize(comps_ * static_cast<std::size_t>(dim_));
  im_.resize(re_.size());
  std::size_t k = 0;
  for (int j = 0; j < rows_; ++j)
    for (const auto& c : p.row(j).components) {
      for (int a = 0; a < dim_; ++a) {
        re_[static_cast<std::size_t>(a) * comps_ + k] = c.row(a).real();
        im_[static_cast<std::size_t>(a) * comps_ + k] = c.row(a).imag();
      }
      ++k;
    }
}

RVector RowCache::intensities(const CMatrix& l, std::vector<double>* amp_re,
                              std::vector<double>* amp_im) const {
  if (l.rows() != dim_) throw DimensionMismatch("amplitude dimension differs from protocol");
  const auto r = static_cast<std::size_t>(l.cols());
  const kernels::RowPlanes planes{comps_, static_cast<std::size_t>(dim_), re_, im_};
  std::vector<double> local_re, local_im;
  auto& are = amp_re ? *amp_re : local_re;
  auto& aim = amp_im ? *amp_im : local_im;
  are.assign(comps_ * r, 0.0);
  aim.assign(comps_ * r, 0.0);
  std::vector<double> abs2(comps_, 0.0);
  std::vector<double> vr(static_cast<std::size_t>(dim_)), vi(vr.size());
  for (std::size_t k = 0; k < r; ++k) {
    for (int a = 0; a < dim_; ++a) {
      vr[static_cast<std::size_t>(a)] = l(a, static_cast<Eigen::Index>(k)).real();
      vi[static_cast<std::size_t>(a)] = l(a, static_cast<Eigen::Index>(k)).imag();
    }
    std::span<double> ore(are.data() + k * comps_, comps_);
    std::span<double> oim(aim.data() + k * comps_, comps_);
    kernels::complex_matvec(planes, vr, vi, ore, oim);
    kernels::accumulate_abs2(ore, oim, abs2);
  }
  RVector lam = RVector::Zero(rows_);
  for (std::size_t c = 0; c < comps_; ++c) lam(owner_[c]) += weight_[c] * abs2[c];
  return lam;
}

RMatrix RowCache::information(const CMatrix& l, const RVector& t, std::vector<int>* degenerate,
                              double floor) const {
  const auto s = static_cast<std::size_t>(dim_);
  const auto r = static_cast<std::size_t>(l.cols());
  const std::size_t half = s * r;
  const std::size_t n = 2 * half;
  std::vector<double> are, aim;
  const RVector lam = intensities(l, &are, &aim);

  // g_j = realify(sum_c w_c conj(X_c) (X_c L)), rows x n row-major
  std::vector<double> g(static_cast<std::size_t>(rows_) * n, 0.0);
  for (std::size_t c = 0; c < comps_; ++c) {
    double* gj = g.data() + static_cast<std::size_t>(owner_[c]) * n;
    const double w = weight_[c];
    for (std::size_t k = 0; k < r; ++k) {
      const double ar = are[k * comps_ + c];
      const double ai = aim[k * comps_ + c];
      for (std::size_t a = 0; a < s; ++a) {
        const double xr = re_[a * comps_ + c];
        const double xi = im_[a * comps_ + c];
        gj[a + s * k] += w * (xr * ar + xi * ai);
        gj[half + a + s * k] += w * (xr * ai - xi * ar);
      }
    }
  }

  const double cut = floor * std::max(lam.maxCoeff(), 0.0);
  std::vector<double> w(static_cast<std::size_t>(rows_), 0.0);
  if (degenerate) degenerate->clear();
  for (int j = 0; j < rows_; ++j) {
    if (lam(j) > cut && lam(j) > 0.0) {
      w[static_cast<std::size_t>(j)] = 2.0 * t(j) / lam(j);
    } else if (degenerate) {
      degenerate->push_back(j);
    }
  }
  RMatrix h = RMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  kernels::weighted_gram_real(g, static_cast<std::size_t>(rows_), n, w,
                              std::span<double>(h.data(), n * n));
  return 0.5 * (h + h.transpose());
}

CMatrix RowCache::weighted_operator(const RVector& w) const {
  const auto s = static_cast<std::size_t>(dim_);
  std::vector<double> wc(comps_);
  for (std::size_t c = 0; c < comps_; ++c) wc[c] = w(owner_[c]) * weight_[c];
  std::vector<double> ore(s * s), oim(s * s);
  const kernels::RowPlanes planes{comps_, s, re_, im_};
  kernels::weighted_gram_complex(planes, wc, ore, oim);
  CMatrix out(dim_, dim_);
  for (std::size_t i = 0; i < s * s; ++i) out.data()[i] = Complex(ore[i], oim[i]);
  return out;
}

}  // namespace qtomo::detail
