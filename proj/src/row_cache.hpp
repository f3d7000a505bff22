#pragma once

// Split-plane copy of a protocol's row components for the kernel layer.

#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocols.hpp"

namespace qtomo::detail {

class RowCache {
 public:
  explicit RowCache(const Protocol& p);

  int rows() const noexcept { return rows_; }
  int dim() const noexcept { return dim_; }
  const RVector& exposures() const noexcept { return t_; }

  /// lambda_j = tr(Lambda_j L L^dagger). When `amp_re`/`amp_im` are given they
  /// receive X_c L as components x r column-major planes.
  RVector intensities(const CMatrix& l, std::vector<double>* amp_re = nullptr,
                      std::vector<double>* amp_im = nullptr) const;

  /// H = 2 sum_j t_j g_j g_j^T / lambda_j with g_j = realify(Lambda_j L).
  /// Rows with lambda_j <= floor * max(lambda) are skipped and listed.
  RMatrix information(const CMatrix& l, const RVector& t, std::vector<int>* degenerate,
                      double floor = 1e-12) const;

  /// sum_j w_j Lambda_j.
  CMatrix weighted_operator(const RVector& w) const;

 private:
  int rows_;
  int dim_;
  std::size_t comps_;
  std::vector<double> re_, im_;  // comps x dim, column-major
  std::vector<int> owner_;       // component -> row
  std::vector<double> weight_;   // component mixture weight
  RVector t_;
};

}  // namespace qtomo::detail
