#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and
// an AVX2+FMA version; the dispatching entry points pick one at runtime.

#include <cstddef>
#include <optional>
#include <span>

namespace qtomo::kernels {

enum class Isa { scalar, avx2 };

/// Best ISA supported by both the build and the running CPU.
Isa detected_isa() noexcept;
/// ISA used by the dispatching entry points (honours force_isa and the
/// QTOMO_SIMD=scalar environment variable).
Isa active_isa() noexcept;
/// Pins the dispatch target; std::nullopt restores detection. Requests for
/// an unsupported ISA fall back to scalar.
void force_isa(std::optional<Isa> isa) noexcept;
const char* isa_name(Isa isa) noexcept;
bool isa_available(Isa isa) noexcept;

/// Complex m x s matrix stored as split real/imaginary planes, column-major:
/// element (j, l) is at index l * rows + j. Rows are contiguous per column so
/// the row index vectorizes.
struct RowPlanes {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const double> re;
  std::span<const double> im;
};

// a_j = sum_l X_jl v_l
#define QTOMO_KERNEL_DECLS                                                            \
  void complex_matvec(const RowPlanes& x, std::span<const double> v_re,             \
                      std::span<const double> v_im, std::span<double> out_re,      \
                      std::span<double> out_im) noexcept;                           \
  /* out_j += re_j^2 + im_j^2 */                                                    \
  void accumulate_abs2(std::span<const double> re, std::span<const double> im,      \
                       std::span<double> out) noexcept;                             \
  /* out(a, b) = sum_j w_j conj(X_ja) X_jb; out is cols x cols column-major */       \
  void weighted_gram_complex(const RowPlanes& x, std::span<const double> w,         \
                             std::span<double> out_re,                              \
                             std::span<double> out_im) noexcept;                    \
  /* out += sum_j w_j g_j g_j^T; g is rows x n row-major, out n x n */               \
  void weighted_gram_real(std::span<const double> g, std::size_t rows,              \
                          std::size_t n, std::span<const double> w,                 \
                          std::span<double> out) noexcept;

namespace scalar {
QTOMO_KERNEL_DECLS
}

#if defined(QTOMO_HAVE_AVX2)
namespace avx2 {
QTOMO_KERNEL_DECLS
}
#endif

// Dispatching entry points.
QTOMO_KERNEL_DECLS

#undef QTOMO_KERNEL_DECLS

}  // namespace qtomo::kernels
