#include <atomic>
#include <cstdlib>
#include <cstring>

#include "qtomo/kernels.hpp"

namespace qtomo::kernels {

namespace {

// -1: follow detection, otherwise an Isa value.
std::atomic<int> forced{-1};

bool env_forces_scalar() noexcept {
  static const bool value = [] {
    const char* v = std::getenv("QTOMO_SIMD");
    return v != nullptr && std::strcmp(v, "scalar") == 0;
  }();
  return value;
}

}  // namespace

bool isa_available(Isa isa) noexcept {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(QTOMO_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

Isa detected_isa() noexcept {
  static const Isa isa = isa_available(Isa::avx2) ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() noexcept {
  const int f = forced.load(std::memory_order_relaxed);
  if (f >= 0) return static_cast<Isa>(f);
  return env_forces_scalar() ? Isa::scalar : detected_isa();
}

void force_isa(std::optional<Isa> isa) noexcept {
  if (!isa) {
    forced.store(-1, std::memory_order_relaxed);
    return;
  }
  const Isa target = isa_available(*isa) ? *isa : Isa::scalar;
  forced.store(static_cast<int>(target), std::memory_order_relaxed);
}

const char* isa_name(Isa isa) noexcept {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

#if defined(QTOMO_HAVE_AVX2)
#define QTOMO_DISPATCH(fn, ...)                                 \
  do {                                                          \
    if (active_isa() == Isa::avx2) return avx2::fn(__VA_ARGS__); \
    return scalar::fn(__VA_ARGS__);                             \
  } while (0)
#else
#define QTOMO_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void complex_matvec(const RowPlanes& x, std::span<const double> v_re,
                    std::span<const double> v_im, std::span<double> out_re,
                    std::span<double> out_im) noexcept {
  QTOMO_DISPATCH(complex_matvec, x, v_re, v_im, out_re, out_im);
}

void accumulate_abs2(std::span<const double> re, std::span<const double> im,
                     std::span<double> out) noexcept {
  QTOMO_DISPATCH(accumulate_abs2, re, im, out);
}

void weighted_gram_complex(const RowPlanes& x, std::span<const double> w,
                           std::span<double> out_re, std::span<double> out_im) noexcept {
  QTOMO_DISPATCH(weighted_gram_complex, x, w, out_re, out_im);
}

void weighted_gram_real(std::span<const double> g, std::size_t rows, std::size_t n,
                        std::span<const double> w, std::span<double> out) noexcept {
  QTOMO_DISPATCH(weighted_gram_real, g, rows, n, w, out);
}

}  // namespace qtomo::kernels
