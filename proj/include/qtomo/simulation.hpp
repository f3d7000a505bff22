#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qtomo/precision.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/// Philox4x32-10 counter-based generator. A stream is identified by a 64-bit
/// key and a 64-bit stream id; draws advance a 64-bit counter.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t key, std::uint64_t stream) noexcept;

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;
  /// Uniform on (0, 1) with 53-bit resolution; never returns 0.
  double next_uniform() noexcept;
  double next_normal() noexcept;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                            std::array<std::uint32_t, 2> key) noexcept;

 private:
  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

/// Inversion below mean 10, PTRS transformed rejection above.
std::uint64_t sample_poisson(double mean, PhiloxStream& rng);

/// Per-row streams (seed, row); exposures normalized to expected total n.
std::vector<double> sample_counts(const Protocol& p, const DensityMatrix& rho, double n,
                                  std::uint64_t seed);

struct TrialBatch {
  double n = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> losses;
  std::vector<double> z;
  std::vector<bool> converged;
  std::vector<int> iterations;

  int trials() const { return static_cast<int>(losses.size()); }
  int non_converged() const;
  double mean_loss(bool converged_only = true) const;
  double variance_loss(bool converged_only = true) const;
};

/// Trial i uses seed derived from (seed, i); results do not depend on threads.
TrialBatch run_trials(const Protocol& p, const DensityMatrix& rho, double n, int trials,
                      std::uint64_t seed, int threads = 0);

struct GofResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  int bins = 0;
  int used_trials = 0;
};

int default_gof_bins(int trials);

/// Pearson chi-square against equiprobable bins of the model; bins <= 0 picks
/// the default. Non-converged trials are skipped.
GofResult gof_test(const TrialBatch& batch, const LossModel& model, int bins = 0);
GofResult gof_test(const std::vector<double>& losses, const LossModel& model, int bins = 0);

struct QuantileBand {
  double fidelity_lo = 0.0;  // fidelity at the p_hi loss quantile
  double fidelity_hi = 0.0;  // fidelity at the p_lo loss quantile
  double z_lo = 0.0;
  double z_hi = 0.0;
};

QuantileBand quantile_band(const LossModel& model, double p_lo = 0.01, double p_hi = 0.99);

/// Draws sum_j d_j xi_j^2 directly from the model.
std::vector<double> sample_model_losses(const LossModel& model, int count, std::uint64_t seed);

}  // namespace qtomo
