#include "qtomo/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "qtomo/analysis.hpp"
#include "qtomo/error.hpp"
#include "qtomo/parallel.hpp"
#include "qtomo/reconstruction.hpp"

namespace qtomo {

namespace {

constexpr std::uint32_t kM0 = 0xD2511F53u;
constexpr std::uint32_t kM1 = 0xCD9E8D57u;
constexpr std::uint32_t kW0 = 0x9E3779B9u;
constexpr std::uint32_t kW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> PhiloxStream::block(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kM0, ctr[0], hi0, lo0);
    mulhilo(kM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

PhiloxStream::PhiloxStream(std::uint64_t key, std::uint64_t stream) noexcept
    : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
      stream_(stream) {}

void PhiloxStream::refill() noexcept {
  buffer_ = block({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                  key_);
  ++counter_;
  used_ = 0;
}

std::uint32_t PhiloxStream::next_u32() noexcept {
  if (used_ == 4) refill();
  return buffer_[static_cast<std::size_t>(used_++)];
}

std::uint64_t PhiloxStream::next_u64() noexcept {
  const std::uint64_t hi = next_u32();
  return (hi << 32) | next_u32();
}

double PhiloxStream::next_uniform() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double PhiloxStream::next_normal() noexcept {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t sample_poisson(double mean, PhiloxStream& rng) {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) {
    double p = std::exp(-mean);
    double cdf = p;
    const double u = rng.next_uniform();
    std::uint64_t k = 0;
    while (u > cdf && k < 1000) {
      ++k;
      p *= mean / static_cast<double>(k);
      cdf += p;
    }
    return k;
  }
  // Hormann's PTRS.
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.next_uniform() - 0.5;
    const double v = rng.next_uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

std::vector<double> sample_counts(const Protocol& p, const DensityMatrix& rho, double n,
                                  std::uint64_t seed) {
  const Protocol pn = normalize_exposures(p, rho, n);
  const RVector mu = intensities(pn, rho).cwiseProduct(pn.exposures());
  std::vector<double> k(static_cast<std::size_t>(p.size()));
  for (int j = 0; j < p.size(); ++j) {
    PhiloxStream rng(seed, static_cast<std::uint64_t>(j));
    k[static_cast<std::size_t>(j)] = static_cast<double>(sample_poisson(mu(j), rng));
  }
  return k;
}

int TrialBatch::non_converged() const {
  return static_cast<int>(std::count(converged.begin(), converged.end(), false));
}

double TrialBatch::mean_loss(bool converged_only) const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (converged_only && !converged[i]) continue;
    sum += losses[i];
    ++count;
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

double TrialBatch::variance_loss(bool converged_only) const {
  const double m = mean_loss(converged_only);
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (converged_only && !converged[i]) continue;
    sum += (losses[i] - m) * (losses[i] - m);
    ++count;
  }
  return count > 1 ? sum / (count - 1) : std::numeric_limits<double>::quiet_NaN();
}

TrialBatch run_trials(const Protocol& p, const DensityMatrix& rho, double n, int trials,
                      std::uint64_t seed, int threads) {
  if (trials < 0) throw InvalidArgument("trial count must be >= 0");
  if (!(n > 0.0)) throw InvalidArgument("sample size n must be positive");
  TrialBatch batch;
  batch.n = n;
  batch.seed = seed;
  if (trials == 0) return batch;

  const Protocol pn = normalize_exposures(p, rho, n);
  const ProtocolAnalysis analysis = analyze(pn);
  if (analysis.rank != p.dim() * p.dim())
    throw IncompleteProtocol("run_trials needs a complete protocol");
  MLOptions opts;
  opts.rank = rho.numerical_rank();
  opts.check_completeness = false;

  const auto count = static_cast<std::size_t>(trials);
  batch.losses.assign(count, 0.0);
  batch.z.assign(count, 0.0);
  batch.converged.assign(count, false);
  batch.iterations.assign(count, 0);
  std::vector<char> ok(count, 0);
  parallel_for(count, threads, [&](std::size_t i) {
    PhiloxStream derive(seed, static_cast<std::uint64_t>(i));
    const auto counts = sample_counts(pn, rho, n, derive.next_u64());
    const MLResult fit = ml_reconstruct(pn, analysis, counts, opts);
    const double loss = std::max(0.0, 1.0 - fidelity(rho, fit.estimate));
    batch.losses[i] = loss;
    batch.z[i] = z_value(loss);
    batch.iterations[i] = fit.iterations;
    ok[i] = fit.converged ? 1 : 0;
  });
  for (std::size_t i = 0; i < count; ++i) batch.converged[i] = ok[i] != 0;
  return batch;
}

int default_gof_bins(int trials) {
  return std::min(trials / 20, 50);
}

GofResult gof_test(const std::vector<double>& losses, const LossModel& model, int bins) {
  const int used = static_cast<int>(losses.size());
  if (bins <= 0) bins = default_gof_bins(used);
  if (bins < 2) throw InvalidArgument("goodness of fit needs at least two bins");
  if (used < 5 * bins) throw InvalidArgument("goodness of fit needs trials >= 5 x bins");
  const WeightedChiSquare dist = model.distribution();
  std::vector<double> observed(static_cast<std::size_t>(bins), 0.0);
  // Equiprobable bins under the model: bin by the model CDF of each loss.
  for (double x : losses) {
    const double u = dist.cdf(x);
    const int b = std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    observed[static_cast<std::size_t>(b)] += 1.0;
  }
  const double expected = static_cast<double>(used) / bins;
  GofResult out;
  for (double o : observed) out.statistic += (o - expected) * (o - expected) / expected;
  out.dof = bins - 1;
  out.bins = bins;
  out.used_trials = used;
  out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
  return out;
}

GofResult gof_test(const TrialBatch& batch, const LossModel& model, int bins) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < batch.losses.size(); ++i)
    if (batch.converged[i]) kept.push_back(batch.losses[i]);
  return gof_test(kept, model, bins);
}

QuantileBand quantile_band(const LossModel& model, double p_lo, double p_hi) {
  if (!(p_lo > 0.0 && p_lo < p_hi && p_hi < 1.0))
    throw InvalidArgument("quantile levels must satisfy 0 < p_lo < p_hi < 1");
  const WeightedChiSquare dist = model.distribution();
  const double loss_lo = dist.quantile(p_lo);
  const double loss_hi = dist.quantile(p_hi);
  return {1.0 - loss_hi, 1.0 - loss_lo, z_value(loss_hi), z_value(loss_lo)};
}

std::vector<double> sample_model_losses(const LossModel& model, int count, std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("sample count must be >= 0");
  PhiloxStream rng(seed, 0);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& x : out) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < model.d.size(); ++j) {
      const double z = rng.next_normal();
      acc += model.d(j) * z * z;
    }
    x = acc;
  }
  return out;
}

}  // namespace qtomo
