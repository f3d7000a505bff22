#include "qtomo/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "qtomo/error.hpp"
#include "row_cache.hpp"

namespace qtomo {

namespace {

constexpr double kLogFloor = 1e-300;

void check_counts(const Protocol& p, std::span<const double> counts) {
  if (static_cast<int>(counts.size()) != p.size())
    throw DimensionMismatch("counts length differs from protocol rows");
  for (double k : counts)
    if (!(k >= 0.0) || !std::isfinite(k)) throw InvalidArgument("counts must be finite and >= 0");
}

double loglik_from_means(const RVector& mu, std::span<const double> counts) {
  double ll = 0.0;
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    const double k = counts[static_cast<std::size_t>(j)];
    if (k > 0.0) {
      if (!(mu(j) > 0.0)) return -std::numeric_limits<double>::infinity();
      ll += k * std::log(std::max(mu(j), kLogFloor));
    }
    ll -= mu(j);
  }
  return ll;
}

double profile_from_means(const RVector& mu, std::span<const double> counts) {
  const double total_mu = mu.sum();
  double total_k = 0.0;
  for (double k : counts) total_k += k;
  if (total_k <= 0.0) return 0.0;
  if (!(total_mu > 0.0)) return -std::numeric_limits<double>::infinity();
  return loglik_from_means(mu * (total_k / total_mu), counts);
}

RVector means(const detail::RowCache& cache, const CMatrix& l) {
  return cache.intensities(l).cwiseProduct(cache.exposures());
}

/// Rank-r amplitudes of rho with eigenvalues floored at `floor` x largest.
CMatrix seed_amplitudes(const DensityMatrix& rho, int r, double floor) {
  RVector ev = rho.eigenvalues().head(r).cwiseMax(floor * rho.eigenvalues()(0));
  return rho.eigenvectors().leftCols(r) * ev.cwiseSqrt().asDiagonal();
}

CMatrix truncate(const DensityMatrix& rho, int r) {
  const CMatrix l = seed_amplitudes(rho, r, 0.0);
  return l * l.adjoint();
}

}  // namespace

double log_likelihood(const Protocol& p, std::span<const double> counts,
                      const CMatrix& amplitudes) {
  check_counts(p, counts);
  return loglik_from_means(means(detail::RowCache(p), amplitudes), counts);
}

double log_likelihood(const Protocol& p, std::span<const double> counts,
                      const PurifiedState& state) {
  return log_likelihood(p, counts, state.amplitudes());
}

double profile_log_likelihood(const Protocol& p, std::span<const double> counts,
                              const CMatrix& amplitudes) {
  check_counts(p, counts);
  return profile_from_means(means(detail::RowCache(p), amplitudes), counts);
}

MLResult ml_reconstruct(const Protocol& p, std::span<const double> counts,
                        const MLOptions& options) {
  check_counts(p, counts);
  return ml_reconstruct(p, analyze(p), counts, options);
}

MLResult ml_reconstruct(const Protocol& p, const ProtocolAnalysis& analysis,
                        std::span<const double> counts, const MLOptions& options) {
  check_counts(p, counts);
  const int s = p.dim();
  const int r = options.rank == 0 ? s : options.rank;
  if (r < 1 || r > s) throw InvalidArgument("rank must lie in [1, s]");
  if (analysis.dim != s || analysis.rows != p.size())
    throw DimensionMismatch("analysis does not match the protocol");
  if (options.check_completeness && analysis.rank != s * s)
    throw IncompleteProtocol("maximum likelihood needs a complete protocol");
  if (options.max_iterations < 0) throw InvalidArgument("max_iterations must be >= 0");
  double total_k = 0.0;
  for (double k : counts) total_k += k;
  if (!(total_k > 0.0)) throw InvalidArgument("all counts are zero");

  const detail::RowCache cache(p);
  const CMatrix iop = p.total_intensity_operator();
  const Eigen::LDLT<CMatrix> iop_solver(iop);
  if (iop_solver.info() != Eigen::Success || !(iop_solver.vectorD().real().minCoeff() > 0.0))
    throw IncompleteProtocol("total intensity operator is singular");

  // Seed: projected pseudo-inverse truncated to rank r.
  CMatrix seed_rho;
  CMatrix l;
  if (options.initial_amplitudes) {
    l = *options.initial_amplitudes;
    if (l.rows() != s || l.cols() != r)
      throw DimensionMismatch("initial amplitudes must be s x rank");
    seed_rho = l * l.adjoint();
  } else {
    const auto pi = pseudo_inverse_reconstruct(analysis, counts);
    seed_rho = truncate(pi.rho_projected, r);
    // Zero eigenvalues would stay zero under the multiplicative update.
    l = seed_amplitudes(pi.rho_projected, r, 1e-4);
  }
  if (!(l.norm() > 0.0)) throw InvalidArgument("seed amplitudes vanish");
  const DensityMatrix seed = DensityMatrix::normalized(seed_rho);

  auto rescale = [&](CMatrix& m) {
    const double mu = means(cache, m).sum();
    if (mu > 0.0) m *= std::sqrt(total_k / mu);
  };
  // Same arithmetic as the final likelihood, so the two compare exactly.
  CMatrix seed_l = seed_amplitudes(seed, r, 0.0);
  rescale(seed_l);
  const double seed_ll = loglik_from_means(means(cache, seed_l), counts);

  struct Ascent {
    CMatrix l;
    double ll = 0.0;
    int iterations = 0;
    bool converged = false;
  };
  const double tol = options.tolerance * std::max(1.0, total_k);
  auto ascend = [&](CMatrix start) {
    Ascent out;
    out.l = std::move(start);
    rescale(out.l);
    RVector mu = means(cache, out.l);
    out.ll = loglik_from_means(mu, counts);
    double a = options.initial_damping;
    double prev_gain = 0.0;
    RVector w(p.size());
    while (out.iterations < options.max_iterations) {
      ++out.iterations;
      for (int j = 0; j < p.size(); ++j) {
        const double k = counts[static_cast<std::size_t>(j)];
        w(j) = k > 0.0 ? k * cache.exposures()(j) / std::max(mu(j), kLogFloor) : 0.0;
      }
      const CMatrix step = iop_solver.solve(cache.weighted_operator(w) * out.l);
      bool accepted = false;
      double gain = 0.0;
      while (a >= 1e-12) {
        CMatrix trial = (1.0 - a) * out.l + a * step;
        const RVector mu_t = means(cache, trial);
        const double ll_t = loglik_from_means(mu_t, counts);
        if (ll_t >= out.ll) {
          gain = ll_t - out.ll;
          out.l = std::move(trial);
          mu = mu_t;
          out.ll = ll_t;
          accepted = true;
          a = std::min(1.0, 1.5 * a);
          break;
        }
        a *= 0.5;
      }
      // No ascent along the fixed-point direction at any damping.
      if (!accepted || gain == 0.0) {
        out.converged = true;
        break;
      }
      // The iteration converges linearly; with ratio q between successive
      // gains the remaining gain is about gain q / (1 - q).
      const double q = prev_gain > 0.0 ? gain / prev_gain : 1.0;
      const double remaining = q < 1.0 ? gain * q / (1.0 - q) : gain;
      prev_gain = gain;
      if (gain < tol && remaining < tol) {
        out.converged = true;
        break;
      }
    }
    return out;
  };

  Ascent fit = ascend(l);
  if (fit.ll < seed_ll && !options.initial_amplitudes) {
    // The eigenvalue floor moved the start below the seed; the seed itself
    // is a valid start and ascent from it cannot end lower.
    Ascent again = ascend(seed_amplitudes(seed, r, 0.0));
    again.iterations += fit.iterations;
    fit = std::move(again);
  }
  l = std::move(fit.l);
  // The damped steps leave the overall scale slightly off its optimum, where
  // sum mu = sum k; profiling it out can only raise the likelihood.
  rescale(l);
  double ll = loglik_from_means(means(cache, l), counts);
  // Rounding in the last steps can leave an already optimal seed a few ulps
  // ahead; never report a fit worse than its start.
  if (ll < seed_ll) {
    l = seed_l;
    ll = seed_ll;
  }
  const int it = fit.iterations;
  const bool converged = fit.converged;

  const double scale = l.squaredNorm();
  const CMatrix unit = l / std::sqrt(scale);
  PurifiedState purified = PurifiedState(unit).canonical();
  return MLResult{DensityMatrix::normalized(l * l.adjoint()),
                  std::move(purified),
                  ll,
                  seed_ll,
                  scale,
                  it,
                  converged,
                  r,
                  seed};
}

std::vector<MLResult> ml_rank_scan(const Protocol& p, std::span<const double> counts,
                                   MLOptions options) {
  check_counts(p, counts);
  const ProtocolAnalysis analysis = analyze(p);
  std::vector<MLResult> out;
  for (int r = 1; r <= p.dim(); ++r) {
    options.rank = r;
    options.initial_amplitudes.reset();
    MLResult fit = ml_reconstruct(p, analysis, counts, options);
    if (r > 1 && fit.log_likelihood < out.back().log_likelihood) {
      // Slow convergence toward a rank-deficient optimum; restart from the
      // previous rank's solution with an empty extra column, which cannot
      // end below it.
      const MLResult& prev = out.back();
      CMatrix start = CMatrix::Zero(p.dim(), r);
      start.leftCols(r - 1) = prev.purified.amplitudes() * std::sqrt(prev.intensity_scale);
      options.initial_amplitudes = start;
      MLResult again = ml_reconstruct(p, analysis, counts, options);
      again.iterations += fit.iterations;
      again.seed = fit.seed;
      again.seed_log_likelihood = fit.seed_log_likelihood;
      fit = std::move(again);
    }
    out.push_back(std::move(fit));
  }
  return out;
}

}  // namespace qtomo
