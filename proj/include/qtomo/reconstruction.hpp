#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qtomo/analysis.hpp"
#include "qtomo/linalg.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/// sum_j [k_j ln(lambda_j t_j) - lambda_j t_j] with lambda_j = tr(Lambda_j L L^dagger),
/// dropping ln k_j!. Returns -inf when some k_j > 0 has lambda_j t_j = 0.
double log_likelihood(const Protocol& p, std::span<const double> counts,
                      const CMatrix& amplitudes);
double log_likelihood(const Protocol& p, std::span<const double> counts,
                      const PurifiedState& state);

/// Largest log-likelihood over the overall intensity scale for the state
/// direction given by `amplitudes`.
double profile_log_likelihood(const Protocol& p, std::span<const double> counts,
                              const CMatrix& amplitudes);

struct MLOptions {
  int rank = 0;  // 0 selects full rank
  int max_iterations = 10000;
  double tolerance = 1e-10;  // on |delta loglik| / max(1, total count)
  double initial_damping = 0.5;
  bool check_completeness = true;
  /// Starting amplitudes (s x rank); the pseudo-inverse seed when empty.
  std::optional<CMatrix> initial_amplitudes;
};

struct MLResult {
  DensityMatrix estimate;
  PurifiedState purified;
  double log_likelihood = 0.0;       // at the fitted intensity scale
  double seed_log_likelihood = 0.0;  // seed at its best scale
  double intensity_scale = 0.0;      // fitted sum_j lambda_j t_j / (that of the normalized state)
  int iterations = 0;
  bool converged = false;
  int rank = 0;
  DensityMatrix seed;
};

MLResult ml_reconstruct(const Protocol& p, std::span<const double> counts,
                        const MLOptions& options = {});
/// Reuses a precomputed analysis of `p` for the seed and completeness check.
MLResult ml_reconstruct(const Protocol& p, const ProtocolAnalysis& analysis,
                        std::span<const double> counts, const MLOptions& options = {});

/// Fits every rank 1..s and returns the results in rank order.
std::vector<MLResult> ml_rank_scan(const Protocol& p, std::span<const double> counts,
                                   MLOptions options = {});

}  // namespace qtomo
