#pragma once

#include <span>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/// m x s^2 matrix with rows t_j * conj(vec(Lambda_j))^T, so that
/// B * vec(rho) = (t_j lambda_j)_j with column-stacked vec().
/// For a pure row this is t_j * (X_j^* kron X_j).
class MeasurementMatrix {
 public:
  explicit MeasurementMatrix(const Protocol& p);

  const CMatrix& matrix() const noexcept { return b_; }
  int rows() const noexcept { return static_cast<int>(b_.rows()); }
  int dim() const noexcept { return dim_; }

 private:
  CMatrix b_;
  int dim_;
};

MeasurementMatrix measurement_matrix(const Protocol& p);

enum class Completeness { complete, conditionally_complete_candidate, incomplete };
std::string completeness_name(Completeness c);

struct ProtocolAnalysis {
  int dim = 0;
  int rows = 0;
  RVector singular_values;  // descending, length min(m, s^2)
  int rank = 0;
  double condition_number = 0.0;       // over the `rank` retained values
  double condition_number_full = 0.0;  // over all values; inf if any is zero
  Completeness completeness = Completeness::incomplete;
  CMatrix u;  // m x min(m, s^2)
  CMatrix v;  // s^2 x s^2
};

ProtocolAnalysis analyze(const MeasurementMatrix& b, double rank_tol = 1e-10);
ProtocolAnalysis analyze(const Protocol& p, double rank_tol = 1e-10);

/// b_max / b_min after dropping the largest singular value.
double reduced_condition_number(const ProtocolAnalysis& a);

enum class AdequacyVerdict { adequate, inadequate, not_testable };
std::string adequacy_name(AdequacyVerdict v);

struct AdequacyResult {
  AdequacyVerdict verdict = AdequacyVerdict::not_testable;
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Tests that the counts have no component in the left null space of B.
AdequacyResult adequacy_test(const ProtocolAnalysis& a, std::span<const double> counts,
                             double significance = 0.01);

struct PseudoInverseResult {
  CMatrix rho_raw;  // Hermitian, possibly indefinite
  DensityMatrix rho_projected;
  CVector factors;  // f_j = Q_j / S_j, zero past the rank
  double purity_bound = 0.0;
};

PseudoInverseResult pseudo_inverse_reconstruct(const ProtocolAnalysis& a,
                                               std::span<const double> counts);

/// Clamps negative eigenvalues to zero and divides by the trace.
DensityMatrix project_to_state(const CMatrix& hermitian);

}  // namespace qtomo
