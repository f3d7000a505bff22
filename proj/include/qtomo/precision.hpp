#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"
#include "qtomo/protocols.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

/// 2rs x 2rs real information matrix over the realified purified state.
struct InformationMatrix {
  RMatrix h;
  RVector eigenvalues;   // descending
  RMatrix eigenvectors;  // columns match eigenvalues
  std::vector<int> degenerate_rows;  // rows with lambda_j below the floor

  /// Eigenvalues above rel_tol * largest.
  int positive_count(double rel_tol = 1e-8) const;
};

/// H = 2 sum_j t_j (Lambda_j c)(Lambda_j c)^T / lambda_j, exposures as given.
InformationMatrix information_matrix(const Protocol& p, const CMatrix& amplitudes);
InformationMatrix information_matrix(const Protocol& p, const PurifiedState& state);

/// Generalized chi-square: sum_j d_j xi_j^2 with independent standard normals.
class WeightedChiSquare {
 public:
  explicit WeightedChiSquare(RVector weights);

  const RVector& weights() const noexcept { return d_; }
  double mean() const;
  double variance() const;
  double cdf(double x) const;
  double quantile(double p) const;

 private:
  double imhof_upper_tail(double x) const;
  double monte_carlo_cdf(double x) const;

  RVector d_;
  std::vector<double> scaled_;        // distinct positive weights over the largest
  std::vector<double> multiplicity_;
  double scale_ = 0.0;                // largest weight
  bool use_monte_carlo_ = false;
  std::vector<double> mc_samples_;  // sorted; filled only for the fallback
};

struct LossModel {
  RVector d;  // descending, non-negative; length (2s - r) r - 1
  double n = 0.0;
  int dim = 0;
  int rank = 0;
  std::vector<int> degenerate_rows;

  double mean() const { return d.sum(); }
  WeightedChiSquare distribution() const { return WeightedChiSquare(d); }
};

/// Universal fidelity-loss model for rho measured with p at total count n.
/// Throws IncompleteProtocol when the information matrix does not have
/// (2s - r) r positive eigenvalues.
LossModel loss_model(const Protocol& p, const DensityMatrix& rho, double n);
LossModel loss_model(const Protocol& p, const PurifiedState& state, double n);

struct LossMoments {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};

LossMoments loss_moments(const LossModel& m);
/// n * sum d_j.
double loss_L(const LossModel& m);
double loss_cdf(const LossModel& m, double x);
double loss_quantile(const LossModel& m, double p);

/// -log10(1 - F) given a fidelity loss.
double z_value(double loss);

struct LossBounds {
  int nu = 0;
  double l_min_opt = 0.0;
};

LossBounds min_loss_bounds(int dim, int rank);
/// (10^l - 1) / 4.
double polyhedron_mixed_floor(int qubits);

/// Plot-ready field of evaluation points and scalar results.
struct ScanField {
  std::vector<std::string> coordinate_names;
  std::vector<std::string> value_names;
  RMatrix coordinates;  // points x coordinates
  RMatrix values;       // points x values
  std::vector<bool> singular;

  struct Summary {
    double min = 0.0;
    double max = 0.0;
    int argmin = -1;
    int argmax = -1;
  };
  /// Extremes over non-singular points; ties resolve to the lowest index.
  Summary summary(int value_column = 0) const;
  std::vector<int> singular_points() const;
  int size() const { return static_cast<int>(coordinates.rows()); }
};

/// Deterministic Fibonacci lattice on the unit sphere.
std::vector<Eigen::Vector3d> fibonacci_sphere(int points);

/// L for the pure state c under p (n drops out).
double pure_state_loss(const Protocol& p, const CVector& c);

/// L over a Fibonacci grid of pure qubit states. Columns: x, y, z / L.
ScanField bloch_scan(const Protocol& p, int grid_points = 2000, int threads = 0);

struct MaxLossOptions {
  int restarts = 100;
  std::uint64_t seed = 1;
  int grid_points = 2000;  // qubit protocols only: grid maxima become seeds
  int grid_seeds = 8;
  int max_evaluations = 4000;
  int threads = 0;
  /// States whose smallest row intensity is below margin x largest are
  /// skipped. 0 keeps every non-degenerate state; near degenerate rows the
  /// loss can depend on the direction of approach.
  double intensity_margin = 0.0;
};

struct MaxLossResult {
  double l_max = 0.0;
  CVector argmax;
  int restarts = 0;
  long evaluations = 0;
};

/// Multi-start Nelder-Mead ascent of L over pure states of dimension s.
MaxLossResult max_loss_search(const Protocol& p, const MaxLossOptions& opts = {});
/// Same search for the smallest L; `l_max` and `argmax` then hold the minimum.
MaxLossResult min_loss_search(const Protocol& p, const MaxLossOptions& opts = {});

/// Condition number and max-L of B9 at each delta in [lo, hi]; max-L comes
/// from max_loss_search seeded by a `grid_points` Bloch grid.
/// Columns: delta / K, max_L. Singular points carry infinities.
ScanField delta_scan(double delta_lo, double delta_hi, int points, int grid_points = 400,
                     int threads = 0, int refine_restarts = 4);

struct ThicknessGrid {
  double h1_lo = 1.100, h1_hi = 1.350;
  double h2_lo = 0.300, h2_hi = 0.550;
  int h1_points = 251, h2_points = 251;
  double birefringence = 0.0090;
  double wavelength = 702e-6;  // same unit as thickness
};

/// B144 condition number over plate thickness pairs. Columns: h1, h2 / K, log10K.
ScanField thickness_scan(const ThicknessGrid& grid, int threads = 0);

}  // namespace qtomo
