#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qtomo/linalg.hpp"

namespace qtomo {

/// Hermitian, positive semidefinite, unit-trace s x s matrix.
///
/// Construction validates Hermiticity and trace to 1e-12 (relative to the
/// matrix scale). Eigenvalues in (-1e-10, 0) are clamped to zero and the
/// matrix renormalized; anything more negative raises PositivityViolation.
class DensityMatrix {
 public:
  explicit DensityMatrix(const CMatrix& m);

  /// Builds from any Hermitian PSD matrix with positive trace by dividing
  /// out the trace first.
  static DensityMatrix normalized(const CMatrix& m);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const CMatrix& matrix() const noexcept { return m_; }
  /// Eigenvalues in descending order.
  const RVector& eigenvalues() const noexcept { return evals_; }
  /// Columns are eigenvectors matching eigenvalues().
  const CMatrix& eigenvectors() const noexcept { return evecs_; }

  /// Number of eigenvalues above rel_tol * largest.
  int numerical_rank(double rel_tol = 1e-10) const;

 private:
  CMatrix m_;
  RVector evals_;
  CMatrix evecs_;
};

/// s x r amplitude matrix L with rho = L L^dagger and trace(L L^dagger) = 1.
class PurifiedState {
 public:
  explicit PurifiedState(const CMatrix& amplitudes);

  int dim() const noexcept { return static_cast<int>(l_.rows()); }
  int rank() const noexcept { return static_cast<int>(l_.cols()); }
  const CMatrix& amplitudes() const noexcept { return l_; }

  DensityMatrix density() const;

  /// L -> L V for an r x r unitary V.
  PurifiedState gauge_transformed(const CMatrix& unitary) const;

  /// Cholesky-type gauge: zeros above the principal diagonal, diagonal real
  /// and non-negative. Columns whose diagonal entry vanishes get their first
  /// nonzero entry made real positive instead.
  PurifiedState canonical() const;

 private:
  CMatrix l_;
};

struct BlochVector {
  int dim = 0;
  RVector components;  // length dim^2 - 1
};

enum class WeightShape { sinc2 };

struct SpectralPlate {
  double delta_center = 0.0;  // optical thickness at the center wavelength, rad
  double angle = 0.0;         // orientation, rad
};

/// Broadband source seen through birefringent plates. Plate retardance
/// scales as delta_center * center / lambda (no material dispersion).
struct SpectralModel {
  double center_wavelength = 1.0;
  double bandwidth = 0.0;
  WeightShape shape = WeightShape::sinc2;
  int samples = 201;
  std::vector<SpectralPlate> plates;
};

enum class RankPolicy { automatic, forced };

struct RankSelection {
  RankPolicy policy = RankPolicy::automatic;
  int rank = 0;  // used when policy == forced
  double rel_tol = 1e-10;
};

// --- construction -----------------------------------------------------------

/// Makes the first amplitude with |c_i| > 1e-12 real positive.
CVector fix_global_phase(const CVector& c);

DensityMatrix density_from_pure(const CVector& c);

DensityMatrix white_noise(int dim);
CVector ghz_vector(int qubits);

enum class BellKind { phi_plus, phi_minus, psi_plus, psi_minus };
CVector bell_vector(BellKind kind);

/// f * E / 2^l + (1 - f) |GHZ><GHZ|.
DensityMatrix ghz_noise(int qubits, double noise_weight);

/// (1-p) |psi><psi| + p/2 (|HH><HH| + |VV><VV|), psi = c1|HH> + c2 e^{i phi}|VV>.
DensityMatrix ququart_family(double c1, double c2, double phase, double mixture);

struct NamedStateParams {
  double noise_weight = 0.0;  // ghz_noise
  std::string bell = "phi_plus";
  double c1 = 1.0, c2 = 0.0, phase = 0.0, mixture = 0.0;  // ququart_family
};

/// Dispatches on {ghz, bell, white_noise, ghz_noise, ququart_family}.
DensityMatrix named_state(const std::string& name, int qubits,
                          const NamedStateParams& params = {});

// --- functionals ------------------------------------------------------------

double fidelity(const DensityMatrix& reference, const DensityMatrix& rho);
/// |<c0|rho|c0>| for a pure reference.
double fidelity_pure(const CVector& reference, const DensityMatrix& rho);
double purity(const DensityMatrix& rho);
double entropy(const DensityMatrix& rho);
double concurrence_pure(const CVector& c);

PurifiedState purify(const DensityMatrix& rho, const RankSelection& sel = {});

// --- Bloch representation ---------------------------------------------------

/// Orthonormal traceless Hermitian basis: tr(s_j) = 0, tr(s_j s_k) = delta_jk.
/// For s = 2 these are the Pauli matrices over sqrt(2).
std::vector<CMatrix> traceless_basis(int dim);

BlochVector bloch_from_density(const DensityMatrix& rho);
DensityMatrix density_from_bloch(const BlochVector& v);

// --- spectral decoherence ---------------------------------------------------

/// Reduced density matrix after integrating the plates' action over the
/// discretized spectrum.
DensityMatrix decohered_qubit(const SpectralModel& model, const CVector& input);

/// Discretized (wavelength, weight) samples; weights sum to one.
std::vector<std::pair<double, double>> spectral_samples(const SpectralModel& model);

}  // namespace qtomo
