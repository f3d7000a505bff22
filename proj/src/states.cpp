#include "qtomo/states.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "qtomo/error.hpp"
#include "qtomo/protocols.hpp"

namespace qtomo {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kClampTol = 1e-10;

struct Eigh {
  RVector values;  // descending
  CMatrix vectors;
};

Eigh eigh_descending(const CMatrix& h) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const auto n = h.rows();
  Eigh out{RVector(n), CMatrix(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = es.eigenvalues()(n - 1 - i);
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

}  // namespace

DensityMatrix::DensityMatrix(const CMatrix& m) {
  if (m.rows() == 0 || m.rows() != m.cols())
    throw InvalidArgument("density matrix must be square and non-empty");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol * scale)
    throw InvalidArgument("density matrix is not Hermitian");
  if (std::abs(m.trace() - Complex(1.0)) > kTraceTol * scale)
    throw InvalidArgument("density matrix trace differs from 1");

  auto eig = eigh_descending(hermitian_part(m));
  const double lowest = eig.values(eig.values.size() - 1);
  if (lowest < -kClampTol)
    throw PositivityViolation("density matrix has a negative eigenvalue", lowest);
  if (lowest < 0.0) {
    eig.values = eig.values.cwiseMax(0.0);
    eig.values /= eig.values.sum();
    m_ = eig.vectors * eig.values.asDiagonal() * eig.vectors.adjoint();
  } else {
    m_ = hermitian_part(m);
  }
  evals_ = std::move(eig.values);
  evecs_ = std::move(eig.vectors);
}

DensityMatrix DensityMatrix::normalized(const CMatrix& m) {
  const CMatrix h = hermitian_part(m);
  const double tr = h.trace().real();
  if (!(tr > 0.0)) throw InvalidArgument("matrix trace must be positive");
  return DensityMatrix(h / tr);
}

int DensityMatrix::numerical_rank(double rel_tol) const {
  const double cut = rel_tol * evals_(0);
  return static_cast<int>((evals_.array() > cut).count());
}

PurifiedState::PurifiedState(const CMatrix& amplitudes) : l_(amplitudes) {
  if (l_.rows() == 0 || l_.cols() == 0 || l_.cols() > l_.rows())
    throw InvalidArgument("purified state must be s x r with 1 <= r <= s");
  if (std::abs(l_.squaredNorm() - 1.0) > kTraceTol)
    throw InvalidArgument("purified state must have trace(L L^dagger) = 1");
}

DensityMatrix PurifiedState::density() const {
  return DensityMatrix(l_ * l_.adjoint());
}

PurifiedState PurifiedState::gauge_transformed(const CMatrix& unitary) const {
  if (unitary.rows() != rank() || unitary.cols() != rank())
    throw DimensionMismatch("gauge matrix must be r x r");
  CMatrix l = l_ * unitary;
  l /= l.norm();
  return PurifiedState(l);
}

PurifiedState PurifiedState::canonical() const {
  const auto s = l_.rows();
  const auto r = l_.cols();
  Eigen::HouseholderQR<CMatrix> qr(l_.adjoint());
  CMatrix upper = qr.matrixQR().triangularView<Eigen::Upper>();
  CMatrix lower = upper.adjoint();  // s x r, zeros above the diagonal
  const double tol = 1e-12 * std::max(1.0, lower.cwiseAbs().maxCoeff());
  for (Eigen::Index k = 0; k < r; ++k) {
    for (Eigen::Index i = k; i < s; ++i) {
      const double mag = std::abs(lower(i, k));
      if (mag > tol) {
        lower.col(k) *= std::conj(lower(i, k)) / mag;
        lower(i, k) = mag;
        break;
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) lower(i, k) = 0.0;
  }
  lower /= lower.norm();
  return PurifiedState(lower);
}

CVector fix_global_phase(const CVector& c) {
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    const double mag = std::abs(c(i));
    if (mag > 1e-12) return c * (std::conj(c(i)) / mag);
  }
  return c;
}

DensityMatrix density_from_pure(const CVector& c) {
  if (c.size() == 0) throw InvalidArgument("state vector is empty");
  if (std::abs(c.norm() - 1.0) > 1e-10) throw InvalidArgument("state vector must have unit norm");
  const CVector u = c / c.norm();
  return DensityMatrix(u * u.adjoint());
}

DensityMatrix white_noise(int dim) {
  if (dim < 1) throw InvalidArgument("dimension must be positive");
  return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

namespace {
int qubit_dim(int qubits) {
  if (qubits < 1 || qubits > 12) throw InvalidArgument("qubit count must be in [1, 12]");
  return 1 << qubits;
}
}  // namespace

CVector ghz_vector(int qubits) {
  const int s = qubit_dim(qubits);
  CVector c = CVector::Zero(s);
  c(0) = c(s - 1) = 1.0 / std::numbers::sqrt2;
  return c;
}

CVector bell_vector(BellKind kind) {
  CVector c = CVector::Zero(4);
  const double a = 1.0 / std::numbers::sqrt2;
  switch (kind) {
    case BellKind::phi_plus: c(0) = a; c(3) = a; break;
    case BellKind::phi_minus: c(0) = a; c(3) = -a; break;
    case BellKind::psi_plus: c(1) = a; c(2) = a; break;
    case BellKind::psi_minus: c(1) = a; c(2) = -a; break;
  }
  return c;
}

DensityMatrix ghz_noise(int qubits, double noise_weight) {
  if (noise_weight < 0.0 || noise_weight > 1.0)
    throw InvalidArgument("noise weight must lie in [0, 1]");
  const int s = qubit_dim(qubits);
  const CVector g = ghz_vector(qubits);
  const CMatrix m = noise_weight * CMatrix::Identity(s, s) / static_cast<double>(s) +
                    (1.0 - noise_weight) * g * g.adjoint();
  return DensityMatrix::normalized(m);
}

DensityMatrix ququart_family(double c1, double c2, double phase, double mixture) {
  if (std::abs(c1 * c1 + c2 * c2 - 1.0) > 1e-10)
    throw InvalidArgument("ququart amplitudes must satisfy c1^2 + c2^2 = 1");
  if (mixture < 0.0 || mixture > 1.0) throw InvalidArgument("mixture must lie in [0, 1]");
  CVector psi = CVector::Zero(4);
  psi(0) = c1;
  psi(3) = c2 * std::polar(1.0, phase);
  CMatrix m = (1.0 - mixture) * psi * psi.adjoint();
  m(0, 0) += mixture / 2.0;
  m(3, 3) += mixture / 2.0;
  return DensityMatrix::normalized(m);
}

DensityMatrix named_state(const std::string& name, int qubits, const NamedStateParams& params) {
  if (name == "ghz") return density_from_pure(ghz_vector(qubits));
  if (name == "white_noise") return white_noise(qubit_dim(qubits));
  if (name == "ghz_noise") return ghz_noise(qubits, params.noise_weight);
  if (name == "bell") {
    static const std::pair<const char*, BellKind> kinds[] = {
        {"phi_plus", BellKind::phi_plus}, {"phi_minus", BellKind::phi_minus},
        {"psi_plus", BellKind::psi_plus}, {"psi_minus", BellKind::psi_minus}};
    for (const auto& [label, kind] : kinds)
      if (params.bell == label) return density_from_pure(bell_vector(kind));
    throw InvalidArgument("unknown Bell state '" + params.bell + "'");
  }
  if (name == "ququart_family")
    return ququart_family(params.c1, params.c2, params.phase, params.mixture);
  throw InvalidArgument("unknown named state '" + name + "'");
}

namespace {

/// U sqrt(D) over all non-negative eigenvalues.
// Eigenvalues at rounding level are set to zero: their square roots (~1e-8)
// would otherwise leak into the Uhlmann trace norm.
CMatrix full_purification(const DensityMatrix& rho) {
  const RVector& ev = rho.eigenvalues();
  const double floor = ev.maxCoeff() * rho.dim() * std::numeric_limits<double>::epsilon();
  const RVector root = ev.unaryExpr([floor](double x) { return x > floor ? std::sqrt(x) : 0.0; });
  return rho.eigenvectors() * root.asDiagonal();
}

}  // namespace

double fidelity(const DensityMatrix& reference, const DensityMatrix& rho) {
  if (reference.dim() != rho.dim()) throw DimensionMismatch("fidelity: dimension mismatch");
  // Uhlmann: sqrt(F) is the trace norm of L0^dagger L for any purifications.
  const CMatrix overlap = full_purification(reference).adjoint() * full_purification(rho);
  Eigen::JacobiSVD<CMatrix> svd(overlap);
  const double root = svd.singularValues().sum();
  return std::clamp(root * root, 0.0, 1.0);
}

double fidelity_pure(const CVector& reference, const DensityMatrix& rho) {
  if (reference.size() != rho.dim()) throw DimensionMismatch("fidelity: dimension mismatch");
  const Complex v = reference.dot(rho.matrix() * reference);
  return std::clamp(v.real() / reference.squaredNorm(), 0.0, 1.0);
}

double purity(const DensityMatrix& rho) {
  return rho.eigenvalues().squaredNorm();
}

double entropy(const DensityMatrix& rho) {
  double h = 0.0;
  for (double lam : rho.eigenvalues())
    if (lam > 0.0) h -= lam * std::log2(lam);
  return std::max(0.0, h);
}

double concurrence_pure(const CVector& c) {
  if (c.size() != 4) throw DimensionMismatch("concurrence needs four amplitudes");
  if (std::abs(c.norm() - 1.0) > 1e-10) throw InvalidArgument("state vector must have unit norm");
  return std::min(1.0, 2.0 * std::abs(c(0) * c(3) - c(1) * c(2)));
}

PurifiedState purify(const DensityMatrix& rho, const RankSelection& sel) {
  const int s = rho.dim();
  const int numerical = rho.numerical_rank(sel.rel_tol);
  int r = numerical;
  if (sel.policy == RankPolicy::forced) {
    if (sel.rank < numerical)
      throw InvalidArgument("forced rank is below the numerical rank of the state");
    if (sel.rank > s) throw InvalidArgument("forced rank exceeds the dimension");
    r = sel.rank;
  }
  CMatrix l = rho.eigenvectors().leftCols(r) *
              rho.eigenvalues().head(r).cwiseMax(0.0).cwiseSqrt().asDiagonal();
  l /= l.norm();
  return PurifiedState(l).canonical();
}

std::vector<CMatrix> traceless_basis(int dim) {
  if (dim < 2) throw InvalidArgument("traceless basis needs dimension >= 2");
  std::vector<CMatrix> basis;
  basis.reserve(static_cast<std::size_t>(dim * dim - 1));
  const double a = 1.0 / std::numbers::sqrt2;
  for (int j = 0; j < dim; ++j) {
    for (int k = j + 1; k < dim; ++k) {
      CMatrix sym = CMatrix::Zero(dim, dim);
      sym(j, k) = sym(k, j) = a;
      basis.push_back(sym);
      CMatrix anti = CMatrix::Zero(dim, dim);
      anti(j, k) = Complex(0.0, -a);
      anti(k, j) = Complex(0.0, a);
      basis.push_back(anti);
    }
  }
  for (int l = 1; l < dim; ++l) {
    CMatrix diag = CMatrix::Zero(dim, dim);
    const double norm = 1.0 / std::sqrt(static_cast<double>(l * (l + 1)));
    for (int k = 0; k < l; ++k) diag(k, k) = norm;
    diag(l, l) = -l * norm;
    basis.push_back(diag);
  }
  return basis;
}

BlochVector bloch_from_density(const DensityMatrix& rho) {
  const auto basis = traceless_basis(rho.dim());
  BlochVector v{rho.dim(), RVector(static_cast<Eigen::Index>(basis.size()))};
  for (std::size_t j = 0; j < basis.size(); ++j)
    v.components(static_cast<Eigen::Index>(j)) = (rho.matrix() * basis[j]).trace().real();
  return v;
}

DensityMatrix density_from_bloch(const BlochVector& v) {
  const int s = v.dim;
  if (s < 2 || v.components.size() != s * s - 1)
    throw DimensionMismatch("Bloch vector must have s^2 - 1 components");
  const auto basis = traceless_basis(s);
  CMatrix m = CMatrix::Identity(s, s) / static_cast<double>(s);
  for (std::size_t j = 0; j < basis.size(); ++j)
    m += v.components(static_cast<Eigen::Index>(j)) * basis[j];
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
  const double lowest = es.eigenvalues()(0);
  if (lowest < -kClampTol)
    throw PositivityViolation("Bloch vector lies outside the state space", lowest);
  return DensityMatrix(m);
}

std::vector<std::pair<double, double>> spectral_samples(const SpectralModel& model) {
  if (model.center_wavelength <= 0.0) throw InvalidArgument("center wavelength must be positive");
  if (model.bandwidth < 0.0) throw InvalidArgument("bandwidth must be non-negative");
  if (model.samples < 2) throw InvalidArgument("spectral discretization needs >= 2 samples");
  std::vector<std::pair<double, double>> out;
  if (model.bandwidth == 0.0) {
    out.emplace_back(model.center_wavelength, 1.0);
    return out;
  }
  out.reserve(static_cast<std::size_t>(model.samples));
  double total = 0.0;
  for (int k = 0; k < model.samples; ++k) {
    const double x = -3.0 + 6.0 * k / (model.samples - 1);  // in bandwidths
    const double arg = std::numbers::pi * x;
    const double w = arg == 0.0 ? 1.0 : std::pow(std::sin(arg) / arg, 2);
    out.emplace_back(model.center_wavelength + x * model.bandwidth, w);
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("spectral weights sum to zero");
  for (auto& [lambda, w] : out) w /= total;
  return out;
}

DensityMatrix decohered_qubit(const SpectralModel& model, const CVector& input) {
  if (input.size() != 2) throw DimensionMismatch("decohered_qubit expects a qubit state");
  if (std::abs(input.norm() - 1.0) > 1e-10) throw InvalidArgument("input state must have unit norm");
  CMatrix rho = CMatrix::Zero(2, 2);
  for (const auto& [lambda, weight] : spectral_samples(model)) {
    CMatrix g = CMatrix::Identity(2, 2);
    for (const auto& plate : model.plates)
      g = waveplate_unitary(plate.delta_center * model.center_wavelength / lambda, plate.angle) * g;
    const CVector phi = g * input;
    rho += weight * phi * phi.adjoint();
  }
  return DensityMatrix::normalized(rho);
}

}  // namespace qtomo
