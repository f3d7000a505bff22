#include "qtomo/analysis.hpp"

#include <cmath>
#include <limits>

#include <Eigen/QR>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/special_functions/gamma.hpp>

#include "qtomo/error.hpp"

namespace qtomo {

MeasurementMatrix::MeasurementMatrix(const Protocol& p) : dim_(p.dim()) {
  const Eigen::Index s2 = static_cast<Eigen::Index>(dim_) * dim_;
  b_ = CMatrix::Zero(p.size(), s2);
  for (int j = 0; j < p.size(); ++j) {
    const auto& row = p.row(j);
    for (const auto& c : row.components) {
      // kron(X*, X)[b s + a] = X_b^* X_a = conj(Lambda_ab)
      const CMatrix k = kron(c.row.conjugate().transpose(), c.row.transpose());
      b_.row(j) += (row.exposure * c.weight) * k;
    }
  }
}

MeasurementMatrix measurement_matrix(const Protocol& p) {
  return MeasurementMatrix(p);
}

std::string completeness_name(Completeness c) {
  switch (c) {
    case Completeness::complete: return "complete";
    case Completeness::conditionally_complete_candidate: return "conditionally_complete_candidate";
    case Completeness::incomplete: return "incomplete";
  }
  return "incomplete";
}

namespace {

// Eigen 3.4's divide-and-conquer SVD loses accuracy on some well-conditioned
// inputs with large entries (exposures of 1e7 break it for the two-qubit
// tetrahedron). Jacobi is exact to rounding and cheap at these sizes; the
// divide-and-conquer path is kept for very wide problems only.
constexpr Eigen::Index kJacobiMaxCols = 256;

template <typename Matrix>
struct Svd {
  Eigen::Matrix<double, Eigen::Dynamic, 1> values;
  Matrix u, v;
};

template <typename Matrix>
Svd<Matrix> robust_svd(const Matrix& m, unsigned options) {
  Svd<Matrix> out;
  if (m.cols() <= kJacobiMaxCols) {
    Eigen::JacobiSVD<Matrix> svd(m, options);
    out.values = svd.singularValues();
    if (options & (Eigen::ComputeFullU | Eigen::ComputeThinU)) out.u = svd.matrixU();
    if (options & (Eigen::ComputeFullV | Eigen::ComputeThinV)) out.v = svd.matrixV();
  } else {
    Eigen::BDCSVD<Matrix> svd(m, options);
    out.values = svd.singularValues();
    if (options & (Eigen::ComputeFullU | Eigen::ComputeThinU)) out.u = svd.matrixU();
    if (options & (Eigen::ComputeFullV | Eigen::ComputeThinV)) out.v = svd.matrixV();
  }
  return out;
}

}  // namespace

ProtocolAnalysis analyze(const MeasurementMatrix& b, double rank_tol) {
  ProtocolAnalysis a;
  a.dim = b.dim();
  a.rows = b.rows();
  // Work at unit scale; singular values are scaled back at the end.
  const double scale = b.matrix().size() > 0 ? b.matrix().cwiseAbs().maxCoeff() : 0.0;
  const CMatrix m = scale > 0.0 ? CMatrix(b.matrix() / scale) : b.matrix();
  if (m.rows() > m.cols()) {
    // Tall B (tensor powers reach 10^5 rows): QR first, then SVD of the
    // small triangular factor, so U is only ever m x s^2.
    const Eigen::Index n = m.cols();
    const Eigen::HouseholderQR<CMatrix> qr(m);
    const CMatrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
    const auto svd = robust_svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    CMatrix padded = CMatrix::Zero(m.rows(), n);
    padded.topRows(n) = svd.u;
    a.singular_values = svd.values;
    a.u = qr.householderQ() * padded;
    a.v = svd.v;
  } else {
    const auto svd = robust_svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    a.singular_values = svd.values;
    a.u = svd.u;
    a.v = svd.v;
  }
  if (scale > 0.0) a.singular_values *= scale;
  const auto& sv = a.singular_values;
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  a.rank = top > 0.0 ? static_cast<int>((sv.array() > rank_tol * top).count()) : 0;
  a.condition_number =
      a.rank > 0 ? top / sv(a.rank - 1) : std::numeric_limits<double>::infinity();
  const double last = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  a.condition_number_full = last > 0.0 && static_cast<int>(sv.size()) == a.dim * a.dim
                                ? top / last
                                : std::numeric_limits<double>::infinity();
  const int s = a.dim;
  if (a.rank == s * s) {
    a.completeness = Completeness::complete;
  } else if (a.rank >= 2 * s - 1) {
    a.completeness = Completeness::conditionally_complete_candidate;
  } else {
    a.completeness = Completeness::incomplete;
  }
  return a;
}

ProtocolAnalysis analyze(const Protocol& p, double rank_tol) {
  return analyze(MeasurementMatrix(p), rank_tol);
}

double reduced_condition_number(const ProtocolAnalysis& a) {
  if (a.rank < 2) return std::numeric_limits<double>::quiet_NaN();
  return a.singular_values(1) / a.singular_values(a.rank - 1);
}

std::string adequacy_name(AdequacyVerdict v) {
  switch (v) {
    case AdequacyVerdict::adequate: return "adequate";
    case AdequacyVerdict::inadequate: return "inadequate";
    case AdequacyVerdict::not_testable: return "not_testable";
  }
  return "not_testable";
}

namespace {

// Real orthonormal basis of the range of B. B maps Hermitian matrices to real
// vectors, so the range is conjugation-closed and spanned by the real and
// imaginary parts of the leading left singular vectors.
RMatrix real_range_basis(const ProtocolAnalysis& a) {
  const Eigen::Index m = a.rows;
  const Eigen::Index q = a.rank;
  const CMatrix ur = a.u.leftCols(q);
  RMatrix stacked(m, 2 * q);
  stacked << ur.real(), ur.imag();
  return robust_svd(stacked, Eigen::ComputeThinU).u.leftCols(q);
}

}  // namespace

AdequacyResult adequacy_test(const ProtocolAnalysis& a, std::span<const double> counts,
                             double significance) {
  if (static_cast<int>(counts.size()) != a.rows)
    throw DimensionMismatch("adequacy_test: counts length differs from protocol rows");
  AdequacyResult out;
  out.dof = a.rows - a.rank;
  if (out.dof <= 0) {
    out.dof = 0;
    out.verdict = AdequacyVerdict::not_testable;
    return out;
  }
  const Eigen::Map<const RVector> k(counts.data(), static_cast<Eigen::Index>(counts.size()));
  // Weighted least-squares residual of k against the range of B with Poisson
  // variances max(k, 1). Equals the Mahalanobis norm of the left-null-space
  // projection without forming that (m - q)-dimensional basis.
  const RVector sw = k.cwiseMax(1.0).cwiseSqrt().cwiseInverse();
  const RMatrix design = sw.asDiagonal() * real_range_basis(a);
  const RVector target = sw.cwiseProduct(k);
  const RVector x = design.colPivHouseholderQr().solve(target);
  out.statistic = (target - design * x).squaredNorm();
  out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * std::max(0.0, out.statistic));
  out.verdict = out.p_value >= significance ? AdequacyVerdict::adequate
                                            : AdequacyVerdict::inadequate;
  return out;
}

DensityMatrix project_to_state(const CMatrix& hermitian) {
  const CMatrix h = hermitian_part(hermitian);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  RVector ev = es.eigenvalues().cwiseMax(0.0);
  const double total = ev.sum();
  if (!(total > 0.0)) throw InvalidArgument("projection has no positive part");
  ev /= total;
  return DensityMatrix(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint());
}

PseudoInverseResult pseudo_inverse_reconstruct(const ProtocolAnalysis& a,
                                               std::span<const double> counts) {
  if (static_cast<int>(counts.size()) != a.rows)
    throw DimensionMismatch("pseudo_inverse_reconstruct: counts length differs from rows");
  const Eigen::Map<const RVector> k(counts.data(), static_cast<Eigen::Index>(counts.size()));
  if (!(k.cwiseAbs().maxCoeff() > 0.0)) throw InvalidArgument("all counts are zero");

  const CVector q = a.u.adjoint() * k.cast<Complex>();
  const Eigen::Index s2 = static_cast<Eigen::Index>(a.dim) * a.dim;
  CVector f = CVector::Zero(s2);
  for (int j = 0; j < a.rank; ++j) f(j) = q(j) / a.singular_values(j);

  CMatrix raw = hermitian_part(unvec(a.v * f, a.dim));
  const double tr = raw.trace().real();
  if (!(tr > 0.0)) throw InvalidArgument("reconstruction has non-positive trace");
  raw /= tr;
  f /= tr;
  return {raw, project_to_state(raw), f, f.squaredNorm()};
}

}  // namespace qtomo
