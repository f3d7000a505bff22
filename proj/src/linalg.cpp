#include "qtomo/linalg.hpp"

namespace qtomo {

CVector vec(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

CMatrix unvec(const CVector& v, Eigen::Index rows) {
  return Eigen::Map<const CMatrix>(v.data(), rows, v.size() / rows);
}

RVector realify(const CMatrix& m) {
  RVector out(2 * m.size());
  const auto flat = vec(m);
  out.head(m.size()) = flat.real();
  out.tail(m.size()) = flat.imag();
  return out;
}

CMatrix unrealify(const RVector& v, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index n = rows * cols;
  CVector flat(n);
  flat.real() = v.head(n);
  flat.imag() = v.tail(n);
  return unvec(flat, rows);
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

CMatrix hermitian_part(const CMatrix& m) {
  return 0.5 * (m + m.adjoint());
}

}  // namespace qtomo
