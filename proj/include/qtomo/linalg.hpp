#pragma once

#include <complex>

#include <Eigen/Core>

namespace qtomo {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Column-stacked vec(): entry (a, b) lands at a + rows * b.
CVector vec(const CMatrix& m);
CMatrix unvec(const CVector& v, Eigen::Index rows);

/// [Re vec(L); Im vec(L)], the real embedding used by the information matrix.
RVector realify(const CMatrix& m);
CMatrix unrealify(const RVector& v, Eigen::Index rows, Eigen::Index cols);

/// Kronecker product of two complex matrices (row vectors included).
CMatrix kron(const CMatrix& a, const CMatrix& b);

CMatrix hermitian_part(const CMatrix& m);

}  // namespace qtomo
