#pragma once

// Small dense helpers shared by the flow integrators: the symplectic matrix,
// row-wise vectorization and the Kronecker product.

#include <cmath>

#include <Eigen/Dense>

#include "husimi/errors.hpp"

namespace husimi {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// J = [[0, Id], [-Id, 0]] of size 2d x 2d.
template <typename Scalar = double>
MatrixX<Scalar> symplectic_matrix(Eigen::Index d) {
  if (d < 1) throw ContractError("symplectic_matrix: dimension must be >= 1");
  MatrixX<Scalar> J = MatrixX<Scalar>::Zero(2 * d, 2 * d);
  J.topRightCorner(d, d).setIdentity();
  J.bottomLeftCorner(d, d) = -MatrixX<Scalar>::Identity(d, d);
  return J;
}

/// (a11, a12, ..., a1n, a21, ..., ann): rows concatenated.
template <typename Derived>
VectorX<typename Derived::Scalar> vec_rowwise(const Eigen::MatrixBase<Derived>& A) {
  using Scalar = typename Derived::Scalar;
  if (A.rows() != A.cols()) throw ContractError("vec_rowwise: matrix must be square");
  const Eigen::Index n = A.rows();
  VectorX<Scalar> v(n * n);
  for (Eigen::Index i = 0; i < n; ++i) v.segment(i * n, n) = A.row(i).transpose();
  return v;
}

/// Inverse of vec_rowwise.
template <typename Derived>
MatrixX<typename Derived::Scalar> unvec_rowwise(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  if (n * n != v.size()) throw ContractError("unvec_rowwise: length is not a perfect square");
  MatrixX<Scalar> A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) A.row(i) = v.segment(i * n, n).transpose();
  return A;
}

/// Block matrix (a_ij * B).
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& A,
                                        const Eigen::MatrixBase<DerivedB>& B) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

/// Frobenius inner product sum_jk A_jk B_jk = tr(A^T B).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frobenius_dot(const Eigen::MatrixBase<DerivedA>& A,
                                        const Eigen::MatrixBase<DerivedB>& B) {
  return A.cwiseProduct(B).sum();
}

}  // namespace husimi
