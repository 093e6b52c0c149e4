#pragma once

#include <Eigen/Dense>

namespace vbmi::decode {

// Solution of S v = lambda Q v for symmetric S and symmetric positive-definite
// Q. Eigenvalues descend; vectors[.col(i)] pairs with values[i] and the set is
// Q-orthonormal (v_i' Q v_j == delta_ij).
struct GenEigenResult {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

// Cholesky-whitened solve: Q = L L', then an ordinary symmetric decomposition
// of L^-1 S L^-T, mapped back through L^-T. Throws std::invalid_argument on
// shape mismatch and std::runtime_error when Q is not positive definite.
GenEigenResult generalized_symmetric_eigen(const Eigen::MatrixXd& s, const Eigen::MatrixXd& q);

}  // namespace vbmi::decode
