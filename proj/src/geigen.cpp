#include "vbmi/geigen.hpp"

#include <stdexcept>
#include <string>

namespace vbmi::decode {

GenEigenResult generalized_symmetric_eigen(const Eigen::MatrixXd& s, const Eigen::MatrixXd& q) {
  if (s.rows() != s.cols() || q.rows() != q.cols() || s.rows() != q.rows()) {
    throw std::invalid_argument("generalized_symmetric_eigen: need square matrices of equal size");
  }
  if (s.rows() == 0) {
    throw std::invalid_argument("generalized_symmetric_eigen: empty problem");
  }
  // symmetrize to shed accumulation asymmetry from the scatter sums
  const Eigen::MatrixXd ss = 0.5 * (s + s.transpose());
  const Eigen::MatrixXd qs = 0.5 * (q + q.transpose());

  const Eigen::LLT<Eigen::MatrixXd> llt(qs);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("generalized_symmetric_eigen: right-hand matrix is not positive "
                             "definite");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  // A = L^-1 S L^-T via two triangular solves
  const Eigen::MatrixXd half = l.triangularView<Eigen::Lower>().solve(ss);
  const Eigen::MatrixXd a =
      l.triangularView<Eigen::Lower>().solve(half.transpose()).transpose();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("generalized_symmetric_eigen: symmetric decomposition failed");
  }

  const Eigen::Index n = ss.rows();
  GenEigenResult out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  // ascending from the solver; report descending
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = eig.eigenvalues()(n - 1 - i);
    out.vectors.col(i) =
        l.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors().col(n - 1 - i));
  }
  return out;
}

}  // namespace vbmi::decode
