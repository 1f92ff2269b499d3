#pragma once

#include <complex>

#include <Eigen/Dense>

namespace abdris {

using Complex = std::complex<double>;

/// Linear map from the half-vectorization of a symmetric G x G matrix to its
/// column-major vectorization: D * vech(S) == vec(S).
class DuplicationMatrix {
 public:
  explicit DuplicationMatrix(int group_size);

  int group_size() const { return group_size_; }
  int half_size() const { return static_cast<int>(entries_.cols()); }
  const Eigen::MatrixXd& entries() const { return entries_; }

 private:
  int group_size_;
  Eigen::MatrixXd entries_;
};

DuplicationMatrix build_duplication(int group_size);

/// 0-based position of entry (i, j), i >= j, inside vech of an n x n matrix.
inline int vech_index(int i, int j, int n) { return j * n + i - j * (j + 1) / 2; }

inline int vech_size(int n) { return n * (n + 1) / 2; }

/// Column-stacked lower triangle including the diagonal. Throws on non-square input.
Eigen::VectorXcd vech(const Eigen::MatrixXcd& s);

/// Inverse of vech on symmetric matrices (fills the upper triangle by symmetry).
Eigen::MatrixXcd unvech_symmetric(const Eigen::VectorXcd& v);

Eigen::VectorXcd vec(const Eigen::MatrixXcd& a);
Eigen::MatrixXcd unvec(const Eigen::VectorXcd& v, Eigen::Index rows, Eigen::Index cols);

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

/// Factorization of a Hermitian positive semidefinite matrix that falls back to
/// a small ridge (1e-12 * trace / dim) when the matrix is numerically singular.
class HermitianSolver {
 public:
  explicit HermitianSolver(const Eigen::MatrixXcd& a);

  bool ridge_applied() const { return ridge_applied_; }
  double ridge() const { return ridge_; }

  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const;

 private:
  Eigen::LDLT<Eigen::MatrixXcd> ldlt_;
  bool ridge_applied_ = false;
  double ridge_ = 0.0;
};

/// (Q + lambda P)^{-1} e for Hermitian PSD Q, P and lambda >= 0.
/// Throws SingularSystem if the system stays singular after the ridge.
Eigen::VectorXcd solve_regularized(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& p,
                                   const Eigen::VectorXcd& e, double lambda);

/// Hermitian part (A + A^H) / 2; used to scrub round-off before factorizing.
inline Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& a) {
  return 0.5 * (a + a.adjoint());
}

}  // namespace abdris
