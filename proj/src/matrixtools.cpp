#include "abdris/matrixtools.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abdris/errors.hpp"

namespace abdris {

DuplicationMatrix::DuplicationMatrix(int group_size) : group_size_(group_size) {
  if (group_size < 1) {
    throw ConfigError("duplication matrix needs group size >= 1, got " +
                      std::to_string(group_size));
  }
  const int g = group_size;
  entries_ = Eigen::MatrixXd::Zero(g * g, vech_size(g));
  // Column u_ij carries vec(T_ij): ones at (i, j) and (j, i).
  for (int j = 0; j < g; ++j) {
    for (int i = j; i < g; ++i) {
      const int col = vech_index(i, j, g);
      entries_(j * g + i, col) = 1.0;
      entries_(i * g + j, col) = 1.0;
    }
  }
}

DuplicationMatrix build_duplication(int group_size) { return DuplicationMatrix(group_size); }

Eigen::VectorXcd vech(const Eigen::MatrixXcd& s) {
  if (s.rows() != s.cols()) {
    throw ConfigError("vech requires a square matrix");
  }
  const int n = static_cast<int>(s.rows());
  Eigen::VectorXcd out(vech_size(n));
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      out(vech_index(i, j, n)) = s(i, j);
    }
  }
  return out;
}

Eigen::MatrixXcd unvech_symmetric(const Eigen::VectorXcd& v) {
  const double root = (std::sqrt(8.0 * static_cast<double>(v.size()) + 1.0) - 1.0) / 2.0;
  const int n = static_cast<int>(std::lround(root));
  if (vech_size(n) != v.size()) {
    throw ConfigError("vector length is not triangular: " + std::to_string(v.size()));
  }
  Eigen::MatrixXcd s(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) {
      s(i, j) = v(vech_index(i, j, n));
      s(j, i) = s(i, j);
    }
  }
  return s;
}

Eigen::VectorXcd vec(const Eigen::MatrixXcd& a) {
  return Eigen::Map<const Eigen::VectorXcd>(a.data(), a.size());
}

Eigen::MatrixXcd unvec(const Eigen::VectorXcd& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != v.size()) {
    throw ConfigError("unvec dimension mismatch");
  }
  return Eigen::Map<const Eigen::MatrixXcd>(v.data(), rows, cols);
}

Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

namespace {

bool well_conditioned(const Eigen::LDLT<Eigen::MatrixXcd>& ldlt) {
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD().real();
  if (d.size() == 0) return true;
  const double dmax = d.cwiseAbs().maxCoeff();
  return dmax > 0.0 && d.minCoeff() > 1e-14 * dmax;
}

}  // namespace

HermitianSolver::HermitianSolver(const Eigen::MatrixXcd& a) {
  if (a.rows() != a.cols()) {
    throw ConfigError("HermitianSolver requires a square matrix");
  }
  const Eigen::MatrixXcd h = hermitian_part(a);
  ldlt_.compute(h);
  if (well_conditioned(ldlt_)) return;

  const double n = static_cast<double>(h.rows());
  ridge_ = 1e-12 * h.trace().real() / n;
  ridge_applied_ = true;
  if (!(ridge_ > 0.0)) {
    throw SingularSystem("matrix has non-positive trace; cannot regularize");
  }
  ldlt_.compute(h + ridge_ * Eigen::MatrixXcd::Identity(h.rows(), h.cols()));
  if (ldlt_.info() != Eigen::Success || ldlt_.vectorD().real().minCoeff() <= 0.0) {
    throw SingularSystem("matrix is singular even after ridge regularization");
  }
}

Eigen::MatrixXcd HermitianSolver::solve(const Eigen::MatrixXcd& rhs) const {
  return ldlt_.solve(rhs);
}

Eigen::VectorXcd solve_regularized(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& p,
                                   const Eigen::VectorXcd& e, double lambda) {
  if (lambda < 0.0) {
    throw ConfigError("multiplier must be nonnegative");
  }
  if (q.rows() != p.rows() || q.cols() != p.cols() || q.rows() != e.size()) {
    throw ConfigError("solve_regularized dimension mismatch");
  }
  HermitianSolver solver(q + lambda * p);
  return solver.solve(e);
}

}  // namespace abdris
