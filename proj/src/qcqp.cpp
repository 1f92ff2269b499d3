#include "abdris/qcqp.hpp"

#include <cmath>
#include <string>

#include "abdris/errors.hpp"
#include "abdris/matrixtools.hpp"

namespace abdris {

namespace {

constexpr double kBracketCap = 1152921504606846976.0;  // 2^60
constexpr double kRelTol = 1e-8;
constexpr int kMaxBisection = 500;

void check_budget(double budget) {
  if (!(budget >= 0.0)) {
    throw InfeasibleBudget("QCQP budget is negative (" + std::to_string(budget) + ")");
  }
}

}  // namespace

Bisection bisect_multiplier(const std::function<double(double)>& power, double budget) {
  Bisection out;
  if (power(0.0) <= budget) return out;

  double lo = 0.0;
  double hi = 1.0;
  double p_hi = power(hi);
  while (p_hi > budget) {
    lo = hi;
    hi *= 2.0;
    ++out.steps;
    if (hi > kBracketCap) {
      throw InfeasibleBudget("no multiplier up to 2^60 meets the budget");
    }
    p_hi = power(hi);
  }
  while (out.steps < kMaxBisection && budget - p_hi > kRelTol * budget) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double p_mid = power(mid);
    ++out.steps;
    if (p_mid > budget) {
      lo = mid;
    } else {
      hi = mid;
      p_hi = p_mid;
    }
  }
  out.lambda = hi;
  return out;
}

void BlockConstraint::add_kron_block(const Eigen::MatrixXcd& p_small, int rows) {
  if (p_small.rows() != p_small.cols() || rows < 1) {
    throw ConfigError("Kronecker constraint block needs a square factor and rows >= 1");
  }
  Block b;
  b.kron = true;
  b.rows = rows;
  b.offset = size_;
  b.dim = rows * p_small.rows();
  b.p = hermitian_part(p_small);
  Eigen::LLT<Eigen::MatrixXcd> llt(b.p);
  if (llt.info() != Eigen::Success) throw SingularSystem("constraint block is not positive definite");
  b.p_inv = llt.solve(Eigen::MatrixXcd::Identity(b.p.rows(), b.p.cols()));
  size_ += b.dim;
  blocks_.push_back(std::move(b));
}

void BlockConstraint::add_dense_block(const Eigen::MatrixXcd& p_dense) {
  if (p_dense.rows() != p_dense.cols()) throw ConfigError("dense constraint block must be square");
  Block b;
  b.offset = size_;
  b.dim = p_dense.rows();
  b.p = hermitian_part(p_dense);
  b.llt.compute(b.p);
  if (b.llt.info() != Eigen::Success) throw SingularSystem("constraint block is not positive definite");
  size_ += b.dim;
  blocks_.push_back(std::move(b));
}

Eigen::MatrixXcd BlockConstraint::solve(const Eigen::MatrixXcd& rhs) const {
  if (rhs.rows() != size_) throw ConfigError("constraint solve dimension mismatch");
  Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
  for (const Block& b : blocks_) {
    if (!b.kron) {
      out.middleRows(b.offset, b.dim) = b.llt.solve(rhs.middleRows(b.offset, b.dim));
      continue;
    }
    const Eigen::Index g = b.p.rows();
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
      // (P^T kron I) vec(X) = vec(X P), so the inverse maps X to X P^{-1}.
      Eigen::Map<const Eigen::MatrixXcd> x(rhs.col(c).data() + b.offset, b.rows, g);
      Eigen::Map<Eigen::MatrixXcd> y(out.col(c).data() + b.offset, b.rows, g);
      y.noalias() = x * b.p_inv;
    }
  }
  return out;
}

Eigen::MatrixXcd BlockConstraint::apply(const Eigen::MatrixXcd& rhs) const {
  if (rhs.rows() != size_) throw ConfigError("constraint apply dimension mismatch");
  Eigen::MatrixXcd out(rhs.rows(), rhs.cols());
  for (const Block& b : blocks_) {
    if (!b.kron) {
      out.middleRows(b.offset, b.dim).noalias() = b.p * rhs.middleRows(b.offset, b.dim);
      continue;
    }
    const Eigen::Index g = b.p.rows();
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
      Eigen::Map<const Eigen::MatrixXcd> x(rhs.col(c).data() + b.offset, b.rows, g);
      Eigen::Map<Eigen::MatrixXcd> y(out.col(c).data() + b.offset, b.rows, g);
      y.noalias() = x * b.p;
    }
  }
  return out;
}

Eigen::MatrixXcd BlockConstraint::dense() const {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(size_, size_);
  for (const Block& b : blocks_) {
    if (b.kron) {
      out.block(b.offset, b.offset, b.dim, b.dim) =
          kron(b.p.transpose(), Eigen::MatrixXcd::Identity(b.rows, b.rows));
    } else {
      out.block(b.offset, b.offset, b.dim, b.dim) = b.p;
    }
  }
  return out;
}

QcqpSolution solve_factored(const Eigen::MatrixXcd& v, const Eigen::VectorXcd& a,
                            const BlockConstraint& p, double budget) {
  check_budget(budget);
  if (v.rows() != p.size() || v.cols() != a.size()) {
    throw ConfigError("factored QCQP dimension mismatch");
  }
  QcqpSolution sol;
  sol.x = Eigen::VectorXcd::Zero(v.rows());
  if (budget == 0.0 || v.cols() == 0) return sol;

  const Eigen::MatrixXcd y = p.solve(v);
  const Eigen::MatrixXcd z_mat = hermitian_part(v.adjoint() * y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(z_mat);
  if (eig.info() != Eigen::Success) throw SingularSystem("eigendecomposition failed");

  const Eigen::VectorXd& z_all = eig.eigenvalues();
  const double z_max = z_all.size() ? z_all.maxCoeff() : 0.0;
  if (!(z_max > 0.0)) return sol;

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < z_all.size(); ++i) {
    if (z_all(i) > 1e-13 * z_max) keep.push_back(i);
  }
  const Eigen::Index r = static_cast<Eigen::Index>(keep.size());
  Eigen::VectorXd z(r);
  Eigen::MatrixXcd w(v.cols(), r);
  for (Eigen::Index i = 0; i < r; ++i) {
    z(i) = z_all(keep[i]);
    w.col(i) = eig.eigenvectors().col(keep[i]);
  }
  const Eigen::VectorXcd alpha = w.adjoint() * a;
  const Eigen::MatrixXcd yw = y * w;

  // Bisection runs on the iterate's own power x^H P x.
  auto point = [&](double lambda) {
    Eigen::VectorXcd scaled(r);
    for (Eigen::Index i = 0; i < r; ++i) scaled(i) = alpha(i) / (z(i) + lambda);
    return Eigen::VectorXcd(yw * scaled);
  };
  auto power = [&](double lambda) {
    const Eigen::VectorXcd x = point(lambda);
    const Eigen::VectorXcd px = p.apply(x);
    return x.dot(px).real();
  };
  const Bisection bis = bisect_multiplier(power, budget);
  sol.x = point(bis.lambda);
  const Eigen::VectorXcd vx = v.adjoint() * sol.x;
  sol.objective = 2.0 * a.dot(vx).real() - vx.squaredNorm();
  sol.lambda = bis.lambda;
  sol.power = power(bis.lambda);
  sol.bisection_steps = bis.steps;
  sol.budget_active = bis.lambda > 0.0;
  return sol;
}

double qcqp_objective(const Eigen::MatrixXcd& q, const Eigen::VectorXcd& e,
                      const Eigen::VectorXcd& x) {
  return 2.0 * e.dot(x).real() - x.dot(q * x).real();
}

QcqpSolution solve_dense(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& p,
                         const Eigen::VectorXcd& e, double budget) {
  check_budget(budget);
  QcqpSolution sol;
  sol.x = Eigen::VectorXcd::Zero(e.size());
  if (budget == 0.0 || e.squaredNorm() == 0.0) return sol;

  auto point = [&](double lambda) { return solve_regularized(q, p, e, lambda); };
  auto power = [&](double lambda) {
    const Eigen::VectorXcd x = point(lambda);
    return x.dot(p * x).real();
  };
  const Bisection bis = bisect_multiplier(power, budget);
  sol.x = point(bis.lambda);
  sol.lambda = bis.lambda;
  sol.power = sol.x.dot(p * sol.x).real();
  sol.objective = qcqp_objective(q, e, sol.x);
  sol.bisection_steps = bis.steps;
  sol.budget_active = bis.lambda > 0.0;
  return sol;
}

}  // namespace abdris
