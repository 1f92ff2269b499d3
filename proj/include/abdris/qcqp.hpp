#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace abdris {

/// maximize 2 Re{e^H x} - x^H Q x  subject to  x^H P x <= budget.
/// `e` is stored as the column that appears in the stationarity condition
/// (Q + lambda P) x = e.
struct QcqpSolution {
  Eigen::VectorXcd x;
  double lambda = 0.0;
  double power = 0.0;
  double objective = 0.0;
  int bisection_steps = 0;
  bool budget_active = false;
};

struct Bisection {
  double lambda = 0.0;
  int steps = 0;
};

/// Smallest multiplier whose power meets the budget. `power` must be
/// non-increasing in lambda. Returns lambda = 0 when power(0) <= budget;
/// otherwise the result satisfies budget - power(lambda) in [0, 1e-8 * budget]
/// unless floating-point resolution stops the search first.
Bisection bisect_multiplier(const std::function<double(double)>& power, double budget);

/// Block-diagonal PD constraint form. Block g is either
/// kron(P_g^T, I_rows) acting on a column-major rows x G matrix, or dense.
class BlockConstraint {
 public:
  void add_kron_block(const Eigen::MatrixXcd& p_small, int rows);
  void add_dense_block(const Eigen::MatrixXcd& p_dense);

  Eigen::Index size() const { return size_; }
  /// P^{-1} * rhs.
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const;
  /// P * rhs.
  Eigen::MatrixXcd apply(const Eigen::MatrixXcd& rhs) const;
  Eigen::MatrixXcd dense() const;

 private:
  struct Block {
    bool kron = false;
    int rows = 0;
    Eigen::Index offset = 0;
    Eigen::Index dim = 0;
    Eigen::MatrixXcd p;
    Eigen::MatrixXcd p_inv;       // kron blocks
    Eigen::LLT<Eigen::MatrixXcd> llt;  // dense blocks
  };
  std::vector<Block> blocks_;
  Eigen::Index size_ = 0;
};

/// Low-rank route: Q = V V^H and e = V a. Uses the push-through identity so
/// each multiplier costs O(r) after one r x r eigendecomposition.
QcqpSolution solve_factored(const Eigen::MatrixXcd& v, const Eigen::VectorXcd& a,
                            const BlockConstraint& p, double budget);

/// Reference route: dense (Q + lambda P)^{-1} e with bisection on lambda.
QcqpSolution solve_dense(const Eigen::MatrixXcd& q, const Eigen::MatrixXcd& p,
                         const Eigen::VectorXcd& e, double budget);

double qcqp_objective(const Eigen::MatrixXcd& q, const Eigen::VectorXcd& e,
                      const Eigen::VectorXcd& x);

}  // namespace abdris
