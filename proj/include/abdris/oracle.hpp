#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abdris/model.hpp"
#include "abdris/optimizer.hpp"
#include "abdris/qcqp.hpp"

namespace abdris {

/// maximize 2 Re{e^H x} - x^H Q x  s.t.  x^H P x <= budget.
struct QcqpInstance {
  Eigen::MatrixXcd q;
  Eigen::MatrixXcd p;
  Eigen::VectorXcd e;
  double budget = 1.0;

  /// Throws ConfigError on inconsistent shapes or a non-positive budget.
  void validate() const;
  double objective(const Eigen::VectorXcd& x) const { return qcqp_objective(q, e, x); }
};

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
double power_iteration(const Eigen::MatrixXcd& a, int iterations = 500);

/// Accelerated projected gradient in coordinates where the constraint is a
/// ball (y = L^H x with P = L L^H), so projection is exact radial scaling.
/// step_size <= 0 selects 1 / lambda_max of the transformed quadratic.
Eigen::VectorXcd projected_gradient_solve(const QcqpInstance& inst, int steps = 20000,
                                          double step_size = 0.0);

/// Closed-form Lagrangian solution for comparison.
QcqpSolution closed_form_solve(const QcqpInstance& inst);

/// Random feasible (F, Theta) pairs scaled onto both budgets; returns the best
/// sum rate seen, or 0 when samples == 0.
double random_search_rate(const System& sys, const ChannelSet& ch, int samples,
                          std::uint64_t seed);

/// Random unit-scale scenario with its auxiliary variables and Theta terms
/// already refreshed. Channels are CN(0,1); P_T = P_A = 1, sigma_I^2 = 0.1,
/// sigma_R^2 = 1. K is split into ceil(K/2) reflecting and the rest transmitting.
struct RandomState {
  System sys;
  ChannelSet ch;
  RisState ris;
  Precoder prec;
  FpWorkspace ws;
};

RandomState make_random_state(int m, int g, int k, int n_tx, Reciprocity reciprocity,
                              std::mt19937_64& rng);

struct OracleTrial {
  std::string update;  // "theta_r", "theta_t" or "theta_joint"
  int m = 0, g = 0, k = 0;
  double budget = 0.0;
  double closed_form = 0.0;  // objective of the closed-form solution
  double oracle = 0.0;       // objective of the projected-gradient iterate
  double factored = 0.0;     // objective of the low-rank route on the same instance
  double gap = 0.0;          // relative closed-form vs oracle gap
  double factored_gap = 0.0; // relative factored vs dense gap
  bool active = false;      // budget binds at the closed-form solution
  bool feasible = true;
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleTrial> trials;
  double worst_gap = 0.0;
  double worst_factored_gap = 0.0;
  bool pass = true;
};

/// For each trial builds one reciprocal and one non-reciprocal random state and
/// checks every Theta update type: the dense closed form against projected
/// gradient, and the low-rank route against the dense closed form.
OracleReport oracle_check(int m, int g, int k, int trials, std::uint64_t seed,
                          double tolerance = 1e-4);

}  // namespace abdris
