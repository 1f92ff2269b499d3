#include "abdris/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "abdris/errors.hpp"
#include "abdris/matrixtools.hpp"
#include "abdris/optimizer.hpp"

namespace abdris {

void QcqpInstance::validate() const {
  const Eigen::Index n = e.size();
  if (q.rows() != n || q.cols() != n || p.rows() != n || p.cols() != n) {
    throw ConfigError("QCQP instance dimensions are inconsistent");
  }
  if (!(budget > 0.0)) throw ConfigError("QCQP instance budget must be positive");
}

double power_iteration(const Eigen::MatrixXcd& a, int iterations) {
  if (a.rows() == 0) return 0.0;
  Eigen::VectorXcd v = Eigen::VectorXcd::Ones(a.rows()) / std::sqrt(static_cast<double>(a.rows()));
  double lambda = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Eigen::VectorXcd w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w).real();
    v = w / norm;
    if (i > 10 && std::abs(next - lambda) <= 1e-12 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  // Rayleigh quotients approach from below; a small margin keeps the step stable.
  return lambda * 1.01;
}

Eigen::VectorXcd projected_gradient_solve(const QcqpInstance& inst, int steps, double step_size) {
  inst.validate();
  const Eigen::Index n = inst.e.size();
  Eigen::LLT<Eigen::MatrixXcd> llt(hermitian_part(inst.p));
  if (llt.info() != Eigen::Success) throw SingularSystem("oracle constraint form is not positive definite");
  const Eigen::MatrixXcd l = llt.matrixL();
  const auto lower = l.triangularView<Eigen::Lower>();

  // Q' = L^{-1} Q L^{-H}, e' = L^{-1} e.
  const Eigen::MatrixXcd tmp = lower.solve(hermitian_part(inst.q));
  const Eigen::MatrixXcd qw = hermitian_part(lower.solve(tmp.adjoint()).adjoint());
  const Eigen::VectorXcd ew = lower.solve(inst.e);

  const double step = step_size > 0.0 ? step_size : 1.0 / std::max(power_iteration(qw), 1e-300);
  const double radius = std::sqrt(inst.budget);
  auto project = [radius](Eigen::VectorXcd y) {
    const double norm = y.norm();
    if (norm > radius) y *= radius / norm;
    return y;
  };
  auto objective = [&](const Eigen::VectorXcd& y) {
    return 2.0 * ew.dot(y).real() - y.dot(qw * y).real();
  };

  Eigen::VectorXcd y = Eigen::VectorXcd::Zero(n);
  Eigen::VectorXcd z = y;
  double t = 1.0;
  double f_prev = objective(y);
  for (int i = 0; i < steps; ++i) {
    const Eigen::VectorXcd y_next = project(z + step * (ew - qw * z));
    const double f_next = objective(y_next);
    if (f_next < f_prev) {
      // Momentum restart.
      t = 1.0;
      z = y;
      continue;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = y_next + ((t - 1.0) / t_next) * (y_next - y);
    const double change = (y_next - y).norm();
    y = y_next;
    t = t_next;
    f_prev = f_next;
    if (change <= 1e-15 * (1.0 + y.norm())) break;
  }
  return l.adjoint().triangularView<Eigen::Upper>().solve(y);
}

QcqpSolution closed_form_solve(const QcqpInstance& inst) {
  inst.validate();
  return solve_dense(inst.q, inst.p, inst.e, inst.budget);
}

double random_search_rate(const System& sys, const ChannelSet& ch, int samples,
                          std::uint64_t seed) {
  if (samples < 0) throw ConfigError("sample count must be nonnegative");
  if (samples == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    Precoder prec;
    prec.f.resize(sys.n_tx(), sys.n_users());
    for (Eigen::Index j = 0; j < prec.f.cols(); ++j) {
      for (Eigen::Index i = 0; i < prec.f.rows(); ++i) {
        const double re = nd(rng);
        prec.f(i, j) = Complex(re, nd(rng));
      }
    }
    prec.f *= std::sqrt(sys.budget().p_tx) / prec.f.norm();
    const RisState ris = random_ris(sys, ch, prec, 1.0, rng);
    best = std::max(best, sum_rate(sys, ch, ris, prec));
  }
  return best;
}

namespace {

Eigen::MatrixXcd complex_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  Eigen::MatrixXcd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = nd(rng);
      out(i, j) = Complex(re, nd(rng));
    }
  }
  return out;
}

double relative_gap(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

}  // namespace

RandomState make_random_state(int m, int g, int k, int n_tx, Reciprocity reciprocity,
                              std::mt19937_64& rng) {
  if (k < 2) throw ConfigError("oracle states need at least two users");
  SystemConfig cfg;
  cfg.n_tx = n_tx;
  cfg.n_cells = m;
  cfg.group_size = g;
  cfg.k_r = (k + 1) / 2;
  cfg.k_t = k - cfg.k_r;
  cfg.reciprocity = reciprocity;
  cfg.architecture = g == 1 ? Architecture::cw_single
                     : g == m ? Architecture::cw_fully
                              : Architecture::cw_group;
  PowerBudget budget;
  budget.p_tx = 1.0;
  budget.p_ris = 1.0;
  budget.sigma_i2 = 0.1;
  budget.sigma_r2 = 1.0;
  System sys(cfg, budget);

  ChannelSet ch;
  ch.h_it = complex_normal(m, n_tx, rng);
  ch.h_rt = complex_normal(k, n_tx, rng);
  ch.h_ri = complex_normal(k, m, rng);
  for (int i = 0; i < k; ++i) ch.user_sector.push_back(sys.sector_of(i));

  Precoder prec;
  prec.f = complex_normal(n_tx, k, rng);
  prec.f *= std::sqrt(budget.p_tx) / prec.f.norm();
  RisState ris = random_ris(sys, ch, prec, 0.5, rng);

  FpWorkspace ws = FpWorkspace::zeros(sys);
  update_iota(ws, sys, ch, ris, prec);
  update_tau(ws, sys, ch, ris, prec);
  refresh_theta_terms(ws, sys, ch, prec);
  return {sys, ch, ris, prec, ws};
}

OracleReport oracle_check(int m, int g, int k, int trials, std::uint64_t seed, double tolerance) {
  if (m < 1 || g < 1 || m % g != 0) throw ConfigError("oracle dims need G dividing M");
  if (trials < 0) throw ConfigError("trial count must be nonnegative");
  OracleReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(0.2, 2.0);

  auto check = [&](const std::string& name, const DenseQcqp& dense,
                   const ThetaResult& fact) {
    OracleTrial t;
    t.update = name;
    t.m = m;
    t.g = g;
    t.k = k;
    // The factored route must agree with the dense assembly at the natural budget.
    if (dense.budget > 0.0) {
      const QcqpSolution ref = solve_dense(dense.q, dense.p, dense.e, dense.budget);
      t.factored = fact.qcqp.objective;
      t.factored_gap = relative_gap(ref.objective, fact.qcqp.objective);
    }
    // Budgets around the unconstrained optimum's power exercise both active
    // and inactive constraints.
    const double free_power = solve_dense(dense.q, dense.p, dense.e, 1e300).power;
    QcqpInstance inst{dense.q, dense.p, dense.e, std::max(free_power, 1e-12) * scale(rng)};
    const QcqpSolution cf = closed_form_solve(inst);
    const Eigen::VectorXcd y = projected_gradient_solve(inst);
    t.budget = inst.budget;
    t.closed_form = cf.objective;
    t.oracle = inst.objective(y);
    t.gap = relative_gap(t.closed_form, t.oracle);
    t.active = cf.budget_active;
    const double used = cf.x.dot(hermitian_part(inst.p) * cf.x).real();
    t.feasible = used <= inst.budget * (1.0 + 1e-6);
    t.pass = t.feasible && t.gap <= tolerance && t.factored_gap <= tolerance;
    report.worst_gap = std::max(report.worst_gap, t.gap);
    report.worst_factored_gap = std::max(report.worst_factored_gap, t.factored_gap);
    report.pass = report.pass && t.pass;
    report.trials.push_back(t);
  };

  for (int trial = 0; trial < trials; ++trial) {
    {
      const RandomState st = make_random_state(m, g, k, 2, Reciprocity::reciprocal, rng);
      const double br = theta_r_budget(st.sys, st.ch, st.ris, st.prec);
      check("theta_r", assemble_theta_r(st.ws, st.sys, br),
            update_theta_r(st.ws, st.sys, st.ch, st.prec, st.ris, ThetaSolveMode::factored));
      const double bt = theta_t_budget(st.sys, st.ch, st.ris, st.prec);
      check("theta_t", assemble_theta_t(st.ws, st.sys, bt),
            update_theta_t(st.ws, st.sys, st.ch, st.prec, st.ris, ThetaSolveMode::factored));
    }
    {
      const RandomState st = make_random_state(m, g, k, 2, Reciprocity::non_reciprocal, rng);
      check("theta_joint", assemble_theta_joint(st.ws, st.sys, st.sys.budget().p_ris),
            update_theta_joint(st.ws, st.sys, st.ch, st.prec, st.ris, ThetaSolveMode::factored));
    }
  }
  return report;
}

}  // namespace abdris
