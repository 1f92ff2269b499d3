#include <gtest/gtest.h>

#include "abdris/errors.hpp"
#include "abdris/matrixtools.hpp"
#include "abdris/oracle.hpp"
#include "test_support.hpp"

using namespace abdris;
using namespace testing_support;

namespace {

struct Instance {
  System sys;
  ChannelSet ch;
  RisState ris;
  Precoder prec;
  FpWorkspace ws;
};

Instance make(std::uint64_t seed, int m, int g, Reciprocity r, double sigma_i2 = 0.1, int k_r = 2,
           int k_t = 2) {
  std::mt19937_64 rng(seed);
  const System sys = unit_system(config(2, m, g, k_r, k_t, r), 1.0, sigma_i2);
  const ChannelSet ch = channels(sys, rng);
  const Precoder prec = precoder(sys, rng);
  const RisState ris = random_ris(sys, ch, prec, 0.4, rng);
  return {sys, ch, ris, prec, workspace(sys, ch, ris, prec)};
}

RisState with(const RisState& base, const Eigen::MatrixXcd* r, const Eigen::MatrixXcd* t) {
  RisState s = base;
  if (r) s.theta_r = *r;
  if (t) s.theta_t = *t;
  return s;
}

Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) { return cn(n, 1, rng); }

void expect_bisection_ok(const QcqpSolution& q, double budget) {
  if (q.lambda == 0.0) {
    EXPECT_LE(q.power, budget * (1.0 + 1e-12));
  } else {
    EXPECT_LE(std::abs(q.power - budget), 1e-8 * budget);
  }
}

}  // namespace

TEST(ThetaR, ZeroLinearTermGivesZero) {
  Instance s = make(1, 4, 2, Reciprocity::reciprocal);
  for (int k = 0; k < s.sys.k_r(); ++k) s.ws.tau(k) = 0.0;
  refresh_theta_terms(s.ws, s.sys, s.ch, s.prec);
  ASSERT_EQ(s.ws.e_r.norm(), 0.0);
  for (ThetaSolveMode mode : {ThetaSolveMode::factored, ThetaSolveMode::dense}) {
    const ThetaResult r = update_theta_r(s.ws, s.sys, s.ch, s.prec, s.ris, mode);
    EXPECT_EQ(r.theta_r.norm(), 0.0);
  }
}

TEST(ThetaR, ScalarReduction) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Instance s = make(10 + seed, 1, 1, Reciprocity::reciprocal);
    const double budget = theta_r_budget(s.sys, s.ch, s.ris, s.prec);
    const ThetaResult r = update_theta_r(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::dense);
    const Complex e = std::conj(s.ws.e_r(0, 0));
    const double q = s.ws.q_r(0, 0).real();
    const double p = s.ws.p(0, 0).real();
    const double free_power = std::norm(e / (q * p)) * p;
    const double lambda =
        free_power <= budget ? 0.0 : (std::abs(e) * std::sqrt(p / budget) - q * p) / p;
    const Complex theta = e / (q * p + lambda * p);
    EXPECT_LT(std::abs(r.theta_r(0, 0) - theta), 1e-7 * std::abs(theta));
  }
}

TEST(ThetaR, ObjectiveEqualsSurrogateIncrement) {
  std::mt19937_64 rng(2);
  for (int g : {1, 2, 4}) {
    Instance s = make(20 + g, 4, g, Reciprocity::reciprocal);
    const DenseQcqp d = assemble_theta_r(s.ws, s.sys, 1.0);
    const Eigen::VectorXcd x = random_vector(d.e.size(), rng);
    const Eigen::MatrixXcd th = unstack_theta_r(s.sys, x);
    EXPECT_LT((th - th.transpose()).norm(), 1e-14);
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(4, 4);
    const double inc = f_tau(s.sys, s.ch, with(s.ris, &th, nullptr), s.prec, s.ws.iota, s.ws.tau) -
                       f_tau(s.sys, s.ch, with(s.ris, &zero, nullptr), s.prec, s.ws.iota, s.ws.tau);
    EXPECT_NEAR(qcqp_objective(d.q, d.e, x), inc, 1e-10 * (1.0 + std::abs(inc)));
    const double power = (th * s.ws.p * th.adjoint()).trace().real();
    EXPECT_NEAR(x.dot(d.p * x).real(), power, 1e-10 * power);
  }
}

TEST(ThetaT, ZeroLinearTermGivesZero) {
  Instance s = make(3, 4, 2, Reciprocity::reciprocal);
  for (int k = s.sys.k_r(); k < s.sys.n_users(); ++k) s.ws.tau(k) = 0.0;
  refresh_theta_terms(s.ws, s.sys, s.ch, s.prec);
  ASSERT_EQ(s.ws.e_t.norm(), 0.0);
  for (ThetaSolveMode mode : {ThetaSolveMode::factored, ThetaSolveMode::dense}) {
    EXPECT_EQ(update_theta_t(s.ws, s.sys, s.ch, s.prec, s.ris, mode).theta_t.norm(), 0.0);
  }
}

TEST(ThetaT, ObjectiveEqualsSurrogateIncrement) {
  std::mt19937_64 rng(4);
  for (int g : {1, 2, 4}) {
    Instance s = make(30 + g, 4, g, Reciprocity::reciprocal);
    const DenseQcqp d = assemble_theta_t(s.ws, s.sys, 1.0);
    const Eigen::VectorXcd x = random_vector(d.e.size(), rng);
    const Eigen::MatrixXcd th = unstack_theta_t(s.sys, x);
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(4, 4);
    const double inc = f_tau(s.sys, s.ch, with(s.ris, nullptr, &th), s.prec, s.ws.iota, s.ws.tau) -
                       f_tau(s.sys, s.ch, with(s.ris, nullptr, &zero), s.prec, s.ws.iota, s.ws.tau);
    EXPECT_NEAR(qcqp_objective(d.q, d.e, x), inc, 1e-10 * (1.0 + std::abs(inc)));
    const double sig = s.sys.budget().sigma_i2;
    const double power = (th * s.ws.p * th.adjoint()).trace().real() + sig * th.squaredNorm();
    EXPECT_NEAR(x.dot(d.p * x).real(), power, 1e-10 * power);
  }
}

TEST(ThetaT, LeakageTermIsolation) {
  std::mt19937_64 rng(5);
  Instance s = make(6, 4, 2, Reciprocity::reciprocal);
  const System quiet = unit_system(s.sys.config(), 1.0, 0.0);
  const DenseQcqp with_noise = assemble_theta_t(s.ws, s.sys, 1.0);
  const DenseQcqp without = assemble_theta_t(s.ws, quiet, 1.0);
  const Eigen::VectorXcd x = random_vector(with_noise.e.size(), rng);
  const Eigen::MatrixXcd th = unstack_theta_t(s.sys, x);
  double leak = 0.0;
  for (int k = 0; k < s.sys.k_r(); ++k) {
    leak += std::norm(s.ws.tau(k)) * (s.ch.h_ri.row(k) * th.transpose()).squaredNorm();
  }
  leak *= s.sys.budget().sigma_i2;
  EXPECT_NEAR(x.dot((with_noise.q - without.q) * x).real(), leak, 1e-12 * (1.0 + leak));
  EXPECT_EQ(with_noise.e, without.e);
}

TEST(ThetaJoint, ZeroLinearTermGivesZero) {
  Instance s = make(7, 4, 4, Reciprocity::non_reciprocal);
  s.ws.tau.setZero();
  refresh_theta_terms(s.ws, s.sys, s.ch, s.prec);
  ASSERT_EQ(s.ws.e_r.norm() + s.ws.e_t.norm(), 0.0);
  for (ThetaSolveMode mode : {ThetaSolveMode::factored, ThetaSolveMode::dense}) {
    const ThetaResult r = update_theta_joint(s.ws, s.sys, s.ch, s.prec, s.ris, mode);
    EXPECT_EQ(r.theta_r.norm(), 0.0);
    EXPECT_EQ(r.theta_t.norm(), 0.0);
  }
}

TEST(ThetaJoint, ObjectiveEqualsSurrogateIncrement) {
  std::mt19937_64 rng(8);
  for (int g : {1, 2, 4}) {
    Instance s = make(40 + g, 4, g, Reciprocity::non_reciprocal);
    const DenseQcqp d = assemble_theta_joint(s.ws, s.sys, 1.0);
    const Eigen::VectorXcd x = random_vector(d.e.size(), rng);
    const auto [tr, tt] = unstack_theta_joint(s.sys, x);
    const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(4, 4);
    const double inc = f_tau(s.sys, s.ch, with(s.ris, &tr, &tt), s.prec, s.ws.iota, s.ws.tau) -
                       f_tau(s.sys, s.ch, with(s.ris, &zero, &zero), s.prec, s.ws.iota, s.ws.tau);
    EXPECT_NEAR(qcqp_objective(d.q, d.e, x), inc, 1e-10 * (1.0 + std::abs(inc)));
    const double power = (tr * s.ws.p * tr.adjoint()).trace().real() +
                         (tt * s.ws.p * tt.adjoint()).trace().real();
    EXPECT_NEAR(x.dot(d.p * x).real(), power, 1e-10 * power);
  }
}

// With no transmitting-side weight the joint problem reduces to the reflecting
// block alone under the whole budget.
TEST(ThetaJoint, BlocksDecouple) {
  Instance s = make(9, 4, 4, Reciprocity::non_reciprocal);
  for (int k = s.sys.k_r(); k < s.sys.n_users(); ++k) s.ws.tau(k) = 0.0;
  refresh_theta_terms(s.ws, s.sys, s.ch, s.prec);
  const ThetaResult r =
      update_theta_joint(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::factored);
  EXPECT_LT(r.theta_t.norm(), 1e-12 * (1.0 + r.theta_r.norm()));

  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(4, 4);
  const Eigen::MatrixXcd q = kron(s.ws.p.transpose(), s.ws.q_r);
  const Eigen::MatrixXcd p = kron(s.ws.p.transpose(), id);
  const Eigen::VectorXcd e = vec(s.ws.e_r.transpose()).conjugate();
  const QcqpSolution ref = solve_dense(q, p, e, s.sys.budget().p_ris);
  const Eigen::MatrixXcd expected = unvec(ref.x, 4, 4);
  EXPECT_LT((r.theta_r - expected).norm(), 1e-7 * expected.norm());
}

TEST(ThetaUpdates, FactoredMatchesDense) {
  for (int m : {2, 4, 8}) {
    for (int g : {1, 2, m}) {
      if (m % g) continue;
      for (Reciprocity rec : {Reciprocity::reciprocal, Reciprocity::non_reciprocal}) {
        Instance s = make(50 + m * 10 + g, m, g, rec);
        std::vector<std::pair<ThetaResult, ThetaResult>> pairs;
        if (rec == Reciprocity::reciprocal) {
          pairs.emplace_back(
              update_theta_r(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::factored),
              update_theta_r(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::dense));
          pairs.emplace_back(
              update_theta_t(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::factored),
              update_theta_t(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::dense));
        } else {
          pairs.emplace_back(
              update_theta_joint(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::factored),
              update_theta_joint(s.ws, s.sys, s.ch, s.prec, s.ris, ThetaSolveMode::dense));
        }
        for (const auto& [f, d] : pairs) {
          EXPECT_LE(rel(f.qcqp.objective, d.qcqp.objective), 1e-8) << "m=" << m << " g=" << g;
          const double scale = 1.0 + d.theta_r.norm() + d.theta_t.norm();
          EXPECT_LT((f.theta_r - d.theta_r).norm() + (f.theta_t - d.theta_t).norm(), 1e-6 * scale);
          expect_bisection_ok(f.qcqp, f.budget);
          expect_bisection_ok(d.qcqp, d.budget);
        }
      }
    }
  }
}

TEST(ThetaUpdates, ResultsStayFeasibleAndStructured) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (Reciprocity rec : {Reciprocity::reciprocal, Reciprocity::non_reciprocal}) {
      Instance s = make(300 + seed, 4, 2, rec);
      RisState next = s.ris;
      if (rec == Reciprocity::reciprocal) {
        next.theta_r = update_theta_r(s.ws, s.sys, s.ch, s.prec, next).theta_r;
        next.theta_t = update_theta_t(s.ws, s.sys, s.ch, s.prec, next).theta_t;
      } else {
        const ThetaResult r = update_theta_joint(s.ws, s.sys, s.ch, s.prec, next);
        next.theta_r = r.theta_r;
        next.theta_t = r.theta_t;
      }
      EXPECT_FALSE(validate_ris(next, s.sys.config()).has_value());
      EXPECT_LE(ris_power_used(s.sys, s.ch, next, s.prec), s.sys.budget().p_ris * (1.0 + 1e-8));
      EXPECT_GE(f_tau(s.sys, s.ch, next, s.prec, s.ws.iota, s.ws.tau),
                f_tau(s.sys, s.ch, s.ris, s.prec, s.ws.iota, s.ws.tau) - 1e-9);
    }
  }
}

TEST(ThetaUpdates, NegativeBudgetIsInfeasible) {
  Instance s = make(11, 4, 2, Reciprocity::reciprocal);
  RisState loud = s.ris;
  loud.theta_t *= 1e3;
  EXPECT_THROW(update_theta_r(s.ws, s.sys, s.ch, s.prec, loud), InfeasibleBudget);
  loud = s.ris;
  loud.theta_r *= 1e3;
  EXPECT_THROW(update_theta_t(s.ws, s.sys, s.ch, s.prec, loud), InfeasibleBudget);
}

TEST(ThetaUpdates, AgreeWithProjectedGradient) {
  struct Case {
    int m, g;
    Reciprocity rec;
  };
  for (const Case& c : {Case{2, 2, Reciprocity::reciprocal}, Case{2, 1, Reciprocity::reciprocal},
                        Case{2, 2, Reciprocity::non_reciprocal}}) {
    Instance s = make(12 + c.m + c.g, c.m, c.g, c.rec);
    std::vector<DenseQcqp> problems;
    if (c.rec == Reciprocity::reciprocal) {
      problems.push_back(assemble_theta_r(s.ws, s.sys, theta_r_budget(s.sys, s.ch, s.ris, s.prec)));
      problems.push_back(assemble_theta_t(s.ws, s.sys, theta_t_budget(s.sys, s.ch, s.ris, s.prec)));
    } else {
      problems.push_back(assemble_theta_joint(s.ws, s.sys, s.sys.budget().p_ris));
    }
    for (const DenseQcqp& d : problems) {
      const QcqpInstance inst{d.q, d.p, d.e, d.budget};
      const double oracle = inst.objective(projected_gradient_solve(inst));
      EXPECT_LE(rel(closed_form_solve(inst).objective, oracle), 1e-4);
    }
  }
}
