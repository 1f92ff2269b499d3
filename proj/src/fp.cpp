#include <cmath>
#include <limits>
#include <numbers>

#include "abdris/errors.hpp"
#include "abdris/optimizer.hpp"

namespace abdris {

namespace {

struct UserTerms {
  Complex gain;        // h_{w,k} f_k
  double total = 0.0;  // A + B
  double signal = 0.0;
};

UserTerms user_terms(const System& sys, const ChannelSet& ch, const RisState& ris,
                     const Precoder& prec, int k) {
  const LinkTerms t = link_terms(sys, ch, ris, prec, k);
  UserTerms u;
  u.gain = (effective_channel(sys, ch, ris, k) * prec.f.col(k))(0);
  u.signal = t.signal;
  u.total = t.signal + t.interference_noise;
  return u;
}

void check_aux(const System& sys, Eigen::Index iota, Eigen::Index tau) {
  if (iota != sys.n_users() || tau != sys.n_users()) {
    throw ConfigError("auxiliary vectors must have one entry per user");
  }
}

}  // namespace

FpWorkspace FpWorkspace::zeros(const System& sys) {
  FpWorkspace ws;
  const int m = sys.n_cells();
  ws.iota = Eigen::VectorXd::Zero(sys.n_users());
  ws.tau = Eigen::VectorXcd::Zero(sys.n_users());
  ws.e_r = ws.e_t = ws.q_r = ws.q_t = Eigen::MatrixXcd::Zero(m, m);
  ws.p = sys.budget().sigma_i2 * Eigen::MatrixXcd::Identity(m, m);
  return ws;
}

double f_iota(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
              const Eigen::VectorXd& iota) {
  check_aux(sys, iota.size(), iota.size());
  double f = 0.0;
  for (int k = 0; k < sys.n_users(); ++k) {
    const LinkTerms t = link_terms(sys, ch, ris, prec, k);
    f += std::log2(1.0 + iota(k)) - iota(k) +
         (1.0 + iota(k)) * t.signal / (t.signal + t.interference_noise);
  }
  return f;
}

double f_tau(const System& sys, const ChannelSet& ch, const RisState& ris, const Precoder& prec,
             const Eigen::VectorXd& iota, const Eigen::VectorXcd& tau) {
  check_aux(sys, iota.size(), tau.size());
  double f = 0.0;
  for (int k = 0; k < sys.n_users(); ++k) {
    const UserTerms u = user_terms(sys, ch, ris, prec, k);
    f += std::log2(1.0 + iota(k)) - iota(k) +
         2.0 * std::sqrt(1.0 + iota(k)) * (std::conj(tau(k)) * u.gain).real() -
         std::norm(tau(k)) * u.total;
  }
  return f;
}

double fp_objective(const System& sys, const ChannelSet& ch, const RisState& ris,
                    const Precoder& prec, const Eigen::VectorXd& iota,
                    const Eigen::VectorXcd& tau) {
  check_aux(sys, iota.size(), tau.size());
  double f = 0.0;
  for (int k = 0; k < sys.n_users(); ++k) {
    const UserTerms u = user_terms(sys, ch, ris, prec, k);
    f += std::log1p(iota(k)) - iota(k) +
         2.0 * std::sqrt(1.0 + iota(k)) * (std::conj(tau(k)) * u.gain).real() -
         std::norm(tau(k)) * u.total;
  }
  return f / std::numbers::ln2;
}

void update_iota(FpWorkspace& ws, const System& sys, const ChannelSet& ch, const RisState& ris,
                 const Precoder& prec) {
  ws.iota.resize(sys.n_users());
  for (int k = 0; k < sys.n_users(); ++k) ws.iota(k) = link_terms(sys, ch, ris, prec, k).sinr();
}

void update_tau(FpWorkspace& ws, const System& sys, const ChannelSet& ch, const RisState& ris,
                const Precoder& prec) {
  if (ws.iota.size() != sys.n_users()) throw ConfigError("iota must be updated before tau");
  ws.tau.resize(sys.n_users());
  for (int k = 0; k < sys.n_users(); ++k) {
    const UserTerms u = user_terms(sys, ch, ris, prec, k);
    ws.tau(k) = std::sqrt(1.0 + ws.iota(k)) * u.gain / u.total;
  }
}

void refresh_theta_terms(FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                         const Precoder& prec) {
  const int m = sys.n_cells();
  const Eigen::MatrixXcd hf = ch.h_it * prec.f;
  ws.p = hf * hf.adjoint() + sys.budget().sigma_i2 * Eigen::MatrixXcd::Identity(m, m);
  ws.e_r = ws.e_t = ws.q_r = ws.q_t = Eigen::MatrixXcd::Zero(m, m);
  for (int k = 0; k < sys.n_users(); ++k) {
    const Complex tau = ws.tau(k);
    const double w = std::norm(tau);
    const Eigen::RowVectorXcd h = ch.h_ri.row(k);
    const Eigen::VectorXcd x = std::sqrt(1.0 + ws.iota(k)) * std::conj(tau) * hf.col(k) -
                               w * hf * (ch.h_rt.row(k) * prec.f).adjoint();
    const bool reflect = sys.sector_of(k) == Sector::reflecting;
    (reflect ? ws.e_r : ws.e_t) += x * h;
    (reflect ? ws.q_r : ws.q_t) += w * h.adjoint() * h;
  }
}

// ---------------------------------------------------------------------------
// Precoder

namespace {

struct PrecoderProblem {
  Eigen::MatrixXcd s;  // sum |tau_k|^2 h_k^H h_k
  Eigen::MatrixXcd t;  // H^H (Theta_r^H Theta_r + Theta_t^H Theta_t) H
  Eigen::MatrixXcd r;  // column k: sqrt(1+iota_k) tau_k h_k^H
  double p_tx = 0.0;
  double p_ris = std::numeric_limits<double>::infinity();
  bool ris_limited = false;
};

PrecoderProblem build_problem(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                              const RisState& ris) {
  const int n = sys.n_tx();
  const int k_total = sys.n_users();
  PrecoderProblem pp;
  pp.s = Eigen::MatrixXcd::Zero(n, n);
  pp.r.resize(n, k_total);
  for (int k = 0; k < k_total; ++k) {
    const Eigen::RowVectorXcd h = effective_channel(sys, ch, ris, k);
    pp.s += std::norm(ws.tau(k)) * h.adjoint() * h;
    pp.r.col(k) = std::sqrt(1.0 + ws.iota(k)) * ws.tau(k) * h.adjoint();
  }
  pp.s = hermitian_part(pp.s);
  pp.p_tx = sys.budget().p_tx;
  pp.t = Eigen::MatrixXcd::Zero(n, n);
  if (sys.ris_present()) {
    const Eigen::MatrixXcd ar = ris.theta_r * ch.h_it;
    const Eigen::MatrixXcd at = ris.theta_t * ch.h_it;
    pp.t = hermitian_part(ar.adjoint() * ar + at.adjoint() * at);
    pp.p_ris = sys.budget().p_ris - ris_static_power(sys, ris);
    pp.ris_limited = true;
    if (pp.p_ris < 0.0) {
      throw InfeasibleBudget("RIS static noise power exceeds the amplification budget");
    }
  }
  return pp;
}

struct Candidate {
  Eigen::MatrixXcd f;
  double objective = -std::numeric_limits<double>::infinity();
  double tx_power = 0.0;
  double ris_power = 0.0;
  double l1 = std::numeric_limits<double>::infinity();
  double l2 = std::numeric_limits<double>::infinity();
};

double objective_of(const PrecoderProblem& pp, const Eigen::MatrixXcd& f) {
  return 2.0 * (pp.r.adjoint() * f).trace().real() - (f.adjoint() * pp.s * f).trace().real();
}

// Eigen-basis evaluator for a fixed lambda2: S + l2 T = U diag(d) U^H.
class Slice {
 public:
  Slice(const PrecoderProblem& pp, double l2) : pp_(pp), l2_(l2) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian_part(pp.s + l2 * pp.t));
    if (eig.info() != Eigen::Success) throw SingularSystem("precoder eigendecomposition failed");
    u_ = eig.eigenvectors();
    d_ = eig.eigenvalues();
    g_ = u_.adjoint() * pp.r;
    t_ = u_.adjoint() * pp.t * u_;
    g_norm2_ = g_.rowwise().squaredNorm();
    floor_ = 1e-12 * std::max(d_.cwiseAbs().maxCoeff(), 1e-300);
  }

  Eigen::MatrixXcd coords(double l1) const {
    Eigen::MatrixXcd fp = g_;
    for (Eigen::Index i = 0; i < d_.size(); ++i) fp.row(i) *= inv(i, l1);
    return fp;
  }
  double tx_power(double l1) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d_.size(); ++i) {
      const double c = inv(i, l1);
      s += g_norm2_(i) * c * c;
    }
    return s;
  }
  double ris_power(double l1) const {
    const Eigen::MatrixXcd fp = coords(l1);
    return (fp.adjoint() * t_ * fp).trace().real();
  }
  Candidate evaluate(double l1) const {
    Candidate c;
    c.f = u_ * coords(l1);
    c.objective = objective_of(pp_, c.f);
    c.tx_power = c.f.squaredNorm();
    c.ris_power = pp_.ris_limited ? (c.f.adjoint() * pp_.t * c.f).trace().real() : 0.0;
    c.l1 = l1;
    c.l2 = l2_;
    return c;
  }
  /// Smallest l1 meeting the transmit budget.
  double min_l1() const {
    return bisect_multiplier([this](double l1) { return tx_power(l1); }, pp_.p_tx).lambda;
  }

 private:
  double inv(Eigen::Index i, double l1) const {
    const double den = d_(i) + l1;
    return den > floor_ ? 1.0 / den : 0.0;
  }

  const PrecoderProblem& pp_;
  double l2_;
  Eigen::MatrixXcd u_, g_, t_;
  Eigen::VectorXd d_, g_norm2_;
  double floor_ = 0.0;
};

bool feasible(const PrecoderProblem& pp, const Candidate& c) {
  constexpr double kTol = 1e-10;
  if (c.tx_power > pp.p_tx * (1.0 + kTol)) return false;
  if (pp.ris_limited && c.ris_power > pp.p_ris * (1.0 + kTol)) return false;
  return true;
}

class Selector {
 public:
  explicit Selector(const PrecoderProblem& pp) : pp_(pp) {}

  bool offer(Candidate c) {
    ++evaluations_;
    if (!feasible(pp_, c) || !std::isfinite(c.objective)) return false;
    const bool better = c.objective > best_.objective ||
                        (c.objective == best_.objective &&
                         (c.l1 < best_.l1 || (c.l1 == best_.l1 && c.l2 < best_.l2)));
    if (better) best_ = std::move(c);
    return true;
  }
  bool any() const { return std::isfinite(best_.objective); }
  const Candidate& best() const { return best_; }
  int evaluations() const { return evaluations_; }

 private:
  const PrecoderProblem& pp_;
  Candidate best_;
  int evaluations_ = 0;
};

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> v(n);
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < n; ++i) v[i] = std::pow(10.0, a + (b - a) * i / (n - 1));
  return v;
}

void grid_pass(const PrecoderProblem& pp, Selector& sel, const std::vector<double>& l1s,
               const std::vector<double>& l2s) {
  for (double l2 : l2s) {
    const Slice slice(pp, l2);
    for (double l1 : l1s) sel.offer(slice.evaluate(l1));
  }
}

void bisection_candidates(const PrecoderProblem& pp, Selector& sel) {
  const Slice base(pp, 0.0);
  try {
    sel.offer(base.evaluate(base.min_l1()));
  } catch (const InfeasibleBudget&) {
  }
  if (!pp.ris_limited) return;

  // lambda1 = 0, lambda2 sized to the RIS budget.
  try {
    const Bisection b2 = bisect_multiplier(
        [&](double l2) { return Slice(pp, l2).ris_power(0.0); }, pp.p_ris);
    sel.offer(Slice(pp, b2.lambda).evaluate(0.0));
  } catch (const InfeasibleBudget&) {
  }
  // Both active: lambda1 tracks the transmit budget along the lambda2 path.
  try {
    const Bisection b2 = bisect_multiplier(
        [&](double l2) {
          const Slice s(pp, l2);
          return s.ris_power(s.min_l1());
        },
        pp.p_ris);
    const Slice s(pp, b2.lambda);
    sel.offer(s.evaluate(s.min_l1()));
  } catch (const InfeasibleBudget&) {
  }
}

}  // namespace

double precoder_objective(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                          const RisState& ris, const Precoder& prec) {
  PrecoderProblem pp;
  const int k_total = sys.n_users();
  pp.s = Eigen::MatrixXcd::Zero(sys.n_tx(), sys.n_tx());
  pp.r.resize(sys.n_tx(), k_total);
  for (int k = 0; k < k_total; ++k) {
    const Eigen::RowVectorXcd h = effective_channel(sys, ch, ris, k);
    pp.s += std::norm(ws.tau(k)) * h.adjoint() * h;
    pp.r.col(k) = std::sqrt(1.0 + ws.iota(k)) * ws.tau(k) * h.adjoint();
  }
  return objective_of(pp, prec.f);
}

PrecoderResult update_precoder(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                               const RisState& ris, const Precoder* previous) {
  check_aux(sys, ws.iota.size(), ws.tau.size());
  const PrecoderProblem pp = build_problem(ws, sys, ch, ris);
  Selector sel(pp);

  const bool unconstrained_ok = sel.offer(Slice(pp, 0.0).evaluate(0.0));
  if (!unconstrained_ok) {
    const std::vector<double> coarse = log_grid(1e-8, 1e8, 25);
    grid_pass(pp, sel, coarse, coarse);
    if (sel.any()) {
      const Candidate& b = sel.best();
      grid_pass(pp, sel, log_grid(b.l1 / 10.0, b.l1 * 10.0, 9), log_grid(b.l2 / 10.0, b.l2 * 10.0, 9));
    }
    bisection_candidates(pp, sel);

    Candidate zero;
    zero.f = Eigen::MatrixXcd::Zero(sys.n_tx(), sys.n_users());
    zero.objective = 0.0;
    sel.offer(std::move(zero));
  }

  bool kept_previous = false;
  if (previous != nullptr && previous->f.rows() == sys.n_tx() && previous->f.cols() == sys.n_users()) {
    Candidate prev;
    prev.f = previous->f;
    prev.objective = objective_of(pp, prev.f);
    prev.tx_power = prev.f.squaredNorm();
    prev.ris_power = pp.ris_limited ? (prev.f.adjoint() * pp.t * prev.f).trace().real() : 0.0;
    if (!sel.any() || prev.objective > sel.best().objective) {
      kept_previous = sel.offer(std::move(prev));
    }
  }

  PrecoderResult out;
  if (!sel.any()) {
    out.prec.f = Eigen::MatrixXcd::Zero(sys.n_tx(), sys.n_users());
    out.grid_evaluations = sel.evaluations();
    return out;
  }
  const Candidate& best = sel.best();
  out.prec.f = best.f;
  out.objective = best.objective;
  out.kept_previous = kept_previous;
  out.lambda1 = kept_previous ? 0.0 : best.l1;
  out.lambda2 = kept_previous ? 0.0 : best.l2;
  if (!std::isfinite(out.lambda1)) out.lambda1 = 0.0;
  if (!std::isfinite(out.lambda2)) out.lambda2 = 0.0;
  out.grid_evaluations = sel.evaluations();
  return out;
}

}  // namespace abdris
