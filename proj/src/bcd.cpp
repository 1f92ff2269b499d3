#include <chrono>
#include <cmath>

#include "abdris/channels.hpp"
#include "abdris/errors.hpp"
#include "abdris/optimizer.hpp"

namespace abdris {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int largest_proper_divisor(int g) {
  for (int d = g / 2; d > 1; --d) {
    if (g % d == 0) return d;
  }
  return 1;
}

bool theta_active(const System& sys) { return sys.ris_present() && sys.budget().p_ris > 0.0; }

void rescale_static(const System& sys, RisState& ris) {
  const double static_power = ris_static_power(sys, ris);
  if (!(static_power > 0.0)) return;
  const double s = std::sqrt(0.5 * sys.budget().p_ris / static_power);
  ris.theta_r *= s;
  ris.theta_t *= s;
}

BcdResult run_start(const System& sys, const ChannelSet& ch, const BcdOptions& opts,
                    RisState ris, Precoder prec) {
  const double m = sys.n_cells();
  const double g = sys.group_size();
  const double k = sys.n_users();
  const double n = sys.n_tx();

  SolveReport rep;
  FpWorkspace ws = FpWorkspace::zeros(sys);
  auto record = [&](int sweep, const char* block) {
    BlockRecord r;
    r.sweep = sweep;
    r.block = block;
    r.objective = fp_objective(sys, ch, ris, prec, ws.iota, ws.tau);
    r.tx_slack = sys.budget().p_tx - prec.f.squaredNorm();
    r.ris_slack = sys.ris_present() ? sys.budget().p_ris - ris_power_used(sys, ch, ris, prec) : 0.0;
    rep.blocks.push_back(std::move(r));
  };

  double rate = sum_rate(sys, ch, ris, prec);
  rep.sum_rate_trace.push_back(rate);
  BcdResult best{ris, prec, rate, {}};
  double prev = rate;

  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    auto t0 = Clock::now();
    update_iota(ws, sys, ch, ris, prec);
    rep.block_ms_iota += ms_since(t0);

    t0 = Clock::now();
    update_tau(ws, sys, ch, ris, prec);
    rep.block_ms_tau += ms_since(t0);
    record(sweep, "aux");

    t0 = Clock::now();
    PrecoderResult pr;
    try {
      pr = update_precoder(ws, sys, ch, ris, &prec);
    } catch (const InfeasibleBudget&) {
      rescale_static(sys, ris);
      pr = update_precoder(ws, sys, ch, ris, &prec);
    }
    prec = pr.prec;
    rep.lambda1 = pr.lambda1;
    rep.lambda2 = pr.lambda2;
    rep.i_grid += pr.grid_evaluations;
    rep.complexity_common += k * k * m * m + k * (pr.grid_evaluations * n * n * n + n * m * m);
    rep.block_ms_f += ms_since(t0);
    record(sweep, "F");

    if (theta_active(sys)) {
      t0 = Clock::now();
      update_iota(ws, sys, ch, ris, prec);
      update_tau(ws, sys, ch, ris, prec);
      rep.block_ms_tau += ms_since(t0);
      record(sweep, "aux");
      t0 = Clock::now();
      refresh_theta_terms(ws, sys, ch, prec);
      if (sys.reciprocal()) {
        const ThetaResult r = update_theta_r(ws, sys, ch, prec, ris, opts.mode);
        ris.theta_r = r.theta_r;
        rep.lambda_r = r.qcqp.lambda;
        rep.i_bs1 += r.qcqp.bisection_steps;
        record(sweep, "theta_r");
        const ThetaResult t = update_theta_t(ws, sys, ch, prec, ris, opts.mode);
        ris.theta_t = t.theta_t;
        rep.lambda_t = t.qcqp.lambda;
        rep.i_bs2 += t.qcqp.bisection_steps;
        rep.complexity_theta += m * m * std::pow(g, 4) +
                                (r.qcqp.bisection_steps + t.qcqp.bisection_steps) * m * m * m * g * g * g;
        record(sweep, "theta_t");
      } else {
        const ThetaResult j = update_theta_joint(ws, sys, ch, prec, ris, opts.mode);
        ris.theta_r = j.theta_r;
        ris.theta_t = j.theta_t;
        rep.lambda_joint = j.qcqp.lambda;
        rep.i_bs3 += j.qcqp.bisection_steps;
        rep.complexity_theta += j.qcqp.bisection_steps * m * m * m * g * g * g;
        record(sweep, "theta");
      }
      rep.block_ms_theta += ms_since(t0);
    }

    rate = sum_rate(sys, ch, ris, prec);
    rep.sum_rate_trace.push_back(rate);
    rep.iterations = sweep;
    if (rate > best.sum_rate) {
      best.ris = ris;
      best.prec = prec;
      best.sum_rate = rate;
    }
    if (std::abs(rate - prev) < opts.tolerance * std::max(std::abs(prev), 1e-12)) {
      rep.converged = true;
      break;
    }
    prev = rate;
  }

  rep.tx_slack = sys.budget().p_tx - best.prec.f.squaredNorm();
  rep.ris_slack =
      sys.ris_present() ? sys.budget().p_ris - ris_power_used(sys, ch, best.ris, best.prec) : 0.0;
  best.report = std::move(rep);
  return best;
}

}  // namespace

Precoder mrt_precoder(const System& sys, const ChannelSet& ch) {
  Precoder p;
  p.f = ch.h_rt.adjoint();
  double norm2 = p.f.squaredNorm();
  if (!(norm2 > 0.0)) {
    p.f = Eigen::MatrixXcd::Zero(sys.n_tx(), sys.n_users());
    for (int k = 0; k < sys.n_users(); ++k) p.f(k % sys.n_tx(), k) = 1.0;
    norm2 = p.f.squaredNorm();
  }
  p.f *= std::sqrt(sys.budget().p_tx / norm2);
  return p;
}

RisState random_ris(const System& sys, const ChannelSet& ch, const Precoder& prec,
                    double fraction, std::mt19937_64& rng) {
  RisState ris = RisState::zero(sys);
  std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
  const int g = sys.group_size();
  for (int a = 0; a < sys.n_groups(); ++a) {
    for (Eigen::MatrixXcd* theta : {&ris.theta_r, &ris.theta_t}) {
      for (int j = 0; j < g; ++j) {
        for (int i = 0; i < g; ++i) {
          const double re = nd(rng);
          (*theta)(a * g + i, a * g + j) = Complex(re, nd(rng));
        }
      }
    }
  }
  if (sys.reciprocal()) ris.theta_r = 0.5 * (ris.theta_r + ris.theta_r.transpose()).eval();

  const double target = fraction * sys.budget().p_ris;
  const double power = ris_power_used(sys, ch, ris, prec);
  if (!sys.ris_present() || !(target > 0.0) || !(power > 0.0)) return RisState::zero(sys);
  const double s = std::sqrt(target / power);
  ris.theta_r *= s;
  ris.theta_t *= s;
  return ris;
}

BcdResult bcd_solve(const System& sys, const ChannelSet& ch, const BcdOptions& opts,
                    const std::optional<BcdInit>& init) {
  if (ch.h_rt.rows() != sys.n_users() || ch.h_rt.cols() != sys.n_tx() ||
      ch.h_ri.cols() != sys.n_cells() || ch.h_it.rows() != sys.n_cells() ||
      ch.h_it.cols() != sys.n_tx()) {
    throw ConfigError("channel dimensions do not match the system");
  }
  if (opts.max_sweeps < 1 || opts.starts < 1) throw ConfigError("need at least one sweep and one start");

  if (init) {
    RisState ris = init->ris;
    if (!sys.ris_present()) ris = RisState::zero(sys);
    return run_start(sys, ch, opts, ris, init->prec);
  }

  BcdResult best;
  bool have = false;
  if (opts.nested_start && theta_active(sys) && sys.group_size() > 1) {
    SystemConfig sub = sys.config();
    sub.group_size = largest_proper_divisor(sys.group_size());
    sub.architecture = sub.group_size == 1 ? Architecture::cw_single : Architecture::cw_group;
    BcdResult coarse = bcd_solve(System(sub, sys.budget()), ch, opts);
    coarse.ris.group_size = sys.group_size();
    best = run_start(sys, ch, opts, coarse.ris, coarse.prec);
    best.report.best_start = 0;
    have = true;
  }
  for (int s = have ? 1 : 0; s < opts.starts; ++s) {
    std::mt19937_64 rng(mix_seed(opts.seed, static_cast<std::uint64_t>(s)));
    const Precoder prec = mrt_precoder(sys, ch);
    const RisState ris = random_ris(sys, ch, prec, 0.9, rng);
    BcdResult r = run_start(sys, ch, opts, ris, prec);
    r.report.best_start = s;
    if (!have || r.sum_rate > best.sum_rate) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

nlohmann::json SolveReport::to_json() const {
  nlohmann::json blocks_json = nlohmann::json::array();
  for (const BlockRecord& b : blocks) {
    blocks_json.push_back({{"sweep", b.sweep},
                           {"block", b.block},
                           {"objective", b.objective},
                           {"tx_slack", b.tx_slack},
                           {"ris_slack", b.ris_slack}});
  }
  return {{"sum_rate_trace", sum_rate_trace},
          {"blocks", blocks_json},
          {"iterations", iterations},
          {"converged", converged},
          {"best_start", best_start},
          {"multipliers",
           {{"lambda1", lambda1},
            {"lambda2", lambda2},
            {"lambda_r", lambda_r},
            {"lambda_t", lambda_t},
            {"lambda_joint", lambda_joint}}},
          {"slack", {{"tx", tx_slack}, {"ris", ris_slack}}},
          {"block_ms",
           {{"iota", block_ms_iota}, {"tau", block_ms_tau}, {"F", block_ms_f}, {"theta", block_ms_theta}}},
          {"counters",
           {{"I", iterations},
            {"I_grid", i_grid},
            {"I_bs1", i_bs1},
            {"I_bs2", i_bs2},
            {"I_bs3", i_bs3},
            {"C", complexity_common},
            {"theta", complexity_theta}}}};
}

}  // namespace abdris
