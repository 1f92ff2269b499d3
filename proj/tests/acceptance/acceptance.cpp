// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "abdris/channels.hpp"
#include "abdris/experiments.hpp"
#include "abdris/model.hpp"
#include "abdris/optimizer.hpp"
#include "abdris/oracle.hpp"

using namespace abdris;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

SystemConfig scenario(int m, int g, Reciprocity r) {
  SystemConfig cfg;
  cfg.n_tx = 4;
  cfg.n_cells = m;
  cfg.group_size = g;
  cfg.k_r = 2;
  cfg.k_t = 2;
  cfg.p_total_dbm = 30.0;
  cfg.tx_fraction = 0.99;
  cfg.reciprocity = r;
  cfg.architecture = g == m ? Architecture::cw_fully
                     : g == 1 ? Architecture::cw_single
                              : Architecture::cw_group;
  return cfg;
}

ChannelSet channels_for(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t realization) {
  FadingSpec f;
  f.seed = seed;
  return draw_realization(Geometry{}, f, cfg, realization);
}

// ---------------------------------------------------------------------------

void transform_identities() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst_iota = 0.0, worst_tau = 0.0;
  const int dims[][2] = {{2, 1}, {2, 2}, {4, 2}, {8, 4}, {8, 8}};
  for (int i = 0; i < 200; ++i) {
    const int m = dims[i % 5][0], g = dims[i % 5][1];
    const Reciprocity rec = i % 2 ? Reciprocity::reciprocal : Reciprocity::non_reciprocal;
    System sys = System(scenario(m, g, rec));
    ChannelSet ch;
    Precoder prec;
    RisState ris;
    if (i < 100) {
      RandomState st = make_random_state(m, g, 4, 4, rec, rng);
      sys = st.sys;
      ch = st.ch;
      prec = st.prec;
      ris = st.ris;
    } else {
      ch = channels_for(sys.config(), 7, i);
      prec = mrt_precoder(sys, ch);
      ris = random_ris(sys, ch, prec, 0.9, rng);
    }
    FpWorkspace ws = FpWorkspace::zeros(sys);
    update_iota(ws, sys, ch, ris, prec);
    update_tau(ws, sys, ch, ris, prec);
    const double rate = sum_rate(sys, ch, ris, prec);
    const double fi = f_iota(sys, ch, ris, prec, ws.iota);
    const double ft = f_tau(sys, ch, ris, prec, ws.iota, ws.tau);
    worst_iota = std::max(worst_iota, rel(fi, rate));
    worst_tau = std::max(worst_tau, rel(ft, fi));
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "200 states, worst |f_iota-rate|/rate=" << fmt("%.2e", worst_iota)
     << ", worst |f_tau-f_iota|/f_iota=" << fmt("%.2e", worst_tau) << ", " << fmt("%.2f", secs) << " s";
  report(1, worst_iota <= 1e-10 && worst_tau <= 1e-10 && secs < 10.0, os.str());
}

void oracle_equivalence() {
  const auto t0 = Clock::now();
  bool pass = true;
  double worst = 0.0;
  std::map<std::string, int> counts;
  for (int m : {2, 4}) {
    for (int g : {1, 2, m}) {
      if (g == m && g == 2) continue;  // G = M already covered by G = 2 when M = 2
      const OracleReport rep = oracle_check(m, g, 4, 50, 1000 + 10 * m + g);
      pass = pass && rep.pass;
      worst = std::max({worst, rep.worst_gap, rep.worst_factored_gap});
      for (const OracleTrial& t : rep.trials) counts[t.update]++;
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << "instances:";
  for (const auto& [k, v] : counts) os << " " << k << "=" << v;
  os << ", worst relative gap=" << fmt("%.2e", worst) << ", " << fmt("%.1f", secs) << " s";
  report(2, pass && worst <= 1e-4 && secs < 120.0, os.str());
}

void monotonicity() {
  const auto t0 = Clock::now();
  double worst_drop = 0.0, worst_tx = 0.0, worst_ris = 0.0;
  int solves = 0, converged = 0;
  const int groups[] = {1, 2, 8};
  for (int seed = 0; seed < 100; ++seed) {
    const Reciprocity rec = seed % 2 ? Reciprocity::reciprocal : Reciprocity::non_reciprocal;
    const SystemConfig cfg = scenario(8, groups[(seed / 2) % 3], rec);
    const System sys(cfg);
    const ChannelSet ch = channels_for(cfg, 300, seed);
    BcdOptions opts;
    opts.seed = seed;
    opts.starts = 1;
    const BcdResult r = bcd_solve(sys, ch, opts);
    ++solves;
    converged += r.report.converged ? 1 : 0;
    const auto& b = r.report.blocks;
    for (std::size_t i = 1; i < b.size(); ++i) {
      worst_drop = std::max(worst_drop, b[i - 1].objective - b[i].objective);
    }
    for (const BlockRecord& x : b) {
      worst_tx = std::max(worst_tx, -x.tx_slack / sys.budget().p_tx);
      worst_ris = std::max(worst_ris, -x.ris_slack / sys.budget().p_ris);
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream os;
  os << solves << " solves (" << converged << " converged), worst step drop=" << fmt("%.2e", worst_drop)
     << ", worst tx violation=" << fmt("%.2e", worst_tx)
     << ", worst RIS violation=" << fmt("%.2e", worst_ris) << ", " << fmt("%.1f", secs) << " s";
  report(3, worst_drop <= 1e-6 && worst_tx <= 1e-6 && worst_ris <= 1e-6 && secs < 300.0, os.str());
}

void degenerate_budget() {
  double worst = 0.0;
  bool zero_theta = true;
  for (int seed = 0; seed < 20; ++seed) {
    const SystemConfig cfg = scenario(8, seed % 2 ? 8 : 2,
                                      seed % 3 ? Reciprocity::non_reciprocal : Reciprocity::reciprocal);
    PowerBudget b = System(cfg).budget();
    b.p_ris = 0.0;
    const System off(cfg, b, true);
    const System bare(cfg, b, false);
    const ChannelSet ch = channels_for(cfg, 400, seed);
    BcdOptions opts;
    opts.seed = seed;
    const BcdResult a = bcd_solve(off, ch, opts);
    const BcdResult z = bcd_solve(bare, ch, opts);
    zero_theta = zero_theta && a.ris.theta_r.norm() == 0.0 && a.ris.theta_t.norm() == 0.0;
    worst = std::max(worst, std::abs(a.sum_rate - z.sum_rate));
  }
  std::ostringstream os;
  os << "20 seeds, worst |rate(P_A=0) - rate(no RIS)|=" << fmt("%.2e", worst)
     << (zero_theta ? ", Theta identically zero" : ", Theta NOT zero");
  report(4, zero_theta && worst <= 1e-8, os.str());
}

struct Paired {
  std::map<std::string, std::vector<double>> rates;  // keyed by label, indexed by realization
};

SweepSpec base_sweep(int realizations) {
  SweepSpec s;
  s.base = scenario(16, 2, Reciprocity::non_reciprocal);
  s.base.architecture = Architecture::cw_group;
  s.realizations = realizations;
  s.seed = 20240601;
  s.fading.rician_kappa = 1.0;
  return s;
}

void collect(const SweepResult& r, const std::string& prefix, Paired& out, int realizations) {
  for (const ResultRow& row : r.rows) {
    std::string label = row.scheme;
    if (!prefix.empty()) label = prefix + std::to_string(static_cast<int>(row.value));
    auto& v = out.rates[label];
    v.resize(realizations, std::nan(""));
    v[row.realization] = row.sum_rate;
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

// Mean and standard error of a - b over paired realizations.
std::pair<double, double> paired_diff(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double m = mean(d);
  double ss = 0.0;
  for (double x : d) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (d.size() - 1) / d.size())};
}

void reproduction(int realizations) {
  const auto t0 = Clock::now();
  Paired p;
  std::size_t failed_rows = 0;

  SweepSpec fixed = base_sweep(realizations);
  fixed.axis = Axis::total_power_dbm;
  fixed.values = {30.0};
  fixed.schemes = {"active-cwfc-nr", "active-cwfc-r", "active-star", "no-ris"};
  const SweepResult a = run_sweep(fixed, {jobs(), false});
  failed_rows += a.failures.size();
  collect(a, "", p, realizations);

  SweepSpec groups = base_sweep(realizations);
  groups.axis = Axis::group_size;
  groups.values = {1.0, 2.0, 4.0, 8.0};
  groups.schemes = {"active-cwgc-nr"};
  const SweepResult b = run_sweep(groups, {jobs(), false});
  failed_rows += b.failures.size();
  collect(b, "G=", p, realizations);
  p.rates["G=16"] = p.rates["active-cwfc-nr"];
  const double secs = seconds_since(t0);

  bool complete = failed_rows == 0;
  for (const auto& [k, v] : p.rates) {
    for (double x : v) complete = complete && std::isfinite(x);
  }

  std::printf("  sweep: %d paired realizations, %.1f s, %zu failed rows\n", realizations, secs,
              failed_rows);
  for (const auto& [k, v] : p.rates) std::printf("  mean %-16s %.4f\n", k.c_str(), mean(v));

  // Ordering and ratio.
  const double fully = mean(p.rates["active-cwfc-nr"]);
  const double g2 = mean(p.rates["G=2"]);
  const double star = mean(p.rates["active-star"]);
  const double none = mean(p.rates["no-ris"]);
  const double ratio = fully / none;
  {
    std::ostringstream os;
    os << "cwfc-nr=" << fmt("%.3f", fully) << " > cwgc-nr(G=2)=" << fmt("%.3f", g2)
       << " > star=" << fmt("%.3f", star) << " > no-ris=" << fmt("%.3f", none)
       << ", ratio=" << fmt("%.3f", ratio) << ", " << fmt("%.0f", secs) << " s";
    report(5, complete && fully > g2 && g2 > star && star > none && ratio >= 1.3 && secs < 1800.0,
           os.str());
  }
  // Reciprocal gap.
  {
    const double r = mean(p.rates["active-cwfc-r"]);
    const double gap = std::abs(fully - r) / r;
    std::ostringstream os;
    os << "non-reciprocal=" << fmt("%.3f", fully) << ", reciprocal=" << fmt("%.3f", r)
       << ", relative gap=" << fmt("%.4f", gap);
    report(6, complete && gap <= 0.10, os.str());
  }
  // Group-size monotonicity.
  {
    bool ok = complete;
    std::ostringstream os;
    const int gs[] = {1, 2, 4, 8, 16};
    for (int i = 0; i < 4; ++i) {
      const auto& lo = p.rates["G=" + std::to_string(gs[i])];
      const auto& hi = p.rates["G=" + std::to_string(gs[i + 1])];
      const auto [d, se] = paired_diff(hi, lo);
      ok = ok && d >= -se;
      os << "G" << gs[i] << "->" << gs[i + 1] << ": " << fmt("%+.3f", d) << " (se " << fmt("%.3f", se)
         << ")  ";
    }
    report(7, ok, os.str());
  }
}

void channel_normalization() {
  SystemConfig cfg = scenario(1, 1, Reciprocity::non_reciprocal);
  cfg.n_tx = 1;
  Geometry g;
  std::mt19937_64 rng(99);
  g = sample_users(g, 2, 2, rng);
  FadingSpec f;
  f.rician_kappa = 1.0;
  const double d = distance(g.bs, g.ris);
  const double pl = std::pow(10.0, -path_loss_db(d) / 10.0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = std::norm(draw_channels(g, f, cfg, rng).h_it(0, 0));
    sum += v;
    sum2 += v * v;
  }
  const double m = sum / n;
  const double se = std::sqrt((sum2 - n * m * m) / (n - 1) / n);
  const double z = std::abs(m - pl) / se;
  const double pl300 = path_loss_db(300.0);
  std::ostringstream os;
  os << "E|h|^2/PL=" << fmt("%.4f", m / pl) << " (" << fmt("%.2f", z)
     << " standard errors), PL(300 m)=" << fmt("%.3f", pl300) << " dB";
  report(8, z <= 3.0 && std::abs(pl300 - 112.29) <= 0.01, os.str());
}

void determinism() {
  SweepSpec s = base_sweep(3);
  s.base = scenario(8, 2, Reciprocity::non_reciprocal);
  s.base.architecture = Architecture::cw_group;
  s.axis = Axis::total_power_dbm;
  s.values = {20.0, 30.0};
  s.schemes = {"active-cwfc-nr", "active-cwfc-r", "active-cwgc-nr", "active-cwgc-r", "active-star",
               "no-ris"};
  s.solver.max_sweeps = 50;
  const std::filesystem::path root = std::filesystem::temp_directory_path() / "abdris_acceptance";
  std::filesystem::remove_all(root);
  emit_outputs(s, run_sweep(s, {1, false}), (root / "first").string());
  emit_outputs(s, run_sweep(s, {jobs() + 1, false}), (root / "second").string());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp(root / "first" / "results.csv");
  const std::string b = slurp(root / "second" / "results.csv");
  const std::size_t lines = std::count(a.begin(), a.end(), '\n');
  std::ostringstream os;
  os << lines - 1 << " rows, " << (a == b ? "byte-identical" : "DIFFERENT") << " results.csv";
  report(9, !a.empty() && a == b, os.str());
}

}  // namespace

int main(int argc, char** argv) {
  int realizations = 50;
  if (argc > 1) realizations = std::max(2, std::atoi(argv[1]));
  transform_identities();
  oracle_equivalence();
  monotonicity();
  degenerate_budget();
  reproduction(realizations);
  channel_normalization();
  determinism();
  std::printf("%s: %d criterion failure(s)\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
