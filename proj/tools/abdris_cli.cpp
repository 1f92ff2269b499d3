// Command-line front end: run sweeps, validate configs, cross-check closed forms.
#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "abdris/errors.hpp"
#include "abdris/experiments.hpp"
#include "abdris/oracle.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInfeasible = 2;
constexpr int kNonConverged = 3;

struct RunArgs {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  int realizations = 0;
  int jobs = 1;
  bool record_timing = false;
};

int cmd_run(const RunArgs& a) {
  abdris::SweepSpec spec;
  try {
    spec = abdris::load_spec(a.config);
    if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
    if (a.realizations > 0) spec.realizations = a.realizations;
    spec.validate();
  } catch (const abdris::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInfeasible;
  }

  const abdris::SweepResult result = abdris::run_sweep(spec, {a.jobs, a.record_timing});
  abdris::emit_outputs(spec, result, a.out);

  std::printf("%-16s %10s %5s %10s %10s\n", "scheme", "value", "n", "mean", "std");
  for (const auto& c : result.summary) {
    std::printf("%-16s %10g %5d %10.4f %10.4f\n", c.scheme.c_str(), c.value, c.n, c.mean, c.std);
  }

  bool infeasible = false;
  bool numerical = false;
  for (const auto& f : result.failures) {
    std::cerr << "failed: " << f.scheme << " value=" << f.value << " realization=" << f.realization
              << " [" << f.kind << "] " << f.message << "\n";
    if (f.kind == "numerical") {
      numerical = true;
    } else {
      infeasible = true;
    }
  }
  std::size_t stalled = 0;
  for (const auto& r : result.rows) stalled += r.converged ? 0 : 1;
  const std::size_t total = result.rows.size() + result.failures.size();
  const double fraction = total == 0 ? 0.0 : static_cast<double>(stalled) / total;
  std::printf("rows=%zu failures=%zu nonconverged=%zu (%.3f)\n", result.rows.size(),
              result.failures.size(), stalled, fraction);

  if (infeasible) return kInfeasible;
  if (fraction > spec.nonconvergence_threshold) return kNonConverged;
  if (numerical) return kError;
  return kOk;
}

int cmd_validate(const std::string& path) {
  try {
    const abdris::SweepSpec spec = abdris::load_spec(path);
    spec.validate();
    std::cout << abdris::spec_to_json(spec).dump(2) << "\n";
    std::size_t cells = spec.schemes.size() * spec.values.size();
    std::cout << "ok: " << cells << " cells x " << spec.realizations << " realizations\n";
    return kOk;
  } catch (const abdris::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInfeasible;
  }
}

int cmd_oracle(const std::string& dims, int trials, std::uint64_t seed) {
  int m = 0, g = 0, k = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(dims);
  if (!(in >> m >> c1 >> g >> c2 >> k) || c1 != ',' || c2 != ',') {
    std::cerr << "--dims expects M,G,K\n";
    return kInfeasible;
  }
  abdris::OracleReport report;
  try {
    report = abdris::oracle_check(m, g, k, trials, seed);
  } catch (const abdris::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kInfeasible;
  }
  std::map<std::string, std::pair<int, int>> tally;
  std::map<std::string, double> worst;
  for (const auto& t : report.trials) {
    auto& [passed, count] = tally[t.update];
    ++count;
    passed += t.pass ? 1 : 0;
    worst[t.update] = std::max(worst[t.update], std::max(t.gap, t.factored_gap));
  }
  for (const auto& [name, pc] : tally) {
    std::printf("%-12s %d/%d pass, worst relative gap %.3e\n", name.c_str(), pc.first, pc.second,
                worst[name]);
  }
  std::printf("%s\n", report.pass ? "oracle-check: PASS" : "oracle-check: FAIL");
  return report.pass ? kOk : kError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active BD-RIS hybrid-mode sum-rate optimizer"};
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "Monte Carlo sweep");
  run_cmd->add_option("--config", run.config, "JSON sweep config")->required();
  run_cmd->add_option("--out", run.out, "output directory")->required();
  run_cmd->add_option("--seed", run.seed, "override master seed");
  run_cmd->add_option("--realizations", run.realizations, "override realization count");
  run_cmd->add_option("--jobs", run.jobs, "worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--record-timing", run.record_timing, "fill wall_ms (breaks byte-identical output)");

  std::string validate_path;
  CLI::App* val_cmd = app.add_subcommand("validate", "check a config file");
  val_cmd->add_option("--config", validate_path, "JSON sweep config")->required();

  std::string dims;
  int trials = 10;
  std::uint64_t seed = 1;
  CLI::App* oracle_cmd = app.add_subcommand("oracle-check", "closed form vs projected gradient");
  oracle_cmd->add_option("--dims", dims, "M,G,K")->required();
  oracle_cmd->add_option("--trials", trials, "random instances per update type")->required();
  oracle_cmd->add_option("--seed", seed, "RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInfeasible;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*val_cmd) return cmd_validate(validate_path);
    if (*oracle_cmd) return cmd_oracle(dims, trials, seed);
  } catch (const abdris::InfeasibleBudget& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
