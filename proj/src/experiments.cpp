#include "abdris/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "abdris/errors.hpp"

namespace abdris {

using nlohmann::json;

std::string to_string(Axis a) {
  switch (a) {
    case Axis::total_power_dbm: return "total_power_dbm";
    case Axis::n_cells: return "n_cells";
    case Axis::group_size: return "group_size";
  }
  return "unknown";
}

Axis parse_axis(const std::string& s) {
  if (s == "total_power_dbm") return Axis::total_power_dbm;
  if (s == "n_cells") return Axis::n_cells;
  if (s == "group_size") return Axis::group_size;
  throw ConfigError("unknown axis '" + s + "' (expected total_power_dbm, n_cells or group_size)");
}

const std::vector<std::string>& scheme_ids() {
  static const std::vector<std::string> ids = {"active-cwfc-nr", "active-cwfc-r", "active-cwgc-nr",
                                               "active-cwgc-r",  "active-star",   "no-ris"};
  return ids;
}

Scheme parse_scheme(const std::string& id) {
  Scheme s;
  s.id = id;
  if (id == "no-ris") {
    s.ris = false;
  } else if (id == "active-star") {
    s.reciprocity = Reciprocity::reciprocal;
    s.architecture = Architecture::cw_single;
  } else if (id == "active-cwfc-nr" || id == "active-cwfc-r") {
    s.architecture = Architecture::cw_fully;
    s.reciprocity = id.ends_with("-r") ? Reciprocity::reciprocal : Reciprocity::non_reciprocal;
  } else if (id == "active-cwgc-nr" || id == "active-cwgc-r") {
    s.architecture = Architecture::cw_group;
    s.reciprocity = id.ends_with("-r") ? Reciprocity::reciprocal : Reciprocity::non_reciprocal;
  } else {
    throw ConfigError("unknown scheme '" + id + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Spec

namespace {

int integral(double v, const std::string& what) {
  if (!(v >= 1.0) || v != std::floor(v) || v > 1e6) {
    throw ConfigError(what + " value must be a positive integer, got " + std::to_string(v));
  }
  return static_cast<int>(v);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

Point2 read_point(const json& j, const char* key, Point2 def) {
  if (!j.contains(key)) return def;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(std::string("'") + key + "' must be a two-element array of meters");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

SystemConfig SweepSpec::resolve(const Scheme& scheme, double value) const {
  SystemConfig cfg = base;
  switch (axis) {
    case Axis::total_power_dbm: cfg.p_total_dbm = value; break;
    case Axis::n_cells: cfg.n_cells = integral(value, "n_cells"); break;
    case Axis::group_size: cfg.group_size = integral(value, "group_size"); break;
  }
  cfg.reciprocity = scheme.reciprocity;
  cfg.architecture = scheme.architecture;
  if (!scheme.ris || scheme.architecture == Architecture::cw_fully) cfg.group_size = cfg.n_cells;
  if (scheme.architecture == Architecture::cw_single) cfg.group_size = 1;
  return cfg;
}

void SweepSpec::validate() const {
  if (values.empty()) throw ConfigError("values must be nonempty");
  if (schemes.empty()) throw ConfigError("schemes must be nonempty");
  if (realizations < 1) throw ConfigError("realizations must be >= 1");
  if (!(fading.rician_kappa >= 0.0)) throw ConfigError("rician_kappa must be >= 0");
  if (!(fading.wavelength_m > 0.0)) throw ConfigError("carrier_wavelength_m must be positive");
  if (!(geometry.user_radius >= 0.0)) throw ConfigError("user_radius_m must be >= 0");
  if (!(nonconvergence_threshold >= 0.0 && nonconvergence_threshold <= 1.0)) {
    throw ConfigError("nonconvergence_threshold must lie in [0, 1]");
  }
  if (solver.max_sweeps < 1 || solver.starts < 1 || !(solver.tolerance > 0.0)) {
    throw ConfigError("solver needs max_sweeps >= 1, starts >= 1 and tolerance > 0");
  }
  std::set<std::string> seen;
  for (const std::string& id : schemes) {
    if (!seen.insert(id).second) throw ConfigError("scheme '" + id + "' listed twice");
    const Scheme s = parse_scheme(id);
    for (double v : values) {
      try {
        resolve(s, v).validate();
      } catch (const ConfigError& e) {
        throw ConfigError("scheme " + id + " at " + to_string(axis) + "=" + std::to_string(v) +
                          ": " + e.what());
      }
    }
  }
}

SweepSpec parse_spec(const json& j) {
  check_keys(j, "config", {"axis", "values", "schemes", "realizations", "seed", "system", "geometry",
                           "fading", "solver", "nonconvergence_threshold"});
  SweepSpec s;
  std::string axis = "total_power_dbm";
  read(j, "axis", axis);
  s.axis = parse_axis(axis);
  read(j, "values", s.values);
  read(j, "schemes", s.schemes);
  read(j, "realizations", s.realizations);
  read(j, "seed", s.seed);
  read(j, "nonconvergence_threshold", s.nonconvergence_threshold);

  if (j.contains("system")) {
    const json& sys = j.at("system");
    check_keys(sys, "system", {"n_tx", "n_cells", "group_size", "k_r", "k_t", "p_total_dbm",
                               "tx_fraction", "sigma_i_dbm", "sigma_r_dbm"});
    read(sys, "n_tx", s.base.n_tx);
    read(sys, "n_cells", s.base.n_cells);
    read(sys, "group_size", s.base.group_size);
    read(sys, "k_r", s.base.k_r);
    read(sys, "k_t", s.base.k_t);
    read(sys, "p_total_dbm", s.base.p_total_dbm);
    read(sys, "tx_fraction", s.base.tx_fraction);
    read(sys, "sigma_i_dbm", s.base.sigma_i_dbm);
    read(sys, "sigma_r_dbm", s.base.sigma_r_dbm);
  }
  s.base.architecture = Architecture::cw_group;
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    check_keys(g, "geometry", {"bs_pos_m", "ris_pos_m", "reflect_center_m", "transmit_center_m",
                               "user_radius_m"});
    s.geometry.bs = read_point(g, "bs_pos_m", s.geometry.bs);
    s.geometry.ris = read_point(g, "ris_pos_m", s.geometry.ris);
    s.geometry.reflect_center = read_point(g, "reflect_center_m", s.geometry.reflect_center);
    s.geometry.transmit_center = read_point(g, "transmit_center_m", s.geometry.transmit_center);
    read(g, "user_radius_m", s.geometry.user_radius);
  }
  if (j.contains("fading")) {
    const json& f = j.at("fading");
    check_keys(f, "fading", {"rician_kappa", "antenna_spacing_wavelengths", "carrier_wavelength_m"});
    if (f.contains("rician_kappa") && f.at("rician_kappa").is_string()) {
      if (f.at("rician_kappa").get<std::string>() != "inf") {
        throw ConfigError("rician_kappa must be a number or \"inf\"");
      }
      s.fading.rician_kappa = std::numeric_limits<double>::infinity();
    } else {
      read(f, "rician_kappa", s.fading.rician_kappa);
    }
    read(f, "antenna_spacing_wavelengths", s.fading.antenna_spacing);
    read(f, "carrier_wavelength_m", s.fading.wavelength_m);
  }
  if (j.contains("solver")) {
    const json& o = j.at("solver");
    check_keys(o, "solver", {"max_sweeps", "tolerance", "starts", "nested_start"});
    read(o, "max_sweeps", s.solver.max_sweeps);
    read(o, "tolerance", s.solver.tolerance);
    read(o, "starts", s.solver.starts);
    read(o, "nested_start", s.solver.nested_start);
  }
  return s;
}

SweepSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_spec(j);
}

json spec_to_json(const SweepSpec& s) {
  json kappa = std::isinf(s.fading.rician_kappa) ? json("inf") : json(s.fading.rician_kappa);
  return {{"axis", to_string(s.axis)},
          {"values", s.values},
          {"schemes", s.schemes},
          {"realizations", s.realizations},
          {"seed", s.seed},
          {"nonconvergence_threshold", s.nonconvergence_threshold},
          {"system",
           {{"n_tx", s.base.n_tx},
            {"n_cells", s.base.n_cells},
            {"group_size", s.base.group_size},
            {"k_r", s.base.k_r},
            {"k_t", s.base.k_t},
            {"p_total_dbm", s.base.p_total_dbm},
            {"tx_fraction", s.base.tx_fraction},
            {"sigma_i_dbm", s.base.sigma_i_dbm},
            {"sigma_r_dbm", s.base.sigma_r_dbm}}},
          {"geometry",
           {{"bs_pos_m", {s.geometry.bs.x, s.geometry.bs.y}},
            {"ris_pos_m", {s.geometry.ris.x, s.geometry.ris.y}},
            {"reflect_center_m", {s.geometry.reflect_center.x, s.geometry.reflect_center.y}},
            {"transmit_center_m", {s.geometry.transmit_center.x, s.geometry.transmit_center.y}},
            {"user_radius_m", s.geometry.user_radius}}},
          {"fading",
           {{"rician_kappa", kappa},
            {"antenna_spacing_wavelengths", s.fading.antenna_spacing},
            {"carrier_wavelength_m", s.fading.wavelength_m}}},
          {"solver",
           {{"max_sweeps", s.solver.max_sweeps},
            {"tolerance", s.solver.tolerance},
            {"starts", s.solver.starts},
            {"nested_start", s.solver.nested_start}}}};
}

// ---------------------------------------------------------------------------
// Sweep

std::uint64_t channel_seed(std::uint64_t master, int n_cells) {
  return mix_seed(mix_seed(master, 0x6368616e6e656cULL), static_cast<std::uint64_t>(n_cells));
}

std::uint64_t solver_seed(std::uint64_t master, const std::string& scheme, double value,
                          int realization) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : scheme) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof bits);
  return mix_seed(mix_seed(mix_seed(master, h), bits), static_cast<std::uint64_t>(realization));
}

namespace {

struct Task {
  Scheme scheme;
  double value;
  int realization;
};

struct Outcome {
  bool ok = false;
  ResultRow row;
  RowFailure failure;
};

Outcome run_task(const SweepSpec& spec, const Task& t, bool record_timing) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const SystemConfig cfg = spec.resolve(t.scheme, t.value);
    const System sys = t.scheme.ris ? System(cfg) : System::without_ris(cfg);
    FadingSpec fading = spec.fading;
    fading.seed = channel_seed(spec.seed, cfg.n_cells);
    const ChannelSet ch = draw_realization(spec.geometry, fading, cfg, t.realization);
    BcdOptions opts = spec.solver;
    opts.seed = solver_seed(spec.seed, t.scheme.id, t.value, t.realization);
    const BcdResult r = bcd_solve(sys, ch, opts);

    out.row.scheme = t.scheme.id;
    out.row.axis = to_string(spec.axis);
    out.row.value = t.value;
    out.row.realization = t.realization;
    out.row.seed = opts.seed;
    out.row.sum_rate = r.sum_rate;
    out.row.iterations = r.report.iterations;
    out.row.converged = r.report.converged;
    if (record_timing) {
      out.row.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    out.ok = true;
  } catch (const std::exception& e) {
    out.failure.scheme = t.scheme.id;
    out.failure.value = t.value;
    out.failure.realization = t.realization;
    out.failure.message = e.what();
    if (dynamic_cast<const InfeasibleBudget*>(&e)) {
      out.failure.kind = "infeasible";
    } else if (dynamic_cast<const ConfigError*>(&e)) {
      out.failure.kind = "config";
    } else {
      out.failure.kind = "numerical";
    }
  }
  return out;
}

}  // namespace

SweepResult run_sweep(const SweepSpec& spec, const RunOptions& run) {
  spec.validate();
  std::vector<Task> tasks;
  for (const std::string& id : spec.schemes) {
    const Scheme s = parse_scheme(id);
    for (double v : spec.values) {
      for (int r = 0; r < spec.realizations; ++r) tasks.push_back({s, v, r});
    }
  }

  std::vector<Outcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      outcomes[i] = run_task(spec, tasks[i], run.record_timing);
    }
  };
  const int jobs = std::max(1, std::min<int>(run.jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  SweepResult result;
  for (Outcome& o : outcomes) {
    if (o.ok) {
      result.rows.push_back(std::move(o.row));
    } else {
      result.failures.push_back(std::move(o.failure));
    }
  }
  result.summary = summarize(result.rows);
  return result;
}

std::vector<SummaryCell> summarize(const std::vector<ResultRow>& rows) {
  std::vector<SummaryCell> cells;
  std::map<std::pair<std::string, double>, std::size_t> index;
  std::vector<std::vector<double>> samples;
  for (const ResultRow& r : rows) {
    const auto key = std::make_pair(r.scheme, r.value);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, cells.size()).first;
      SummaryCell c;
      c.scheme = r.scheme;
      c.value = r.value;
      cells.push_back(c);
      samples.emplace_back();
    }
    samples[it->second].push_back(r.sum_rate);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::vector<double>& x = samples[i];
    SummaryCell& c = cells[i];
    c.n = static_cast<int>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    c.mean = sum / c.n;
    double ss = 0.0;
    for (double v : x) ss += (v - c.mean) * (v - c.mean);
    c.std = c.n > 1 ? std::sqrt(ss / (c.n - 1)) : 0.0;
    double half = 0.0;
    if (c.n > 1) {
      const boost::math::students_t dist(c.n - 1);
      half = boost::math::quantile(boost::math::complement(dist, 0.025)) * c.std / std::sqrt(c.n);
    }
    c.ci_low = c.mean - half;
    c.ci_high = c.mean + half;
  }
  return cells;
}

// ---------------------------------------------------------------------------
// Output

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << "scheme,axis,value,realization,seed,sum_rate,iterations,converged,wall_ms\n";
  for (const ResultRow& r : rows) {
    os << r.scheme << ',' << r.axis << ',' << num(r.value) << ',' << r.realization << ',' << r.seed
       << ',' << num(r.sum_rate) << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << ','
       << fixed3(r.wall_ms) << '\n';
  }
  return os.str();
}

json rows_to_json(const std::vector<ResultRow>& rows) {
  json arr = json::array();
  for (const ResultRow& r : rows) {
    arr.push_back({{"scheme", r.scheme},
                   {"axis", r.axis},
                   {"value", r.value},
                   {"realization", r.realization},
                   {"seed", r.seed},
                   {"sum_rate", r.sum_rate},
                   {"iterations", r.iterations},
                   {"converged", r.converged},
                   {"wall_ms", r.wall_ms}});
  }
  return arr;
}

std::vector<ResultRow> rows_from_json(const json& j) {
  std::vector<ResultRow> rows;
  for (const json& o : j) {
    ResultRow r;
    r.scheme = o.at("scheme").get<std::string>();
    r.axis = o.at("axis").get<std::string>();
    r.value = o.at("value").get<double>();
    r.realization = o.at("realization").get<int>();
    r.seed = o.at("seed").get<std::uint64_t>();
    r.sum_rate = o.at("sum_rate").get<double>();
    r.iterations = o.at("iterations").get<int>();
    r.converged = o.at("converged").get<bool>();
    r.wall_ms = o.at("wall_ms").get<double>();
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_outputs(const SweepSpec& spec, const SweepResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "plot", ec);
  if (ec) throw std::runtime_error("cannot create output directory " + root.string() + ": " + ec.message());

  write_file(root / "results.csv", rows_to_csv(result.rows));

  json failures = json::array();
  for (const RowFailure& f : result.failures) {
    failures.push_back({{"scheme", f.scheme},
                        {"value", f.value},
                        {"realization", f.realization},
                        {"kind", f.kind},
                        {"message", f.message}});
  }
  json summary = json::array();
  std::ostringstream sc;
  sc << "scheme,value,n,mean,std,ci95_low,ci95_high\n";
  for (const SummaryCell& c : result.summary) {
    summary.push_back({{"scheme", c.scheme},
                       {"value", c.value},
                       {"n", c.n},
                       {"mean", c.mean},
                       {"std", c.std},
                       {"ci95_low", c.ci_low},
                       {"ci95_high", c.ci_high}});
    sc << c.scheme << ',' << num(c.value) << ',' << c.n << ',' << num(c.mean) << ',' << num(c.std)
       << ',' << num(c.ci_low) << ',' << num(c.ci_high) << '\n';
  }
  const json doc = {{"config", spec_to_json(spec)},
                    {"rows", rows_to_json(result.rows)},
                    {"failures", failures},
                    {"summary", summary}};
  write_file(root / "results.json", doc.dump(2) + "\n");
  write_file(root / "summary.csv", sc.str());

  std::map<std::string, std::ostringstream> dat;
  for (const SummaryCell& c : result.summary) {
    std::ostringstream& os = dat[c.scheme];
    if (os.tellp() == 0) os << "# " << to_string(spec.axis) << " mean std ci95_low ci95_high n\n";
    os << num(c.value) << ' ' << num(c.mean) << ' ' << num(c.std) << ' ' << num(c.ci_low) << ' '
       << num(c.ci_high) << ' ' << c.n << '\n';
  }
  for (auto& [scheme, os] : dat) write_file(root / "plot" / (scheme + ".dat"), os.str());
}

}  // namespace abdris
