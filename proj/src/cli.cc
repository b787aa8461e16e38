#include "dwellcert/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "dwellcert/certificate_io.hpp"
#include "dwellcert/hybrid_sim.hpp"
#include "dwellcert/lpv_model.hpp"
#include "dwellcert/sdp.hpp"
#include "dwellcert/stability.hpp"

namespace dwellcert {

namespace {

// Raised for bad flag combinations found after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string system;
  std::string mode;
  int degree = 2;
  double epsilon = 0.01;
  double dwell = 0.0;
  std::vector<double> nu;  // at most one value; vector marks presence
  std::vector<double> rho_max;
  std::vector<std::string> constants;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string rule = "uniform";
  int multiplier_degree = -1;
  bool no_jump_epsilon = false;
  double max_dwell = SearchOptions{}.max_dwell;
  double rel_tol = SearchOptions{}.rel_tol;
  // sweep
  std::string axis;
  std::vector<double> values;
  // simulate
  std::string cert;
  std::string family;
  double horizon = 0.0;
  double step = 0.01;
  std::vector<double> x0;
};

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

Constants overrides(const Settings& s) {
  Constants c;
  for (const std::string& kv : s.constants) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--const expects NAME=VALUE, got '" + kv + "'");
    try {
      std::size_t used = 0;
      const std::string rhs = kv.substr(eq + 1);
      c[kv.substr(0, eq)] = std::stod(rhs, &used);
      if (used != rhs.size()) throw std::invalid_argument(rhs);
    } catch (const std::logic_error&) {
      throw UsageError("--const value is not a number: '" + kv + "'");
    }
  }
  if (!s.nu.empty()) c["nu"] = s.nu.front();
  if (!s.rho_max.empty()) c["rho_max"] = s.rho_max.front();
  return c;
}

LpvSystem load(const Settings& s, const Constants& c) {
  try {
    return load_system(s.system, c);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

Mode mode_of(const Settings& s) {
  Mode m;
  if (!parse_mode(s.mode, &m)) throw UsageError("unknown mode '" + s.mode + "'");
  return m;
}

CertifyOptions certify_options(const Settings& s) {
  CertifyOptions opt;
  if (s.degree < 0) throw UsageError("--degree must be nonnegative");
  if (!(s.epsilon > 0.0)) throw UsageError("--epsilon must be positive");
  opt.degree = s.degree;
  opt.epsilon = s.epsilon;
  opt.seed = s.seed;
  opt.multiplier_degree = s.multiplier_degree;
  opt.jump_epsilon = !s.no_jump_epsilon;
  if (s.rule == "uniform") {
    opt.rule = MultiplierRule::kUniform;
  } else if (s.rule == "per-constraint") {
    opt.rule = MultiplierRule::kPerConstraint;
  } else {
    throw UsageError("unknown multiplier rule '" + s.rule + "'");
  }
  return opt;
}

SearchOptions search_options(const Settings& s) {
  SearchOptions so;
  if (!(s.max_dwell > 0.0) || !(s.rel_tol > 0.0)) throw UsageError("--max-dwell and --rel-tol must be positive");
  so.max_dwell = s.max_dwell;
  so.rel_tol = s.rel_tol;
  return so;
}

void emit(const Settings& s, const std::string& text, std::ostream& out) {
  if (s.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(s.out);
  if (!f) throw UsageError("cannot write '" + s.out + "'");
  f << text;
}

int exit_for(Outcome o) {
  switch (o) {
    case Outcome::kFeasible:
      return kExitOk;
    case Outcome::kInfeasible:
      return kExitInfeasible;
    default:
      return kExitNumerical;
  }
}

int exit_for(const DwellTimeResult& r) {
  switch (r.status) {
    case SearchStatus::kConverged:
      return r.certificate ? kExitOk : kExitInfeasible;
    case SearchStatus::kHitCap:
      return kExitInfeasible;
    case SearchStatus::kSolverFailure:
      return kExitNumerical;
  }
  return kExitNumerical;
}

Json header(const char* command, const LpvSystem& sys, Mode mode, const CertifyOptions& opt) {
  return {{"command", command},
          {"system", sys.label},
          {"mode", to_string(mode)},
          {"degree", opt.degree},
          {"epsilon", opt.epsilon}};
}

int cmd_certify(const Settings& s, std::ostream& out, std::ostream& err) {
  const Mode mode = mode_of(s);
  const CertifyOptions opt = certify_options(s);
  if (uses_dwell(mode) && !(s.dwell > 0.0)) throw UsageError("mode '" + s.mode + "' needs --dwell > 0");
  const LpvSystem sys = load(s, overrides(s));
  const auto t0 = std::chrono::steady_clock::now();
  const CertifyResult res = certify(sys, mode, uses_dwell(mode) ? s.dwell : 0.0, opt);
  Json doc = header("certify", sys, mode, opt);
  if (uses_dwell(mode)) doc["dwell"] = s.dwell;
  doc["outcome"] = to_string(res.outcome);
  doc["solver"] = to_json(res.stats);
  if (res.certificate) doc["certificate"] = to_json(*res.certificate);
  doc["wall_seconds"] = elapsed_since(t0);
  emit(s, doc.dump(2) + "\n", out);
  err << "certify " << to_string(mode) << ": " << to_string(res.outcome);
  if (!res.stats.message.empty()) err << " (" << res.stats.message << ")";
  if (res.certificate && !res.certificate->verification.passed)
    err << ": " << res.certificate->verification.failure;
  err << "\n";
  return exit_for(res.outcome);
}

int cmd_search(const Settings& s, std::ostream& out, std::ostream& err) {
  const Mode mode = mode_of(s);
  if (!uses_dwell(mode)) throw UsageError("search needs --mode constant or --mode minimum");
  const CertifyOptions opt = certify_options(s);
  const SearchOptions so = search_options(s);
  const LpvSystem sys = load(s, overrides(s));
  const auto t0 = std::chrono::steady_clock::now();
  const DwellTimeResult r = min_dwell_search(sys, mode, opt, so);
  Json doc = header("search", sys, mode, opt);
  doc["result"] = to_json(r);
  doc["wall_seconds"] = elapsed_since(t0);
  emit(s, doc.dump(2) + "\n", out);
  err << "search " << to_string(mode) << ": " << to_string(r.status);
  if (r.certificate) err << ", certified dwell-time " << fmt(r.certified);
  err << ", bracket [" << fmt(r.lower) << ", " << fmt(r.upper) << "], " << r.log.size() << " probes\n";
  return exit_for(r);
}

struct SweepRow {
  std::string status;
  std::string certified;
  double lower = 0.0;
  double upper = 0.0;
  int probes = 0;
  long iterations = 0;
  SolverStats size;
  double seconds = 0.0;
  int code = kExitNumerical;
};

SweepRow sweep_row(const Settings& s, Mode mode, const CertifyOptions& opt, const SearchOptions& so,
                   Constants c, const std::string& key, double value) {
  SweepRow row;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    c[key] = value;
    const LpvSystem sys = load_system(s.system, c);
    if (uses_dwell(mode)) {
      const DwellTimeResult r = min_dwell_search(sys, mode, opt, so);
      row.status = to_string(r.status);
      if (r.certificate) row.certified = fmt(r.certified);
      row.lower = r.lower;
      row.upper = r.upper;
      row.probes = static_cast<int>(r.log.size());
      for (const Probe& p : r.log) row.iterations += p.stats.iterations;
      if (!r.log.empty()) row.size = r.log.back().stats;
      row.code = r.certificate ? kExitOk : exit_for(r);
    } else {
      const CertifyResult r = certify(sys, mode, 0.0, opt);
      row.status = to_string(r.outcome);
      row.probes = 1;
      row.iterations = r.stats.iterations;
      row.size = r.stats;
      row.code = exit_for(r.outcome);
    }
  } catch (const std::exception& e) {
    row.status = "error";
    row.code = kExitNumerical;
  }
  row.seconds = elapsed_since(t0);
  return row;
}

int cmd_sweep(const Settings& s, std::ostream& out, std::ostream& err) {
  const Mode mode = mode_of(s);
  const CertifyOptions opt = certify_options(s);
  const SearchOptions so = search_options(s);
  std::string key;
  if (s.axis == "nu") {
    key = "nu";
  } else if (s.axis == "rho-max") {
    key = "rho_max";
  } else {
    throw UsageError("--axis must be nu or rho-max");
  }
  if (s.values.empty()) throw UsageError("--values must not be empty");
  for (std::size_t k = 1; k < s.values.size(); ++k)
    if (!(s.values[k] > s.values[k - 1])) throw UsageError("--values must be strictly increasing");
  if (s.jobs < 1) throw UsageError("--jobs must be at least 1");
  const Constants c = overrides(s);
  // Validate the file and the axis constant once, before spawning work.
  {
    Constants probe = c;
    probe[key] = s.values.front();
    load(s, probe);
  }

  std::vector<SweepRow> rows(s.values.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < rows.size(); k = next++)
      rows[k] = sweep_row(s, mode, opt, so, c, key, s.values[k]);
  };
  const int threads = std::min<int>(s.jobs, static_cast<int>(rows.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "axis,value,mode,degree,status,certified,lower,upper,probes,iterations,rows,scalars,psd_blocks,"
         "max_block,wall_seconds\n";
  bool any_ok = false;
  bool any_numerical = false;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const SweepRow& r = rows[k];
    any_ok |= r.code == kExitOk;
    any_numerical |= r.code == kExitNumerical;
    csv << s.axis << ',' << fmt(s.values[k]) << ',' << to_string(mode) << ',' << opt.degree << ','
        << r.status << ',' << r.certified << ',' << fmt(r.lower) << ',' << fmt(r.upper) << ','
        << r.probes << ',' << r.iterations << ',' << r.size.rows << ',' << r.size.scalars << ','
        << r.size.psd_blocks << ',' << r.size.max_block << ',' << fmt(r.seconds) << '\n';
    err << s.axis << " = " << fmt(s.values[k]) << ": " << r.status;
    if (!r.certified.empty()) err << ", certified " << r.certified;
    err << "\n";
  }
  emit(s, csv.str(), out);
  if (any_ok) return kExitOk;
  return any_numerical ? kExitNumerical : kExitInfeasible;
}

int cmd_simulate(const Settings& s, std::ostream& out, std::ostream& err) {
  if (s.cert.empty()) throw UsageError("simulate needs --cert");
  const LpvSystem sys = load(s, overrides(s));
  Certificate cert;
  try {
    // Bare certificates and certify/search result documents are accepted.
    Json j = read_json_file(s.cert);
    if (j.contains("result")) j = j.at("result");
    if (j.contains("certificate")) j = j.at("certificate");
    cert = certificate_from_json(j);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  if (cert.s.rows() != sys.n) throw UsageError("certificate size does not match the system");

  Family family = cert.mode == Mode::kConstantDwell ? Family::kConstant : Family::kMinimum;
  if (!s.family.empty() && !parse_family(s.family, &family))
    throw UsageError("--family must be constant or minimum");
  const double dwell = s.dwell > 0.0 ? s.dwell : cert.dwell;
  if (!(dwell > 0.0)) throw UsageError("simulate needs --dwell for a certificate without dwell-time");
  const double horizon = s.horizon > 0.0 ? s.horizon : 50.0 * dwell;
  if (!(s.step > 0.0)) throw UsageError("--step must be positive");
  Eigen::VectorXd x0 = Eigen::VectorXd::Ones(sys.n);
  if (!s.x0.empty()) {
    if (static_cast<int>(s.x0.size()) != sys.n) throw UsageError("--x0 needs one value per state");
    x0 = Eigen::Map<const Eigen::VectorXd>(s.x0.data(), sys.n);
  }

  ParameterTrajectory traj;
  AuditReport rep;
  SimResult sim;
  try {
    traj = generate_trajectory(sys, family, dwell, horizon, s.seed);
    sim = simulate(sys, traj, x0, s.step);
    rep = lyapunov_audit(cert, traj, sim);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!s.out.empty()) {
    std::ofstream f(s.out);
    if (!f) throw UsageError("cannot write '" + s.out + "'");
    write_trace_csv(f, sim, &rep);
  }
  out << "family " << to_string(family) << "\n"
      << "dwell " << fmt(dwell) << "\n"
      << "horizon " << fmt(horizon) << "\n"
      << "samples " << sim.t.size() << "\n"
      << "jumps " << sim.jumps.size() << "\n"
      << "diverged " << (sim.diverged ? "yes" : "no") << "\n"
      << "norm_ratio " << fmt(sim.norm_ratio) << "\n"
      << "max_flow_increase " << fmt(rep.max_flow_increase) << "\n"
      << "max_jump_increase " << fmt(rep.max_jump_increase) << "\n"
      << "nonpositive " << rep.nonpositive << "\n"
      << "violations " << rep.violations << "\n";
  const std::size_t shown = std::min<std::size_t>(rep.details.size(), 20);
  for (std::size_t k = 0; k < shown; ++k) {
    const AuditViolation& v = rep.details[k];
    out << "violation " << to_string(v.kind) << " t=" << fmt(sim.t[static_cast<std::size_t>(v.index)])
        << " value=" << fmt(v.value) << "\n";
  }
  if (rep.details.size() > shown) out << "violation ... " << rep.details.size() - shown << " more\n";
  const bool ok = rep.passed && !sim.diverged;
  out << "audit " << (ok ? "passed" : "failed") << "\n";
  if (!ok) err << "simulate: audit failed\n";
  return ok ? kExitOk : kExitInfeasible;
}

int cmd_dump_sdp(const Settings& s, std::ostream& out, std::ostream& /*err*/) {
  const Mode mode = mode_of(s);
  const CertifyOptions opt = certify_options(s);
  if (uses_dwell(mode) && !(s.dwell > 0.0)) throw UsageError("mode '" + s.mode + "' needs --dwell > 0");
  const LpvSystem sys = load(s, overrides(s));
  const BuiltProgram bp = build_program(sys, mode, uses_dwell(mode) ? s.dwell : 0.0, opt);
  std::ostringstream os;
  sdp::write_sparse(bp.program.problem(), os);
  emit(s, os.str(), out);
  return kExitOk;
}

void add_model_flags(CLI::App* sub, Settings& s) {
  sub->add_option("system", s.system, "System file (.lpv)")->required();
  sub->add_option("--nu", s.nu, "Value of the constant 'nu'")->expected(1);
  sub->add_option("--rho-max", s.rho_max, "Value of the constant 'rho_max'")->expected(1);
  sub->add_option("--const", s.constants, "Constant override NAME=VALUE (repeatable)");
}

void add_program_flags(CLI::App* sub, Settings& s, bool need_mode) {
  auto* m = sub->add_option("--mode", s.mode, "quadratic | robust | constant | minimum");
  if (need_mode) m->required();
  sub->add_option("--degree", s.degree, "Degree of S or P(theta)")->capture_default_str();
  sub->add_option("--epsilon", s.epsilon, "Strictness margin")->capture_default_str();
  sub->add_option("--multiplier-rule", s.rule, "uniform | per-constraint")->capture_default_str();
  sub->add_option("--multiplier-degree", s.multiplier_degree, "Fixed multiplier degree (overrides the rule)");
  sub->add_flag("--no-jump-epsilon", s.no_jump_epsilon, "Drop eps*I from the jump condition");
  sub->add_option("--seed", s.seed, "Seed for sampling checks")->capture_default_str();
}

void add_search_flags(CLI::App* sub, Settings& s) {
  sub->add_option("--max-dwell", s.max_dwell, "Doubling cap")->capture_default_str();
  sub->add_option("--rel-tol", s.rel_tol, "Final bracket width relative to its upper end")
      ->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app("Dwell-time stability certificates for LPV systems", "dwellcert");
  app.require_subcommand(1);

  auto* certify = app.add_subcommand("certify", "Solve one certificate program");
  add_model_flags(certify, s);
  add_program_flags(certify, s, true);
  certify->add_option("--dwell", s.dwell, "Dwell-time (constant and minimum modes)");
  certify->add_option("--out", s.out, "Result document (default: stdout)");

  auto* search = app.add_subcommand("search", "Search for the smallest certifiable dwell-time");
  add_model_flags(search, s);
  add_program_flags(search, s, true);
  add_search_flags(search, s);
  search->add_option("--out", s.out, "Result document (default: stdout)");

  auto* sweep = app.add_subcommand("sweep", "Dwell-time search over a list of constant values");
  add_model_flags(sweep, s);
  add_program_flags(sweep, s, true);
  add_search_flags(sweep, s);
  sweep->add_option("--axis", s.axis, "nu | rho-max")->required();
  sweep->add_option("--values", s.values, "Strictly increasing values")->required()->delimiter(',');
  sweep->add_option("--jobs", s.jobs, "Rows solved concurrently")->capture_default_str();
  sweep->add_option("--out", s.out, "CSV file (default: stdout)");

  auto* sim = app.add_subcommand("simulate", "Simulate random admissible trajectories and audit V");
  add_model_flags(sim, s);
  sim->add_option("--cert", s.cert, "Certificate document")->required();
  sim->add_option("--family", s.family, "constant | minimum (default: from the certificate)");
  sim->add_option("--dwell", s.dwell, "Dwell-time (default: from the certificate)");
  sim->add_option("--horizon", s.horizon, "Horizon (default: 50 dwell-times)");
  sim->add_option("--step", s.step, "Integration step")->capture_default_str();
  sim->add_option("--x0", s.x0, "Initial state (default: all ones)")->delimiter(',');
  sim->add_option("--seed", s.seed, "Trajectory seed")->capture_default_str();
  sim->add_option("--out", s.out, "Trace CSV");

  auto* dump = app.add_subcommand("dump-sdp", "Write the SDP of a certificate program");
  add_model_flags(dump, s);
  add_program_flags(dump, s, true);
  dump->add_option("--dwell", s.dwell, "Dwell-time (constant and minimum modes)");
  dump->add_option("--out", s.out, "Sparse SDP file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (certify->parsed()) return cmd_certify(s, out, err);
    if (search->parsed()) return cmd_search(s, out, err);
    if (sweep->parsed()) return cmd_sweep(s, out, err);
    if (sim->parsed()) return cmd_simulate(s, out, err);
    return cmd_dump_sdp(s, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace dwellcert
