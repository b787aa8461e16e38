#include "dwellcert/hybrid_sim.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <stdexcept>

namespace dwellcert {

namespace {

// Polynomial matrix evaluated from a dense value vector, avoiding the map
// based Assignment in the integrator's inner loop.
class FastMatrix {
 public:
  FastMatrix(const PolyMatrix& m, const std::vector<VarId>& vars) : rows_(m.rows()), cols_(m.cols()) {
    entries_.resize(static_cast<std::size_t>(rows_ * cols_));
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j)
        for (const auto& [mono, c] : m(i, j).terms()) {
          Term t{c, {}};
          for (const auto& [v, e] : mono.factors()) {
            const auto it = std::find(vars.begin(), vars.end(), v);
            if (it == vars.end()) throw std::invalid_argument("unexpected variable '" + v.name() + "'");
            t.powers.emplace_back(static_cast<int>(it - vars.begin()), e);
          }
          entries_[static_cast<std::size_t>(i * cols_ + j)].push_back(std::move(t));
        }
  }

  Eigen::MatrixXd operator()(const Eigen::VectorXd& values) const {
    Eigen::MatrixXd out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) {
        double s = 0.0;
        for (const Term& t : entries_[static_cast<std::size_t>(i * cols_ + j)]) {
          double p = t.coefficient;
          for (const auto& [slot, e] : t.powers)
            for (int k = 0; k < e; ++k) p *= values[slot];
          s += p;
        }
        out(i, j) = s;
      }
    return out;
  }

 private:
  struct Term {
    double coefficient;
    std::vector<std::pair<int, int>> powers;
  };
  int rows_;
  int cols_;
  std::vector<std::vector<Term>> entries_;
};

FastMatrix map_matrix(const std::vector<Polynomial>& mu, const std::vector<VarId>& vars) {
  PolyMatrix m(static_cast<int>(mu.size()), 1);
  for (std::size_t i = 0; i < mu.size(); ++i) m(static_cast<int>(i), 0) = mu[i];
  return FastMatrix(m, vars);
}

}  // namespace

const char* to_string(AuditViolation::Kind k) {
  switch (k) {
    case AuditViolation::Kind::kNonpositive:
      return "nonpositive";
    case AuditViolation::Kind::kFlow:
      return "flow";
    case AuditViolation::Kind::kJump:
      return "jump";
  }
  return "?";
}

const char* to_string(Family f) { return f == Family::kConstant ? "constant" : "minimum"; }

bool parse_family(std::string_view s, Family* out) {
  if (s == "constant") {
    *out = Family::kConstant;
    return true;
  }
  if (s == "minimum") {
    *out = Family::kMinimum;
    return true;
  }
  return false;
}

std::vector<double> ParameterTrajectory::jump_times() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < intervals.size(); ++k) out.push_back(intervals[k].start);
  return out;
}

ParameterTrajectory generate_trajectory(const LpvSystem& sys, Family family, double dwell,
                                        double horizon, std::uint64_t seed,
                                        const TrajectoryOptions& opt) {
  if (!(dwell > 0.0)) throw std::invalid_argument("dwell-time must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(opt.max_dwell_factor >= 1.0) || !(opt.mean_switch_fraction > 0.0))
    throw std::invalid_argument("bad trajectory options");
  std::mt19937_64 rng(seed);
  const int vertices = static_cast<int>(sys.derivs.vertex_maps(sys.params.count).size());
  std::uniform_int_distribution<int> pick(0, std::max(vertices, 1) - 1);
  std::exponential_distribution<double> wait(1.0 / (opt.mean_switch_fraction * dwell));
  std::uniform_real_distribution<double> length(dwell, opt.max_dwell_factor * dwell);

  ParameterTrajectory traj;
  traj.family = family;
  traj.dwell = dwell;
  traj.horizon = horizon;
  double start = 0.0;
  for (int k = 0;; ++k) {
    FlowInterval iv;
    iv.start = start;
    double end = family == Family::kConstant ? (k + 1) * dwell : start + length(rng);
    if (end >= horizon * (1.0 - 1e-12)) end = horizon;
    iv.end = end;
    iv.rho0 = sample_parameter(sys.params, rng);
    for (double s = start; s < end; s += wait(rng)) iv.schedule.push_back({s, pick(rng)});
    traj.intervals.push_back(std::move(iv));
    if (end == horizon) break;
    start = end;
  }
  return traj;
}

SimResult simulate(const LpvSystem& sys, const ParameterTrajectory& traj, const Eigen::VectorXd& x0,
                   double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (x0.size() != sys.n) throw DimensionError("initial state has the wrong size");
  if (!x0.allFinite()) throw std::invalid_argument("initial state is not finite");
  const auto rho_vars = sys.params.vars();
  const int np = sys.params.count;
  const FastMatrix a(sys.a, rho_vars);
  std::vector<FastMatrix> maps;
  for (const auto& mu : sys.derivs.vertex_maps(np)) maps.push_back(map_matrix(mu, rho_vars));
  const std::vector<Interval>& box = sys.params.box;
  // Rate boxes can push the parameter out of its box hull; explicit maps are
  // expected to keep the set invariant and are integrated unclipped.
  const bool clip = sys.derivs.kind == DerivativeModel::Kind::kBox;

  auto rate = [&](const FastMatrix* mu, const Eigen::VectorXd& rho) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(np);
    if (!mu) return d;
    d = (*mu)(rho).col(0);
    if (!clip) return d;
    for (int i = 0; i < np; ++i) {
      if (rho[i] <= box[i].lo && d[i] < 0.0) d[i] = 0.0;
      if (rho[i] >= box[i].hi && d[i] > 0.0) d[i] = 0.0;
    }
    return d;
  };

  SimResult sim;
  const double x0_norm = x0.norm();
  auto record = [&](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& rho, double tau) {
    sim.t.push_back(t);
    sim.x.push_back(x);
    sim.rho.push_back(rho);
    sim.tau.push_back(tau);
  };

  Eigen::VectorXd x = x0;
  for (std::size_t k = 0; k < traj.intervals.size() && !sim.diverged; ++k) {
    const FlowInterval& iv = traj.intervals[k];
    Eigen::VectorXd rho = iv.rho0;
    if (k > 0) sim.jumps.push_back(static_cast<int>(sim.t.size()));
    record(iv.start, x, rho, 0.0);
    for (std::size_t j = 0; j < iv.schedule.size() && !sim.diverged; ++j) {
      const double s0 = iv.schedule[j].start;
      const double s1 = j + 1 < iv.schedule.size() ? iv.schedule[j + 1].start : iv.end;
      const FastMatrix* mu = maps.empty() ? nullptr : &maps[static_cast<std::size_t>(iv.schedule[j].vertex)];
      const int steps = std::max(1, static_cast<int>(std::ceil((s1 - s0) / step - 1e-9)));
      const double h = (s1 - s0) / steps;
      for (int i = 1; i <= steps; ++i) {
        const Eigen::VectorXd k1x = a(rho) * x, k1r = rate(mu, rho);
        const Eigen::VectorXd r2 = rho + 0.5 * h * k1r, x2 = x + 0.5 * h * k1x;
        const Eigen::VectorXd k2x = a(r2) * x2, k2r = rate(mu, r2);
        const Eigen::VectorXd r3 = rho + 0.5 * h * k2r, x3 = x + 0.5 * h * k2x;
        const Eigen::VectorXd k3x = a(r3) * x3, k3r = rate(mu, r3);
        const Eigen::VectorXd r4 = rho + h * k3r, x4 = x + h * k3x;
        const Eigen::VectorXd k4x = a(r4) * x4, k4r = rate(mu, r4);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        rho += h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r);
        if (clip)
          for (int p = 0; p < np; ++p) rho[p] = std::clamp(rho[p], box[p].lo, box[p].hi);
        const double t = i == steps ? s1 : s0 + i * h;
        record(t, x, rho, t - iv.start);
        if (!(x.norm() <= 1e12)) {
          sim.diverged = true;
          break;
        }
      }
    }
  }
  sim.norm_ratio = x0_norm > 0.0 ? sim.x.back().norm() / x0_norm : 0.0;
  return sim;
}

AuditReport lyapunov_audit(const Certificate& cert, const ParameterTrajectory& traj,
                           const SimResult& sim, double rel_tol) {
  if (cert.mode == Mode::kConstantDwell && traj.family != Family::kConstant)
    throw std::invalid_argument("constant dwell-time certificate needs a constant dwell-time trajectory");
  if (cert.mode == Mode::kMinimumDwell && traj.family != Family::kMinimum)
    throw std::invalid_argument("minimum dwell-time certificate needs a minimum dwell-time trajectory");
  if (!sim.x.empty() && cert.s.rows() != sim.x.front().size())
    throw DimensionError("certificate size does not match the state dimension");
  const int np = sim.rho.empty() ? 0 : static_cast<int>(sim.rho.front().size());
  std::vector<VarId> vars;
  for (int i = 1; i <= np; ++i) vars.push_back(rho_var(i));
  vars.push_back(tau_var());
  const FastMatrix s(cert.s, vars);
  const bool clamp = cert.mode == Mode::kMinimumDwell;

  AuditReport rep;
  rep.v.resize(sim.t.size());
  Eigen::VectorXd point(np + 1);
  for (std::size_t i = 0; i < sim.t.size(); ++i) {
    point.head(np) = sim.rho[i];
    point[np] = clamp ? std::min(sim.tau[i], cert.dwell) : sim.tau[i];
    rep.v[i] = sim.x[i].dot(s(point) * sim.x[i]);
    if (rep.v[i] <= 0.0 && sim.x[i].norm() > 0.0) {
      ++rep.nonpositive;
      rep.details.push_back({AuditViolation::Kind::kNonpositive, static_cast<int>(i), rep.v[i]});
    }
  }
  rep.violations = rep.nonpositive;

  std::vector<bool> is_jump(sim.t.size(), false);
  for (int j : sim.jumps) is_jump[static_cast<std::size_t>(j)] = true;
  auto relative = [](double before, double after) {
    const double inc = after - before;
    if (inc <= 0.0) return inc / std::max(std::abs(before), std::numeric_limits<double>::min());
    return before > 0.0 ? inc / before : std::numeric_limits<double>::infinity();
  };
  rep.max_flow_increase = -std::numeric_limits<double>::infinity();
  rep.max_jump_increase = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < sim.t.size(); ++i) {
    if (sim.x[i].norm() == 0.0) continue;
    const double r = relative(rep.v[i], rep.v[i + 1]);
    if (is_jump[i + 1]) {
      rep.max_jump_increase = std::max(rep.max_jump_increase, r);
    } else {
      rep.max_flow_increase = std::max(rep.max_flow_increase, r);
    }
    if (r > rel_tol) {
      ++rep.violations;
      rep.details.push_back({is_jump[i + 1] ? AuditViolation::Kind::kJump : AuditViolation::Kind::kFlow,
                             static_cast<int>(i + 1), r});
    }
  }
  if (!std::isfinite(rep.max_flow_increase) && rep.max_flow_increase < 0) rep.max_flow_increase = 0.0;
  if (!std::isfinite(rep.max_jump_increase) && rep.max_jump_increase < 0) rep.max_jump_increase = 0.0;
  rep.passed = rep.violations == 0;
  return rep;
}

void write_trace_csv(std::ostream& out, const SimResult& sim, const AuditReport* audit) {
  const int n = sim.x.empty() ? 0 : static_cast<int>(sim.x.front().size());
  const int np = sim.rho.empty() ? 0 : static_cast<int>(sim.rho.front().size());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  for (int i = 1; i <= np; ++i) out << ",rho" << i;
  out << ",tau";
  if (audit) out << ",V";
  out << "\n";
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(17);
  for (std::size_t k = 0; k < sim.t.size(); ++k) {
    out << sim.t[k];
    for (int i = 0; i < n; ++i) out << "," << sim.x[k][i];
    for (int i = 0; i < np; ++i) out << "," << sim.rho[k][i];
    out << "," << sim.tau[k];
    if (audit) out << "," << audit->v[k];
    out << "\n";
  }
  out.flags(flags);
  out.precision(prec);
}

}  // namespace dwellcert
