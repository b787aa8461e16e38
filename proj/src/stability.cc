#include "dwellcert/stability.hpp"

#include <chrono>

namespace dwellcert {

namespace {

int even_up(int d) { return d + (d % 2); }

Polynomial var(VarId v) { return Polynomial::variable(v); }

std::vector<VarId> eta_vars(int count) {
  std::vector<VarId> out;
  for (int i = 1; i <= count; ++i) out.push_back(VarId::named("eta" + std::to_string(i)));
  return out;
}

std::vector<VarId> concat(std::vector<VarId> a, const std::vector<VarId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Multiplier bookkeeping shared by all constraints of one program.
class Builder {
 public:
  Builder(sos::Program& prog, const LpvSystem& sys, const CertifyOptions& opt, int deg_s)
      : prog_(prog), sys_(sys), opt_(opt), n_(sys.n) {
    uniform_top_ = even_up(deg_s + std::max(sys.a.degree(), 1) + 1);
  }

  // Degree of a multiplier for a constraint term g (or h) of degree deg_g.
  int degree(int constraint_degree, int deg_g, bool sos) {
    int d;
    if (opt_.multiplier_degree >= 0) {
      d = opt_.multiplier_degree;
    } else {
      const int top =
          opt_.rule == MultiplierRule::kUniform ? uniform_top_ : even_up(constraint_degree);
      d = std::max(0, top - deg_g);
    }
    if (sos) d -= d % 2;
    max_degree_ = std::max(max_degree_, d);
    return d;
  }

  // target - sum_i Sigma_i g_i - sum_j Lambda_j h_j, with the set
  // description expressed in `set_vars` (rho or eta) and multipliers in `vars`.
  AffinePolyMatrix localise(AffinePolyMatrix target, int constraint_degree,
                            const std::vector<VarId>& vars, const std::vector<VarId>& set_vars) {
    const auto rho = sys_.params.vars();
    auto rename = [&](Polynomial p) {
      if (set_vars == rho) return p;
      for (std::size_t i = 0; i < rho.size(); ++i) p = p.substitute(rho[i], var(set_vars[i]));
      return p;
    };
    for (const Polynomial& g0 : sys_.params.inequalities) {
      const Polynomial g = rename(g0);
      const auto m = prog_.add_sos_multiplier(n_, vars, degree(constraint_degree, g.degree(), true));
      target -= m.scaled_by(g);
    }
    for (const Polynomial& h0 : sys_.params.equalities) {
      const Polynomial h = rename(h0);
      const auto m = prog_.add_symmetric_multiplier(n_, vars, degree(constraint_degree, h.degree(), false));
      target -= m.scaled_by(h);
    }
    return target;
  }

  int max_degree() const { return max_degree_; }

  AffinePolyMatrix eps_identity() const { return to_affine(PolyMatrix::identity(n_) * opt_.epsilon); }

 private:
  sos::Program& prog_;
  const LpvSystem& sys_;
  const CertifyOptions& opt_;
  int n_;
  int uniform_top_;
  int max_degree_ = 0;
};

// sum_i dP/drho_i * mu_i(rho)
AffinePolyMatrix directional(const AffinePolyMatrix& p, const std::vector<VarId>& rho,
                             const std::vector<Polynomial>& mu) {
  AffinePolyMatrix out(p.rows(), p.cols());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (mu[i].is_zero()) continue;
    out += p.differentiate(rho[i]).scaled_by(mu[i]);
  }
  return out;
}

std::string vertex_label(const std::string& base, std::size_t k, std::size_t count) {
  return count > 1 ? base + "[" + std::to_string(k) + "]" : base;
}

}  // namespace

const char* to_string(Mode m) {
  switch (m) {
    case Mode::kQuadratic:
      return "quadratic";
    case Mode::kRobust:
      return "robust";
    case Mode::kConstantDwell:
      return "constant";
    case Mode::kMinimumDwell:
      return "minimum";
  }
  return "?";
}

bool parse_mode(std::string_view s, Mode* out) {
  for (Mode m : {Mode::kQuadratic, Mode::kRobust, Mode::kConstantDwell, Mode::kMinimumDwell})
    if (s == to_string(m)) {
      *out = m;
      return true;
    }
  return false;
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kFeasible:
      return "feasible";
    case Outcome::kInfeasible:
      return "infeasible";
    case Outcome::kNumericalFailure:
      return "numerical-failure";
    case Outcome::kVerificationFailed:
      return "verification-failed";
  }
  return "?";
}

BuiltProgram build_program(const LpvSystem& sys, Mode mode, double dwell, const CertifyOptions& opt) {
  if (uses_dwell(mode) && !(dwell > 0.0)) throw std::invalid_argument("dwell-time must be positive");
  if (opt.degree < 0) throw std::invalid_argument("degree must be non-negative");
  BuiltProgram bp;
  bp.dwell = dwell;
  sos::Program& prog = bp.program;
  const int n = sys.n;
  const auto rho = sys.params.vars();
  const auto vmaps = sys.derivs.vertex_maps(sys.params.count);
  const AffinePolyMatrix a = to_affine(sys.a);
  const int deg_a = sys.a.degree();

  if (mode == Mode::kQuadratic) {
    Builder b(prog, sys, opt, 0);
    bp.s = prog.declare_unknown(n, {}, 0);
    prog.add_sos_constraint(bp.s - b.eps_identity(), "positivity");
    const AffinePolyMatrix flow = -1.0 * he(bp.s * sys.a) - b.eps_identity();
    prog.add_sos_constraint(b.localise(flow, deg_a, rho, rho), "flow", rho);
    bp.max_multiplier_degree = b.max_degree();
    return bp;
  }

  if (mode == Mode::kRobust) {
    const int d = opt.degree;
    Builder b(prog, sys, opt, d);
    bp.s = prog.declare_unknown(n, rho, d);
    prog.add_sos_constraint(b.localise(bp.s - b.eps_identity(), d, rho, rho), "positivity", rho);
    for (std::size_t k = 0; k < vmaps.size(); ++k) {
      const AffinePolyMatrix flow =
          -1.0 * directional(bp.s, rho, vmaps[k]) - he(bp.s * sys.a) - b.eps_identity();
      prog.add_sos_constraint(b.localise(flow, flow.degree(), rho, rho),
                              vertex_label("flow", k, vmaps.size()), rho);
    }
    bp.max_multiplier_degree = b.max_degree();
    return bp;
  }

  // Dwell-time modes; the clock variable carries s = tau / T in [0, 1].
  const int d = opt.degree;
  const VarId s = tau_var();
  const auto s_rho = concat({s}, rho);
  Builder b(prog, sys, opt, d);
  bp.s = prog.declare_unknown(n, s_rho, d);
  const AffinePolyMatrix& sm = bp.s;

  prog.add_sos_constraint(b.localise(sm - b.eps_identity(), d, s_rho, rho), "positivity", s_rho);

  const Polynomial clock_set = var(s) * (1.0 - var(s));
  const AffinePolyMatrix ds = sm.differentiate(s) * (1.0 / dwell);
  for (std::size_t k = 0; k < vmaps.size(); ++k) {
    AffinePolyMatrix flow = -1.0 * directional(sm, rho, vmaps[k]) - ds - he(sm * sys.a) - b.eps_identity();
    const int deg = flow.degree();
    flow = b.localise(flow, deg, s_rho, rho);
    const auto clock_mult = prog.add_sos_multiplier(n, s_rho, b.degree(deg, 2, true));
    flow -= clock_mult.scaled_by(clock_set);
    prog.add_sos_constraint(flow, vertex_label("flow", k, vmaps.size()), s_rho);
  }

  const auto eta = eta_vars(sys.params.count);
  const auto rho_eta = concat(rho, eta);
  AffinePolyMatrix after = sm.substitute(s, Polynomial(1.0));
  for (std::size_t i = 0; i < rho.size(); ++i) after = after.substitute(rho[i], var(eta[i]));
  AffinePolyMatrix jump = after - sm.substitute(s, Polynomial(0.0));
  if (opt.jump_epsilon) jump -= b.eps_identity();
  const int deg_jump = jump.degree();
  jump = b.localise(jump, deg_jump, rho_eta, rho);
  jump = b.localise(jump, deg_jump, rho_eta, eta);
  prog.add_sos_constraint(jump, "jump", rho_eta);

  if (mode == Mode::kMinimumDwell) {
    const AffinePolyMatrix frozen_s = sm.substitute(s, Polynomial(1.0));
    for (std::size_t k = 0; k < vmaps.size(); ++k) {
      const AffinePolyMatrix frozen =
          -1.0 * directional(frozen_s, rho, vmaps[k]) - he(frozen_s * sys.a) - b.eps_identity();
      prog.add_sos_constraint(b.localise(frozen, frozen.degree(), rho, rho),
                              vertex_label("frozen", k, vmaps.size()), rho);
    }
  }
  bp.max_multiplier_degree = b.max_degree();
  return bp;
}

CertifyResult certify(const LpvSystem& sys, Mode mode, double dwell, const CertifyOptions& opt) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  const BuiltProgram bp = build_program(sys, mode, dwell, opt);
  const sdp::Problem& problem = bp.program.problem();
  const auto t1 = Clock::now();
  const sdp::Solution sol = sdp::solve(problem, opt.sdp);
  const auto t2 = Clock::now();

  CertifyResult r;
  SolverStats& st = r.stats;
  st.status = sol.status;
  st.iterations = sol.iterations;
  st.max_equality_violation = sol.max_equality_violation;
  st.min_psd_eigenvalue = sol.min_psd_eigenvalue;
  st.rows = static_cast<int>(problem.constraints.size());
  st.scalars = problem.num_scalar_variables();
  st.psd_blocks = problem.num_psd_blocks();
  for (const auto& blk : problem.blocks) st.max_block = std::max(st.max_block, blk.size);
  st.assembly_seconds = std::chrono::duration<double>(t1 - t0).count();
  st.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  st.message = sol.message;

  if (sol.status == sdp::Status::kInfeasible) {
    r.outcome = Outcome::kInfeasible;
    return r;
  }
  if (sol.status != sdp::Status::kFeasible) {
    r.outcome = Outcome::kNumericalFailure;
    return r;
  }
  Certificate cert;
  cert.mode = mode;
  cert.dwell = uses_dwell(mode) ? dwell : 0.0;
  cert.epsilon = opt.epsilon;
  cert.degree = mode == Mode::kQuadratic ? 0 : opt.degree;
  cert.s = bp.program.value(bp.s, sol);
  if (uses_dwell(mode)) cert.s = cert.s.substitute(tau_var(), var(tau_var()) * (1.0 / dwell));
  cert.stats = st;
  cert.verification = verify_certificate(sys, cert, opt);
  r.outcome = cert.verification.passed ? Outcome::kFeasible : Outcome::kVerificationFailed;
  r.certificate = std::move(cert);
  return r;
}

CertifyResult certify_quadratic(const LpvSystem& sys, const CertifyOptions& opt) {
  return certify(sys, Mode::kQuadratic, 0.0, opt);
}
CertifyResult certify_robust(const LpvSystem& sys, const CertifyOptions& opt) {
  return certify(sys, Mode::kRobust, 0.0, opt);
}
CertifyResult certify_constant_dwell(const LpvSystem& sys, double dwell, const CertifyOptions& opt) {
  return certify(sys, Mode::kConstantDwell, dwell, opt);
}
CertifyResult certify_minimum_dwell(const LpvSystem& sys, double dwell, const CertifyOptions& opt) {
  return certify(sys, Mode::kMinimumDwell, dwell, opt);
}

}  // namespace dwellcert
