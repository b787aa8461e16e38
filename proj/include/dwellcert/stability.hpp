#pragma once

// Stability certificates for LPV systems: quadratic, robust (parameter
// dependent) and dwell-time (clock and parameter dependent) Lyapunov
// matrices computed through SOS programs, with sampled verification and a
// bisection search for the smallest certifiable dwell-time.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dwellcert/lpv_model.hpp"
#include "dwellcert/polynomial.hpp"
#include "dwellcert/sdp.hpp"
#include "dwellcert/sos.hpp"

namespace dwellcert {

enum class Mode { kQuadratic, kRobust, kConstantDwell, kMinimumDwell };

const char* to_string(Mode m);
/// Accepts "quadratic", "robust", "constant", "minimum".
bool parse_mode(std::string_view s, Mode* out);
inline bool uses_dwell(Mode m) { return m == Mode::kConstantDwell || m == Mode::kMinimumDwell; }

/// How multiplier degrees are chosen.
///  kUniform: every multiplier satisfies deg(mult * g) <= deg(S) + max(deg A, 1) + 1,
///            rounded up to even.
///  kPerConstraint: deg(mult * g) <= the even closure of the degree of the
///            constraint it enters.
enum class MultiplierRule { kUniform, kPerConstraint };

struct CertifyOptions {
  double epsilon = 0.01;
  /// Degree of S (dwell modes) or P(theta) (robust). Quadratic ignores it.
  int degree = 2;
  /// Fixed multiplier degree; negative means "use `rule`".
  int multiplier_degree = -1;
  MultiplierRule rule = MultiplierRule::kUniform;
  /// Subtract eps*I in the jump constraint.
  bool jump_epsilon = true;
  sdp::Options sdp;
  int flow_samples = 1000;
  int jump_samples = 1000;
  int positivity_samples = 100;
  std::uint64_t seed = 0;
};

struct VerificationReport {
  int flow_samples = 0;
  double flow_max_eigenvalue = 0.0;  // of the flow left-hand side; want <= -eps/2
  int frozen_samples = 0;
  double frozen_max_eigenvalue = 0.0;  // minimum dwell: flow frozen at tau = T
  int jump_samples = 0;
  double jump_max_eigenvalue = 0.0;  // of S(0,theta) - S(T,eta); want <= 1e-7
  int positivity_samples = 0;
  double positivity_min_eigenvalue = 0.0;  // of S; want >= eps/2
  bool passed = false;
  std::string failure;
};

struct SolverStats {
  sdp::Status status = sdp::Status::kNumericalFailure;
  int iterations = 0;
  double max_equality_violation = 0.0;
  double min_psd_eigenvalue = 0.0;
  int rows = 0;         // equality constraints
  long scalars = 0;     // scalar SDP unknowns
  int psd_blocks = 0;
  int max_block = 0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
  std::string message;
};

struct Certificate {
  Mode mode = Mode::kQuadratic;
  double dwell = 0.0;  // T (dwell modes only)
  double epsilon = 0.0;
  int degree = 0;
  /// S(tau, rho) with tau in physical time units; tau-free for quadratic and
  /// robust certificates.
  PolyMatrix s;
  VerificationReport verification;
  SolverStats stats;
};

enum class Outcome { kFeasible, kInfeasible, kNumericalFailure, kVerificationFailed };
const char* to_string(Outcome o);

struct CertifyResult {
  Outcome outcome = Outcome::kNumericalFailure;
  std::optional<Certificate> certificate;  // set when the SDP was feasible
  SolverStats stats;
};

/// The SOS program behind a certificate, before solving. In the dwell modes
/// the clock is rescaled to tau/T in [0, 1] inside the program.
struct BuiltProgram {
  sos::Program program;
  AffinePolyMatrix s;
  double dwell = 0.0;
  int max_multiplier_degree = 0;  // over all SOS and free multipliers
};

BuiltProgram build_program(const LpvSystem& sys, Mode mode, double dwell, const CertifyOptions& opt);

CertifyResult certify(const LpvSystem& sys, Mode mode, double dwell, const CertifyOptions& opt);
CertifyResult certify_quadratic(const LpvSystem& sys, const CertifyOptions& opt);
CertifyResult certify_robust(const LpvSystem& sys, const CertifyOptions& opt);
CertifyResult certify_constant_dwell(const LpvSystem& sys, double dwell, const CertifyOptions& opt);
CertifyResult certify_minimum_dwell(const LpvSystem& sys, double dwell, const CertifyOptions& opt);

/// Seeded sampling check of the certificate conditions, independent of the
/// SOS machinery.
VerificationReport verify_certificate(const LpvSystem& sys, const Certificate& cert,
                                      const CertifyOptions& opt);

struct SearchOptions {
  double start = 1.0;
  double min_dwell = 1e-2;   // halving stops here
  double max_dwell = 1048576.0;  // doubling cap, 2^20
  double rel_tol = 1e-2;     // final bracket width relative to its upper end
};

struct Probe {
  double dwell = 0.0;
  Outcome outcome = Outcome::kNumericalFailure;
  SolverStats stats;
};

enum class SearchStatus { kConverged, kHitCap, kSolverFailure };
const char* to_string(SearchStatus s);

struct DwellTimeResult {
  SearchStatus status = SearchStatus::kHitCap;
  double certified = 0.0;  // smallest verified-feasible T (0 if none)
  double lower = 0.0;      // final bracket
  double upper = 0.0;
  std::vector<Probe> log;
  std::optional<Certificate> certificate;
};

/// Doubling/halving from `start` to bracket the threshold, then bisection.
/// Numerical failures and failed verifications count as "not certified"
/// for the bracket and are kept in the log.
DwellTimeResult min_dwell_search(const LpvSystem& sys, Mode mode, const CertifyOptions& opt,
                                 const SearchOptions& search = {});

}  // namespace dwellcert
