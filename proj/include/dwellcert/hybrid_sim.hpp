#pragma once

// Simulation of LPV systems under piecewise differentiable parameter
// trajectories with dwell-time constrained jumps, and an audit of a
// certificate's Lyapunov function along the simulated trace.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dwellcert/lpv_model.hpp"
#include "dwellcert/stability.hpp"

namespace dwellcert {

enum class Family { kConstant, kMinimum };
const char* to_string(Family f);
/// Accepts "constant" and "minimum".
bool parse_family(std::string_view s, Family* out);

struct TrajectoryOptions {
  /// Minimum dwell-time family draws T_k uniformly from [T, max_dwell_factor * T].
  double max_dwell_factor = 3.0;
  /// Mean time between derivative vertex switches, relative to T.
  double mean_switch_fraction = 0.5;
};

/// Derivative vertex `vertex` (index into vertex_maps) is active from `start`.
struct DerivativeSwitch {
  double start = 0.0;
  int vertex = 0;
};

struct FlowInterval {
  double start = 0.0;
  double end = 0.0;
  Eigen::VectorXd rho0;  // parameter value right after the jump at `start`
  std::vector<DerivativeSwitch> schedule;  // first entry starts at `start`
};

struct ParameterTrajectory {
  Family family = Family::kConstant;
  double dwell = 0.0;
  double horizon = 0.0;
  /// Consecutive intervals covering [0, horizon]; jumps occur at every
  /// interval start except 0.
  std::vector<FlowInterval> intervals;

  std::vector<double> jump_times() const;
};

ParameterTrajectory generate_trajectory(const LpvSystem& sys, Family family, double dwell,
                                        double horizon, std::uint64_t seed,
                                        const TrajectoryOptions& opt = {});

/// Samples of the hybrid trace. At a jump the trace holds two samples with the
/// same time: the pre-jump one and the post-jump one (listed in `jumps`).
struct SimResult {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> rho;
  std::vector<double> tau;
  std::vector<int> jumps;  // indices of post-jump samples
  bool diverged = false;
  double norm_ratio = 0.0;  // |x(end)| / |x0|, 0 when x0 = 0
};

/// Fixed-step RK4 of xdot = A(rho) x together with the parameter dynamics
/// rhodot = mu_v(rho). Rate-box models are clipped at the box hull (and
/// clamped into it after every step); explicit maps are left alone. Steps are subdivided so that jumps and vertex switches fall
/// on step boundaries. Stops early when |x| exceeds 1e12.
SimResult simulate(const LpvSystem& sys, const ParameterTrajectory& traj, const Eigen::VectorXd& x0,
                   double step);

struct AuditViolation {
  enum class Kind { kNonpositive, kFlow, kJump };
  Kind kind = Kind::kFlow;
  int index = 0;       // sample index (the later one for flow steps and jumps)
  double value = 0.0;  // V for kNonpositive, relative increase otherwise
};
const char* to_string(AuditViolation::Kind k);

struct AuditReport {
  std::vector<double> v;        // V along the trace
  double max_flow_increase = 0.0;  // max over flow steps of (V_{i+1} - V_i) / V_i
  double max_jump_increase = 0.0;  // max over jumps of (V(t_k+) - V(t_k)) / V(t_k)
  int nonpositive = 0;             // samples with x != 0 and V <= 0
  int violations = 0;              // samples beyond tolerance
  std::vector<AuditViolation> details;  // in trace order per kind
  bool passed = false;
};

/// V = x^T S(tau, rho) x, with tau clamped to T for minimum dwell-time
/// certificates. Dwell-time certificates must match the trajectory family
/// (std::invalid_argument otherwise); a size mismatch throws DimensionError.
AuditReport lyapunov_audit(const Certificate& cert, const ParameterTrajectory& traj,
                           const SimResult& sim, double rel_tol = 1e-6);

/// Columns t, x1..xn, rho1..rhoN, tau[, V].
void write_trace_csv(std::ostream& out, const SimResult& sim, const AuditReport* audit = nullptr);

}  // namespace dwellcert
