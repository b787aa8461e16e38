#include <algorithm>
#include <cstdio>
#include <random>

#include <Eigen/Eigenvalues>

#include "dwellcert/stability.hpp"

namespace dwellcert {

namespace {

double max_eig(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double min_eig(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

// Flow left-hand side dS/dtau + sum_i dS/drho_i mu_i + He[S A] at one point,
// maximised over the vertex maps.
class FlowEvaluator {
 public:
  FlowEvaluator(const LpvSystem& sys, const PolyMatrix& s, bool with_clock)
      : sys_(sys), s_(s), rho_(sys.params.vars()), maps_(sys.derivs.vertex_maps(sys.params.count)) {
    if (with_clock) ds_tau_ = s.differentiate(tau_var());
    for (VarId v : rho_) ds_rho_.push_back(s.differentiate(v));
  }

  double operator()(const Assignment& point) const {
    const Eigen::MatrixXd sv = evaluate(s_, point);
    const Eigen::MatrixXd av = evaluate(sys_.a, point);
    Eigen::MatrixXd base = sv * av + av.transpose() * sv;
    if (ds_tau_) base += evaluate(*ds_tau_, point);
    std::vector<Eigen::MatrixXd> grads;
    for (const auto& g : ds_rho_) grads.push_back(evaluate(g, point));
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& mu : maps_) {
      Eigen::MatrixXd m = base;
      for (std::size_t i = 0; i < grads.size(); ++i) m += mu[i].evaluate(point) * grads[i];
      worst = std::max(worst, max_eig(m));
    }
    return worst;
  }

 private:
  const LpvSystem& sys_;
  const PolyMatrix& s_;
  std::vector<VarId> rho_;
  std::vector<std::vector<Polynomial>> maps_;
  std::optional<PolyMatrix> ds_tau_;
  std::vector<PolyMatrix> ds_rho_;
};

Assignment point_at(const Eigen::VectorXd& theta, std::optional<double> tau) {
  Assignment p = parameter_assignment(theta);
  if (tau) p[tau_var()] = *tau;
  return p;
}

std::string fmt(const char* what, double v, double bound) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s %.3e exceeds %.3e", what, v, bound);
  return buf;
}

}  // namespace

VerificationReport verify_certificate(const LpvSystem& sys, const Certificate& cert,
                                      const CertifyOptions& opt) {
  VerificationReport rep;
  std::mt19937_64 rng(opt.seed);
  const bool dwell = uses_dwell(cert.mode);
  const double t_bar = cert.dwell;
  const double eps = cert.epsilon;
  const double flow_bound = -0.5 * eps;
  const double jump_bound = 1e-7;
  const double pos_bound = 0.5 * eps;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  rep.flow_max_eigenvalue = -std::numeric_limits<double>::infinity();
  const FlowEvaluator flow(sys, cert.s, dwell);
  for (int k = 0; k < opt.flow_samples; ++k) {
    const Eigen::VectorXd theta = sample_parameter(sys.params, rng);
    std::optional<double> tau;
    if (dwell) tau = t_bar * unit(rng);
    rep.flow_max_eigenvalue = std::max(rep.flow_max_eigenvalue, flow(point_at(theta, tau)));
    ++rep.flow_samples;
  }

  if (cert.mode == Mode::kMinimumDwell) {
    rep.frozen_max_eigenvalue = -std::numeric_limits<double>::infinity();
    const PolyMatrix frozen_s = cert.s.substitute(tau_var(), Polynomial(t_bar));
    const FlowEvaluator frozen(sys, frozen_s, false);
    for (int k = 0; k < opt.flow_samples; ++k) {
      const Eigen::VectorXd theta = sample_parameter(sys.params, rng);
      rep.frozen_max_eigenvalue = std::max(rep.frozen_max_eigenvalue, frozen(point_at(theta, {})));
      ++rep.frozen_samples;
    }
  }

  if (dwell) {
    rep.jump_max_eigenvalue = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < opt.jump_samples; ++k) {
      const Eigen::VectorXd theta = sample_parameter(sys.params, rng);
      const Eigen::VectorXd eta = sample_parameter(sys.params, rng);
      const Eigen::MatrixXd m =
          evaluate(cert.s, point_at(theta, 0.0)) - evaluate(cert.s, point_at(eta, t_bar));
      rep.jump_max_eigenvalue = std::max(rep.jump_max_eigenvalue, max_eig(m));
      ++rep.jump_samples;
    }
  }

  rep.positivity_min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int k = 0; k < opt.positivity_samples; ++k) {
    const Eigen::VectorXd theta = sample_parameter(sys.params, rng);
    std::optional<double> tau;
    if (dwell) tau = t_bar * unit(rng);
    rep.positivity_min_eigenvalue =
        std::min(rep.positivity_min_eigenvalue, min_eig(evaluate(cert.s, point_at(theta, tau))));
    ++rep.positivity_samples;
  }

  rep.passed = true;
  if (rep.flow_samples > 0 && rep.flow_max_eigenvalue > flow_bound) {
    rep.passed = false;
    rep.failure = fmt("flow eigenvalue", rep.flow_max_eigenvalue, flow_bound);
  } else if (rep.frozen_samples > 0 && rep.frozen_max_eigenvalue > flow_bound) {
    rep.passed = false;
    rep.failure = fmt("frozen flow eigenvalue", rep.frozen_max_eigenvalue, flow_bound);
  } else if (rep.jump_samples > 0 && rep.jump_max_eigenvalue > jump_bound) {
    rep.passed = false;
    rep.failure = fmt("jump eigenvalue", rep.jump_max_eigenvalue, jump_bound);
  } else if (rep.positivity_samples > 0 && rep.positivity_min_eigenvalue < pos_bound) {
    rep.passed = false;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "positivity eigenvalue %.3e below %.3e", rep.positivity_min_eigenvalue,
                  pos_bound);
    rep.failure = buf;
  }
  return rep;
}

}  // namespace dwellcert
