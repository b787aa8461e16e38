#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "dwellcert/stability.hpp"

using namespace dwellcert;

namespace {

const std::string kData = DWELLCERT_DATA_DIR;

LpvSystem example1(double rho_max, double nu) {
  return load_system(kData + "/example1.lpv", {{"rho_max", rho_max}, {"nu", nu}});
}

LpvSystem example2(double nu) { return load_system(kData + "/example2.lpv", {{"nu", nu}}); }

// Largest real part over the frozen family on a grid, as an independent
// stability oracle.
double frozen_abscissa(const LpvSystem& sys, const std::vector<Eigen::VectorXd>& grid) {
  double worst = -1e300;
  for (const auto& th : grid) {
    const Eigen::MatrixXd a = evaluate(sys.a, parameter_assignment(th));
    worst = std::max(worst, Eigen::EigenSolver<Eigen::MatrixXd>(a).eigenvalues().real().maxCoeff());
  }
  return worst;
}

}  // namespace

TEST_CASE("mode names round trip") {
  for (Mode m : {Mode::kQuadratic, Mode::kRobust, Mode::kConstantDwell, Mode::kMinimumDwell}) {
    Mode back;
    REQUIRE(parse_mode(to_string(m), &back));
    CHECK(back == m);
  }
  Mode m;
  CHECK_FALSE(parse_mode("periodic", &m));
  CHECK(uses_dwell(Mode::kMinimumDwell));
  CHECK_FALSE(uses_dwell(Mode::kRobust));
}

TEST_CASE("quadratic stability of the toy system brackets its known threshold") {
  CertifyOptions opt;
  const auto below = certify_quadratic(example1(3.7, 0.0), opt);
  CHECK(below.outcome == Outcome::kFeasible);
  REQUIRE(below.certificate);
  CHECK(below.certificate->verification.passed);
  CHECK(certify_quadratic(example1(3.95, 0.0), opt).outcome == Outcome::kInfeasible);
  const BuiltProgram bp = build_program(example1(3.7, 0.0), Mode::kQuadratic, 0.0, opt);
  CHECK(bp.max_multiplier_degree <= 2);
  CHECK(bp.s.variables().empty());
}

TEST_CASE("a stable constant system is certified in every mode") {
  const LpvSystem sys = parse_system(
      "[system]\nn = 2\n[matrix]\n-1, 0\n0, -2\n[parameters]\nN = 0\n");
  CertifyOptions opt;
  CHECK(certify_quadratic(sys, opt).outcome == Outcome::kFeasible);
  CHECK(certify_robust(sys, opt).outcome == Outcome::kFeasible);
  CHECK(certify_constant_dwell(sys, 0.5, opt).outcome == Outcome::kFeasible);
  CHECK(certify_minimum_dwell(sys, 0.5, opt).outcome == Outcome::kFeasible);
}

TEST_CASE("unstable constant system is rejected") {
  const LpvSystem sys = parse_system("[system]\nn = 1\n[matrix]\n0.5\n[parameters]\nN = 0\n");
  CertifyOptions opt;
  CHECK(certify_quadratic(sys, opt).outcome == Outcome::kInfeasible);
  CHECK(certify_minimum_dwell(sys, 1.0, opt).outcome == Outcome::kInfeasible);
}

TEST_CASE("robust certificate of degree zero agrees with the quadratic one") {
  CertifyOptions opt;
  opt.degree = 0;
  for (double rho_max : {3.0, 3.7, 3.95, 5.0}) {
    const LpvSystem sys = example1(rho_max, 0.5);
    CHECK_MESSAGE(certify_robust(sys, opt).outcome == certify_quadratic(sys, opt).outcome,
                  "rho_max=" << rho_max);
  }
}

TEST_CASE("robust certificates get harder with the rate bound") {
  CertifyOptions opt;
  opt.degree = 2;
  CHECK(certify_robust(example1(6.0, 0.0), opt).outcome == Outcome::kFeasible);
  CHECK(certify_robust(example1(6.0, 100.0), opt).outcome == Outcome::kInfeasible);
}

TEST_CASE("program structure of the dwell-time modes") {
  CertifyOptions opt;
  const BuiltProgram cst = build_program(example1(6.0, 0.5), Mode::kConstantDwell, 1.0, opt);
  std::vector<std::string> labels;
  for (const auto& c : cst.program.constraints()) labels.push_back(c.label);
  CHECK(labels == std::vector<std::string>{"positivity", "flow[0]", "flow[1]", "jump"});

  const BuiltProgram mdt = build_program(example1(6.0, 0.0), Mode::kMinimumDwell, 1.0, opt);
  labels.clear();
  for (const auto& c : mdt.program.constraints()) labels.push_back(c.label);
  // nu = 0 collapses the two rate vertices.
  CHECK(labels == std::vector<std::string>{"positivity", "flow", "jump", "frozen"});
  CHECK(mdt.s.degree() == 2);
  CHECK(mdt.s.is_symmetric());

  CHECK_THROWS_AS(build_program(example1(6.0, 0.0), Mode::kMinimumDwell, 0.0, opt),
                  std::invalid_argument);
}

TEST_CASE("minimum dwell-time certificate on the toy system") {
  CertifyOptions opt;
  const LpvSystem sys = example1(6.0, 0.5);
  const auto ok = certify_minimum_dwell(sys, 1.0, opt);
  REQUIRE(ok.outcome == Outcome::kFeasible);
  const Certificate& cert = *ok.certificate;
  CHECK(cert.dwell == 1.0);
  CHECK(cert.verification.passed);
  CHECK(cert.verification.flow_samples == 1000);
  CHECK(cert.verification.frozen_samples == 1000);
  CHECK(cert.verification.jump_samples == 1000);
  CHECK(cert.verification.positivity_samples == 100);

  // Independent check of the jump and flow conditions with finite
  // differences in tau along straight parameter segments.
  const double h = 1e-5;
  for (double theta : {0.0, 1.3, 4.2, 6.0}) {
    for (double eta : {0.0, 2.5, 6.0}) {
      const Eigen::MatrixXd jump = evaluate(cert.s, {{tau_var(), 0.0}, {rho_var(1), theta}}) -
                                   evaluate(cert.s, {{tau_var(), 1.0}, {rho_var(1), eta}});
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(jump).eigenvalues().maxCoeff() <= 1e-7);
    }
    for (double t : {0.1, 0.5, 0.9}) {
      for (double rate : {-0.5, 0.5}) {
        auto at = [&](double dt) {
          const double th = std::clamp(theta + rate * dt, 0.0, 6.0);
          return evaluate(cert.s, {{tau_var(), t + dt}, {rho_var(1), th}});
        };
        if (theta + rate * h > 6.0 || theta + rate * h < 0.0 || theta - rate * h > 6.0 ||
            theta - rate * h < 0.0)
          continue;
        const Eigen::MatrixXd sdot = (at(h) - at(-h)) / (2 * h);
        const Eigen::MatrixXd a = evaluate(sys.a, {{rho_var(1), theta}});
        const Eigen::MatrixXd s0 = at(0.0);
        const Eigen::MatrixXd flow = sdot + s0 * a + a.transpose() * s0;
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(flow).eigenvalues().maxCoeff() <
              -0.5 * opt.epsilon);
      }
    }
  }
  CHECK(certify_minimum_dwell(sys, 0.3, opt).outcome == Outcome::kInfeasible);
}

TEST_CASE("verification rejects a perturbed certificate") {
  CertifyOptions opt;
  const LpvSystem sys = example1(6.0, 0.5);
  auto res = certify_constant_dwell(sys, 1.0, opt);
  REQUIRE(res.outcome == Outcome::kFeasible);
  Certificate bad = *res.certificate;
  bad.s(0, 0) += Polynomial::variable(tau_var()) * 10.0;
  const VerificationReport rep = verify_certificate(sys, bad, opt);
  CHECK_FALSE(rep.passed);
  CHECK_FALSE(rep.failure.empty());
}

TEST_CASE("fourth-order example has unstable frozen members") {
  const LpvSystem sys = example2(0.0);
  std::vector<Eigen::VectorXd> grid;
  for (int k = 0; k < 360; ++k) {
    const double b = 2 * M_PI * k / 360.0;
    grid.push_back(Eigen::Vector2d(std::cos(b), std::sin(b)));
  }
  // At rho = (1, 0) the spectrum contains 5/4.
  CHECK(frozen_abscissa(sys, grid) == doctest::Approx(1.25).epsilon(1e-9));
  // No frozen-Hurwitz family means no minimum dwell-time certificate.
  CertifyOptions opt;
  CHECK(certify_minimum_dwell(sys, 2.7282, opt).outcome == Outcome::kInfeasible);
}

TEST_CASE("dwell-time search on the toy system") {
  CertifyOptions opt;
  const LpvSystem sys = example1(6.0, 0.5);
  const DwellTimeResult r = min_dwell_search(sys, Mode::kMinimumDwell, opt);
  CHECK(r.status == SearchStatus::kConverged);
  REQUIRE(r.certificate);
  CHECK(r.certificate->dwell == r.certified);
  CHECK(r.certified == r.upper);
  CHECK(r.upper - r.lower <= 1e-2 * r.upper);
  for (const Probe& p : r.log) {
    if (p.outcome == Outcome::kFeasible) CHECK(p.dwell >= r.certified);
    if (p.outcome == Outcome::kInfeasible) CHECK(p.dwell <= r.lower);
  }
  CHECK_THROWS_AS(min_dwell_search(sys, Mode::kQuadratic, opt), std::invalid_argument);
}

TEST_CASE("search reports the cap when nothing is certifiable") {
  const LpvSystem sys = parse_system("[system]\nn = 1\n[matrix]\n0.5\n[parameters]\nN = 0\n");
  SearchOptions so;
  so.max_dwell = 8.0;
  const DwellTimeResult r = min_dwell_search(sys, Mode::kConstantDwell, CertifyOptions{}, so);
  CHECK(r.status == SearchStatus::kHitCap);
  CHECK_FALSE(r.certificate);
  CHECK(r.log.size() == 4);  // 1, 2, 4, 8
}

TEST_CASE("clock-free constant dwell-time certificate reduces to the quadratic one") {
  // With deg S = 0 the jump condition reads S(0) - S(0) >= 0, which is only
  // satisfiable without the eps margin; the flow condition is then the
  // quadratic one.
  CertifyOptions opt;
  opt.degree = 0;
  opt.jump_epsilon = false;
  for (double rho_max : {3.0, 3.7, 3.95, 5.0}) {
    const LpvSystem sys = example1(rho_max, 0.5);
    CHECK_MESSAGE(certify_constant_dwell(sys, 0.8, opt).outcome == certify_quadratic(sys, opt).outcome,
                  "rho_max=" << rho_max);
  }
  opt.jump_epsilon = true;
  CHECK(certify_constant_dwell(example1(3.0, 0.5), 0.8, opt).outcome == Outcome::kInfeasible);
}
