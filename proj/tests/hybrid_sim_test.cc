#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dwellcert/certificate_io.hpp"
#include "dwellcert/hybrid_sim.hpp"

using namespace dwellcert;

namespace {

const std::string kData = DWELLCERT_DATA_DIR;

LpvSystem example1(double rho_max, double nu) {
  return load_system(kData + "/example1.lpv", {{"rho_max", rho_max}, {"nu", nu}});
}

}  // namespace

TEST_CASE("family names round trip") {
  Family f;
  REQUIRE(parse_family("constant", &f));
  CHECK(f == Family::kConstant);
  REQUIRE(parse_family(to_string(Family::kMinimum), &f));
  CHECK(f == Family::kMinimum);
  CHECK_FALSE(parse_family("periodic", &f));
}

TEST_CASE("linear decay matches the closed form") {
  const LpvSystem sys = parse_system("[system]\nn = 2\n[matrix]\n-1, 0\n0, -1\n[parameters]\nN = 0\n");
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kConstant, 0.7, 3.0, 1);
  const SimResult sim = simulate(sys, traj, Eigen::Vector2d(1.0, -2.0), 0.01);
  for (std::size_t k = 0; k < sim.t.size(); ++k)
    CHECK(sim.x[k][1] == doctest::Approx(-2.0 * std::exp(-sim.t[k])).epsilon(1e-6));
  CHECK(sim.t.back() == 3.0);
  CHECK(sim.norm_ratio == doctest::Approx(std::exp(-3.0)).epsilon(1e-6));
}

TEST_CASE("frozen toy system decays at its spectral rate") {
  // At rho = 0 and nu = 0 the matrix is [0 1; -2 -1] with eigenvalues
  // -1/2 +- i sqrt(7)/2; the state is bounded by a constant times e^{-t/2}.
  const LpvSystem sys = example1(0.0, 0.0);
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 1.0, 20.0, 3);
  const SimResult sim = simulate(sys, traj, Eigen::Vector2d(1.0, 0.0), 0.005);
  for (std::size_t k = 0; k < sim.t.size(); ++k) CHECK(sim.x[k].norm() <= 3.0 * std::exp(-0.5 * sim.t[k]));
  CHECK(sim.x.back().norm() >= 0.01 * std::exp(-0.5 * 20.0));
}

TEST_CASE("zero state stays at zero") {
  const LpvSystem sys = example1(6.0, 0.5);
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 0.5, 5.0, 9);
  const SimResult sim = simulate(sys, traj, Eigen::Vector2d::Zero(), 0.01);
  for (const auto& x : sim.x) CHECK(x.norm() == 0.0);
  CHECK(sim.norm_ratio == 0.0);
}

TEST_CASE("constant family jumps every dwell-time") {
  const LpvSystem sys = example1(6.0, 0.5);
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kConstant, 0.4, 2.0, 5);
  const auto jumps = traj.jump_times();
  REQUIRE(jumps.size() == 4);
  for (std::size_t k = 0; k < jumps.size(); ++k) CHECK(jumps[k] == doctest::Approx(0.4 * (k + 1)));
  const SimResult sim = simulate(sys, traj, Eigen::Vector2d(1.0, 1.0), 0.01);
  REQUIRE(sim.jumps.size() == 4);
  for (int j : sim.jumps) {
    CHECK(sim.t[j] == sim.t[j - 1]);
    CHECK(sim.x[j] == sim.x[j - 1]);
    CHECK(sim.tau[j] == 0.0);
  }
  for (const auto& r : sim.rho) CHECK((r[0] >= 0.0 && r[0] <= 6.0));
}

TEST_CASE("minimum family respects the dwell-time bound") {
  const LpvSystem sys = example1(6.0, 0.5);
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 0.4, 50.0, 11);
  for (std::size_t k = 0; k + 1 < traj.intervals.size(); ++k) {
    const double len = traj.intervals[k].end - traj.intervals[k].start;
    CHECK(len >= 0.4);
    CHECK(len <= 1.2);
  }
  CHECK(traj.intervals.back().end == 50.0);
  CHECK_THROWS_AS(generate_trajectory(sys, Family::kMinimum, 0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("rotating parameter stays on the circle") {
  const LpvSystem sys = load_system(kData + "/example2.lpv", {{"nu", 0.5}});
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 1.0, 10.0, 2);
  const SimResult sim = simulate(sys, traj, Eigen::Vector4d(1, 0, 0, 0), 0.01);
  for (const auto& r : sim.rho) CHECK(std::abs(r.norm() - 1.0) <= 1e-6);
}

TEST_CASE("audit of a certified trace") {
  CertifyOptions opt;
  const LpvSystem sys = example1(6.0, 0.5);
  const auto res = certify_minimum_dwell(sys, 1.0, opt);
  REQUIRE(res.certificate);
  const Certificate& cert = *res.certificate;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 1.0, 50.0, seed);
    const SimResult sim = simulate(sys, traj, Eigen::Vector2d(1.0, 0.5), 0.01);
    const AuditReport rep = lyapunov_audit(cert, traj, sim);
    CHECK(rep.passed);
    CHECK(rep.max_flow_increase <= 1e-6);
    CHECK(rep.max_jump_increase <= 1e-6);
    CHECK(sim.norm_ratio <= 1e-3);
  }
  Certificate flipped = cert;
  flipped.s = flipped.s * -1.0;
  const ParameterTrajectory traj = generate_trajectory(sys, Family::kMinimum, 1.0, 5.0, 0);
  const SimResult sim = simulate(sys, traj, Eigen::Vector2d(1.0, 0.5), 0.01);
  const AuditReport bad = lyapunov_audit(flipped, traj, sim);
  CHECK_FALSE(bad.passed);
  CHECK(bad.nonpositive == static_cast<int>(sim.t.size()));

  const ParameterTrajectory cst = generate_trajectory(sys, Family::kConstant, 1.0, 5.0, 0);
  CHECK_THROWS_AS(lyapunov_audit(cert, cst, simulate(sys, cst, Eigen::Vector2d(1, 0), 0.01)),
                  std::invalid_argument);

  std::ostringstream csv;
  write_trace_csv(csv, sim, &bad);
  CHECK(csv.str().rfind("t,x1,x2,rho1,tau,V\n", 0) == 0);
}

TEST_CASE("certificate json round trip") {
  CertifyOptions opt;
  const LpvSystem sys = example1(6.0, 0.5);
  const auto res = certify_constant_dwell(sys, 1.0, opt);
  REQUIRE(res.certificate);
  const Json j = to_json(*res.certificate);
  const Certificate back = certificate_from_json(Json::parse(j.dump()));
  CHECK(back.mode == Mode::kConstantDwell);
  CHECK(back.dwell == 1.0);
  CHECK(back.degree == res.certificate->degree);
  for (double t : {0.0, 0.3, 1.0})
    for (double r : {0.0, 2.0, 6.0}) {
      const Assignment at{{tau_var(), t}, {rho_var(1), r}};
      CHECK((evaluate(back.s, at) - evaluate(res.certificate->s, at)).norm() == 0.0);
    }
  CHECK(verify_certificate(sys, back, opt).passed);
  CHECK(to_json(back)["s"] == j["s"]);

  Json broken = j;
  broken["mode"] = "periodic";
  CHECK_THROWS_AS(certificate_from_json(broken), std::runtime_error);
  broken = j;
  broken.erase("s");
  CHECK_THROWS_AS(certificate_from_json(broken), std::runtime_error);
}
