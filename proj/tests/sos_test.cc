#include <random>

#include <unsupported/Eigen/Polynomials>

#include "doctest.h"
#include "dwellcert/sos.hpp"

using namespace dwellcert;
using dwellcert::sdp::Status;

namespace {

AffinePolyMatrix constant_target(const PolyMatrix& m) { return to_affine(m); }

Polynomial var(VarId v) { return Polynomial::variable(v); }

sdp::Options tight() {
  sdp::Options o;
  o.feas_tol = 1e-9;
  return o;
}

// Global minimum of a univariate polynomial of even degree with positive
// leading coefficient, from the real roots of its derivative.
double univariate_min(const Eigen::VectorXd& coeffs) {
  const int d = static_cast<int>(coeffs.size()) - 1;
  Eigen::VectorXd deriv(d);
  for (int k = 1; k <= d; ++k) deriv[k - 1] = k * coeffs[k];
  Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
  solver.compute(deriv);
  std::vector<double> roots;
  solver.realRoots(roots, 1e-6);
  double best = coeffs[0];
  for (double r : roots) best = std::min(best, Eigen::poly_eval(coeffs, r));
  return best;
}

}  // namespace

TEST_CASE("declare_unknown structure") {
  sos::Program prog;
  const VarId t = tau_var(), r = rho_var(1);
  const auto a = prog.declare_unknown(1, {r}, 2);
  CHECK(prog.num_scalars() == 3);
  CHECK(a(0, 0).terms().size() == 3);
  const auto b = prog.declare_unknown(2, {t, r}, 1);
  CHECK(prog.num_scalars() == 3 + 9);
  CHECK(b.is_symmetric());
  const auto c = prog.declare_unknown(3, {r}, 0);
  CHECK(c.degree() == 0);
  CHECK(prog.num_scalars() == 12 + 6);
}

TEST_CASE("identity target") {
  sos::Program prog;
  const int id = prog.add_sos_constraint(constant_target(PolyMatrix::identity(2)), "eye");
  const auto sol = sdp::solve(prog.problem());
  REQUIRE(sol.status == Status::kFeasible);
  const Eigen::MatrixXd& g = sol.blocks[prog.constraints()[id].gram_block];
  CHECK((g - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-7);
  const auto dec = prog.extract_decomposition(sol, id);
  CHECK(dec.residual < 1e-8);
}

TEST_CASE("complete the square") {
  const VarId x = rho_var(1);
  sos::Program prog;
  const Polynomial p = var(x) * var(x) - 2.0 * var(x) + 1.0;
  const int id = prog.add_sos_constraint(to_affine(PolyMatrix::scalar(p)), "square");
  const auto sol = sdp::solve(prog.problem(), tight());
  REQUIRE(sol.status == Status::kFeasible);
  const auto dec = prog.extract_decomposition(sol, id);
  CHECK(dec.residual < 1e-8);
  REQUIRE(dec.factor.rows() >= 1);
  // The dominant factor row is +-(x - 1).
  const Polynomial f = dec.factor(dec.factor.rows() - 1, 0);
  const double s = f.coefficient(Monomial(x));
  CHECK(std::abs(s) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(f.coefficient(Monomial()) == doctest::Approx(-s).epsilon(1e-4));
}

TEST_CASE("negative constant is not SOS") {
  sos::Program prog;
  prog.add_sos_constraint(to_affine(PolyMatrix::scalar(Polynomial(-1.0))), "neg");
  CHECK(sdp::solve(prog.problem()).status == Status::kInfeasible);
}

TEST_CASE("coefficient matching is complete") {
  // For random values of every SDP scalar, the row residuals equal the
  // coefficients of target - b^T G b computed by polynomial arithmetic.
  std::mt19937 rng(17);
  std::normal_distribution<double> nd;
  const VarId x = rho_var(1), y = rho_var(2);
  sos::Program prog;
  const auto s = prog.declare_unknown(2, {x, y}, 2);
  const auto mult = prog.add_sos_multiplier(2, {x}, 2);
  const PolyMatrix a = [&] {
    PolyMatrix m(2, 2);
    m(0, 1) = 1.0;
    m(1, 0) = -2.0 - var(x);
    m(1, 1) = -1.0 + var(y);
    return m;
  }();
  const AffinePolyMatrix target = -1.0 * he(s * a) - mult.scaled_by(var(x) * (3.0 - var(x)));
  const int id = prog.add_sos_constraint(target, "flow");
  const sdp::Problem& problem = prog.problem();

  sdp::Solution fake;
  for (const auto& b : problem.blocks) {
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(b.size, b.size, [&](Eigen::Index, Eigen::Index) { return nd(rng); });
    fake.blocks.push_back(0.5 * (m + m.transpose()));
  }
  const auto& sc = prog.constraints()[id];
  const PolyMatrix t = prog.value(target, fake);
  const Eigen::MatrixXd& g = fake.blocks[sc.gram_block];
  const int n = 2, k = static_cast<int>(sc.basis.size());
  PolyMatrix gram_form(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          gram_form(p, q).add_term(sc.basis[i] * sc.basis[j], g(i * n + p, j * n + q));
  const PolyMatrix diff = t - gram_form;

  std::map<std::tuple<Monomial, int, int>, double> from_rows;
  for (int r = sc.first_row; r < sc.first_row + sc.num_rows; ++r) {
    const auto& c = problem.constraints[r];
    double lhs = -c.rhs;
    for (const auto& e : c.entries) lhs += e.value * fake.blocks[e.block](e.row, e.col);
    const auto& info = prog.rows()[r];
    from_rows[{info.monomial, info.p, info.q}] = lhs;
  }
  int covered = 0;
  for (int p = 0; p < n; ++p)
    for (int q = p; q < n; ++q)
      for (const auto& [m, c] : diff(p, q).terms()) {
        auto it = from_rows.find({m, p, q});
        REQUIRE(it != from_rows.end());
        CHECK(it->second == doctest::Approx(c).epsilon(1e-9));
        ++covered;
      }
  CHECK(covered > 0);
  for (const auto& [key, v] : from_rows) {
    const auto& [m, p, q] = key;
    CHECK(v == doctest::Approx(diff(p, q).coefficient(m)).epsilon(1e-9));
  }
}

TEST_CASE("random Xi^T Xi round trip") {
  std::mt19937 rng(99);
  std::uniform_int_distribution<int> dims_d(1, 3), nvars_d(1, 2), deg_d(0, 2), rows_d(1, 3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = dims_d(rng);
    std::vector<VarId> vars;
    for (int i = 1; i <= nvars_d(rng); ++i) vars.push_back(rho_var(i));
    const int deg = deg_d(rng);
    PolyMatrix xi(rows_d(rng), n);
    for (int i = 0; i < xi.rows(); ++i)
      for (int j = 0; j < n; ++j)
        for (const Monomial& m : monomials_up_to(vars, deg)) xi(i, j).add_term(m, nd(rng));
    const PolyMatrix target = xi.transpose() * xi;
    sos::Program prog;
    const int id = prog.add_sos_constraint(to_affine(target), "rt", vars);
    const auto sol = sdp::solve(prog.problem(), tight());
    REQUIRE_MESSAGE(sol.status == Status::kFeasible, "trial " << trial << ": " << sol.message);
    const auto dec = prog.extract_decomposition(sol, id);
    CHECK_MESSAGE(dec.residual < 1e-8, "trial " << trial);
  }
}

TEST_CASE("univariate soundness against root finding") {
  std::mt19937 rng(4242);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> half_deg(1, 3);
  const VarId x = rho_var(1);
  int checked = 0;
  while (checked < 40) {
    const int d = 2 * half_deg(rng);
    Eigen::VectorXd c(d + 1);
    for (int k = 0; k <= d; ++k) c[k] = nd(rng);
    c[d] = std::abs(c[d]) + 0.2;
    const double mn = univariate_min(c);
    if (std::abs(mn) < 0.05) continue;
    Polynomial p;
    for (int k = 0; k <= d; ++k) p.add_term(Monomial(x, k), c[k]);
    sos::Program prog;
    prog.add_sos_constraint(to_affine(PolyMatrix::scalar(p)), "uni");
    const auto sol = sdp::solve(prog.problem());
    CHECK_MESSAGE(sol.status == (mn > 0 ? Status::kFeasible : Status::kInfeasible),
                  "min " << mn << " degree " << d);
    ++checked;
  }
}

TEST_CASE("free multiplier on an equality set") {
  // x + 2 >= 0 on {x^2 = 1}: x + 2 + (x^2 - 1) = x^2 + x + 1 is SOS, while an
  // SOS multiplier on -(x^2 - 1) cannot help.
  const VarId x = rho_var(1);
  const Polynomial h = var(x) * var(x) - 1.0;
  {
    sos::Program prog;
    const auto m = prog.add_symmetric_multiplier(1, {x}, 0);
    prog.add_sos_constraint(to_affine(PolyMatrix::scalar(var(x) + 2.0)) - m.scaled_by(h), "free");
    CHECK(sdp::solve(prog.problem()).status == Status::kFeasible);
  }
  {
    sos::Program prog;
    const auto m = prog.add_sos_multiplier(1, {x}, 0);
    prog.add_sos_constraint(to_affine(PolyMatrix::scalar(var(x) + 2.0)) - m.scaled_by(h), "sos");
    CHECK(sdp::solve(prog.problem()).status == Status::kInfeasible);
  }
}
