#include <random>

#include "doctest.h"
#include "dwellcert/polynomial.hpp"

using namespace dwellcert;

namespace {

Polynomial var(VarId v) { return Polynomial::variable(v); }

// Random polynomial in the given variables with small integer coefficients.
Polynomial random_poly(std::mt19937& rng, const std::vector<VarId>& vars, int degree) {
  std::uniform_int_distribution<int> coeff(-3, 3);
  Polynomial p;
  for (const Monomial& m : monomials_up_to(vars, degree)) p.add_term(m, coeff(rng));
  return p;
}

Assignment random_point(std::mt19937& rng, const std::vector<VarId>& vars) {
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  Assignment a;
  for (VarId v : vars) a[v] = u(rng);
  return a;
}

}  // namespace

TEST_CASE("variables are interned once") {
  CHECK(VarId::named("rho1") == rho_var(1));
  CHECK(VarId::named("tau") == tau_var());
  CHECK(eta_var(2).name() == "eta2");
  CHECK(tau_var() < rho_var(1));
  VarId out;
  CHECK_FALSE(lookup_var("never_seen_name", &out));
  CHECK(lookup_var("rho3", &out));
  CHECK(out == rho_var(3));
}

TEST_CASE("monomial enumeration counts") {
  const std::vector<VarId> two{rho_var(1), rho_var(2)};
  CHECK(monomials_up_to({rho_var(1)}, 2).size() == 3);
  CHECK(monomials_up_to(two, 2).size() == 6);
  CHECK(monomials_up_to(two, 4).size() == 15);
  CHECK(monomials_up_to(two, 4, 3).size() == 9);
  const auto ms = monomials_up_to(two, 3);
  CHECK(std::is_sorted(ms.begin(), ms.end()));
  CHECK(ms.front().is_one());
}

TEST_CASE("arithmetic agrees with pointwise evaluation") {
  std::mt19937 rng(7);
  const std::vector<VarId> vars{tau_var(), rho_var(1), rho_var(2)};
  for (int trial = 0; trial < 50; ++trial) {
    const Polynomial p = random_poly(rng, vars, 2);
    const Polynomial q = random_poly(rng, vars, 3);
    const Assignment x = random_point(rng, vars);
    const double pv = p.evaluate(x), qv = q.evaluate(x);
    CHECK((p + q).evaluate(x) == doctest::Approx(pv + qv));
    CHECK((p - q).evaluate(x) == doctest::Approx(pv - qv));
    CHECK((p * q).evaluate(x) == doctest::Approx(pv * qv));
    CHECK((2.5 * p).evaluate(x) == doctest::Approx(2.5 * pv));
  }
}

TEST_CASE("derivative matches central difference") {
  std::mt19937 rng(11);
  const std::vector<VarId> vars{rho_var(1), rho_var(2)};
  for (int trial = 0; trial < 30; ++trial) {
    const Polynomial p = random_poly(rng, vars, 4);
    const Assignment x = random_point(rng, vars);
    for (VarId v : vars) {
      const double h = 1e-5;
      Assignment xp = x, xm = x;
      xp[v] += h;
      xm[v] -= h;
      const double fd = (p.evaluate(xp) - p.evaluate(xm)) / (2 * h);
      CHECK(p.differentiate(v).evaluate(x) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("substitution composes evaluation") {
  std::mt19937 rng(3);
  const VarId t = tau_var(), r = rho_var(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial p = random_poly(rng, {t, r}, 3);
    const Polynomial e = random_poly(rng, {r}, 2);
    const Assignment x = random_point(rng, {r});
    Assignment xt = x;
    xt[t] = e.evaluate(x);
    CHECK(p.substitute(t, e).evaluate(x) == doctest::Approx(p.evaluate(xt)));
  }
  // tau -> tau / 2 halves the linear coefficient.
  const Polynomial p = 4.0 * var(t) + 1.0;
  CHECK(p.substitute(t, 0.5 * var(t)) == 2.0 * var(t) + 1.0);
}

TEST_CASE("canonicalisation drops tiny terms and cancels") {
  Polynomial p = var(rho_var(1)) + 1e-14 * var(rho_var(2));
  CHECK(p.terms().size() == 1);
  CHECK((p - p).is_zero());
  CHECK((var(rho_var(1)) * var(rho_var(1))).degree() == 2);
}

TEST_CASE("evaluate reports missing variables") {
  const Polynomial p = var(rho_var(1)) + var(rho_var(2));
  CHECK_THROWS_AS(p.evaluate({{rho_var(1), 1.0}}), std::invalid_argument);
}

TEST_CASE("printing") {
  const Polynomial p = -2.0 - var(rho_var(1));
  CHECK(to_string(p) == "-rho1 - 2");
  CHECK(to_string(Polynomial()) == "0");
  CHECK(to_string(3.75 * var(rho_var(2)) * var(rho_var(2))) == "3.75*rho2^2");
}

TEST_CASE("affine coefficients") {
  AffinePolynomial a = AffinePolynomial::term(Monomial(rho_var(1)), LinearForm::variable(0)) +
                       AffinePolynomial::term(Monomial(), LinearForm::variable(1, 2.0));
  const auto b = a * var(rho_var(1));
  CHECK(b.degree() == 2);
  const auto resolved =
      b.map_coefficients([](const LinearForm& c) { return c.evaluate({3.0, 0.5}); });
  CHECK(resolved == 3.0 * var(rho_var(1)) * var(rho_var(1)) + var(rho_var(1)));
}

TEST_CASE("polynomial matrices") {
  const VarId r = rho_var(1);
  PolyMatrix a(2, 2);
  a(0, 1) = 1.0;
  a(1, 0) = -2.0 - var(r);
  a(1, 1) = -1.0;
  const PolyMatrix p = PolyMatrix::identity(2);
  const PolyMatrix h = he(p * a);
  CHECK(h.is_symmetric());
  const Eigen::MatrixXd v = evaluate(h, {{r, 1.0}});
  CHECK(v(0, 1) == doctest::Approx(-2.0));
  CHECK(v(1, 1) == doctest::Approx(-2.0));
  CHECK(a.degree() == 1);
  CHECK_THROWS_AS(a * PolyMatrix(3, 1), DimensionError);
  CHECK_THROWS_AS(a + PolyMatrix(3, 3), DimensionError);
  CHECK(a.differentiate(r)(1, 0) == Polynomial(-1.0));
}
