#pragma once

// Multivariate polynomials and polynomial matrices over interned variables.
//
// The coefficient type is a template parameter so the same machinery serves
// numeric polynomials (double) and polynomials whose coefficients are affine
// in unknown decision variables (LinearForm), as produced by the SOS layer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace dwellcert {

/// Coefficients with magnitude below this are dropped after every operation.
inline constexpr double kCanonicalThreshold = 1e-12;

/// Interned variable handle. Ordering follows interning order; "tau",
/// "rho1".."rho8" and "eta1".."eta8" are pre-interned in that order.
class VarId {
 public:
  constexpr VarId() = default;
  constexpr explicit VarId(int index) : index_(index) {}

  static VarId named(std::string_view name);
  const std::string& name() const;
  constexpr int index() const { return index_; }

  friend constexpr auto operator<=>(VarId, VarId) = default;

 private:
  int index_ = -1;
};

/// Looks up a variable without interning it.
bool lookup_var(std::string_view name, VarId* out);

VarId tau_var();
VarId rho_var(int i);  // 1-based
VarId eta_var(int i);  // 1-based

// ---------------------------------------------------------------------------

/// Power product with sorted variable ids and strictly positive exponents.
class Monomial {
 public:
  using Factor = std::pair<VarId, int>;

  Monomial() = default;
  explicit Monomial(VarId v, int exponent = 1);
  /// Factors in any order; repeated variables are merged, zero exponents dropped.
  explicit Monomial(std::vector<Factor> factors);

  const std::vector<Factor>& factors() const { return factors_; }
  int degree() const { return degree_; }
  int exponent(VarId v) const;
  bool is_one() const { return factors_.empty(); }

  /// Degree restricted to the given variables.
  int degree_in(const std::vector<VarId>& vars) const;

  Monomial operator*(const Monomial& other) const;
  /// Monomial with `v` removed.
  Monomial without(VarId v) const;

  /// Graded lexicographic order: total degree first, then the larger exponent
  /// on the smallest variable id wins.
  friend std::strong_ordering operator<=>(const Monomial& a, const Monomial& b);
  friend bool operator==(const Monomial& a, const Monomial& b) = default;

  std::string to_string() const;

 private:
  std::vector<Factor> factors_;
  int degree_ = 0;
};

/// All monomials in `vars` with total degree in [min_degree, max_degree],
/// in graded lexicographic order (ascending).
std::vector<Monomial> monomials_up_to(const std::vector<VarId>& vars, int max_degree,
                                      int min_degree = 0);

// ---------------------------------------------------------------------------

/// Affine form sum_k coeff_k * u_k + constant over decision-variable indices.
class LinearForm {
 public:
  using Term = std::pair<int, double>;

  LinearForm() = default;
  LinearForm(double constant) : constant_(constant) {}  // NOLINT(implicit)
  static LinearForm variable(int index, double coeff = 1.0);

  const std::vector<Term>& terms() const { return terms_; }
  double constant() const { return constant_; }

  LinearForm& operator+=(const LinearForm& other);
  LinearForm& operator-=(const LinearForm& other);
  LinearForm& operator*=(double s);

  friend LinearForm operator+(LinearForm a, const LinearForm& b) { return a += b; }
  friend LinearForm operator-(LinearForm a, const LinearForm& b) { return a -= b; }
  friend LinearForm operator-(LinearForm a) { return a *= -1.0; }
  friend LinearForm operator*(LinearForm a, double s) { return a *= s; }
  friend LinearForm operator*(double s, LinearForm a) { return a *= s; }
  friend bool operator==(const LinearForm&, const LinearForm&) = default;

  /// Value at the given decision-variable assignment.
  double evaluate(const std::vector<double>& values) const;
  bool negligible() const;
  void canonicalize();

 private:
  std::vector<Term> terms_;  // sorted by index
  double constant_ = 0.0;
};

namespace detail {
inline bool negligible(double c) { return !(std::abs(c) >= kCanonicalThreshold); }
inline bool negligible(const LinearForm& c) { return c.negligible(); }
inline void canonicalize(double&) {}
inline void canonicalize(LinearForm& c) { c.canonicalize(); }
}  // namespace detail

/// Assignment of real values to variables.
using Assignment = std::map<VarId, double>;

// ---------------------------------------------------------------------------

template <typename C>
class BasicPolynomial {
 public:
  using Coefficient = C;
  using TermMap = std::map<Monomial, C>;

  BasicPolynomial() = default;
  BasicPolynomial(double constant) {  // NOLINT(implicit)
    add_term(Monomial(), C(constant));
  }
  static BasicPolynomial variable(VarId v) { return term(Monomial(v), C(1.0)); }
  static BasicPolynomial term(const Monomial& m, C c) {
    BasicPolynomial p;
    p.add_term(m, std::move(c));
    return p;
  }

  const TermMap& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const { return terms_.empty() ? 0 : terms_.rbegin()->first.degree(); }
  int degree_in(const std::vector<VarId>& vars) const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree_in(vars));
    return d;
  }
  /// Coefficient of `m` (zero when absent).
  C coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? C(0.0) : it->second;
  }
  /// Variables with a nonzero exponent in some term, sorted.
  std::vector<VarId> variables() const {
    std::vector<VarId> out;
    for (const auto& [m, c] : terms_)
      for (const auto& [v, e] : m.factors()) out.push_back(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Adds c * m, dropping the term if the result is negligible.
  void add_term(const Monomial& m, C c) {
    auto [it, inserted] = terms_.try_emplace(m, std::move(c));
    if (!inserted) it->second += c;
    detail::canonicalize(it->second);
    if (detail::negligible(it->second)) terms_.erase(it);
  }

  BasicPolynomial& operator+=(const BasicPolynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  BasicPolynomial& operator-=(const BasicPolynomial& o) {
    for (const auto& [m, c] : o.terms_) add_term(m, c * -1.0);
    return *this;
  }
  BasicPolynomial& operator*=(double s) {
    TermMap out;
    for (auto& [m, c] : terms_) {
      C v = c * s;
      detail::canonicalize(v);
      if (!detail::negligible(v)) out.emplace(m, std::move(v));
    }
    terms_ = std::move(out);
    return *this;
  }
  friend BasicPolynomial operator+(BasicPolynomial a, const BasicPolynomial& b) { return a += b; }
  friend BasicPolynomial operator-(BasicPolynomial a, const BasicPolynomial& b) { return a -= b; }
  friend BasicPolynomial operator-(BasicPolynomial a) { return a *= -1.0; }
  friend BasicPolynomial operator*(BasicPolynomial a, double s) { return a *= s; }
  friend BasicPolynomial operator*(double s, BasicPolynomial a) { return a *= s; }
  friend bool operator==(const BasicPolynomial&, const BasicPolynomial&) = default;

  /// Partial derivative with respect to `v`.
  BasicPolynomial differentiate(VarId v) const {
    BasicPolynomial out;
    for (const auto& [m, c] : terms_) {
      const int e = m.exponent(v);
      if (e == 0) continue;
      std::vector<Monomial::Factor> f = m.factors();
      for (auto& [var, exp] : f)
        if (var == v) --exp;
      out.add_term(Monomial(std::move(f)), c * static_cast<double>(e));
    }
    return out;
  }

  /// Replaces every occurrence of `v` by `expr`.
  BasicPolynomial substitute(VarId v, const BasicPolynomial<double>& expr) const;

  /// Value at `point`; throws std::invalid_argument if a variable is missing.
  C evaluate(const Assignment& point) const {
    C acc(0.0);
    for (const auto& [m, c] : terms_) {
      double w = 1.0;
      for (const auto& [v, e] : m.factors()) {
        auto it = point.find(v);
        if (it == point.end())
          throw std::invalid_argument("evaluate: no value for variable '" + v.name() + "'");
        w *= std::pow(it->second, e);
      }
      acc += c * w;
    }
    return acc;
  }

  /// Applies `f` to each coefficient (e.g. resolving unknowns from a solution).
  template <typename F>
  auto map_coefficients(F&& f) const {
    using R = std::decay_t<decltype(f(std::declval<const C&>()))>;
    BasicPolynomial<R> out;
    for (const auto& [m, c] : terms_) out.add_term(m, f(c));
    return out;
  }

 private:
  TermMap terms_;
};

using Polynomial = BasicPolynomial<double>;
using AffinePolynomial = BasicPolynomial<LinearForm>;

template <typename C1, typename C2>
auto operator*(const BasicPolynomial<C1>& a, const BasicPolynomial<C2>& b) {
  using R = decltype(std::declval<C1>() * std::declval<C2>());
  BasicPolynomial<R> out;
  for (const auto& [ma, ca] : a.terms())
    for (const auto& [mb, cb] : b.terms()) out.add_term(ma * mb, ca * cb);
  return out;
}

template <typename C>
BasicPolynomial<C> BasicPolynomial<C>::substitute(VarId v, const Polynomial& expr) const {
  std::vector<Polynomial> powers{Polynomial(1.0)};
  BasicPolynomial out;
  for (const auto& [m, c] : terms_) {
    const int e = m.exponent(v);
    if (e == 0) {
      out.add_term(m, c);
      continue;
    }
    while (static_cast<int>(powers.size()) <= e) powers.push_back(powers.back() * expr);
    out += BasicPolynomial::term(m.without(v), c) * powers[e];
  }
  return out;
}

/// Promotes a numeric polynomial to one with affine coefficients.
AffinePolynomial to_affine(const Polynomial& p);

/// Human-readable form accepted by the polynomial text parser, e.g.
/// "-2 - rho1" or "3.75*rho2^2". Coefficients print with round-trip precision.
std::string to_string(const Polynomial& p);
std::string to_string(const AffinePolynomial& p);

// ---------------------------------------------------------------------------

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename C>
class BasicPolyMatrix {
 public:
  using Entry = BasicPolynomial<C>;

  BasicPolyMatrix() = default;
  BasicPolyMatrix(int rows, int cols) : rows_(rows), cols_(cols), entries_(rows * cols) {}

  static BasicPolyMatrix identity(int n) {
    BasicPolyMatrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = Entry(1.0);
    return m;
  }
  static BasicPolyMatrix constant(const Eigen::MatrixXd& a) {
    BasicPolyMatrix m(static_cast<int>(a.rows()), static_cast<int>(a.cols()));
    for (int i = 0; i < m.rows_; ++i)
      for (int j = 0; j < m.cols_; ++j) m(i, j) = Entry(a(i, j));
    return m;
  }
  static BasicPolyMatrix scalar(Entry p) {
    BasicPolyMatrix m(1, 1);
    m(0, 0) = std::move(p);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Entry& operator()(int i, int j) { return entries_[i * cols_ + j]; }
  const Entry& operator()(int i, int j) const { return entries_[i * cols_ + j]; }

  int degree() const {
    int d = 0;
    for (const auto& e : entries_) d = std::max(d, e.degree());
    return d;
  }
  int degree_in(const std::vector<VarId>& vars) const {
    int d = 0;
    for (const auto& e : entries_) d = std::max(d, e.degree_in(vars));
    return d;
  }
  std::vector<VarId> variables() const {
    std::vector<VarId> out;
    for (const auto& e : entries_) {
      auto v = e.variables();
      out.insert(out.end(), v.begin(), v.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
  bool is_symmetric() const {
    if (rows_ != cols_) return false;
    for (int i = 0; i < rows_; ++i)
      for (int j = i + 1; j < cols_; ++j)
        if (!((*this)(i, j) == (*this)(j, i))) return false;
    return true;
  }
  bool is_zero() const {
    for (const auto& e : entries_)
      if (!e.is_zero()) return false;
    return true;
  }

  BasicPolyMatrix transpose() const {
    BasicPolyMatrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  BasicPolyMatrix& operator+=(const BasicPolyMatrix& o) {
    check_same_shape(o, "add");
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += o.entries_[k];
    return *this;
  }
  BasicPolyMatrix& operator-=(const BasicPolyMatrix& o) {
    check_same_shape(o, "subtract");
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= o.entries_[k];
    return *this;
  }
  BasicPolyMatrix& operator*=(double s) {
    for (auto& e : entries_) e *= s;
    return *this;
  }
  friend BasicPolyMatrix operator+(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a += b; }
  friend BasicPolyMatrix operator-(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a -= b; }
  friend BasicPolyMatrix operator-(BasicPolyMatrix a) { return a *= -1.0; }
  friend BasicPolyMatrix operator*(BasicPolyMatrix a, double s) { return a *= s; }
  friend BasicPolyMatrix operator*(double s, BasicPolyMatrix a) { return a *= s; }
  friend bool operator==(const BasicPolyMatrix&, const BasicPolyMatrix&) = default;

  BasicPolyMatrix differentiate(VarId v) const {
    BasicPolyMatrix out(rows_, cols_);
    for (std::size_t k = 0; k < entries_.size(); ++k) out.entries_[k] = entries_[k].differentiate(v);
    return out;
  }
  BasicPolyMatrix substitute(VarId v, const BasicPolynomial<double>& expr) const {
    BasicPolyMatrix out(rows_, cols_);
    for (std::size_t k = 0; k < entries_.size(); ++k)
      out.entries_[k] = entries_[k].substitute(v, expr);
    return out;
  }
  /// Entrywise product with a scalar polynomial.
  template <typename C2>
  auto scaled_by(const BasicPolynomial<C2>& p) const {
    using R = decltype(std::declval<C>() * std::declval<C2>());
    BasicPolyMatrix<R> out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) * p;
    return out;
  }

  template <typename F>
  auto map_coefficients(F&& f) const {
    using R = std::decay_t<decltype(f(std::declval<const C&>()))>;
    BasicPolyMatrix<R> out(rows_, cols_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j).map_coefficients(f);
    return out;
  }

  void check_same_shape(const BasicPolyMatrix& o, const char* op) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionError(std::string(op) + ": dimension mismatch " + std::to_string(rows_) +
                           "x" + std::to_string(cols_) + " vs " + std::to_string(o.rows_) + "x" +
                           std::to_string(o.cols_));
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Entry> entries_;
};

using PolyMatrix = BasicPolyMatrix<double>;
using AffinePolyMatrix = BasicPolyMatrix<LinearForm>;

template <typename C1, typename C2>
auto operator*(const BasicPolyMatrix<C1>& a, const BasicPolyMatrix<C2>& b) {
  using R = decltype(std::declval<C1>() * std::declval<C2>());
  if (a.cols() != b.rows())
    throw DimensionError("mul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()) + " differ");
  BasicPolyMatrix<R> out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j)
      for (int k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
  return out;
}

/// He[M] = M + M^T.
template <typename C>
BasicPolyMatrix<C> he(const BasicPolyMatrix<C>& m) {
  return m + m.transpose();
}

/// Numeric value of a polynomial matrix at `point`.
Eigen::MatrixXd evaluate(const PolyMatrix& m, const Assignment& point);

AffinePolyMatrix to_affine(const PolyMatrix& m);

}  // namespace dwellcert
