#include "dwellcert/polynomial.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace dwellcert {

namespace {

class VariableRegistry {
 public:
  VariableRegistry() {
    intern("tau");
    for (int i = 1; i <= 8; ++i) intern("rho" + std::to_string(i));
    for (int i = 1; i <= 8; ++i) intern("eta" + std::to_string(i));
  }

  static VariableRegistry& instance() {
    static VariableRegistry registry;
    return registry;
  }

  int intern(std::string_view name) {
    std::lock_guard lock(mutex_);
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
  }

  bool lookup(std::string_view name, int* id) const {
    std::lock_guard lock(mutex_);
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return false;
    *id = it->second;
    return true;
  }

  const std::string& name(int id) const {
    std::lock_guard lock(mutex_);
    if (id < 0 || id >= static_cast<int>(names_.size()))
      throw std::out_of_range("unknown variable id " + std::to_string(id));
    return names_[id];
  }

 private:
  mutable std::mutex mutex_;
  std::deque<std::string> names_;  // stable references
  std::unordered_map<std::string, int> ids_;
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

}  // namespace

VarId VarId::named(std::string_view name) { return VarId(VariableRegistry::instance().intern(name)); }

const std::string& VarId::name() const { return VariableRegistry::instance().name(index_); }

bool lookup_var(std::string_view name, VarId* out) {
  int id = -1;
  if (!VariableRegistry::instance().lookup(name, &id)) return false;
  *out = VarId(id);
  return true;
}

VarId tau_var() { return VarId::named("tau"); }
VarId rho_var(int i) { return VarId::named("rho" + std::to_string(i)); }
VarId eta_var(int i) { return VarId::named("eta" + std::to_string(i)); }

// ---------------------------------------------------------------------------

Monomial::Monomial(VarId v, int exponent) {
  if (exponent < 0) throw std::invalid_argument("negative exponent");
  if (exponent > 0) factors_.emplace_back(v, exponent);
  degree_ = exponent;
}

Monomial::Monomial(std::vector<Factor> factors) {
  std::sort(factors.begin(), factors.end(),
            [](const Factor& a, const Factor& b) { return a.first < b.first; });
  for (const auto& [v, e] : factors) {
    if (e < 0) throw std::invalid_argument("negative exponent");
    if (e == 0) continue;
    if (!factors_.empty() && factors_.back().first == v)
      factors_.back().second += e;
    else
      factors_.emplace_back(v, e);
    degree_ += e;
  }
}

int Monomial::exponent(VarId v) const {
  for (const auto& [var, e] : factors_)
    if (var == v) return e;
  return 0;
}

int Monomial::degree_in(const std::vector<VarId>& vars) const {
  int d = 0;
  for (const auto& [v, e] : factors_)
    if (std::find(vars.begin(), vars.end(), v) != vars.end()) d += e;
  return d;
}

Monomial Monomial::operator*(const Monomial& other) const {
  Monomial out;
  out.factors_.reserve(factors_.size() + other.factors_.size());
  auto a = factors_.begin();
  auto b = other.factors_.begin();
  while (a != factors_.end() || b != other.factors_.end()) {
    if (b == other.factors_.end() || (a != factors_.end() && a->first < b->first)) {
      out.factors_.push_back(*a++);
    } else if (a == factors_.end() || b->first < a->first) {
      out.factors_.push_back(*b++);
    } else {
      out.factors_.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  out.degree_ = degree_ + other.degree_;
  return out;
}

Monomial Monomial::without(VarId v) const {
  Monomial out;
  for (const auto& f : factors_) {
    if (f.first == v) continue;
    out.factors_.push_back(f);
    out.degree_ += f.second;
  }
  return out;
}

std::strong_ordering operator<=>(const Monomial& a, const Monomial& b) {
  if (a.degree_ != b.degree_) return a.degree_ <=> b.degree_;
  auto ia = a.factors_.begin();
  auto ib = b.factors_.begin();
  for (; ia != a.factors_.end() && ib != b.factors_.end(); ++ia, ++ib) {
    if (ia->first != ib->first)
      return ia->first < ib->first ? std::strong_ordering::greater : std::strong_ordering::less;
    if (ia->second != ib->second) return ia->second <=> ib->second;
  }
  // Equal degree and a common prefix means both are exhausted together.
  return std::strong_ordering::equal;
}

std::string Monomial::to_string() const {
  if (factors_.empty()) return "1";
  std::string out;
  for (const auto& [v, e] : factors_) {
    if (!out.empty()) out += '*';
    out += v.name();
    if (e > 1) out += '^' + std::to_string(e);
  }
  return out;
}

std::vector<Monomial> monomials_up_to(const std::vector<VarId>& vars, int max_degree,
                                      int min_degree) {
  std::vector<VarId> sorted = vars;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<Monomial> out;
  std::vector<int> exps(sorted.size(), 0);
  // Enumerate exponent vectors with total degree <= max_degree.
  auto recurse = [&](auto&& self, std::size_t k, int remaining) -> void {
    if (k == sorted.size()) {
      std::vector<Monomial::Factor> f;
      for (std::size_t i = 0; i < sorted.size(); ++i) f.emplace_back(sorted[i], exps[i]);
      Monomial m(std::move(f));
      if (m.degree() >= min_degree) out.push_back(std::move(m));
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      exps[k] = e;
      self(self, k + 1, remaining - e);
    }
    exps[k] = 0;
  };
  if (max_degree >= 0) recurse(recurse, 0, max_degree);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------

LinearForm LinearForm::variable(int index, double coeff) {
  LinearForm f;
  f.terms_.emplace_back(index, coeff);
  f.canonicalize();
  return f;
}

LinearForm& LinearForm::operator+=(const LinearForm& other) {
  constant_ += other.constant_;
  if (other.terms_.empty()) return *this;
  std::vector<Term> merged;
  merged.reserve(terms_.size() + other.terms_.size());
  auto a = terms_.begin();
  auto b = other.terms_.begin();
  while (a != terms_.end() || b != other.terms_.end()) {
    if (b == other.terms_.end() || (a != terms_.end() && a->first < b->first)) {
      merged.push_back(*a++);
    } else if (a == terms_.end() || b->first < a->first) {
      merged.push_back(*b++);
    } else {
      merged.emplace_back(a->first, a->second + b->second);
      ++a;
      ++b;
    }
  }
  terms_ = std::move(merged);
  return *this;
}

LinearForm& LinearForm::operator-=(const LinearForm& other) { return *this += other * -1.0; }

LinearForm& LinearForm::operator*=(double s) {
  constant_ *= s;
  for (auto& t : terms_) t.second *= s;
  return *this;
}

double LinearForm::evaluate(const std::vector<double>& values) const {
  double acc = constant_;
  for (const auto& [i, c] : terms_) acc += c * values.at(i);
  return acc;
}

void LinearForm::canonicalize() {
  std::erase_if(terms_, [](const Term& t) { return detail::negligible(t.second); });
  if (detail::negligible(constant_)) constant_ = 0.0;
}

bool LinearForm::negligible() const { return terms_.empty() && detail::negligible(constant_); }

// ---------------------------------------------------------------------------

AffinePolynomial to_affine(const Polynomial& p) {
  return p.map_coefficients([](double c) { return LinearForm(c); });
}

AffinePolyMatrix to_affine(const PolyMatrix& m) {
  return m.map_coefficients([](double c) { return LinearForm(c); });
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  // Highest degree first reads naturally.
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [m, c] = *it;
    double mag = c;
    if (first) {
      if (c < 0) {
        os << '-';
        mag = -c;
      }
    } else {
      os << (c < 0 ? " - " : " + ");
      mag = std::abs(c);
    }
    if (m.is_one()) {
      os << format_double(mag);
    } else if (mag == 1.0) {
      os << m.to_string();
    } else {
      os << format_double(mag) << '*' << m.to_string();
    }
    first = false;
  }
  return os.str();
}

std::string to_string(const AffinePolynomial& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    if (!first) os << " + ";
    os << '(';
    bool inner_first = true;
    if (c.constant() != 0.0 || c.terms().empty()) {
      os << format_double(c.constant());
      inner_first = false;
    }
    for (const auto& [i, a] : c.terms()) {
      if (!inner_first) os << " + ";
      os << format_double(a) << "*u" << i;
      inner_first = false;
    }
    os << ")*" << m.to_string();
    first = false;
  }
  return os.str();
}

Eigen::MatrixXd evaluate(const PolyMatrix& m, const Assignment& point) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out(i, j) = m(i, j).evaluate(point);
  return out;
}

}  // namespace dwellcert
