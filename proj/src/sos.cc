#include "dwellcert/sos.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>

namespace dwellcert::sos {

namespace {

int ceil_half(int d) { return (d + 1) / 2; }

bool subset_of(const std::vector<VarId>& a, const std::vector<VarId>& sorted_b) {
  return std::all_of(a.begin(), a.end(), [&](VarId v) {
    return std::binary_search(sorted_b.begin(), sorted_b.end(), v);
  });
}

}  // namespace

int Program::new_scalar(int block, int i, int j) {
  slots_.push_back({block, i, j});
  return static_cast<int>(slots_.size()) - 1;
}

AffinePolyMatrix Program::declare_unknown(int dims, const std::vector<VarId>& vars, int degree) {
  if (dims < 1) throw std::invalid_argument("declare_unknown: dims must be positive");
  if (degree < 0) throw std::invalid_argument("declare_unknown: negative degree");
  AffinePolyMatrix out(dims, dims);
  for (const Monomial& m : monomials_up_to(vars, degree)) {
    const int block = problem_.add_block(dims, sdp::BlockKind::kFree);
    for (int i = 0; i < dims; ++i)
      for (int j = i; j < dims; ++j) {
        const int s = new_scalar(block, i, j);
        out(i, j).add_term(m, LinearForm::variable(s));
        if (i != j) out(j, i).add_term(m, LinearForm::variable(s));
      }
  }
  return out;
}

AffinePolyMatrix Program::add_sos_multiplier(int dims, const std::vector<VarId>& vars, int degree) {
  if (dims < 1) throw std::invalid_argument("add_sos_multiplier: dims must be positive");
  if (degree < 0 || degree % 2 != 0)
    throw std::invalid_argument("add_sos_multiplier: degree must be even and non-negative");
  const std::vector<Monomial> basis = monomials_up_to(vars, degree / 2);
  const int k = static_cast<int>(basis.size());
  const int size = k * dims;
  const int block = problem_.add_block(size, sdp::BlockKind::kPsd);
  std::vector<std::vector<int>> slot(size, std::vector<int>(size, -1));
  for (int a = 0; a < size; ++a)
    for (int c = a; c < size; ++c) slot[a][c] = new_scalar(block, a, c);

  AffinePolyMatrix out(dims, dims);
  for (int p = 0; p < dims; ++p)
    for (int q = p; q < dims; ++q) {
      AffinePolynomial e;
      for (int kk = 0; kk < k; ++kk)
        for (int l = 0; l < k; ++l) {
          const int a = kk * dims + p;
          const int c = l * dims + q;
          e.add_term(basis[kk] * basis[l], LinearForm::variable(slot[std::min(a, c)][std::max(a, c)]));
        }
      out(p, q) = e;
      out(q, p) = e;
    }
  return out;
}

int Program::add_sos_constraint(const AffinePolyMatrix& target, std::string label,
                                std::vector<VarId> vars) {
  if (target.rows() != target.cols())
    throw DimensionError("add_sos_constraint: target is not square");
  const std::vector<VarId> tv = target.variables();
  if (vars.empty()) vars = tv;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  if (!subset_of(tv, vars))
    throw std::invalid_argument("add_sos_constraint: target uses variables outside the basis set");

  const int n = target.rows();
  SosConstraint sc;
  sc.label = std::move(label);
  sc.target = target;
  sc.basis = monomials_up_to(vars, ceil_half(target.degree()));
  const int k = static_cast<int>(sc.basis.size());
  sc.gram_block = problem_.add_block(k * n, sdp::BlockKind::kPsd);
  sc.first_row = static_cast<int>(problem_.constraints.size());
  const int id = static_cast<int>(constraints_.size());

  std::map<Monomial, std::vector<std::pair<int, int>>> products;
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) products[sc.basis[a] * sc.basis[b]].emplace_back(a, b);

  for (int p = 0; p < n; ++p)
    for (int q = p; q < n; ++q) {
      const AffinePolynomial& t = target(p, q);
      std::vector<Monomial> monos;
      for (const auto& [m, pairs] : products) monos.push_back(m);
      for (const auto& [m, c] : t.terms())
        if (!products.count(m)) monos.push_back(m);
      std::sort(monos.begin(), monos.end());
      for (const Monomial& m : monos) {
        std::map<std::tuple<int, int, int>, double> acc;
        double constant = 0.0;
        if (auto it = t.terms().find(m); it != t.terms().end()) {
          constant = it->second.constant();
          for (const auto& [s, v] : it->second.terms()) {
            const Slot& sl = slots_[s];
            acc[{sl.block, sl.i, sl.j}] += v;
          }
        }
        if (auto it = products.find(m); it != products.end()) {
          for (const auto& [a, b] : it->second) {
            const int r = a * n + p;
            const int c = b * n + q;
            acc[{sc.gram_block, std::min(r, c), std::max(r, c)}] -= 1.0;
          }
        }
        sdp::Constraint row;
        for (const auto& [key, v] : acc)
          if (v != 0.0) row.entries.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), v});
        row.rhs = -constant;
        problem_.add_constraint(std::move(row));
        rows_.push_back({id, m, p, q});
      }
    }
  sc.num_rows = static_cast<int>(problem_.constraints.size()) - sc.first_row;
  constraints_.push_back(std::move(sc));
  return id;
}

std::vector<double> Program::scalar_values(const sdp::Solution& sol) const {
  std::vector<double> out(slots_.size());
  for (std::size_t s = 0; s < slots_.size(); ++s) {
    const Slot& sl = slots_[s];
    out[s] = sol.blocks.at(sl.block)(sl.i, sl.j);
  }
  return out;
}

PolyMatrix resolve(const AffinePolyMatrix& m, const std::vector<double>& values) {
  return m.map_coefficients([&](const LinearForm& c) { return c.evaluate(values); });
}

PolyMatrix Program::value(const AffinePolyMatrix& m, const sdp::Solution& sol) const {
  return resolve(m, scalar_values(sol));
}

Decomposition Program::extract_decomposition(const sdp::Solution& sol, int constraint,
                                             double tol) const {
  const SosConstraint& sc = constraints_.at(constraint);
  const int n = sc.target.rows();
  const int k = static_cast<int>(sc.basis.size());
  Eigen::MatrixXd g = sol.blocks.at(sc.gram_block);
  g = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  Decomposition out;
  out.min_gram_eigenvalue = lam.minCoeff();
  if (out.min_gram_eigenvalue < -tol * scale)
    throw std::runtime_error("extract_decomposition: Gram block of '" + sc.label +
                             "' is indefinite (min eigenvalue " +
                             std::to_string(out.min_gram_eigenvalue) + ")");
  std::vector<int> keep;
  for (int r = 0; r < lam.size(); ++r)
    if (lam[r] > 1e-14 * scale) keep.push_back(r);
  out.factor = PolyMatrix(static_cast<int>(keep.size()), n);
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const double w = std::sqrt(lam[keep[r]]);
    for (int q = 0; q < n; ++q) {
      Polynomial e;
      for (int b = 0; b < k; ++b) e.add_term(sc.basis[b], w * es.eigenvectors()(b * n + q, keep[r]));
      out.factor(static_cast<int>(r), q) = e;
    }
  }
  const PolyMatrix diff = value(sc.target, sol) - out.factor.transpose() * out.factor;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      for (const auto& [m, c] : diff(p, q).terms()) out.residual = std::max(out.residual, std::abs(c));
  return out;
}

}  // namespace dwellcert::sos
