#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "dwellcert/sdp.hpp"

namespace dwellcert::sdp {

namespace {

using Key = std::tuple<int, int, int>;

constexpr double kDependenceTol = 1e-9;

std::vector<Entry> merged_entries(const Constraint& c) {
  std::map<Key, double> acc;
  for (const Entry& e : c.entries) acc[{e.block, e.row, e.col}] += e.value;
  std::vector<Entry> out;
  for (const auto& [k, v] : acc)
    if (v != 0.0) out.push_back({std::get<0>(k), std::get<1>(k), std::get<2>(k), v});
  return out;
}

}  // namespace

Preprocessed preprocess(const Problem& problem) {
  problem.validate();
  Preprocessed out;
  out.problem.name = problem.name;
  out.problem.blocks = problem.blocks;
  out.problem.objective = problem.objective;

  const int m = static_cast<int>(problem.constraints.size());
  std::vector<std::vector<Entry>> rows(m);
  std::vector<double> norms(m, 0.0);
  std::map<Key, int> usage;
  for (int r = 0; r < m; ++r) {
    rows[r] = merged_entries(problem.constraints[r]);
    double n2 = 0.0;
    for (const Entry& e : rows[r]) {
      n2 += e.value * e.value;
      ++usage[{e.block, e.row, e.col}];
    }
    norms[r] = std::sqrt(n2);
  }

  std::vector<char> keep(m, 0);
  std::vector<int> rest;
  for (int r = 0; r < m; ++r) {
    const double rhs = problem.constraints[r].rhs;
    if (norms[r] == 0.0) {
      if (std::abs(rhs) > 0.0) {
        out.inconsistent = true;
        out.inconsistent_row = r;
        return out;
      }
      continue;  // 0 = 0
    }
    const bool exclusive = std::any_of(rows[r].begin(), rows[r].end(), [&](const Entry& e) {
      return usage[{e.block, e.row, e.col}] == 1;
    });
    if (exclusive)
      keep[r] = 1;
    else
      rest.push_back(r);
  }

  // Rows owning a private variable cannot take part in a linear dependency;
  // the others go through Gram-Schmidt in their original order so the first
  // of a group of duplicates is the one retained.
  if (!rest.empty()) {
    std::map<Key, int> local;
    for (int r : rest)
      for (const Entry& e : rows[r]) local.try_emplace({e.block, e.row, e.col}, 0);
    int col = 0;
    for (auto& [k, idx] : local) idx = col++;

    std::vector<Eigen::VectorXd> basis;
    std::vector<double> basis_rhs;
    for (int r : rest) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(col);
      for (const Entry& e : rows[r]) v[local[{e.block, e.row, e.col}]] = e.value / norms[r];
      double beta = problem.constraints[r].rhs / norms[r];
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t q = 0; q < basis.size(); ++q) {
          const double coeff = basis[q].dot(v);
          v -= coeff * basis[q];
          beta -= coeff * basis_rhs[q];
        }
      }
      const double resid = v.norm();
      if (resid <= kDependenceTol) {
        if (std::abs(beta) > kDependenceTol * (1.0 + std::abs(problem.constraints[r].rhs))) {
          out.inconsistent = true;
          out.inconsistent_row = r;
          return out;
        }
        continue;
      }
      basis.push_back(v / resid);
      basis_rhs.push_back(beta / resid);
      keep[r] = 1;
    }
  }

  for (int r = 0; r < m; ++r) {
    if (!keep[r]) continue;
    Constraint c;
    c.rhs = problem.constraints[r].rhs / norms[r];
    c.entries = rows[r];
    for (Entry& e : c.entries) e.value /= norms[r];
    out.problem.constraints.push_back(std::move(c));
    out.kept_rows.push_back(r);
    out.row_scale.push_back(norms[r]);
  }
  return out;
}

}  // namespace dwellcert::sdp
