#include <cmath>
#include <optional>

#include "dwellcert/lpv_model.hpp"

namespace dwellcert {

namespace {

constexpr int kAttemptCap = 100000;

struct Sphere {
  std::vector<int> index;  // zero-based parameter indices
  double radius = 0.0;
};

// Recognises h = a * sum_{i in S} rho_i^2 - c with a, c > 0.
std::optional<Sphere> as_sphere(const Polynomial& h, int count) {
  double a = 0.0, c = 0.0;
  Sphere s;
  for (const auto& [m, coeff] : h.terms()) {
    if (m.is_one()) {
      c = -coeff;
      continue;
    }
    if (m.factors().size() != 1 || m.factors()[0].second != 2) return std::nullopt;
    if (a == 0.0) a = coeff;
    if (coeff != a || a <= 0.0) return std::nullopt;
    int idx = -1;
    for (int i = 0; i < count; ++i)
      if (m.factors()[0].first == VarId::named("rho" + std::to_string(i + 1))) idx = i;
    if (idx < 0) return std::nullopt;
    s.index.push_back(idx);
  }
  if (c <= 0.0 || s.index.empty()) return std::nullopt;
  s.radius = std::sqrt(c / a);
  return s;
}

bool in_box(const ParameterSet& p, const Eigen::VectorXd& th) {
  for (int i = 0; i < p.count; ++i)
    if (th[i] < p.box[i].lo - 1e-9 || th[i] > p.box[i].hi + 1e-9) return false;
  return true;
}

// Gauss-Newton projection onto {h = 0} using minimum-norm steps.
bool project(const ParameterSet& p, Eigen::VectorXd& th) {
  const auto vars = p.vars();
  const int m = static_cast<int>(p.equalities.size());
  std::vector<std::vector<Polynomial>> grad(m);
  for (int k = 0; k < m; ++k)
    for (VarId v : vars) grad[k].push_back(p.equalities[k].differentiate(v));
  for (int it = 0; it < 60; ++it) {
    const Assignment a = parameter_assignment(th);
    Eigen::VectorXd h(m);
    Eigen::MatrixXd j(m, p.count);
    for (int k = 0; k < m; ++k) {
      h[k] = p.equalities[k].evaluate(a);
      for (int i = 0; i < p.count; ++i) j(k, i) = grad[k][i].evaluate(a);
    }
    if (h.lpNorm<Eigen::Infinity>() <= 1e-13) return true;
    th -= j.completeOrthogonalDecomposition().solve(h);
    if (!th.allFinite()) return false;
  }
  return false;
}

}  // namespace

Eigen::VectorXd sample_parameter(const ParameterSet& params, std::mt19937_64& rng) {
  const int n = params.count;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Sphere> spheres;
  bool all_spheres = true;
  std::vector<char> taken(n, 0);
  for (const Polynomial& h : params.equalities) {
    auto s = as_sphere(h, n);
    if (!s) {
      all_spheres = false;
      break;
    }
    for (int i : s->index) {
      if (taken[i]) all_spheres = false;
      taken[i] = 1;
    }
    spheres.push_back(*s);
  }

  for (int attempt = 0; attempt < kAttemptCap; ++attempt) {
    Eigen::VectorXd th(n);
    for (int i = 0; i < n; ++i) th[i] = params.box[i].lo + (params.box[i].hi - params.box[i].lo) * u(rng);
    if (!params.equalities.empty()) {
      if (all_spheres) {
        for (const Sphere& s : spheres) {
          Eigen::VectorXd g(static_cast<Eigen::Index>(s.index.size()));
          for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = gauss(rng);
          const double norm = g.norm();
          if (norm == 0.0) continue;
          for (std::size_t k = 0; k < s.index.size(); ++k)
            th[s.index[k]] = s.radius * g[static_cast<Eigen::Index>(k)] / norm;
        }
      } else if (!project(params, th)) {
        continue;
      }
    }
    if (in_box(params, th) && params.contains(th, 1e-9)) return th;
  }
  throw ModelError("set appears empty or thin: no feasible sample after " +
                   std::to_string(kAttemptCap) + " attempts");
}

Eigen::VectorXd sample_parameter(const ParameterSet& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_parameter(params, rng);
}

}  // namespace dwellcert
