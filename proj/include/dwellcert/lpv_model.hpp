#pragma once

// LPV systems xdot = A(rho) x over a semialgebraic parameter set with a
// derivative model, and their line-oriented text format (docs/formats.md).

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dwellcert/polynomial.hpp"

namespace dwellcert {

/// Syntax or validation error in polynomial or system text. Line and column
/// are 1-based; 0 means "not tied to a position".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Semantic problem with a model (e.g. the parameter set looks empty).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Constants = std::map<std::string, double>;

/// Parses "-2 - rho1", "15/4*rho2^2", "(rho1 - 1)^2" and the like. Known
/// variables are tau, rhoN and etaN; other identifiers must be constants.
/// `line` is only used to position errors.
Polynomial parse_polynomial(std::string_view text, const Constants& constants = {}, int line = 0);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct ParameterSet {
  int count = 0;                  // N
  std::vector<Interval> box;      // box hull, one per parameter
  std::vector<Polynomial> inequalities;  // g_i >= 0
  std::vector<Polynomial> equalities;    // h_i = 0

  std::vector<VarId> vars() const;  // rho1..rhoN
  /// g_i >= -tol and |h_i| <= tol.
  bool contains(const Eigen::VectorXd& theta, double tol = 1e-9) const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

struct DerivativeModel {
  enum class Kind { kBox, kMaps };
  Kind kind = Kind::kBox;
  std::vector<Interval> box;                   // kBox: per-parameter rate bounds
  std::vector<std::vector<Polynomial>> maps;   // kMaps: theta -> mu_j(theta)

  /// Distinct vertex maps: D^v as constant maps in the box case, the given
  /// maps otherwise. Duplicates (e.g. degenerate intervals) are merged.
  std::vector<std::vector<Polynomial>> vertex_maps(int count) const;

  friend bool operator==(const DerivativeModel&, const DerivativeModel&) = default;
};

struct LpvSystem {
  int n = 0;
  std::string label;
  PolyMatrix a;
  ParameterSet params;
  DerivativeModel derivs;

  friend bool operator==(const LpvSystem&, const LpvSystem&) = default;
};

/// Parses and validates a system file. `overrides` replace values of
/// constants declared in the [constants] section; overriding an undeclared
/// constant is an error.
LpvSystem parse_system(std::string_view text, const Constants& overrides = {});
LpvSystem load_system(const std::string& path, const Constants& overrides = {});

/// Canonical text form; constants are already folded into the numbers.
std::string print_system(const LpvSystem& sys);

/// theta -> {rho_i: theta_i}.
Assignment parameter_assignment(const Eigen::VectorXd& theta);

/// Random point of the parameter set. Inequality-only sets use rejection in
/// the box hull; spheres sum_i c rho_i^2 = r are sampled by normalised
/// Gaussians, other equalities by Newton projection. Throws ModelError
/// ("set appears empty or thin") after the attempt cap.
Eigen::VectorXd sample_parameter(const ParameterSet& params, std::mt19937_64& rng);
Eigen::VectorXd sample_parameter(const ParameterSet& params, std::uint64_t seed);

}  // namespace dwellcert
