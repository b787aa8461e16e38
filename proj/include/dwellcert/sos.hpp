#pragma once

// Sum-of-squares matrix programs assembled into block SDPs.
//
// Unknown polynomial matrices carry LinearForm coefficients whose indices
// are program scalars; each scalar lives at one position of one SDP block
// (free blocks for plain unknowns, psd Gram blocks for SOS multipliers).
// A constraint "T(v) is an SOS matrix" adds a psd Gram block G over the
// basis b(v) (x) I_n and one equality per (monomial, entry p <= q) of
// T(v) - (b(v) (x) I)^T G (b(v) (x) I).

#include <string>
#include <vector>

#include "dwellcert/polynomial.hpp"
#include "dwellcert/sdp.hpp"

namespace dwellcert::sos {

struct RowInfo {
  int constraint = -1;
  Monomial monomial;
  int p = 0;
  int q = 0;
};

struct SosConstraint {
  std::string label;
  AffinePolyMatrix target;
  std::vector<Monomial> basis;
  int gram_block = -1;  // index into the SDP blocks
  int first_row = 0;
  int num_rows = 0;
};

struct Decomposition {
  /// Xi(v) with target ~= Xi^T Xi; one row per retained Gram eigenvalue.
  PolyMatrix factor;
  /// Max coefficient of target - Xi^T Xi.
  double residual = 0.0;
  double min_gram_eigenvalue = 0.0;
};

class Program {
 public:
  /// Symmetric dims x dims matrix with every monomial of degree <= `degree`
  /// in `vars` and fresh free coefficients.
  AffinePolyMatrix declare_unknown(int dims, const std::vector<VarId>& vars, int degree);

  /// Free symmetric multiplier; same structure as declare_unknown.
  AffinePolyMatrix add_symmetric_multiplier(int dims, const std::vector<VarId>& vars, int degree) {
    return declare_unknown(dims, vars, degree);
  }

  /// SOS multiplier (b (x) I)^T G (b (x) I) with its own psd Gram block over
  /// monomials of degree <= degree/2. `degree` must be even.
  AffinePolyMatrix add_sos_multiplier(int dims, const std::vector<VarId>& vars, int degree);

  /// Requires `target` (symmetric) to be an SOS matrix in `vars`. An empty
  /// `vars` means the variables of the target. Returns the constraint id.
  int add_sos_constraint(const AffinePolyMatrix& target, std::string label,
                         std::vector<VarId> vars = {});

  const sdp::Problem& problem() const { return problem_; }
  const std::vector<SosConstraint>& constraints() const { return constraints_; }
  const std::vector<RowInfo>& rows() const { return rows_; }
  int num_scalars() const { return static_cast<int>(slots_.size()); }

  /// Values of the program scalars in a solution.
  std::vector<double> scalar_values(const sdp::Solution& sol) const;

  /// Numeric value of an unknown polynomial matrix in a solution.
  PolyMatrix value(const AffinePolyMatrix& m, const sdp::Solution& sol) const;

  /// Factorises the Gram block of a constraint. Negative eigenvalues below
  /// -tol make the call throw std::runtime_error.
  Decomposition extract_decomposition(const sdp::Solution& sol, int constraint,
                                      double tol = 1e-7) const;

 private:
  struct Slot {
    int block;
    int i;
    int j;
  };

  int new_scalar(int block, int i, int j);

  sdp::Problem problem_;
  std::vector<Slot> slots_;
  std::vector<SosConstraint> constraints_;
  std::vector<RowInfo> rows_;
};

/// Resolves all LinearForm coefficients against scalar values.
PolyMatrix resolve(const AffinePolyMatrix& m, const std::vector<double>& values);

}  // namespace dwellcert::sos
