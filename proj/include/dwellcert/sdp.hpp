#pragma once

// Block-diagonal semidefinite feasibility problems.
//
//   find  X_b (b = 1..K)
//   s.t.  sum_{(b,i,j) in row r} a * X_b(i,j) = rhs_r      for every row r
//         X_b psd                                          for psd blocks
//         X_b symmetric, otherwise unconstrained           for free blocks
//
// Entries address the upper triangle only (i <= j); a coefficient on an
// off-diagonal entry multiplies the single scalar X_b(i,j) = X_b(j,i).
// An optional linear objective (same entry format) turns the problem into
// `minimize <C, X>`; it is empty for pure feasibility problems.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dwellcert::sdp {

enum class BlockKind { kPsd, kFree };

struct Block {
  int size = 0;
  BlockKind kind = BlockKind::kPsd;
};

struct Entry {
  int block = 0;
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct Constraint {
  std::vector<Entry> entries;
  double rhs = 0.0;
};

class MalformedProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Problem {
  std::string name;
  std::vector<Block> blocks;
  std::vector<Constraint> constraints;
  std::vector<Entry> objective;

  int add_block(int size, BlockKind kind);
  int add_constraint(Constraint c);

  /// Throws MalformedProblem on bad block indices, lower-triangle entries,
  /// out-of-range positions, non-finite data or empty psd blocks.
  void validate() const;

  int num_psd_blocks() const;
  /// Scalar unknowns: upper-triangle entries over all blocks.
  long num_scalar_variables() const;
};

enum class Status { kFeasible, kInfeasible, kNumericalFailure };

const char* to_string(Status s);

struct Options {
  double feas_tol = 1e-7;
  double gap_tol = 1e-7;
  int max_iterations = 200;
  bool preprocess = true;
  bool verbose = false;
};

struct Solution {
  Status status = Status::kNumericalFailure;
  /// Primal block values (symmetric), one per block. Meaningful when feasible.
  std::vector<Eigen::MatrixXd> blocks;
  /// Feasible: equality multipliers. Infeasible: Farkas ray y with
  /// sum_r y_r A_r psd on psd blocks, zero on free blocks and b^T y = -1.
  Eigen::VectorXd dual;
  /// Max over rows of |a_r . x - b_r| / (1 + |b_r|) with rows scaled to unit norm.
  double max_equality_violation = 0.0;
  /// Smallest eigenvalue over psd blocks of the returned primal point.
  double min_psd_eigenvalue = 0.0;
  /// Infeasible: normalised margin by which the ray certifies infeasibility
  /// (-b^T y minus the psd violation of sum_r y_r A_r, scaled by ||y||).
  double infeasibility_margin = 0.0;
  int iterations = 0;
  std::string message;
};

/// Primal-dual interior point with Nesterov-Todd scaling on the homogeneous
/// self-dual embedding. Deterministic. Feasible answers are re-checked by
/// verify_primal before being reported.
Solution solve(const Problem& problem, const Options& options = {});

struct Preprocessed {
  Problem problem;
  std::vector<int> kept_rows;     // original index of each retained row
  std::vector<double> row_scale;  // retained row = original row / row_scale
  bool inconsistent = false;
  int inconsistent_row = -1;      // original index of the first contradiction
};

/// Drops exactly redundant rows, scales rows to unit norm and detects
/// contradictory equalities (including 0 = nonzero).
Preprocessed preprocess(const Problem& problem);

struct PrimalCheck {
  double max_equality_violation = 0.0;
  double min_psd_eigenvalue = 0.0;
};

/// Independent residual and eigenvalue check of a primal point.
PrimalCheck verify_primal(const Problem& problem, const std::vector<Eigen::MatrixXd>& blocks);

struct RayCheck {
  double b_dot_y = 0.0;
  double min_psd_eigenvalue = 0.0;  // of sum_r y_r A_r over psd blocks
  double max_free_violation = 0.0;  // |sum_r y_r A_r| over free entries
};

/// Independent check of an infeasibility ray.
RayCheck verify_ray(const Problem& problem, const Eigen::VectorXd& y);

/// Plain-text dump, format documented in docs/formats.md.
void write_sparse(const Problem& problem, std::ostream& os);
Problem read_sparse(std::istream& is);

}  // namespace dwellcert::sdp
