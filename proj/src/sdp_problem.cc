#include <limits>
#include <stdexcept>
#include <tuple>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dwellcert/sdp.hpp"

namespace dwellcert::sdp {

int Problem::add_block(int size, BlockKind kind) {
  blocks.push_back({size, kind});
  return static_cast<int>(blocks.size()) - 1;
}

int Problem::add_constraint(Constraint c) {
  constraints.push_back(std::move(c));
  return static_cast<int>(constraints.size()) - 1;
}

namespace {

void check_entry(const Problem& p, const Entry& e, const std::string& where) {
  if (e.block < 0 || e.block >= static_cast<int>(p.blocks.size()))
    throw MalformedProblem(where + ": block index " + std::to_string(e.block) + " out of range");
  const int n = p.blocks[e.block].size;
  if (e.row < 0 || e.col < 0 || e.row >= n || e.col >= n)
    throw MalformedProblem(where + ": position (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") outside block of size " + std::to_string(n));
  if (e.row > e.col)
    throw MalformedProblem(where + ": entry (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") is not in the upper triangle");
  if (!std::isfinite(e.value)) throw MalformedProblem(where + ": non-finite coefficient");
}

// Symmetric matrix of the functional `entries` restricted to one block.
void accumulate_symmetric(const Entry& e, double weight, Eigen::MatrixXd& m) {
  if (e.row == e.col) {
    m(e.row, e.row) += weight * e.value;
  } else {
    m(e.row, e.col) += 0.5 * weight * e.value;
    m(e.col, e.row) += 0.5 * weight * e.value;
  }
}

}  // namespace

void Problem::validate() const {
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (blocks[b].size < 1)
      throw MalformedProblem("block " + std::to_string(b) + " has size " +
                             std::to_string(blocks[b].size));
  for (std::size_t r = 0; r < constraints.size(); ++r) {
    const std::string where = "constraint " + std::to_string(r);
    if (!std::isfinite(constraints[r].rhs)) throw MalformedProblem(where + ": non-finite rhs");
    for (const Entry& e : constraints[r].entries) check_entry(*this, e, where);
  }
  for (const Entry& e : objective) check_entry(*this, e, "objective");
}

int Problem::num_psd_blocks() const {
  int k = 0;
  for (const Block& b : blocks) k += b.kind == BlockKind::kPsd;
  return k;
}

long Problem::num_scalar_variables() const {
  long n = 0;
  for (const Block& b : blocks) n += static_cast<long>(b.size) * (b.size + 1) / 2;
  return n;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::kFeasible:
      return "feasible";
    case Status::kInfeasible:
      return "infeasible";
    case Status::kNumericalFailure:
      return "numerical-failure";
  }
  return "?";
}

PrimalCheck verify_primal(const Problem& problem, const std::vector<Eigen::MatrixXd>& blocks) {
  PrimalCheck out;
  if (blocks.size() != problem.blocks.size())
    throw std::invalid_argument("verify_primal: block count mismatch");
  for (const Constraint& c : problem.constraints) {
    std::map<std::tuple<int, int, int>, double> merged;
    double lhs = 0.0;
    for (const Entry& e : c.entries) {
      lhs += e.value * blocks[e.block](e.row, e.col);
      merged[{e.block, e.row, e.col}] += e.value;
    }
    double norm2 = 0.0;
    for (const auto& [k, v] : merged) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    double violation;
    if (norm > 0.0)
      violation = std::abs(lhs - c.rhs) / norm / (1.0 + std::abs(c.rhs) / norm);
    else
      violation = std::abs(c.rhs) / (1.0 + std::abs(c.rhs));
    out.max_equality_violation = std::max(out.max_equality_violation, violation);
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    if (problem.blocks[b].kind != BlockKind::kPsd) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blocks[b], Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  out.min_psd_eigenvalue = std::isfinite(min_eig) ? min_eig : 0.0;
  return out;
}

RayCheck verify_ray(const Problem& problem, const Eigen::VectorXd& y) {
  if (y.size() != static_cast<Eigen::Index>(problem.constraints.size()))
    throw std::invalid_argument("verify_ray: ray length mismatch");
  RayCheck out;
  std::vector<Eigen::MatrixXd> agg;
  for (const Block& b : problem.blocks) agg.push_back(Eigen::MatrixXd::Zero(b.size, b.size));
  for (std::size_t r = 0; r < problem.constraints.size(); ++r) {
    out.b_dot_y += y[r] * problem.constraints[r].rhs;
    for (const Entry& e : problem.constraints[r].entries) {
      if (problem.blocks[e.block].kind == BlockKind::kPsd)
        accumulate_symmetric(e, y[r], agg[e.block]);
      else
        agg[e.block](e.row, e.col) += y[r] * e.value;
    }
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    if (problem.blocks[b].kind == BlockKind::kPsd) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(agg[b], Eigen::EigenvaluesOnly);
      min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    } else {
      out.max_free_violation =
          std::max(out.max_free_violation, agg[b].triangularView<Eigen::Upper>().toDenseMatrix()
                                               .cwiseAbs()
                                               .maxCoeff());
    }
  }
  out.min_psd_eigenvalue = std::isfinite(min_eig) ? min_eig : 0.0;
  return out;
}

// ---------------------------------------------------------------------------

void write_sparse(const Problem& problem, std::ostream& os) {
  os.precision(17);
  os << "dwellcert-sdp 1\n";
  os << "name " << (problem.name.empty() ? "-" : problem.name) << "\n";
  os << "blocks " << problem.blocks.size() << "\n";
  for (const Block& b : problem.blocks)
    os << b.size << ' ' << (b.kind == BlockKind::kPsd ? "psd" : "free") << "\n";
  os << "constraints " << problem.constraints.size() << "\n";
  for (std::size_t r = 0; r < problem.constraints.size(); ++r)
    os << r << ' ' << problem.constraints[r].rhs << "\n";
  std::size_t nnz = 0;
  for (const Constraint& c : problem.constraints) nnz += c.entries.size();
  os << "entries " << nnz << "\n";
  for (std::size_t r = 0; r < problem.constraints.size(); ++r)
    for (const Entry& e : problem.constraints[r].entries)
      os << r << ' ' << e.block << ' ' << e.row << ' ' << e.col << ' ' << e.value << "\n";
  os << "objective " << problem.objective.size() << "\n";
  for (const Entry& e : problem.objective)
    os << e.block << ' ' << e.row << ' ' << e.col << ' ' << e.value << "\n";
}

Problem read_sparse(std::istream& is) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(is >> got) || got != word)
      throw MalformedProblem("sparse SDP: expected '" + word + "', got '" + got + "'");
  };
  Problem p;
  expect("dwellcert-sdp");
  int version = 0;
  is >> version;
  if (version != 1) throw MalformedProblem("sparse SDP: unsupported version");
  expect("name");
  is >> p.name;
  if (p.name == "-") p.name.clear();
  std::size_t count = 0;
  expect("blocks");
  is >> count;
  for (std::size_t k = 0; k < count; ++k) {
    int size = 0;
    std::string kind;
    is >> size >> kind;
    if (kind != "psd" && kind != "free") throw MalformedProblem("sparse SDP: bad block kind");
    p.add_block(size, kind == "psd" ? BlockKind::kPsd : BlockKind::kFree);
  }
  expect("constraints");
  is >> count;
  p.constraints.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t r = 0;
    double rhs = 0.0;
    is >> r >> rhs;
    if (r >= count) throw MalformedProblem("sparse SDP: rhs index out of range");
    p.constraints[r].rhs = rhs;
  }
  expect("entries");
  is >> count;
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t r = 0;
    Entry e;
    is >> r >> e.block >> e.row >> e.col >> e.value;
    if (r >= p.constraints.size()) throw MalformedProblem("sparse SDP: row index out of range");
    p.constraints[r].entries.push_back(e);
  }
  expect("objective");
  is >> count;
  for (std::size_t k = 0; k < count; ++k) {
    Entry e;
    is >> e.block >> e.row >> e.col >> e.value;
    p.objective.push_back(e);
  }
  if (!is) throw MalformedProblem("sparse SDP: truncated input");
  p.validate();
  return p;
}

}  // namespace dwellcert::sdp
