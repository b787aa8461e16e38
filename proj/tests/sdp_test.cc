#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dwellcert/sdp.hpp"

using namespace dwellcert::sdp;

namespace {

Constraint row(std::vector<Entry> e, double rhs) { return {std::move(e), rhs}; }

Problem two_by_two(double a, double b, double c) {
  Problem p;
  p.add_block(2, BlockKind::kPsd);
  p.add_constraint(row({{0, 0, 0, 1.0}}, a));
  p.add_constraint(row({{0, 1, 1, 1.0}}, c));
  p.add_constraint(row({{0, 0, 1, 1.0}}, b));
  return p;
}

}  // namespace

TEST_CASE("scalar block x = 1 is feasible") {
  Problem p;
  p.add_block(1, BlockKind::kPsd);
  p.add_constraint(row({{0, 0, 0, 1.0}}, 1.0));
  const Solution s = solve(p);
  REQUIRE(s.status == Status::kFeasible);
  CHECK(s.blocks[0](0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scalar block x = -1 is infeasible with a valid ray") {
  Problem p;
  p.add_block(1, BlockKind::kPsd);
  p.add_constraint(row({{0, 0, 0, 1.0}}, -1.0));
  const Solution s = solve(p);
  REQUIRE(s.status == Status::kInfeasible);
  const RayCheck rc = verify_ray(p, s.dual);
  CHECK(rc.b_dot_y < 0);
  CHECK(rc.min_psd_eigenvalue >= -1e-9);
}

TEST_CASE("2x2 correlation examples") {
  CHECK(solve(two_by_two(1, 0.9, 1)).status == Status::kFeasible);
  CHECK(solve(two_by_two(1, 1.1, 1)).status == Status::kInfeasible);
}

TEST_CASE("random 2x2 instances agree with the determinant sign") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int checked = 0;
  while (checked < 100) {
    const double a = u(rng), b = u(rng), c = u(rng);
    // Feasible iff a >= 0, c >= 0 and ac >= b^2; keep clear of the boundary.
    const double margin = std::min({a, c, a * c - b * b});
    if (std::abs(margin) < 0.05) continue;
    const Solution s = solve(two_by_two(a, b, c));
    CHECK_MESSAGE(s.status == (margin > 0 ? Status::kFeasible : Status::kInfeasible),
                  "a=" << a << " b=" << b << " c=" << c);
    ++checked;
  }
}

TEST_CASE("free blocks") {
  // x psd, z free: x - z = -1 and z = 3 forces x = 2.
  Problem p;
  p.add_block(1, BlockKind::kPsd);
  p.add_block(1, BlockKind::kFree);
  p.add_constraint(row({{0, 0, 0, 1.0}, {1, 0, 0, -1.0}}, -1.0));
  p.add_constraint(row({{1, 0, 0, 1.0}}, 3.0));
  Solution s = solve(p);
  REQUIRE(s.status == Status::kFeasible);
  CHECK(s.blocks[0](0, 0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(s.blocks[1](0, 0) == doctest::Approx(3.0).epsilon(1e-6));

  // x + z = 0 with z = 1 forces x = -1.
  Problem q;
  q.add_block(1, BlockKind::kPsd);
  q.add_block(1, BlockKind::kFree);
  q.add_constraint(row({{0, 0, 0, 1.0}, {1, 0, 0, 1.0}}, 0.0));
  q.add_constraint(row({{1, 0, 0, 1.0}}, 1.0));
  s = solve(q);
  REQUIRE(s.status == Status::kInfeasible);
  const RayCheck rc = verify_ray(q, s.dual);
  CHECK(rc.b_dot_y < 0);
  CHECK(rc.max_free_violation < 1e-8);
}

TEST_CASE("objective: minimum trace with fixed off-diagonal") {
  Problem p;
  p.add_block(2, BlockKind::kPsd);
  p.add_constraint(row({{0, 0, 1, 1.0}}, 1.0));
  p.objective = {{0, 0, 0, 1.0}, {0, 1, 1, 1.0}};
  const Solution s = solve(p);
  REQUIRE(s.status == Status::kFeasible);
  CHECK(s.blocks[0].trace() == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("preprocess: duplicates, 0 = 1 and scaling") {
  Problem p = two_by_two(1, 0.5, 1);
  p.add_constraint(row({{0, 0, 0, 2.0}}, 2.0));
  const Preprocessed pre = preprocess(p);
  CHECK_FALSE(pre.inconsistent);
  CHECK(pre.problem.constraints.size() == 3);

  Problem bad;
  bad.add_block(1, BlockKind::kPsd);
  bad.add_constraint(row({}, 1.0));
  const Preprocessed pb = preprocess(bad);
  CHECK(pb.inconsistent);
  CHECK(solve(bad).status == Status::kInfeasible);

  Problem clash = two_by_two(1, 0.5, 1);
  clash.add_constraint(row({{0, 0, 0, 1.0}}, 2.0));
  CHECK(preprocess(clash).inconsistent);

  Problem scaled = two_by_two(1, 0.5, 1);
  scaled.constraints[2].entries[0].value = 1e6;
  scaled.constraints[2].rhs = 0.5e6;
  const Solution s1 = solve(two_by_two(1, 0.5, 1));
  const Solution s2 = solve(scaled);
  REQUIRE(s1.status == Status::kFeasible);
  REQUIRE(s2.status == Status::kFeasible);
  CHECK((s1.blocks[0] - s2.blocks[0]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("malformed problems are rejected") {
  Problem p;
  p.add_block(2, BlockKind::kPsd);
  p.add_constraint(row({{0, 1, 0, 1.0}}, 1.0));
  CHECK_THROWS_AS(p.validate(), MalformedProblem);
  Problem q;
  q.add_block(2, BlockKind::kPsd);
  q.add_constraint(row({{3, 0, 0, 1.0}}, 1.0));
  CHECK_THROWS_AS(solve(q), MalformedProblem);
}

TEST_CASE("solves are bitwise deterministic") {
  std::mt19937 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Problem p;
  p.add_block(4, BlockKind::kPsd);
  p.add_block(3, BlockKind::kPsd);
  p.add_block(2, BlockKind::kFree);
  for (int r = 0; r < 8; ++r) {
    Constraint c;
    for (int k = 0; k < 4; ++k) c.entries.push_back({0, k % 4, (k + r) % 4 < k % 4 ? k % 4 : (k + r) % 4, n(rng)});
    c.entries.push_back({1, r % 3, r % 3, n(rng)});
    c.entries.push_back({2, 0, r % 2, n(rng)});
    c.rhs = n(rng);
    p.add_constraint(c);
  }
  const Solution a = solve(p);
  const Solution b = solve(p);
  REQUIRE(a.status == b.status);
  REQUIRE(a.iterations == b.iterations);
  for (std::size_t k = 0; k < a.blocks.size(); ++k)
    CHECK(std::memcmp(a.blocks[k].data(), b.blocks[k].data(), sizeof(double) * a.blocks[k].size()) == 0);
  REQUIRE(a.dual.size() == b.dual.size());
  CHECK(std::memcmp(a.dual.data(), b.dual.data(), sizeof(double) * a.dual.size()) == 0);
}

TEST_CASE("sparse dump round trip") {
  Problem p = two_by_two(1, 0.25, 2);
  p.name = "corr";
  p.add_block(1, BlockKind::kFree);
  p.objective = {{0, 0, 0, 1.0}};
  std::stringstream ss;
  write_sparse(p, ss);
  const Problem q = read_sparse(ss);
  CHECK(q.name == "corr");
  REQUIRE(q.blocks.size() == 2);
  CHECK(q.blocks[1].kind == BlockKind::kFree);
  REQUIRE(q.constraints.size() == 3);
  CHECK(q.constraints[2].rhs == 0.25);
  CHECK(q.constraints[1].entries[0].row == 1);
  CHECK(q.objective.size() == 1);
  std::stringstream bad("dwellcert-sdp 1\nname x\nblocks 1\n2 cone\n");
  CHECK_THROWS_AS(read_sparse(bad), MalformedProblem);
}
