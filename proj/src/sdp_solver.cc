// Homogeneous self-dual interior point for block-diagonal SDPs with free
// variables.
//
// Unknowns: X (psd blocks), z (free scalars), y (row multipliers), Z (dual
// slacks), tau, kappa. The embedding drives
//
//   A(X) + B z - b tau          = 0
//   A^T y + Z - C tau           = 0
//   B^T y - c_z tau             = 0
//   <C,X> + c_z.z - b.y + kappa = 0
//   X Z = 0, tau kappa = 0
//
// to zero with Mehrotra predictor-corrector steps in Nesterov-Todd scaled
// space. tau > 0 at the limit yields a solution X/tau, kappa > 0 an
// infeasibility ray. The Newton system
//
//   [ M   B ] [dy]   [r1]      M = A (W (x) W) A^T
//   [ B^T 0 ] [dz] = [r2]
//
// is solved with M block diagonal over the connected components of the
// row/psd-block incidence graph, and the free variables eliminated through
// the dense complement B^T M^-1 B.

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <cstdio>
#include <string>
#include <limits>
#include <numeric>

#include "dwellcert/sdp.hpp"

namespace dwellcert::sdp {

namespace {

struct Triplet {
  int row;
  int i;
  int j;
  double v;
};

struct PsdBlock {
  int original = 0;
  int size = 0;
  std::vector<Triplet> a;  // sorted by row
  Eigen::MatrixXd c;
};

struct FreeVar {
  int block;
  int i;
  int j;
};

struct Component {
  std::vector<int> rows;
  std::vector<int> blocks;
  std::vector<int> free_cols;
  Eigen::MatrixXd m;  // unregularised Schur block
  Eigen::LLT<Eigen::MatrixXd> chol;  // of D M D + reg I
  Eigen::VectorXd d;                  // Jacobi scaling D
  Eigen::MatrixXd bc;  // dense B restricted to rows x free_cols
};

struct Scaling {
  Eigen::MatrixXd r;      // W = R R^T, R^T Z R = R^-1 X R^-T = diag(lambda)
  Eigen::MatrixXd r_inv;  // R^-1
  Eigen::MatrixXd w;
  Eigen::VectorXd lambda;
  Eigen::MatrixXd lx;  // chol(X)
  Eigen::MatrixXd lz;  // chol(Z)
};

struct Direction {
  std::vector<Eigen::MatrixXd> dx;
  std::vector<Eigen::MatrixXd> dzs;
  Eigen::VectorXd dfree;
  Eigen::VectorXd dy;
  double dtau = 0.0;
  double dkappa = 0.0;
};

double inner(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return a.cwiseProduct(b).sum(); }

// Largest alpha in [0, inf) with I + alpha * S psd, where S = L^-1 D L^-T.
double max_step(const Eigen::MatrixXd& l, const Eigen::MatrixXd& d) {
  const auto lv = l.triangularView<Eigen::Lower>();
  Eigen::MatrixXd s = lv.solve(d);
  s = lv.solve(s.transpose()).transpose();
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (!std::isfinite(lmin)) return 0.0;
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

class HomogeneousSolver {
 public:
  HomogeneousSolver(const Problem& p, const Options& o) : problem_(p), opt_(o) { setup(); }

  Solution run();

 private:
  void setup();
  Eigen::VectorXd apply_a(const std::vector<Eigen::MatrixXd>& mats) const;
  std::vector<Eigen::MatrixXd> apply_at(const Eigen::VectorXd& y) const;
  Eigen::VectorXd apply_b(const Eigen::VectorXd& z) const;
  Eigen::VectorXd apply_bt(const Eigen::VectorXd& y) const;
  void compute_scalings();
  bool factor();
  void solve_kkt(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd* u,
                 Eigen::VectorXd* v) const;
  void solve_regularised(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd* u,
                         Eigen::VectorXd* v) const;
  Direction direction(double eta, const std::vector<Eigen::MatrixXd>& rhs_c, double rhs_tk,
                      const Eigen::VectorXd& p, const Eigen::VectorXd& q, double cwc,
                      const Eigen::VectorXd& a_wcw) const;
  double step_to_boundary(const Direction& d) const;
  Solution finish_feasible(int iter);
  Solution finish_infeasible(int iter, double by);
  Solution give_up(int iter, const char* why);

  const Problem& problem_;
  Options opt_;
  int m_ = 0;
  Eigen::VectorXd b_;
  std::vector<PsdBlock> psd_;
  std::vector<FreeVar> free_;
  std::vector<std::vector<std::pair<int, double>>> b_rows_;  // row -> (free idx, coef)
  Eigen::VectorXd c_free_;
  bool has_objective_ = false;
  int nu_ = 0;
  std::vector<Component> comps_;
  std::vector<int> row_comp_;
  std::vector<int> row_pos_;
  Eigen::LLT<Eigen::MatrixXd> sb_chol_;
  Eigen::VectorXd sb_d_;
  double reg_primal_ = 0.0;
  double reg_dual_ = 0.0;

  // Iterates.
  std::vector<Eigen::MatrixXd> x_, zs_;
  Eigen::VectorXd free_x_, y_;
  double tau_ = 1.0, kappa_ = 1.0;
  std::vector<Scaling> scal_;

  // Residuals.
  Eigen::VectorXd rp_, rz_;
  std::vector<Eigen::MatrixXd> rd_;
  double rg_ = 0.0;

  struct Snapshot {
    double metric = std::numeric_limits<double>::infinity();
    int iter = 0;
    std::vector<Eigen::MatrixXd> x;
    Eigen::VectorXd free_x, y;
    double tau = 1.0;
  } best_;
};

void HomogeneousSolver::setup() {
  m_ = static_cast<int>(problem_.constraints.size());
  b_.resize(m_);
  std::vector<int> psd_index(problem_.blocks.size(), -1);
  std::vector<std::vector<std::vector<int>>> free_index(problem_.blocks.size());
  for (std::size_t k = 0; k < problem_.blocks.size(); ++k) {
    const Block& blk = problem_.blocks[k];
    if (blk.kind == BlockKind::kPsd) {
      psd_index[k] = static_cast<int>(psd_.size());
      PsdBlock pb;
      pb.original = static_cast<int>(k);
      pb.size = blk.size;
      pb.c = Eigen::MatrixXd::Zero(blk.size, blk.size);
      psd_.push_back(std::move(pb));
      nu_ += blk.size;
    } else {
      free_index[k].assign(blk.size, std::vector<int>(blk.size, -1));
      for (int i = 0; i < blk.size; ++i)
        for (int j = i; j < blk.size; ++j) {
          free_index[k][i][j] = static_cast<int>(free_.size());
          free_.push_back({static_cast<int>(k), i, j});
        }
    }
  }
  b_rows_.resize(m_);
  for (int r = 0; r < m_; ++r) {
    const Constraint& c = problem_.constraints[r];
    b_[r] = c.rhs;
    for (const Entry& e : c.entries) {
      if (psd_index[e.block] >= 0)
        psd_[psd_index[e.block]].a.push_back({r, e.row, e.col, e.value});
      else
        b_rows_[r].emplace_back(free_index[e.block][e.row][e.col], e.value);
    }
  }
  c_free_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size()));
  for (const Entry& e : problem_.objective) {
    has_objective_ = true;
    if (psd_index[e.block] >= 0) {
      auto& cm = psd_[psd_index[e.block]].c;
      if (e.row == e.col) {
        cm(e.row, e.row) += e.value;
      } else {
        cm(e.row, e.col) += 0.5 * e.value;
        cm(e.col, e.row) += 0.5 * e.value;
      }
    } else {
      c_free_[free_index[e.block][e.row][e.col]] += e.value;
    }
  }

  // Components: rows sharing a psd block are coupled in M.
  std::vector<int> parent(m_);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<int> block_root(psd_.size(), -1);
  for (std::size_t k = 0; k < psd_.size(); ++k) {
    for (const Triplet& t : psd_[k].a) {
      if (block_root[k] < 0) {
        block_root[k] = t.row;
      } else {
        const int a = find(block_root[k]);
        const int b = find(t.row);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  row_comp_.assign(m_, -1);
  row_pos_.assign(m_, -1);
  std::vector<int> root_comp(m_, -1);
  for (int r = 0; r < m_; ++r) {
    const int root = find(r);
    if (root_comp[root] < 0) {
      root_comp[root] = static_cast<int>(comps_.size());
      comps_.emplace_back();
    }
    Component& c = comps_[root_comp[root]];
    row_comp_[r] = root_comp[root];
    row_pos_[r] = static_cast<int>(c.rows.size());
    c.rows.push_back(r);
  }
  for (std::size_t k = 0; k < psd_.size(); ++k)
    if (block_root[k] >= 0) comps_[row_comp_[block_root[k]]].blocks.push_back(static_cast<int>(k));
  for (Component& c : comps_) {
    std::vector<int> cols;
    for (int r : c.rows)
      for (const auto& [j, v] : b_rows_[r]) cols.push_back(j);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    c.free_cols = std::move(cols);
    c.bc = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(c.rows.size()),
                                 static_cast<Eigen::Index>(c.free_cols.size()));
    for (std::size_t pos = 0; pos < c.rows.size(); ++pos)
      for (const auto& [j, v] : b_rows_[c.rows[pos]]) {
        const auto it = std::lower_bound(c.free_cols.begin(), c.free_cols.end(), j);
        c.bc(static_cast<Eigen::Index>(pos), it - c.free_cols.begin()) += v;
      }
  }
}

Eigen::VectorXd HomogeneousSolver::apply_a(const std::vector<Eigen::MatrixXd>& mats) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
  for (std::size_t k = 0; k < psd_.size(); ++k)
    for (const Triplet& t : psd_[k].a) out[t.row] += t.v * mats[k](t.i, t.j);
  return out;
}

std::vector<Eigen::MatrixXd> HomogeneousSolver::apply_at(const Eigen::VectorXd& y) const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(psd_.size());
  for (const PsdBlock& pb : psd_) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(pb.size, pb.size);
    for (const Triplet& t : pb.a) {
      if (t.i == t.j) {
        m(t.i, t.i) += t.v * y[t.row];
      } else {
        m(t.i, t.j) += 0.5 * t.v * y[t.row];
        m(t.j, t.i) += 0.5 * t.v * y[t.row];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

Eigen::VectorXd HomogeneousSolver::apply_b(const Eigen::VectorXd& z) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
  for (int r = 0; r < m_; ++r)
    for (const auto& [j, v] : b_rows_[r]) out[r] += v * z[j];
  return out;
}

Eigen::VectorXd HomogeneousSolver::apply_bt(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size()));
  for (int r = 0; r < m_; ++r)
    for (const auto& [j, v] : b_rows_[r]) out[j] += v * y[r];
  return out;
}

void HomogeneousSolver::compute_scalings() {
  scal_.resize(psd_.size());
  for (std::size_t k = 0; k < psd_.size(); ++k) {
    Scaling& s = scal_[k];
    s.lx = Eigen::LLT<Eigen::MatrixXd>(x_[k]).matrixL();
    s.lz = Eigen::LLT<Eigen::MatrixXd>(zs_[k]).matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.lz.transpose() * s.lx,
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    s.lambda = svd.singularValues();
    const Eigen::VectorXd isq = s.lambda.cwiseSqrt().cwiseInverse();
    s.r = s.lx * svd.matrixV() * isq.asDiagonal();
    s.r_inv = isq.asDiagonal() * svd.matrixU().transpose() * s.lz.transpose();
    s.w = s.r * s.r.transpose();
  }
}

bool HomogeneousSolver::factor() {
  double max_diag = 0.0;
  for (Component& c : comps_) {
    const auto n = static_cast<Eigen::Index>(c.rows.size());
    c.m = Eigen::MatrixXd::Zero(n, n);
    for (int k : c.blocks) {
      const auto& a = psd_[k].a;
      const Eigen::MatrixXd& w = scal_[k].w;
      for (std::size_t p = 0; p < a.size(); ++p) {
        const Triplet& t1 = a[p];
        const int r1 = row_pos_[t1.row];
        for (std::size_t q = p; q < a.size(); ++q) {
          const Triplet& t2 = a[q];
          const double val =
              0.5 * t1.v * t2.v * (w(t1.i, t2.i) * w(t1.j, t2.j) + w(t1.i, t2.j) * w(t1.j, t2.i));
          const int r2 = row_pos_[t2.row];
          c.m(r1, r2) += val;
          if (p != q) c.m(r2, r1) += val;
        }
      }
    }
    if (n > 0) max_diag = std::max(max_diag, c.m.diagonal().maxCoeff());
  }
  // Cholesky of the Jacobi-scaled blocks; the regularisation is relative
  // to the unit diagonal.
  auto jacobi = [](const Eigen::MatrixXd& m) {
    Eigen::VectorXd d(m.rows());
    const double floor = m.rows() ? std::max(1e-12 * m.diagonal().maxCoeff(), 1e-12) : 1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) d[i] = 1.0 / std::sqrt(std::max(m(i, i), floor));
    return d;
  };
  (void)max_diag;
  reg_primal_ = 1e-14;
  for (Component& c : comps_) {
    c.d = jacobi(c.m);
    const Eigen::MatrixXd scaled = c.d.asDiagonal() * c.m * c.d.asDiagonal();
    for (double reg = reg_primal_;; reg *= 100.0) {
      Eigen::MatrixXd mr = scaled;
      mr.diagonal().array() += reg;
      c.chol.compute(mr);
      if (c.chol.info() == Eigen::Success) break;
      if (reg > 1e-4) return false;
    }
  }
  const auto nf = static_cast<Eigen::Index>(free_.size());
  if (nf == 0) return true;
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(nf, nf);
  for (const Component& c : comps_) {
    if (c.free_cols.empty()) continue;
    Eigen::MatrixXd y = c.d.asDiagonal() * c.bc;
    c.chol.matrixL().solveInPlace(y);
    Eigen::MatrixXd yty = Eigen::MatrixXd::Zero(y.cols(), y.cols());
    yty.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose());
    yty.triangularView<Eigen::StrictlyUpper>() = yty.transpose();
    for (std::size_t a = 0; a < c.free_cols.size(); ++a)
      for (std::size_t b = 0; b < c.free_cols.size(); ++b)
        sb(c.free_cols[a], c.free_cols[b]) += yty(static_cast<Eigen::Index>(a),
                                                  static_cast<Eigen::Index>(b));
  }
  sb_d_ = jacobi(sb);
  const Eigen::MatrixXd sbs = sb_d_.asDiagonal() * sb * sb_d_.asDiagonal();
  for (double reg = 1e-14;; reg *= 100.0) {
    Eigen::MatrixXd sr = sbs;
    sr.diagonal().array() += reg;
    sb_chol_.compute(sr);
    if (sb_chol_.info() == Eigen::Success) {
      reg_dual_ = reg;
      break;
    }
    if (reg > 1e-4) return false;
  }
  return true;
}

void HomogeneousSolver::solve_regularised(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                                          Eigen::VectorXd* u, Eigen::VectorXd* v) const {
  auto apply_minv = [&](const Eigen::VectorXd& rhs) {
    Eigen::VectorXd out(m_);
    for (const Component& c : comps_) {
      Eigen::VectorXd seg(static_cast<Eigen::Index>(c.rows.size()));
      for (std::size_t k = 0; k < c.rows.size(); ++k) seg[static_cast<Eigen::Index>(k)] = rhs[c.rows[k]];
      seg = c.d.cwiseProduct(c.chol.solve(c.d.cwiseProduct(seg)));
      for (std::size_t k = 0; k < c.rows.size(); ++k) out[c.rows[k]] = seg[static_cast<Eigen::Index>(k)];
    }
    return out;
  };
  if (free_.empty()) {
    *u = apply_minv(r1);
    *v = Eigen::VectorXd();
    return;
  }
  const Eigen::VectorXd t = apply_minv(r1);
  *v = sb_d_.cwiseProduct(sb_chol_.solve(sb_d_.cwiseProduct(apply_bt(t) - r2)));
  *u = apply_minv(r1 - apply_b(*v));
}

void HomogeneousSolver::solve_kkt(const Eigen::VectorXd& r1, const Eigen::VectorXd& r2,
                                  Eigen::VectorXd* u, Eigen::VectorXd* v) const {
  solve_regularised(r1, r2, u, v);
  auto apply_m = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(m_);
    for (const Component& c : comps_) {
      Eigen::VectorXd seg(static_cast<Eigen::Index>(c.rows.size()));
      for (std::size_t k = 0; k < c.rows.size(); ++k) seg[static_cast<Eigen::Index>(k)] = x[c.rows[k]];
      seg = c.m * seg;
      for (std::size_t k = 0; k < c.rows.size(); ++k) out[c.rows[k]] = seg[static_cast<Eigen::Index>(k)];
    }
    return out;
  };
  // Iterative refinement against the unregularised system; stops when a
  // pass no longer reduces the residual and keeps the best solution.
  const double scale = std::max(1.0, std::max(r1.lpNorm<Eigen::Infinity>(),
                                              free_.empty() ? 0.0 : r2.lpNorm<Eigen::Infinity>()));
  double best_err = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_u, best_v;
  for (int pass = 0; pass <= 10; ++pass) {
    Eigen::VectorXd e1 = r1 - apply_m(*u);
    Eigen::VectorXd e2;
    if (!free_.empty()) {
      e1 -= apply_b(*v);
      e2 = r2 - apply_bt(*u);
    }
    const double err = std::max(e1.lpNorm<Eigen::Infinity>(),
                                free_.empty() ? 0.0 : e2.lpNorm<Eigen::Infinity>());
    if (!(err < best_err)) break;
    best_err = err;
    best_u = *u;
    best_v = *v;
    if (err <= 1e-15 * scale || pass == 10) break;
    Eigen::VectorXd du, dv;
    solve_regularised(e1, e2, &du, &dv);
    *u += du;
    if (!free_.empty()) *v += dv;
  }
  *u = std::move(best_u);
  *v = std::move(best_v);
}

Direction HomogeneousSolver::direction(double eta, const std::vector<Eigen::MatrixXd>& rhs_c,
                                       double rhs_tk, const Eigen::VectorXd& p,
                                       const Eigen::VectorXd& q, double cwc,
                                       const Eigen::VectorXd& a_wcw) const {
  const std::size_t nb = psd_.size();
  std::vector<Eigen::MatrixXd> rer(nb), h(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    const Scaling& s = scal_[k];
    const int n = psd_[k].size;
    Eigen::MatrixXd e(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e(i, j) = 2.0 * rhs_c[k](i, j) / (s.lambda[i] + s.lambda[j]);
    rer[k] = s.r * e * s.r.transpose();
    h[k] = rer[k] + eta * s.w * rd_[k] * s.w;
  }
  const Eigen::VectorXd r1 = -eta * rp_ - apply_a(h);
  const Eigen::VectorXd r2 = free_.empty() ? Eigen::VectorXd() : Eigen::VectorXd(-eta * rz_);
  Eigen::VectorXd u, v;
  solve_kkt(r1, r2, &u, &v);

  double c_h = 0.0;
  for (std::size_t k = 0; k < nb; ++k) c_h += inner(psd_[k].c, h[k]);
  const Eigen::VectorXd amb = a_wcw - b_;
  double denom = amb.dot(p) - cwc - kappa_ / tau_;
  double numer = -eta * rg_ - c_h - amb.dot(u) - rhs_tk / tau_;
  if (!free_.empty()) {
    denom += c_free_.dot(q);
    numer -= c_free_.dot(v);
  }
  Direction d;
  d.dtau = numer / denom;
  d.dy = u + p * d.dtau;
  if (!free_.empty()) d.dfree = v + q * d.dtau;
  d.dkappa = (rhs_tk - kappa_ * d.dtau) / tau_;
  const auto aty = apply_at(d.dy);
  d.dx.resize(nb);
  d.dzs.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    d.dzs[k] = -eta * rd_[k] - aty[k] + psd_[k].c * d.dtau;
    d.dzs[k] = 0.5 * (d.dzs[k] + d.dzs[k].transpose());
    d.dx[k] = rer[k] - scal_[k].w * d.dzs[k] * scal_[k].w;
    d.dx[k] = 0.5 * (d.dx[k] + d.dx[k].transpose());
  }
  return d;
}

double HomogeneousSolver::step_to_boundary(const Direction& d) const {
  double alpha = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < psd_.size(); ++k) {
    alpha = std::min(alpha, max_step(scal_[k].lx, d.dx[k]));
    alpha = std::min(alpha, max_step(scal_[k].lz, d.dzs[k]));
  }
  if (d.dtau < 0) alpha = std::min(alpha, -tau_ / d.dtau);
  if (d.dkappa < 0) alpha = std::min(alpha, -kappa_ / d.dkappa);
  return alpha;
}

Solution HomogeneousSolver::finish_feasible(int iter) {
  Solution sol;
  sol.status = Status::kFeasible;
  sol.iterations = iter;
  sol.blocks.resize(problem_.blocks.size());
  for (std::size_t k = 0; k < problem_.blocks.size(); ++k)
    sol.blocks[k] = Eigen::MatrixXd::Zero(problem_.blocks[k].size, problem_.blocks[k].size);
  for (std::size_t k = 0; k < psd_.size(); ++k) sol.blocks[psd_[k].original] = x_[k] / tau_;
  for (std::size_t j = 0; j < free_.size(); ++j) {
    const FreeVar& f = free_[j];
    sol.blocks[f.block](f.i, f.j) = free_x_[static_cast<Eigen::Index>(j)] / tau_;
    sol.blocks[f.block](f.j, f.i) = free_x_[static_cast<Eigen::Index>(j)] / tau_;
  }
  sol.dual = y_ / tau_;
  return sol;
}

Solution HomogeneousSolver::finish_infeasible(int iter, double by) {
  Solution sol;
  sol.status = Status::kInfeasible;
  sol.iterations = iter;
  // Witness convention: sum y_r A_r psd with b^T y < 0.
  sol.dual = -y_ / by;
  return sol;
}

Solution HomogeneousSolver::run() {
  x_.clear();
  zs_.clear();
  for (const PsdBlock& pb : psd_) {
    x_.push_back(Eigen::MatrixXd::Identity(pb.size, pb.size));
    zs_.push_back(Eigen::MatrixXd::Identity(pb.size, pb.size));
  }
  free_x_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free_.size()));
  y_ = Eigen::VectorXd::Zero(m_);
  tau_ = 1.0;
  kappa_ = 1.0;

  double c_norm = c_free_.size() ? c_free_.lpNorm<Eigen::Infinity>() : 0.0;
  for (const PsdBlock& pb : psd_) c_norm = std::max(c_norm, pb.c.cwiseAbs().maxCoeff());

  int stalls = 0;
  for (int iter = 0; iter <= opt_.max_iterations; ++iter) {
    // Residuals.
    rp_ = apply_a(x_) - b_ * tau_;
    if (!free_.empty()) rp_ += apply_b(free_x_);
    const auto aty = apply_at(y_);
    rd_.resize(psd_.size());
    double rd_norm = 0.0;
    double gap_xz = 0.0;
    double cx = 0.0;
    for (std::size_t k = 0; k < psd_.size(); ++k) {
      rd_[k] = aty[k] + zs_[k] - psd_[k].c * tau_;
      rd_norm = std::max(rd_norm, rd_[k].cwiseAbs().maxCoeff());
      gap_xz += inner(x_[k], zs_[k]);
      cx += inner(psd_[k].c, x_[k]);
    }
    const Eigen::VectorXd bty = apply_bt(y_);
    if (!free_.empty()) {
      rz_ = bty - c_free_ * tau_;
      rd_norm = std::max(rd_norm, rz_.lpNorm<Eigen::Infinity>());
      cx += c_free_.dot(free_x_);
    }
    const double by = b_.dot(y_);
    rg_ = cx - by + kappa_;
    const double mu = (gap_xz + tau_ * kappa_) / (nu_ + 1);

    // Termination tests.
    double pres = 0.0;
    for (int r = 0; r < m_; ++r) pres = std::max(pres, std::abs(rp_[r]) / tau_ / (1.0 + std::abs(b_[r])));
    const double dres = rd_norm / tau_ / (1.0 + c_norm);
    const double pobj = cx / tau_;
    const double dobj = by / tau_;
    const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    if (opt_.verbose)
      std::fprintf(stderr, "%3d  pres %.2e  dres %.2e  gap %.2e  mu %.2e  tau %.2e  kappa %.2e\n",
                   iter, pres, dres, gap, mu, tau_, kappa_);
    if (pres <= 0.5 * opt_.feas_tol &&
        (!has_objective_ || (dres <= opt_.feas_tol && gap <= opt_.gap_tol)))
      return finish_feasible(iter);
    const double metric = has_objective_ ? std::max({pres, dres, gap}) : pres;
    if (metric < best_.metric) {
      best_ = {metric, iter, x_, free_x_, y_, tau_};
    } else if (best_.metric <= opt_.feas_tol && iter - best_.iter >= 5) {
      return give_up(iter, "no progress");
    }
    if (by > 0.0) {
      double ray_res = 0.0;
      for (std::size_t k = 0; k < psd_.size(); ++k)
        ray_res = std::max(ray_res, (aty[k] + zs_[k]).cwiseAbs().maxCoeff());
      if (!free_.empty()) ray_res = std::max(ray_res, bty.lpNorm<Eigen::Infinity>());
      if (ray_res / by <= opt_.feas_tol) return finish_infeasible(iter, by);
    }
    if (iter == opt_.max_iterations) break;

    compute_scalings();
    if (!factor()) {
      return give_up(iter, "Schur complement factorisation failed");
    }

    // Column for dtau: K [p; q] = [b + A(WCW); c_z].
    std::vector<Eigen::MatrixXd> wcw(psd_.size());
    double cwc = 0.0;
    for (std::size_t k = 0; k < psd_.size(); ++k) {
      wcw[k] = scal_[k].w * psd_[k].c * scal_[k].w;
      cwc += inner(psd_[k].c, wcw[k]);
    }
    const Eigen::VectorXd a_wcw = apply_a(wcw);
    Eigen::VectorXd p, q;
    solve_kkt(b_ + a_wcw, c_free_, &p, &q);

    // Predictor.
    std::vector<Eigen::MatrixXd> rhs_c(psd_.size());
    for (std::size_t k = 0; k < psd_.size(); ++k)
      rhs_c[k] = -scal_[k].lambda.array().square().matrix().asDiagonal().toDenseMatrix();
    Direction aff = direction(1.0, rhs_c, -tau_ * kappa_, p, q, cwc, a_wcw);
    const double alpha_aff = std::min(1.0, step_to_boundary(aff));
    const double sigma = std::pow(std::max(0.0, 1.0 - alpha_aff), 3);

    // Corrector.
    for (std::size_t k = 0; k < psd_.size(); ++k) {
      const Scaling& s = scal_[k];
      const Eigen::MatrixXd dxs = s.r_inv * aff.dx[k] * s.r_inv.transpose();
      const Eigen::MatrixXd dzs = s.r.transpose() * aff.dzs[k] * s.r;
      const Eigen::MatrixXd prod = dxs * dzs;
      rhs_c[k] = sigma * mu * Eigen::MatrixXd::Identity(psd_[k].size, psd_[k].size) -
                 s.lambda.array().square().matrix().asDiagonal().toDenseMatrix() -
                 0.5 * (prod + prod.transpose());
    }
    const double rhs_tk = sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;
    Direction dir = direction(1.0 - sigma, rhs_c, rhs_tk, p, q, cwc, a_wcw);
    double alpha = std::min(1.0, 0.99 * step_to_boundary(dir));
    if (!std::isfinite(alpha) || alpha < 1e-12) {
      if (++stalls >= 3) return give_up(iter, "step length collapsed");
      alpha = std::max(0.0, std::isfinite(alpha) ? alpha : 0.0);
    }

    for (std::size_t k = 0; k < psd_.size(); ++k) {
      x_[k] += alpha * dir.dx[k];
      zs_[k] += alpha * dir.dzs[k];
    }
    if (!free_.empty()) free_x_ += alpha * dir.dfree;
    y_ += alpha * dir.dy;
    tau_ += alpha * dir.dtau;
    kappa_ += alpha * dir.dkappa;
  }
  return give_up(opt_.max_iterations, "iteration limit reached");
}

// Near the attainable accuracy the iterates can stall just above the
// termination threshold; the best iterate is still returned when it meets
// the tolerance (the caller verifies it independently).
Solution HomogeneousSolver::give_up(int iter, const char* why) {
  if (best_.metric <= opt_.feas_tol) {
    x_ = best_.x;
    free_x_ = best_.free_x;
    y_ = best_.y;
    tau_ = best_.tau;
    Solution s = finish_feasible(iter);
    s.message = std::string("best iterate after: ") + why;
    return s;
  }
  Solution s;
  s.iterations = iter;
  s.message = why;
  return s;
}

// Problems without psd blocks reduce to a linear system.
Solution solve_linear(const Problem& p) {
  const int m = static_cast<int>(p.constraints.size());
  std::vector<std::array<int, 3>> vars;
  std::map<std::array<int, 3>, int> index;
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    for (int i = 0; i < p.blocks[k].size; ++i)
      for (int j = i; j < p.blocks[k].size; ++j) {
        index[{static_cast<int>(k), i, j}] = static_cast<int>(vars.size());
        vars.push_back({static_cast<int>(k), i, j});
      }
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(vars.size()));
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    b[r] = p.constraints[r].rhs;
    for (const Entry& e : p.constraints[r].entries) a(r, index[{e.block, e.row, e.col}]) += e.value;
  }
  Solution sol;
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(b);
  sol.status = Status::kFeasible;
  sol.blocks.resize(p.blocks.size());
  for (std::size_t k = 0; k < p.blocks.size(); ++k)
    sol.blocks[k] = Eigen::MatrixXd::Zero(p.blocks[k].size, p.blocks[k].size);
  for (std::size_t v = 0; v < vars.size(); ++v) {
    sol.blocks[vars[v][0]](vars[v][1], vars[v][2]) = x[static_cast<Eigen::Index>(v)];
    sol.blocks[vars[v][0]](vars[v][2], vars[v][1]) = x[static_cast<Eigen::Index>(v)];
  }
  sol.dual = Eigen::VectorXd::Zero(m);
  return sol;
}

}  // namespace

Solution solve(const Problem& problem, const Options& options) {
  problem.validate();
  Preprocessed pre;
  if (options.preprocess) {
    pre = preprocess(problem);
  } else {
    pre.problem = problem;
    for (std::size_t r = 0; r < problem.constraints.size(); ++r) {
      pre.kept_rows.push_back(static_cast<int>(r));
      pre.row_scale.push_back(1.0);
    }
  }

  const auto m_orig = static_cast<Eigen::Index>(problem.constraints.size());
  Solution sol;
  if (pre.inconsistent) {
    sol.status = Status::kInfeasible;
    sol.dual = Eigen::VectorXd::Zero(m_orig);
    // Row r reads 0 = rhs (possibly after elimination); the ray is reported
    // only for the direct 0 = rhs case, which is the common one.
    const auto& row = problem.constraints[pre.inconsistent_row];
    bool zero_row = true;
    for (const Entry& e : row.entries) zero_row &= e.value == 0.0;
    if (zero_row) {
      sol.dual[pre.inconsistent_row] = row.rhs > 0 ? -1.0 / row.rhs : 1.0 / -row.rhs;
      sol.infeasibility_margin = 1.0;
    }
    sol.message = "inconsistent equality constraints (row " +
                  std::to_string(pre.inconsistent_row) + ")";
    return sol;
  }

  Solution inner_sol;
  if (pre.problem.constraints.empty()) {
    inner_sol.status = Status::kFeasible;
    for (const Block& b : pre.problem.blocks)
      inner_sol.blocks.push_back(b.kind == BlockKind::kPsd
                                     ? Eigen::MatrixXd(Eigen::MatrixXd::Identity(b.size, b.size))
                                     : Eigen::MatrixXd(Eigen::MatrixXd::Zero(b.size, b.size)));
    inner_sol.dual = Eigen::VectorXd();
  } else if (pre.problem.num_psd_blocks() == 0) {
    inner_sol = solve_linear(pre.problem);
  } else {
    HomogeneousSolver solver(pre.problem, options);
    inner_sol = solver.run();
  }

  sol = inner_sol;
  sol.dual = Eigen::VectorXd::Zero(m_orig);
  for (std::size_t k = 0; k < pre.kept_rows.size() && k < static_cast<std::size_t>(inner_sol.dual.size()); ++k)
    sol.dual[pre.kept_rows[k]] = inner_sol.dual[static_cast<Eigen::Index>(k)] / pre.row_scale[k];

  if (sol.status == Status::kFeasible) {
    const PrimalCheck chk = verify_primal(problem, sol.blocks);
    sol.max_equality_violation = chk.max_equality_violation;
    sol.min_psd_eigenvalue = chk.min_psd_eigenvalue;
    if (chk.max_equality_violation > options.feas_tol || chk.min_psd_eigenvalue < -options.feas_tol) {
      sol.status = Status::kNumericalFailure;
      sol.message = "solution failed independent verification";
    }
  } else if (sol.status == Status::kInfeasible) {
    const double norm = sol.dual.norm();
    if (norm > 0) sol.dual /= norm;
    const RayCheck chk = verify_ray(problem, sol.dual);
    sol.infeasibility_margin = -chk.b_dot_y;
    const double violation = std::max(std::max(0.0, -chk.min_psd_eigenvalue), chk.max_free_violation);
    if (!(sol.infeasibility_margin > 0.0) || violation > 10.0 * options.feas_tol * sol.infeasibility_margin) {
      sol.status = Status::kNumericalFailure;
      sol.message = "infeasibility ray failed independent verification";
    }
  }
  return sol;
}

}  // namespace dwellcert::sdp
