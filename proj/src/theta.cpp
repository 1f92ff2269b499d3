#include <cmath>
#include <string>

#include "abdris/errors.hpp"
#include "abdris/matrixtools.hpp"
#include "abdris/optimizer.hpp"

namespace abdris {

namespace {

// Layout of the stacked variable: group g holds a column-major rows x G matrix
// X_g. For a single block rows = G; for the joint update rows = 2G with
// Theta_r,g on top of Theta_t,g.
struct Layout {
  int m = 0;
  int g = 0;
  int n_groups = 0;
  int rows = 0;
  Eigen::Index group_dim() const { return static_cast<Eigen::Index>(rows) * g; }
  Eigen::Index size() const { return group_dim() * n_groups; }
  Eigen::Index index(int group, int row, int col) const {
    return group * group_dim() + row + static_cast<Eigen::Index>(rows) * col;
  }
};

Layout layout_of(const System& sys, int rows_per_g) {
  Layout l;
  l.m = sys.n_cells();
  l.g = sys.group_size();
  l.n_groups = sys.n_groups();
  l.rows = rows_per_g * l.g;
  return l;
}

double clamp_budget(double budget, const System& sys, const char* what) {
  if (budget >= 0.0) return budget;
  if (budget > -1e-9 * sys.budget().p_ris) return 0.0;
  throw InfeasibleBudget(std::string(what) + " budget is negative (" + std::to_string(budget) + ")");
}

Eigen::MatrixXcd group_block(const Eigen::MatrixXcd& a, int g, int gp, int size) {
  return a.block(g * size, gp * size, size, size);
}

Eigen::MatrixXcd duplication_cast(const DuplicationMatrix& d) { return d.entries().cast<Complex>(); }

Eigen::MatrixXcd reduce_by_duplication(const Eigen::MatrixXcd& full, const Layout& l,
                                       const Eigen::MatrixXcd& dup) {
  const Eigen::Index half = dup.cols();
  Eigen::MatrixXcd out(half * l.n_groups, full.cols());
  for (int g = 0; g < l.n_groups; ++g) {
    out.middleRows(g * half, half) = dup.transpose() * full.middleRows(g * l.group_dim(), l.group_dim());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Low-rank factors: Q = V V^H and e = V a, built user by user from P = L L^H.

struct Factor {
  Eigen::MatrixXcd v;
  Eigen::VectorXcd a;
  int used = 0;
};

Eigen::MatrixXcd cholesky_lower(const Eigen::MatrixXcd& p) {
  Eigen::LLT<Eigen::MatrixXcd> llt(hermitian_part(p));
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double ridge = 1e-12 * p.trace().real() / static_cast<double>(p.rows());
  llt.compute(hermitian_part(p) + ridge * Eigen::MatrixXcd::Identity(p.rows(), p.cols()));
  if (llt.info() != Eigen::Success) throw SingularSystem("P is not positive definite");
  return llt.matrixL();
}

struct UserVector {
  int k;
  Complex tau;
  Eigen::VectorXcd x;  // E_w = sum_k x_k h_RI,k
};

std::vector<UserVector> user_vectors(const FpWorkspace& ws, const System& sys,
                                     const ChannelSet& ch, const Precoder& prec) {
  const Eigen::MatrixXcd hf = ch.h_it * prec.f;
  std::vector<UserVector> out;
  for (int k = 0; k < sys.n_users(); ++k) {
    const Complex tau = ws.tau(k);
    const Eigen::VectorXcd x = std::sqrt(1.0 + ws.iota(k)) * std::conj(tau) * hf.col(k) -
                               std::norm(tau) * hf * (ch.h_rt.row(k) * prec.f).adjoint();
    out.push_back({k, tau, x});
  }
  return out;
}

void add_user_columns(Factor& f, const Layout& l, const Eigen::MatrixXcd& chol,
                      const Eigen::RowVectorXcd& h, const UserVector& u, int row_offset) {
  const double mag = std::abs(u.tau);
  if (mag == 0.0) return;
  const Eigen::VectorXcd c =
      chol.triangularView<Eigen::Lower>().solve(u.x) / mag;  // linear coefficients
  for (int m = 0; m < l.m; ++m) {
    Eigen::VectorXcd col = Eigen::VectorXcd::Zero(l.size());
    for (int g = 0; g < l.n_groups; ++g) {
      for (int cidx = 0; cidx < l.g; ++cidx) {
        const Complex lc = chol(g * l.g + cidx, m);
        if (lc == Complex(0.0)) continue;
        for (int i = 0; i < l.g; ++i) {
          col(l.index(g, row_offset + i, cidx)) = mag * std::conj(h(g * l.g + i) * lc);
        }
      }
    }
    f.v.col(f.used) = col;
    f.a(f.used) = std::conj(c(m));
    ++f.used;
  }
}

// sigma_I |tau_k| (h_k Theta^T)_m: Theta(m, i) weighted by h_i inside the group of m.
void add_leakage_columns(Factor& f, const Layout& l, const Eigen::RowVectorXcd& h, double scale) {
  if (scale == 0.0) return;
  for (int m = 0; m < l.m; ++m) {
    const int g = m / l.g;
    const int local = m % l.g;
    Eigen::VectorXcd col = Eigen::VectorXcd::Zero(l.size());
    for (int i = 0; i < l.g; ++i) col(l.index(g, local, i)) = scale * std::conj(h(g * l.g + i));
    f.v.col(f.used) = col;
    f.a(f.used) = 0.0;
    ++f.used;
  }
}

Factor make_factor(const Layout& l, int max_columns) {
  Factor f;
  f.v = Eigen::MatrixXcd::Zero(l.size(), max_columns);
  f.a = Eigen::VectorXcd::Zero(max_columns);
  return f;
}

void trim(Factor& f) {
  f.v.conservativeResize(Eigen::NoChange, f.used);
  f.a.conservativeResize(f.used);
}

Eigen::MatrixXcd dup_constraint_block(const Eigen::MatrixXcd& p_gg, const Eigen::MatrixXcd& dup) {
  const int g = static_cast<int>(p_gg.rows());
  return dup.transpose() * kron(p_gg.transpose(), Eigen::MatrixXcd::Identity(g, g)) * dup;
}

void check_workspace(const FpWorkspace& ws, const System& sys) {
  const int m = sys.n_cells();
  if (ws.iota.size() != sys.n_users() || ws.tau.size() != sys.n_users() || ws.p.rows() != m ||
      ws.e_r.rows() != m || ws.q_r.rows() != m) {
    throw ConfigError("workspace is not initialized for this system");
  }
}

Eigen::VectorXcd vec_transpose_conj(const Eigen::MatrixXcd& e) {
  return vec(e.transpose()).conjugate();
}

}  // namespace

double theta_r_budget(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec) {
  const double s2 = sys.budget().sigma_i2;
  return sys.budget().p_ris -
         ((ris.theta_t * ch.h_it * prec.f).squaredNorm() + 2.0 * s2 * ris.theta_t.squaredNorm());
}

double theta_t_budget(const System& sys, const ChannelSet& ch, const RisState& ris,
                      const Precoder& prec) {
  const double s2 = sys.budget().sigma_i2;
  return sys.budget().p_ris -
         ((ris.theta_r * ch.h_it * prec.f).squaredNorm() + s2 * ris.theta_r.squaredNorm());
}

// ---------------------------------------------------------------------------
// Dense assembly

DenseQcqp assemble_theta_r(const FpWorkspace& ws, const System& sys, double budget) {
  check_workspace(ws, sys);
  const int g = sys.group_size();
  const int ng = sys.n_groups();
  const Eigen::MatrixXcd dup = duplication_cast(DuplicationMatrix(g));
  const Eigen::Index h = dup.cols();
  DenseQcqp out;
  out.budget = budget;
  out.q = Eigen::MatrixXcd::Zero(h * ng, h * ng);
  out.p = Eigen::MatrixXcd::Zero(h * ng, h * ng);
  out.e.resize(h * ng);
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(g, g);
  for (int a = 0; a < ng; ++a) {
    for (int b = 0; b < ng; ++b) {
      out.q.block(a * h, b * h, h, h) =
          dup.transpose() *
          kron(group_block(ws.p, b, a, g).transpose(), group_block(ws.q_r, a, b, g)) * dup;
    }
    out.p.block(a * h, a * h, h, h) =
        dup.transpose() * kron(group_block(ws.p, a, a, g).transpose(), eye) * dup;
    out.e.segment(a * h, h) = dup.transpose() * vec_transpose_conj(group_block(ws.e_r, a, a, g));
  }
  return out;
}

DenseQcqp assemble_theta_t(const FpWorkspace& ws, const System& sys, double budget) {
  check_workspace(ws, sys);
  const int g = sys.group_size();
  const int ng = sys.n_groups();
  const double s2 = sys.budget().sigma_i2;
  const Eigen::Index n = static_cast<Eigen::Index>(g) * g;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(g, g);
  DenseQcqp out;
  out.budget = budget;
  out.q = Eigen::MatrixXcd::Zero(n * ng, n * ng);
  out.p = Eigen::MatrixXcd::Zero(n * ng, n * ng);
  out.e.resize(n * ng);
  for (int a = 0; a < ng; ++a) {
    for (int b = 0; b < ng; ++b) {
      out.q.block(a * n, b * n, n, n) =
          kron(group_block(ws.p, b, a, g).transpose(), group_block(ws.q_t, a, b, g));
    }
    if (sys.reciprocal()) {
      out.q.block(a * n, a * n, n, n) += s2 * kron(group_block(ws.q_r, a, a, g), eye);
    }
    const double static_extra = sys.reciprocal() ? s2 : 0.0;
    out.p.block(a * n, a * n, n, n) =
        kron((group_block(ws.p, a, a, g) + static_extra * eye).transpose(), eye);
    out.e.segment(a * n, n) = vec_transpose_conj(group_block(ws.e_t, a, a, g));
  }
  return out;
}

DenseQcqp assemble_theta_joint(const FpWorkspace& ws, const System& sys, double budget) {
  check_workspace(ws, sys);
  const int g = sys.group_size();
  const int ng = sys.n_groups();
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(g) * g;
  DenseQcqp out;
  out.budget = budget;
  out.q = Eigen::MatrixXcd::Zero(n * ng, n * ng);
  out.p = Eigen::MatrixXcd::Zero(n * ng, n * ng);
  out.e.resize(n * ng);
  for (int a = 0; a < ng; ++a) {
    for (int b = 0; b < ng; ++b) {
      Eigen::MatrixXcd qab = Eigen::MatrixXcd::Zero(2 * g, 2 * g);
      qab.topLeftCorner(g, g) = group_block(ws.q_r, a, b, g);
      qab.bottomRightCorner(g, g) = group_block(ws.q_t, a, b, g);
      out.q.block(a * n, b * n, n, n) = kron(group_block(ws.p, b, a, g).transpose(), qab);
    }
    out.p.block(a * n, a * n, n, n) = kron(group_block(ws.p, a, a, g).transpose(),
                                           Eigen::MatrixXcd::Identity(2 * g, 2 * g));
    Eigen::MatrixXcd e_g(g, 2 * g);
    e_g << group_block(ws.e_r, a, a, g), group_block(ws.e_t, a, a, g);
    out.e.segment(a * n, n) = vec_transpose_conj(e_g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unstacking

Eigen::MatrixXcd unstack_theta_r(const System& sys, const Eigen::VectorXcd& x) {
  const int g = sys.group_size();
  const Eigen::Index h = vech_size(g);
  if (x.size() != h * sys.n_groups()) throw ConfigError("stacked Theta_r has the wrong length");
  Eigen::MatrixXcd theta = Eigen::MatrixXcd::Zero(sys.n_cells(), sys.n_cells());
  for (int a = 0; a < sys.n_groups(); ++a) {
    theta.block(a * g, a * g, g, g) = unvech_symmetric(x.segment(a * h, h));
  }
  return theta;
}

Eigen::MatrixXcd unstack_theta_t(const System& sys, const Eigen::VectorXcd& x) {
  const int g = sys.group_size();
  const Eigen::Index n = static_cast<Eigen::Index>(g) * g;
  if (x.size() != n * sys.n_groups()) throw ConfigError("stacked Theta_t has the wrong length");
  Eigen::MatrixXcd theta = Eigen::MatrixXcd::Zero(sys.n_cells(), sys.n_cells());
  for (int a = 0; a < sys.n_groups(); ++a) {
    theta.block(a * g, a * g, g, g) = unvec(x.segment(a * n, n), g, g);
  }
  return theta;
}

std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> unstack_theta_joint(const System& sys,
                                                                  const Eigen::VectorXcd& x) {
  const int g = sys.group_size();
  const Eigen::Index n = 2 * static_cast<Eigen::Index>(g) * g;
  if (x.size() != n * sys.n_groups()) throw ConfigError("stacked Theta has the wrong length");
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(sys.n_cells(), sys.n_cells());
  Eigen::MatrixXcd t = r;
  for (int a = 0; a < sys.n_groups(); ++a) {
    const Eigen::MatrixXcd stacked = unvec(x.segment(a * n, n), 2 * g, g);
    r.block(a * g, a * g, g, g) = stacked.topRows(g);
    t.block(a * g, a * g, g, g) = stacked.bottomRows(g);
  }
  return {r, t};
}

// ---------------------------------------------------------------------------
// Block updates

ThetaResult update_theta_r(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                           const Precoder& prec, const RisState& ris, ThetaSolveMode mode) {
  if (!sys.reciprocal()) throw ConfigError("update_theta_r applies to reciprocal surfaces only");
  check_workspace(ws, sys);
  ThetaResult out;
  out.budget = clamp_budget(theta_r_budget(sys, ch, ris, prec), sys, "Theta_r");
  out.theta_t = ris.theta_t;

  if (mode == ThetaSolveMode::dense) {
    const DenseQcqp d = assemble_theta_r(ws, sys, out.budget);
    out.qcqp = solve_dense(d.q, d.p, d.e, d.budget);
    out.theta_r = unstack_theta_r(sys, out.qcqp.x);
    return out;
  }

  const Layout l = layout_of(sys, 1);
  const Eigen::MatrixXcd chol = cholesky_lower(ws.p);
  Factor f = make_factor(l, sys.k_r() * l.m);
  for (const UserVector& u : user_vectors(ws, sys, ch, prec)) {
    if (sys.sector_of(u.k) != Sector::reflecting) continue;
    add_user_columns(f, l, chol, ch.h_ri.row(u.k), u, 0);
  }
  trim(f);
  const Eigen::MatrixXcd dup = duplication_cast(DuplicationMatrix(l.g));
  BlockConstraint pc;
  for (int a = 0; a < l.n_groups; ++a) {
    pc.add_dense_block(dup_constraint_block(group_block(ws.p, a, a, l.g), dup));
  }
  out.qcqp = solve_factored(reduce_by_duplication(f.v, l, dup), f.a, pc, out.budget);
  out.theta_r = unstack_theta_r(sys, out.qcqp.x);
  return out;
}

ThetaResult update_theta_t(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                           const Precoder& prec, const RisState& ris, ThetaSolveMode mode) {
  if (!sys.reciprocal()) throw ConfigError("update_theta_t applies to reciprocal surfaces only");
  check_workspace(ws, sys);
  ThetaResult out;
  out.budget = clamp_budget(theta_t_budget(sys, ch, ris, prec), sys, "Theta_t");
  out.theta_r = ris.theta_r;

  if (mode == ThetaSolveMode::dense) {
    const DenseQcqp d = assemble_theta_t(ws, sys, out.budget);
    out.qcqp = solve_dense(d.q, d.p, d.e, d.budget);
    out.theta_t = unstack_theta_t(sys, out.qcqp.x);
    return out;
  }

  const Layout l = layout_of(sys, 1);
  const Eigen::MatrixXcd chol = cholesky_lower(ws.p);
  const double sigma = std::sqrt(sys.budget().sigma_i2);
  Factor f = make_factor(l, sys.n_users() * l.m);
  for (const UserVector& u : user_vectors(ws, sys, ch, prec)) {
    if (sys.sector_of(u.k) == Sector::transmitting) {
      add_user_columns(f, l, chol, ch.h_ri.row(u.k), u, 0);
    } else {
      add_leakage_columns(f, l, ch.h_ri.row(u.k), sigma * std::abs(u.tau));
    }
  }
  trim(f);
  BlockConstraint pc;
  const Eigen::MatrixXcd eye = Eigen::MatrixXcd::Identity(l.g, l.g);
  for (int a = 0; a < l.n_groups; ++a) {
    pc.add_kron_block(group_block(ws.p, a, a, l.g) + sys.budget().sigma_i2 * eye, l.g);
  }
  out.qcqp = solve_factored(f.v, f.a, pc, out.budget);
  out.theta_t = unstack_theta_t(sys, out.qcqp.x);
  return out;
}

ThetaResult update_theta_joint(const FpWorkspace& ws, const System& sys, const ChannelSet& ch,
                               const Precoder& prec, const RisState& ris, ThetaSolveMode mode) {
  if (sys.reciprocal()) throw ConfigError("update_theta_joint applies to non-reciprocal surfaces only");
  check_workspace(ws, sys);
  (void)ris;
  ThetaResult out;
  out.budget = clamp_budget(sys.budget().p_ris, sys, "Theta");

  if (mode == ThetaSolveMode::dense) {
    const DenseQcqp d = assemble_theta_joint(ws, sys, out.budget);
    out.qcqp = solve_dense(d.q, d.p, d.e, d.budget);
    std::tie(out.theta_r, out.theta_t) = unstack_theta_joint(sys, out.qcqp.x);
    return out;
  }

  const Layout l = layout_of(sys, 2);
  const Eigen::MatrixXcd chol = cholesky_lower(ws.p);
  Factor f = make_factor(l, sys.n_users() * l.m);
  for (const UserVector& u : user_vectors(ws, sys, ch, prec)) {
    const int offset = sys.sector_of(u.k) == Sector::reflecting ? 0 : l.g;
    add_user_columns(f, l, chol, ch.h_ri.row(u.k), u, offset);
  }
  trim(f);
  BlockConstraint pc;
  for (int a = 0; a < l.n_groups; ++a) pc.add_kron_block(group_block(ws.p, a, a, l.g), l.rows);
  out.qcqp = solve_factored(f.v, f.a, pc, out.budget);
  std::tie(out.theta_r, out.theta_t) = unstack_theta_joint(sys, out.qcqp.x);
  return out;
}

}  // namespace abdris
