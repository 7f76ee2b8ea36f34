#pragma once

// Certified solves of the Gram-matrix SDP. Hermitian blocks are realized via
// the standard real symmetric embedding R(H) = [[Re H, -Im H],[Im H, Re H]];
// a complex functional <H,G> equals <R(H)/2, R(G)>_F, which is the
// redundancy-aware scaling used for every embedded coefficient. The embedded
// primal is handed to the conic interior-point solver in minimization form,
// so the conic dual objective maps to a certified *upper* bound on the
// maximized phase error. verify_certificate reassembles the dual slack from
// problem data and the reported multipliers only, and inflates the bound by
// |lambda_min| times a trace bound whenever a slack eigenvalue dips below 0.

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mdiqkd/conic.hpp"
#include "mdiqkd/sdp_model.hpp"

namespace mdiqkd {

struct SolverOptions {
  double gap_tol = 1e-8;
  double feas_tol = 1e-9;
  double certificate_tol = 1e-9;
  int max_iter = 200;
  std::ostream* trace = nullptr;
};

enum class SolveStatus { Optimal, MaxIterations, Infeasible, NumericalFailure };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIterations: return "max_iter";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct SolveReport {
  SolveStatus status = SolveStatus::NumericalFailure;
  double primal_value = 0.0;  // feasible-side estimate of the maximum
  double dual_value = 0.0;    // certified upper bound (before verification)
  double duality_gap = 0.0;   // dual - primal
  int iterations = 0;
  Eigen::MatrixXcd g_plus, g_minus;  // recovered primal blocks
  Eigen::VectorXd multipliers;       // embedded-row multipliers (see row order below)
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double min_slack_eigenvalue = 0.0;
  Eigen::VectorXd farkas_ray;  // populated when status == Infeasible
};

struct VerificationResult {
  bool pass = false;
  double certified_bound = 0.0;  // dual bound inflated by any slack deficit
  double min_slack_eigenvalue = 0.0;
  double complementarity_norm = 0.0;
  std::string message;
};

namespace embed {

// Exact presolve: an equality with value 0 whose coefficients are diagonal
// and nonnegative forces those diagonal entries (hence their rows and
// columns) to zero in the respective Gram block. Eliminating them restores a
// strictly feasible interior, which otherwise disappears for noise-free
// statistics and cripples the interior-point iteration.
struct Presolve {
  std::vector<int> pos_plus, pos_minus;  // original index -> reduced position or -1
  std::vector<int> act_plus, act_minus;  // reduced position -> original index
};

inline Presolve analyze(const SdpProblem& p) {
  const int d = p.dim;
  std::vector<bool> dead_p(d, false), dead_m(d, false);
  for (const auto& eq : p.equalities) {
    if (eq.value != 0.0) continue;
    bool diagonal_nonneg = true;
    for (int i = 0; i < d && diagonal_nonneg; ++i) {
      for (int j = 0; j < d; ++j) {
        const Complex vp = eq.coeff.plus(i, j);
        const Complex vm = eq.coeff.minus(i, j);
        if (i != j && (vp != Complex(0, 0) || vm != Complex(0, 0))) {
          diagonal_nonneg = false;
          break;
        }
        if (i == j && (vp.real() < 0 || vm.real() < 0)) {
          diagonal_nonneg = false;
          break;
        }
      }
    }
    if (!diagonal_nonneg) continue;
    for (int i = 0; i < d; ++i) {
      if (eq.coeff.plus(i, i).real() > 0) dead_p[i] = true;
      if (eq.coeff.minus(i, i).real() > 0) dead_m[i] = true;
    }
  }
  Presolve ps;
  ps.pos_plus.assign(d, -1);
  ps.pos_minus.assign(d, -1);
  for (int i = 0; i < d; ++i) {
    if (!dead_p[i]) {
      ps.pos_plus[i] = static_cast<int>(ps.act_plus.size());
      ps.act_plus.push_back(i);
    }
    if (!dead_m[i]) {
      ps.pos_minus[i] = static_cast<int>(ps.act_minus.size());
      ps.act_minus.push_back(i);
    }
  }
  return ps;
}

// Row order of the embedded problem:
//   [0, d*d)                      residual rows (i<=j; diagonal 1 row, off-diagonal re then im)
//   then surviving statistics equalities in order
//   then for each inequality      finite lower row, then finite upper row
//   finally, if the objective has nonzero coefficients, the cap row.
// LP columns appear in the same order as their slack rows.
struct Embedded {
  conic::Problem problem;
  Presolve presolve;
  double obj_constant = 0.0;
  int residual_rows = 0;
  std::vector<double> slack_upper_bound;  // per LP column, for bound inflation
  double trace_bound = 0.0;               // real-embedded trace available per block
};

// Adds the real-embedded coefficients of Hermitian H (scaled by s/2 overall,
// so that row value <H,G>*s is represented) into `row` for `block`, mapped
// through the block's active-index set of size n (reduced block is 2n x 2n).
inline void add_hermitian(conic::ConstraintMatrix& row, int block, const Eigen::MatrixXcd& h,
                          const std::vector<int>& pos, int n, double s) {
  const int d = static_cast<int>(h.rows());
  for (int i = 0; i < d; ++i) {
    if (pos[i] < 0) continue;
    const int ri = pos[i];
    for (int j = i; j < d; ++j) {
      if (pos[j] < 0) continue;
      const int rj = pos[j];
      const Complex v = h(i, j);
      if (v == Complex(0, 0)) continue;
      const double re = 0.5 * s * v.real();
      const double im = 0.5 * s * v.imag();
      if (i == j) {
        row.add(block, ri, ri, re);
        row.add(block, n + ri, n + ri, re);
      } else {
        if (re != 0.0) {
          row.add(block, ri, rj, re);
          row.add(block, n + ri, n + rj, re);
        }
        if (im != 0.0) {
          // Hermitian H: Im part enters the off-diagonal corner blocks.
          row.add(block, ri, n + rj, -im);
          row.add(block, rj, n + ri, im);
        }
      }
    }
  }
}

inline double hermitian_op_norm(const Eigen::MatrixXcd& h) {
  if (h.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Embedded build(const SdpProblem& p) {
  if (!is_hermitian(p.lambda, 1e-9)) throw std::invalid_argument("lambda must be Hermitian");
  const int d = p.dim;

  Embedded em;
  em.presolve = analyze(p);
  const Presolve& ps = em.presolve;
  const int np = static_cast<int>(ps.act_plus.size());
  const int nm = static_cast<int>(ps.act_minus.size());

  em.obj_constant = p.objective_constant;
  em.trace_bound = 2.0 * p.lambda.real().trace();

  // A row survives if any coefficient survives the restriction.
  const auto restricted_row = [&](const BlockCoeff& coeff) {
    conic::ConstraintMatrix row;
    add_hermitian(row, 0, coeff.plus, ps.pos_plus, np, 1.0);
    add_hermitian(row, 1, coeff.minus, ps.pos_minus, nm, 1.0);
    return row;
  };

  const BlockCoeff* objective = &p.objective;
  conic::ConstraintMatrix obj_row = restricted_row(p.objective);
  const bool cap_active = !obj_row.entries.empty();

  int lp_dim = 0;
  for (const auto& iq : p.inequalities) {
    if (iq.lower != -kInf) ++lp_dim;
    if (iq.upper != kInf) ++lp_dim;
  }
  if (cap_active) ++lp_dim;

  conic::Problem& cp = em.problem;
  cp.block_dims = {2 * np, 2 * nm, 2 * d};
  cp.lp_dim = lp_dim;
  cp.c = conic::BlockVec::zero(cp.block_dims, lp_dim);

  // Minimization objective: c = -R(objective)/2 on the two Gram blocks.
  const auto embed_dense = [&](const Eigen::MatrixXcd& h, const std::vector<int>& pos, int n,
                               Eigen::MatrixXd& out, double s) {
    for (int i = 0; i < d; ++i) {
      if (pos[i] < 0) continue;
      for (int j = 0; j < d; ++j) {
        if (pos[j] < 0) continue;
        const Complex v = h(i, j);
        out(pos[i], pos[j]) += s * v.real();
        out(n + pos[i], n + pos[j]) += s * v.real();
        out(pos[i], n + pos[j]) += -s * v.imag();
        out(n + pos[i], pos[j]) += s * v.imag();
      }
    }
  };
  embed_dense(objective->plus, ps.pos_plus, np, cp.c.mats[0], -0.5);
  embed_dense(objective->minus, ps.pos_minus, nm, cp.c.mats[1], -0.5);

  std::vector<double> bvals;

  // Residual rows: G+ + G- + S = Lambda entrywise; coefficients appear only
  // where an index survives in a Gram block, the S block always.
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const bool in_p = ps.pos_plus[i] >= 0 && ps.pos_plus[j] >= 0;
      const bool in_m = ps.pos_minus[i] >= 0 && ps.pos_minus[j] >= 0;
      const int pi = in_p ? ps.pos_plus[i] : 0, pj = in_p ? ps.pos_plus[j] : 0;
      const int mi = in_m ? ps.pos_minus[i] : 0, mj = in_m ? ps.pos_minus[j] : 0;
      if (i == j) {
        conic::ConstraintMatrix row;
        if (in_p) {
          row.add(0, pi, pi, 0.5);
          row.add(0, np + pi, np + pi, 0.5);
        }
        if (in_m) {
          row.add(1, mi, mi, 0.5);
          row.add(1, nm + mi, nm + mi, 0.5);
        }
        row.add(2, i, i, 0.5);
        row.add(2, d + i, d + i, 0.5);
        cp.rows.push_back(std::move(row));
        bvals.push_back(p.lambda(i, i).real());
      } else {
        conic::ConstraintMatrix re_row, im_row;
        if (in_p) {
          re_row.add(0, pi, pj, 0.25);
          re_row.add(0, np + pi, np + pj, 0.25);
          im_row.add(0, pi, np + pj, -0.25);
          im_row.add(0, pj, np + pi, 0.25);
        }
        if (in_m) {
          re_row.add(1, mi, mj, 0.25);
          re_row.add(1, nm + mi, nm + mj, 0.25);
          im_row.add(1, mi, nm + mj, -0.25);
          im_row.add(1, mj, nm + mi, 0.25);
        }
        re_row.add(2, i, j, 0.25);
        re_row.add(2, d + i, d + j, 0.25);
        im_row.add(2, i, d + j, -0.25);
        im_row.add(2, j, d + i, 0.25);
        cp.rows.push_back(std::move(re_row));
        bvals.push_back(p.lambda(i, j).real());
        cp.rows.push_back(std::move(im_row));
        bvals.push_back(p.lambda(i, j).imag());
      }
    }
  }
  em.residual_rows = static_cast<int>(cp.rows.size());

  for (const auto& eq : p.equalities) {
    if (!is_hermitian(eq.coeff.plus) || !is_hermitian(eq.coeff.minus)) {
      throw std::invalid_argument("equality coefficients must be Hermitian");
    }
    conic::ConstraintMatrix row = restricted_row(eq.coeff);
    if (row.entries.empty() && eq.value == 0.0) continue;  // eliminated by presolve
    cp.rows.push_back(std::move(row));
    bvals.push_back(eq.value);
  }

  int lp_col = 0;
  const auto coeff_bound = [&](const BlockCoeff& c) {
    return std::max(hermitian_op_norm(c.plus), hermitian_op_norm(c.minus)) *
           p.lambda.real().trace();
  };
  for (const auto& iq : p.inequalities) {
    if (!is_hermitian(iq.coeff.plus) || !is_hermitian(iq.coeff.minus)) {
      throw std::invalid_argument("inequality coefficients must be Hermitian");
    }
    if (iq.lower > iq.upper) throw std::invalid_argument("inequality with lower > upper");
    const double fb = coeff_bound(iq.coeff);
    if (iq.lower != -kInf) {
      // f - t = lower
      conic::ConstraintMatrix row = restricted_row(iq.coeff);
      row.add_lp(lp_col, -1.0);
      cp.rows.push_back(std::move(row));
      bvals.push_back(iq.lower);
      em.slack_upper_bound.push_back(
          iq.upper != kInf ? iq.upper - iq.lower : fb + std::abs(iq.lower));
      ++lp_col;
    }
    if (iq.upper != kInf) {
      // f + t = upper
      conic::ConstraintMatrix row = restricted_row(iq.coeff);
      row.add_lp(lp_col, 1.0);
      cp.rows.push_back(std::move(row));
      bvals.push_back(iq.upper);
      em.slack_upper_bound.push_back(
          iq.lower != -kInf ? iq.upper - iq.lower : fb + std::abs(iq.upper));
      ++lp_col;
    }
  }

  if (cap_active) {
    conic::ConstraintMatrix row = obj_row;
    row.add_lp(lp_col, 1.0);
    cp.rows.push_back(std::move(row));
    const double cap_rhs = p.objective_cap - p.objective_constant;
    bvals.push_back(cap_rhs);
    em.slack_upper_bound.push_back(coeff_bound(p.objective) + std::abs(cap_rhs));
    ++lp_col;
  }

  cp.b = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<long>(bvals.size()));
  return em;
}

// Structured complex projection of a real-embedded reduced block, expanded
// back to the original d x d indexing (eliminated entries are zero).
inline Eigen::MatrixXcd to_complex(const Eigen::MatrixXd& xr, const std::vector<int>& pos,
                                   int n, int d) {
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    if (pos[i] < 0) continue;
    for (int j = 0; j < d; ++j) {
      if (pos[j] < 0) continue;
      const int ri = pos[i], rj = pos[j];
      const double re = 0.5 * (xr(ri, rj) + xr(n + ri, n + rj));
      const double im = 0.5 * (xr(n + ri, rj) - xr(ri, n + rj));
      g(i, j) = Complex(re, im);
    }
  }
  return g;
}

}  // namespace embed

inline SolveReport solve(const SdpProblem& problem, const SolverOptions& opts = {}) {
  const embed::Embedded em = embed::build(problem);
  conic::Options copts;
  copts.gap_tol = opts.gap_tol;
  copts.feas_tol = opts.feas_tol;
  copts.max_iter = opts.max_iter;
  copts.trace = opts.trace;
  const conic::Result r = conic::solve(em.problem, copts);

  SolveReport rep;
  switch (r.status) {
    case conic::Status::Optimal: rep.status = SolveStatus::Optimal; break;
    case conic::Status::MaxIterations: rep.status = SolveStatus::MaxIterations; break;
    case conic::Status::Infeasible: rep.status = SolveStatus::Infeasible; break;
    default: rep.status = SolveStatus::NumericalFailure; break;
  }
  rep.iterations = r.iterations;
  rep.primal_value = em.obj_constant - r.primal_obj;
  rep.dual_value = em.obj_constant - r.dual_obj;
  rep.duality_gap = rep.dual_value - rep.primal_value;
  const auto& ps = em.presolve;
  rep.g_plus = embed::to_complex(r.x.mats[0], ps.pos_plus,
                                 static_cast<int>(ps.act_plus.size()), problem.dim);
  rep.g_minus = embed::to_complex(r.x.mats[1], ps.pos_minus,
                                  static_cast<int>(ps.act_minus.size()), problem.dim);
  rep.multipliers = r.y;
  rep.primal_residual = r.primal_res;
  rep.dual_residual = r.dual_res;
  rep.complementarity = r.x.dot(r.z);
  if (r.status == conic::Status::Infeasible) rep.farkas_ray = r.infeasibility_ray;

  double min_eig = 0.0;
  for (const auto& zb : r.z.mats) {
    if (zb.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(zb, Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  if (r.z.lp.size() > 0) min_eig = std::min(min_eig, r.z.lp.minCoeff());
  rep.min_slack_eigenvalue = min_eig;
  return rep;
}

/// Recomputes dual feasibility from problem data and the reported multipliers
/// alone, then returns the certified bound with eigenvalue-slack inflation.
inline VerificationResult verify_certificate(const SdpProblem& problem, const SolveReport& report,
                                             double certificate_tol = 1e-9) {
  VerificationResult res;
  if (report.multipliers.size() == 0) {
    res.message = "report carries no certificate";
    return res;
  }
  const embed::Embedded em = embed::build(problem);
  const auto& cp = em.problem;
  if (report.multipliers.size() != cp.b.size()) {
    res.message = "multiplier count does not match problem";
    return res;
  }

  conic::BlockVec z = cp.c;
  for (int k = 0; k < cp.b.size(); ++k) {
    cp.rows[k].add_scaled_to(-report.multipliers(k), z);
  }

  double min_eig = 0.0;
  double inflation = 0.0;
  for (const auto& zb : z.mats) {
    if (zb.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(zb, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    min_eig = std::min(min_eig, lmin);
    if (lmin < 0) inflation += -lmin * em.trace_bound;
  }
  for (int i = 0; i < z.lp.size(); ++i) {
    min_eig = std::min(min_eig, z.lp(i));
    if (z.lp(i) < 0) inflation += -z.lp(i) * em.slack_upper_bound[i];
  }

  const double dual_bound = em.obj_constant - cp.b.dot(report.multipliers);
  res.certified_bound = dual_bound + inflation;
  res.min_slack_eigenvalue = min_eig;
  res.complementarity_norm = report.complementarity;
  res.pass = min_eig >= -certificate_tol;
  if (!res.pass) {
    res.message = "dual slack eigenvalue " + std::to_string(min_eig) + " below tolerance";
  }
  return res;
}

// ---------------------------------------------------------------------------
// Linear programs (decoy-state bounds): same interior-point machinery
// restricted to the nonnegative orthant.

struct LpProblem {
  Eigen::VectorXd objective;  // maximize objective . x
  struct Row {
    Eigen::VectorXd coeff;
    double lower = -kInf;
    double upper = kInf;
  };
  std::vector<Row> rows;
  Eigen::VectorXd var_upper;  // elementwise upper bounds; kInf = none. x >= 0 implicit.
};

enum class LpStatus { Optimal, MaxIterations, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::MaxIterations: return "max_iter";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct LpReport {
  LpStatus status = LpStatus::NumericalFailure;
  double value = 0.0;       // primal estimate of the maximum
  double dual_value = 0.0;  // certified upper bound
  Eigen::VectorXd x;
  int iterations = 0;
};

inline LpReport solve_lp(const LpProblem& lp, const SolverOptions& opts = {}) {
  const int n = static_cast<int>(lp.objective.size());
  int n_slack = 0;
  for (int i = 0; i < n; ++i) {
    if (lp.var_upper.size() > 0 && lp.var_upper(i) != kInf) ++n_slack;
  }
  for (const auto& row : lp.rows) {
    if (row.lower == row.upper) continue;  // pure equality, no slack
    if (row.lower != -kInf) ++n_slack;
    if (row.upper != kInf) ++n_slack;
  }

  conic::Problem cp;
  cp.lp_dim = n + n_slack;
  cp.c = conic::BlockVec::zero({}, cp.lp_dim);
  for (int i = 0; i < n; ++i) cp.c.lp(i) = -lp.objective(i);

  // Upper bound available to each column (kInf when none), used to make the
  // polished dual bound sound under tiny clipped violations.
  std::vector<double> col_bound(static_cast<std::size_t>(cp.lp_dim), kInf);
  for (int i = 0; i < n; ++i) {
    if (lp.var_upper.size() > 0) col_bound[i] = lp.var_upper(i);
  }

  std::vector<double> bvals;
  int col = n;
  for (int i = 0; i < n; ++i) {
    if (lp.var_upper.size() > 0 && lp.var_upper(i) != kInf) {
      conic::ConstraintMatrix row;
      row.add_lp(i, 1.0);
      row.add_lp(col, 1.0);
      cp.rows.push_back(std::move(row));
      bvals.push_back(lp.var_upper(i));
      col_bound[col] = lp.var_upper(i);
      ++col;
    }
  }
  for (const auto& r : lp.rows) {
    const auto base_row = [&]() {
      conic::ConstraintMatrix row;
      for (int i = 0; i < n; ++i) {
        if (r.coeff(i) != 0.0) row.add_lp(i, r.coeff(i));
      }
      return row;
    };
    if (r.lower == r.upper) {
      cp.rows.push_back(base_row());
      bvals.push_back(r.lower);
      continue;
    }
    const double width = (r.lower != -kInf && r.upper != kInf) ? r.upper - r.lower : kInf;
    if (r.lower != -kInf) {
      auto row = base_row();
      row.add_lp(col, -1.0);
      cp.rows.push_back(std::move(row));
      bvals.push_back(r.lower);
      col_bound[col] = width;
      ++col;
    }
    if (r.upper != kInf) {
      auto row = base_row();
      row.add_lp(col, 1.0);
      cp.rows.push_back(std::move(row));
      bvals.push_back(r.upper);
      col_bound[col] = width;
      ++col;
    }
  }
  cp.b = Eigen::Map<Eigen::VectorXd>(bvals.data(), static_cast<long>(bvals.size()));

  conic::Options copts;
  copts.gap_tol = opts.gap_tol;
  copts.feas_tol = opts.feas_tol;
  copts.max_iter = opts.max_iter;
  copts.trace = opts.trace;
  const conic::Result r = conic::solve(cp, copts);

  LpReport rep;
  switch (r.status) {
    case conic::Status::Optimal: rep.status = LpStatus::Optimal; break;
    case conic::Status::MaxIterations: rep.status = LpStatus::MaxIterations; break;
    case conic::Status::Infeasible: rep.status = LpStatus::Infeasible; break;
    case conic::Status::Unbounded: rep.status = LpStatus::Unbounded; break;
    default: rep.status = LpStatus::NumericalFailure; break;
  }
  rep.value = -r.primal_obj;
  rep.dual_value = -r.dual_obj;
  rep.x = r.x.lp.head(n);
  rep.iterations = r.iterations;

  // Crossover polish: the interior-point dual of these (often badly
  // conditioned) LPs can sit well off the optimal vertex. Guess the basis
  // from the iterate, solve the dual basis system exactly and keep the
  // polished bound when it is sound and tighter. Tiny clipped violations
  // are charged against the column bounds.
  if ((rep.status == LpStatus::Optimal || rep.status == LpStatus::MaxIterations) &&
      cp.b.size() > 0) {
    const int m = static_cast<int>(cp.b.size());
    const int ncols = cp.lp_dim;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, ncols);
    for (int k = 0; k < m; ++k) {
      for (const auto& [idx, v] : cp.rows[k].lp_entries) a(k, idx) += v;
    }
    std::vector<int> order(ncols);
    for (int i = 0; i < ncols; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      const double ri = r.x.lp(i) / (r.x.lp(i) + r.z.lp(i) + 1e-300);
      const double rj = r.x.lp(j) / (r.x.lp(j) + r.z.lp(j) + 1e-300);
      return ri > rj;
    });
    const auto ratio_of = [&](int i) {
      return r.x.lp(i) / (r.x.lp(i) + r.z.lp(i) + 1e-300);
    };
    const auto try_basis = [&](int nb) -> double {
      if (nb <= 0) return kInf;
      Eigen::MatrixXd ab(m, nb);
      Eigen::VectorXd cb(nb);
      for (int k = 0; k < nb; ++k) {
        ab.col(k) = a.col(order[k]);
        cb(k) = cp.c.lp(order[k]);
      }
      const Eigen::VectorXd y = ab.transpose().colPivHouseholderQr().solve(cb).eval();
      if (!y.allFinite()) return kInf;
      const Eigen::VectorXd z = cp.c.lp - a.transpose() * y;
      double inflation = 0.0;
      const double tol = 1e-9 * (1.0 + cp.c.lp.cwiseAbs().maxCoeff());
      for (int i = 0; i < ncols; ++i) {
        if (z(i) >= 0) continue;
        if (-z(i) > tol || col_bound[i] == kInf) return kInf;
        inflation += -z(i) * col_bound[i];
      }
      // Min-form: b.y - inflation lower-bounds the minimum, so the
      // maximization bound is -(b.y - inflation).
      return -(cp.b.dot(y) - inflation);
    };
    int above_half = 0, above_tiny = 0;
    for (int i = 0; i < ncols; ++i) {
      if (ratio_of(order[i]) > 0.5) above_half = i + 1;
      if (ratio_of(order[i]) > 1e-6) above_tiny = i + 1;
    }
    for (int nb : {above_half, std::min(m, ncols), above_tiny}) {
      const double polished = try_basis(std::min(nb, ncols));
      if (polished < rep.dual_value) rep.dual_value = polished;
    }
    if (rep.status == LpStatus::MaxIterations &&
        std::abs(rep.dual_value - rep.value) <=
            opts.gap_tol * 100 * (1.0 + std::abs(rep.value))) {
      rep.status = LpStatus::Optimal;
    }
  }
  return rep;
}

}  // namespace mdiqkd
