#pragma once

// Dense primal-dual path-following interior-point solver for small conic
// programs over a product of real symmetric PSD blocks and a nonnegative
// orthant. HKM (XZ) scaling with Mehrotra predictor-corrector steps and a
// dense Cholesky solve of the Schur complement. Problems here are small
// (blocks up to ~100, a few thousand rows) and dense, so no sparsity
// machinery beyond per-constraint coefficient lists.
//
// Internal convention is the minimization standard form
//     min <C,X>  s.t.  <A_k,X> = b_k,  X in K,
// whose dual  max b.y  s.t.  A*(y) + Z = C, Z in K  provides the certified
// bound consumed by callers: any dual-feasible y satisfies b.y <= <C,X*>.

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace mdiqkd::conic {

struct BlockVec {
  std::vector<Eigen::MatrixXd> mats;
  Eigen::VectorXd lp;

  static BlockVec zero(const std::vector<int>& dims, int lp_dim) {
    BlockVec v;
    v.mats.reserve(dims.size());
    for (int d : dims) v.mats.push_back(Eigen::MatrixXd::Zero(d, d));
    v.lp = Eigen::VectorXd::Zero(lp_dim);
    return v;
  }

  static BlockVec identity(const std::vector<int>& dims, int lp_dim, double scale) {
    BlockVec v;
    v.mats.reserve(dims.size());
    for (int d : dims) v.mats.push_back(scale * Eigen::MatrixXd::Identity(d, d));
    v.lp = Eigen::VectorXd::Constant(lp_dim, scale);
    return v;
  }

  double dot(const BlockVec& o) const {
    double s = 0.0;
    for (std::size_t j = 0; j < mats.size(); ++j) s += mats[j].cwiseProduct(o.mats[j]).sum();
    s += lp.dot(o.lp);
    return s;
  }

  double norm() const { return std::sqrt(dot(*this)); }

  BlockVec& axpy(double a, const BlockVec& o) {
    for (std::size_t j = 0; j < mats.size(); ++j) mats[j] += a * o.mats[j];
    lp += a * o.lp;
    return *this;
  }

  void scale(double a) {
    for (auto& m : mats) m *= a;
    lp *= a;
  }

  bool all_finite() const {
    for (const auto& m : mats) {
      if (!m.allFinite()) return false;
    }
    return lp.allFinite();
  }
};

// Sparse symmetric coefficient matrix for one constraint row. An entry
// (i,j,v) with i != j stands for v at both (i,j) and (j,i).
struct ConstraintMatrix {
  struct Entry {
    int block;
    int i, j;
    double v;
  };
  std::vector<Entry> entries;
  std::vector<std::pair<int, double>> lp_entries;

  void add(int block, int i, int j, double v) {
    if (i > j) std::swap(i, j);
    entries.push_back({block, i, j, v});
  }
  void add_lp(int idx, double v) { lp_entries.emplace_back(idx, v); }

  double dot(const BlockVec& x) const {
    double s = 0.0;
    for (const auto& e : entries) {
      s += (e.i == e.j) ? e.v * x.mats[e.block](e.i, e.i)
                        : 2.0 * e.v * x.mats[e.block](e.i, e.j);
    }
    for (const auto& [idx, v] : lp_entries) s += v * x.lp(idx);
    return s;
  }

  void add_scaled_to(double s, BlockVec& out) const {
    for (const auto& e : entries) {
      out.mats[e.block](e.i, e.j) += s * e.v;
      if (e.i != e.j) out.mats[e.block](e.j, e.i) += s * e.v;
    }
    for (const auto& [idx, v] : lp_entries) out.lp(idx) += s * v;
  }

  double frob_norm() const {
    double s = 0.0;
    for (const auto& e : entries) s += (e.i == e.j ? 1.0 : 2.0) * e.v * e.v;
    for (const auto& [idx, v] : lp_entries) s += v * v;
    return std::sqrt(s);
  }

  void scale(double a) {
    for (auto& e : entries) e.v *= a;
    for (auto& [idx, v] : lp_entries) v *= a;
  }
};

struct Problem {
  std::vector<int> block_dims;
  int lp_dim = 0;
  BlockVec c;
  std::vector<ConstraintMatrix> rows;
  Eigen::VectorXd b;

  int cone_order() const {
    int n = lp_dim;
    for (int d : block_dims) n += d;
    return n;
  }
};

enum class Status { Optimal, MaxIterations, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIterations: return "max_iter";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

struct Options {
  double gap_tol = 1e-8;
  double feas_tol = 1e-9;         // dual residual tolerance
  double primal_feas_tol = 1e-7;  // primal residual floor is set by the Schur solve
  int max_iter = 200;
  std::ostream* trace = nullptr;
};

struct Result {
  Status status = Status::NumericalFailure;
  BlockVec x, z;
  Eigen::VectorXd y;
  double primal_obj = 0.0;  // <c,x>
  double dual_obj = 0.0;    // b.y
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double mu = 0.0;
  Eigen::VectorXd infeasibility_ray;  // Farkas multipliers when Status::Infeasible
};

namespace detail {

struct DirectedEntry {
  int i, j;
  double v;
};

// Per-block directed expansion of a constraint row, used when forming the
// Schur complement entrywise.
struct ExpandedRow {
  std::vector<std::vector<DirectedEntry>> per_block;
  std::vector<std::pair<int, double>> lp;
};

inline ExpandedRow expand_row(const ConstraintMatrix& row, std::size_t nblocks) {
  ExpandedRow ex;
  ex.per_block.resize(nblocks);
  for (const auto& e : row.entries) {
    ex.per_block[e.block].push_back({e.i, e.j, e.v});
    if (e.i != e.j) ex.per_block[e.block].push_back({e.j, e.i, e.v});
  }
  ex.lp = row.lp_entries;
  return ex;
}

inline double max_step_psd(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& delta) {
  // Largest alpha with  M + alpha*delta >= 0, via lambda_min of L^-1 delta L^-T.
  if (delta.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd w = chol.matrixL().solve(delta);
  w = chol.matrixL().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (w + w.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= -1e-14) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

inline double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) {
    if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

}  // namespace detail

class Solver {
 public:
  Solver(const Problem& problem, const Options& opts) : p_(problem), opts_(opts) {
    m_ = static_cast<int>(p_.rows.size());
    if (p_.b.size() != m_) throw std::invalid_argument("b size mismatch");
    nblocks_ = p_.block_dims.size();
    row_scale_.resize(m_);
    for (int k = 0; k < m_; ++k) {
      row_scale_[k] = std::max(1.0, p_.rows[k].frob_norm());
    }
    obj_scale_ = std::max(1.0, p_.c.norm());
  }

  Result run() {
    // Scaled copy of the data; results are unscaled before returning.
    std::vector<ConstraintMatrix> rows = p_.rows;
    Eigen::VectorXd b = p_.b;
    for (int k = 0; k < m_; ++k) {
      rows[k].scale(1.0 / row_scale_[k]);
      b(k) /= row_scale_[k];
    }
    BlockVec c = p_.c;
    c.scale(1.0 / obj_scale_);

    std::vector<detail::ExpandedRow> ex;
    ex.reserve(m_);
    for (const auto& r : rows) ex.push_back(detail::expand_row(r, nblocks_));

    // Constant Gram matrix of the constraint rows, used to restore primal
    // feasibility of each step by a least-norm correction. This keeps the
    // equality residual at roundoff instead of the Schur solve's noise
    // floor, which otherwise pollutes the reported duality gap through the
    // multipliers.
    Eigen::LLT<Eigen::MatrixXd> gram_chol;
    if (m_ > 0) {
      Eigen::MatrixXd gram(m_, m_);
      for (int k = 0; k < m_; ++k) {
        BlockVec ak = BlockVec::zero(p_.block_dims, p_.lp_dim);
        rows[k].add_scaled_to(1.0, ak);
        for (int l = k; l < m_; ++l) {
          gram(k, l) = rows[l].dot(ak);
          gram(l, k) = gram(k, l);
        }
      }
      gram.diagonal().array() += 1e-12 * (gram.diagonal().maxCoeff() + 1.0);
      gram_chol.compute(gram);
    }
    // Least-norm shift of the iterate onto the affine constraint set. The
    // result is the reported primal point whenever it stays in the cone: a
    // genuinely feasible lower-bound side for the duality-gap measure.
    const auto restored_candidate = [&](const BlockVec& xc, const Eigen::VectorXd& rp_now,
                                        BlockVec& out) {
      out = xc;
      if (m_ == 0 || gram_chol.info() != Eigen::Success) return true;
      const Eigen::VectorXd xi = gram_chol.solve(rp_now);
      for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(xi(k), out);
      if (out.lp.size() > 0 && out.lp.minCoeff() < 0.0) return false;
      for (const auto& mblk : out.mats) {
        Eigen::LLT<Eigen::MatrixXd> llt(mblk);
        if (llt.info() != Eigen::Success) return false;
      }
      return true;
    };

    const int nu = p_.cone_order();
    const double bnorm = b.size() > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0;
    const double tau_p = std::max(1.0, std::sqrt(static_cast<double>(nu))) *
                         std::max(1.0, bnorm);
    const double tau_d = std::max(1.0, c.norm());

    BlockVec x = BlockVec::identity(p_.block_dims, p_.lp_dim, tau_p);
    BlockVec z = BlockVec::identity(p_.block_dims, p_.lp_dim, tau_d);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(m_);

    Result res;
    Eigen::VectorXd rp(m_);
    Eigen::VectorXd g(m_);
    Eigen::MatrixXd schur(m_, m_);

    // Best iterate seen so far; late iterations at mu near machine precision
    // can corrupt an already-excellent point, so it is kept for the report.
    BlockVec best_x = x, best_z = z;
    Eigen::VectorXd best_y = y;
    double best_merit = std::numeric_limits<double>::infinity();
    double y_growth_ref = 1.0;
    int stall_count = 0;
    bool stalled = false;

    double mu = x.dot(z) / nu;
    int iter = 0;
    bool stopped = false;
    for (; iter < opts_.max_iter; ++iter) {
      for (int k = 0; k < m_; ++k) rp(k) = b(k) - rows[k].dot(x);
      BlockVec rd = c;
      rd.axpy(-1.0, z);
      for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(-y(k), rd);

      mu = x.dot(z) / nu;
      const double pobj = c.dot(x);
      const double dobj = b.dot(y);
      // Honest optimality-distance estimate: the complementarity plus the
      // multiplier-weighted equality residual (the exact discrepancy in the
      // duality identity pobj - dobj = <X,Z> - y.rp).
      const double relgap = (x.dot(z) + std::abs(y.dot(rp))) /
                            (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
      double pres = 0.0;
      for (int k = 0; k < m_; ++k) {
        pres = std::max(pres, std::abs(rp(k)) / (1.0 + std::abs(b(k))));
      }
      const double dres = rd.norm() / (1.0 + c.norm());

      // Feasible-side candidate: equality residual shifted out, cone
      // membership verified. Its objective against the dual value is the
      // trustworthy gap measure.
      BlockVec x_feas;
      const bool have_feas = restored_candidate(x, rp, x_feas);
      double relgap_feas = std::numeric_limits<double>::infinity();
      if (have_feas) {
        const double pobj_feas = c.dot(x_feas);
        relgap_feas =
            std::abs(pobj_feas - dobj) / (1.0 + std::max(std::abs(pobj_feas), std::abs(dobj)));
      }

      if (opts_.trace) {
        *opts_.trace << "iter " << iter << " mu " << mu << " gap " << relgap << " gapf "
                     << relgap_feas << " pres " << pres << " dres " << dres << " steps "
                     << last_ap_ << ' ' << last_ad_ << '\n';
      }

      const double merit = std::max({std::min(relgap, relgap_feas), pres, dres});
      const double ynorm = y.size() > 0 ? y.norm() : 0.0;
      if (merit < best_merit) {
        best_merit = merit;
        best_x = x;
        best_y = y;
        best_z = z;
        stall_count = 0;
      } else if (ynorm > 1.25 * y_growth_ref) {
        // Diverging multipliers are progress toward an infeasibility proof.
        y_growth_ref = ynorm;
        stall_count = 0;
      } else if (++stall_count >= 6) {
        stalled = true;
        break;
      }

      if (have_feas && relgap_feas <= opts_.gap_tol && dres <= opts_.feas_tol) {
        res.status = Status::Optimal;
        x = x_feas;
        stopped = true;
        break;
      }
      if (relgap <= opts_.gap_tol && pres <= opts_.primal_feas_tol && dres <= opts_.feas_tol) {
        res.status = Status::Optimal;
        if (have_feas && relgap_feas <= opts_.gap_tol) x = x_feas;
        stopped = true;
        break;
      }
      if (detect_infeasible(rows, b, y, res) || detect_unbounded(rows, c, x, res)) {
        stopped = true;
        break;
      }

      // Factor the iterates.
      std::vector<Eigen::LLT<Eigen::MatrixXd>> chol_x(nblocks_), chol_z(nblocks_);
      std::vector<Eigen::MatrixXd> zinv(nblocks_);
      bool fact_ok = true;
      for (std::size_t j = 0; j < nblocks_; ++j) {
        chol_x[j].compute(x.mats[j]);
        chol_z[j].compute(z.mats[j]);
        if (chol_x[j].info() != Eigen::Success || chol_z[j].info() != Eigen::Success) {
          fact_ok = false;
          break;
        }
        zinv[j] = chol_z[j].solve(Eigen::MatrixXd::Identity(p_.block_dims[j], p_.block_dims[j]));
        zinv[j] = 0.5 * (zinv[j] + zinv[j].transpose()).eval();
      }
      if (!fact_ok) {
        res.status = Status::NumericalFailure;
        stopped = true;
        break;
      }

      if (!form_schur(ex, x, zinv, z.lp, schur)) {
        res.status = Status::NumericalFailure;
        stopped = true;
        break;
      }
      Eigen::LLT<Eigen::MatrixXd> schur_chol;
      double reg = 0.0;
      const double base = m_ > 0 ? schur.diagonal().cwiseAbs().maxCoeff() + 1.0 : 1.0;
      for (int attempt = 0; attempt < 6; ++attempt) {
        Eigen::MatrixXd msys = schur;
        if (reg > 0) msys.diagonal().array() += reg * base;
        schur_chol.compute(msys);
        if (schur_chol.info() == Eigen::Success) break;
        reg = (reg == 0.0) ? 1e-14 : reg * 100.0;
      }
      if (m_ > 0 && schur_chol.info() != Eigen::Success) {
        res.status = Status::NumericalFailure;
        stopped = true;
        break;
      }

      // One step of iterative refinement recovers accuracy lost to the
      // late-stage ill-conditioning of the Schur complement.
      const auto solve_refined = [&](const Eigen::VectorXd& rhs) {
        Eigen::VectorXd v = schur_chol.solve(rhs);
        for (int pass = 0; pass < 2; ++pass) {
          const Eigen::VectorXd r = rhs - schur * v;
          v += schur_chol.solve(r);
        }
        return v;
      };

      // X Rd Z^-1, shared by both passes.
      const BlockVec xrdz = sandwich(x, rd, zinv, z.lp);

      // Predictor (sigma = 0): solve with D = -X - H(X Rd Z^-1).
      BlockVec dvec = xrdz;
      dvec.axpy(1.0, x);
      for (int k = 0; k < m_; ++k) g(k) = -rows[k].dot(dvec);
      Eigen::VectorXd dy = m_ > 0 ? solve_refined(rp - g) : Eigen::VectorXd();
      BlockVec dz = rd;
      for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(-dy(k), dz);
      BlockVec dx = sandwich(x, dz, zinv, z.lp);
      dx.scale(-1.0);
      dx.axpy(-1.0, x);

      double ap = step_length(chol_x, x, dx);
      double ad = step_length(chol_z, z, dz);

      // Mehrotra centering parameter.
      BlockVec xa = x;
      xa.axpy(ap, dx);
      BlockVec za = z;
      za.axpy(ad, dz);
      const double mu_aff = xa.dot(za) / nu;
      // Soften the centering exponent when the affine step is short; pushing
      // toward the central path restores long steps on the next iteration.
      const double expo = std::max(1.0, 3.0 * std::min(ap, ad));
      double sigma = std::pow(mu_aff / mu, expo);
      // Keep the step aimed at the requested gap instead of far past it;
      // driving mu orders of magnitude below the target only amplifies
      // roundoff in the Schur solve.
      const double mu_need =
          opts_.gap_tol * (1.0 + std::max(std::abs(pobj), std::abs(dobj))) / nu;
      const double sigma_floor = std::min(0.5, 0.2 * mu_need / mu);
      sigma = std::min(1.0, std::max({1e-12, sigma_floor, sigma}));

      // Corrector with second-order term H(dX_aff dZ_aff Z^-1).
      const BlockVec corr = sandwich(dx, dz, zinv, z.lp);
      BlockVec smz = BlockVec::zero(p_.block_dims, p_.lp_dim);
      for (std::size_t j = 0; j < nblocks_; ++j) smz.mats[j] = sigma * mu * zinv[j];
      if (p_.lp_dim > 0) smz.lp = sigma * mu * z.lp.cwiseInverse();

      dvec = xrdz;
      dvec.axpy(1.0, x);
      dvec.axpy(1.0, corr);
      dvec.axpy(-1.0, smz);  // dvec = -D with D = smz - X - H(X Rd Z^-1) - corr
      for (int k = 0; k < m_; ++k) g(k) = -rows[k].dot(dvec);
      if (m_ > 0) dy = solve_refined(rp - g);
      dz = rd;
      for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(-dy(k), dz);
      dx = sandwich(x, dz, zinv, z.lp);
      dx.axpy(1.0, corr);
      dx.scale(-1.0);
      dx.axpy(-1.0, x);
      dx.axpy(1.0, smz);

      if (!dx.all_finite() || !dz.all_finite()) {
        res.status = Status::NumericalFailure;
        stopped = true;
        break;
      }

      // Full-space refinement: remove the realized error of the primal
      // Newton equation with homogeneous-complementarity corrections
      // (dx_c = -H(X dz_c Z^-1), dz_c = -A*(dy_c)), which leaves the dual
      // and complementarity equations intact.
      for (int pass = 0; pass < 2; ++pass) {
        Eigen::VectorXd r1(m_);
        double rnorm = 0.0;
        for (int k = 0; k < m_; ++k) {
          r1(k) = rp(k) - rows[k].dot(dx);
          rnorm = std::max(rnorm, std::abs(r1(k)));
        }
        if (rnorm <= 1e-13 * (1.0 + bnorm)) break;
        const Eigen::VectorXd dyc = solve_refined(r1);
        BlockVec dzc = BlockVec::zero(p_.block_dims, p_.lp_dim);
        for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(-dyc(k), dzc);
        BlockVec dxc = sandwich(x, dzc, zinv, z.lp);
        dxc.scale(-1.0);
        dy += dyc;
        dz.axpy(1.0, dzc);
        dx.axpy(1.0, dxc);
      }

      ap = step_length(chol_x, x, dx);
      ad = step_length(chol_z, z, dz);
      if (ap < 1e-10 && ad < 1e-10) {
        stalled = true;
        break;
      }

      x.axpy(ap, dx);
      y += ad * dy;
      z.axpy(ad, dz);
      last_ap_ = ap;
      last_ad_ = ad;
    }

    if (!stopped) {
      // Stall or iteration limit: fall back to the best iterate seen. The
      // requested tolerance was not met, which the status records.
      x = best_x;
      y = best_y;
      z = best_z;
      res.status = (stalled && best_merit > 1e-4) ? Status::NumericalFailure
                                                  : Status::MaxIterations;
    } else if (res.status == Status::NumericalFailure && best_merit < 1e-6) {
      x = best_x;
      y = best_y;
      z = best_z;
      res.status = Status::MaxIterations;
    }
    if (res.status == Status::MaxIterations || res.status == Status::NumericalFailure) {
      // Report a feasible primal point when one is within reach.
      Eigen::VectorXd rp_now(m_);
      for (int k = 0; k < m_; ++k) rp_now(k) = b(k) - rows[k].dot(x);
      BlockVec x_feas;
      if (restored_candidate(x, rp_now, x_feas)) x = x_feas;
    }
    res.iterations = iter;

    // Unscale back to the original data.
    res.x = x;
    res.z = z;
    res.z.scale(obj_scale_);
    res.y = Eigen::VectorXd(m_);
    for (int k = 0; k < m_; ++k) res.y(k) = obj_scale_ * y(k) / row_scale_[k];
    res.dual_obj = p_.b.dot(res.y);
    Eigen::VectorXd rp_true(m_);
    for (int k = 0; k < m_; ++k) rp_true(k) = p_.b(k) - p_.rows[k].dot(res.x);
    res.primal_res = m_ > 0 ? rp_true.norm() : 0.0;
    // Lagrangian-corrected objective: first-order compensation of the
    // remaining equality residual through the multipliers.
    res.primal_obj = p_.c.dot(res.x) + res.y.dot(rp_true);
    BlockVec rd_true = p_.c;
    rd_true.axpy(-1.0, res.z);
    for (int k = 0; k < m_; ++k) p_.rows[k].add_scaled_to(-res.y(k), rd_true);
    res.dual_res = rd_true.norm();
    res.mu = res.x.dot(res.z) / p_.cone_order();
    return res;
  }

 private:
  // (X M Z^-1 + Z^-1 M X)/2 blockwise; elementwise x m / z on the orthant.
  BlockVec sandwich(const BlockVec& x, const BlockVec& mid,
                    const std::vector<Eigen::MatrixXd>& zinv, const Eigen::VectorXd& z_lp) const {
    BlockVec out = BlockVec::zero(p_.block_dims, p_.lp_dim);
    for (std::size_t j = 0; j < nblocks_; ++j) {
      Eigen::MatrixXd t = x.mats[j] * mid.mats[j] * zinv[j];
      out.mats[j] = 0.5 * (t + t.transpose());
    }
    if (p_.lp_dim > 0) out.lp = x.lp.cwiseProduct(mid.lp).cwiseQuotient(z_lp);
    return out;
  }

  bool form_schur(const std::vector<detail::ExpandedRow>& ex, const BlockVec& x,
                  const std::vector<Eigen::MatrixXd>& zinv, const Eigen::VectorXd& z_lp,
                  Eigen::MatrixXd& schur) const {
    schur.setZero();
    Eigen::VectorXd lp_ratio;
    if (p_.lp_dim > 0) lp_ratio = x.lp.cwiseQuotient(z_lp);
    for (int k = 0; k < m_; ++k) {
      for (int l = k; l < m_; ++l) {
        double s = 0.0;
        for (std::size_t blk = 0; blk < nblocks_; ++blk) {
          const auto& ek = ex[k].per_block[blk];
          const auto& el = ex[l].per_block[blk];
          if (ek.empty() || el.empty()) continue;
          const Eigen::MatrixXd& xm = x.mats[blk];
          const Eigen::MatrixXd& zm = zinv[blk];
          for (const auto& a : ek) {
            for (const auto& bb : el) {
              s += a.v * bb.v * xm(a.j, bb.i) * zm(bb.j, a.i);
            }
          }
        }
        if (!ex[k].lp.empty() && !ex[l].lp.empty()) {
          for (const auto& [ia, va] : ex[k].lp) {
            for (const auto& [ib, vb] : ex[l].lp) {
              if (ia == ib) s += va * vb * lp_ratio(ia);
            }
          }
        }
        schur(k, l) = s;
        schur(l, k) = s;
      }
    }
    return schur.allFinite();
  }

  double step_length(const std::vector<Eigen::LLT<Eigen::MatrixXd>>& chol, const BlockVec& v,
                     const BlockVec& dv) const {
    double amax = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nblocks_; ++j) {
      amax = std::min(amax, detail::max_step_psd(chol[j], dv.mats[j]));
    }
    amax = std::min(amax, detail::max_step_lp(v.lp, dv.lp));
    if (!std::isfinite(amax)) return 1.0;
    const double gamma = 0.9 + 0.09 * std::min(1.0, amax);
    return std::min(1.0, gamma * amax);
  }

  bool detect_infeasible(const std::vector<ConstraintMatrix>& rows, const Eigen::VectorXd& b,
                         const Eigen::VectorXd& y, Result& res) const {
    const double ynorm = y.size() > 0 ? y.norm() : 0.0;
    if (ynorm < 1e5) return false;
    Eigen::VectorXd yr = y / ynorm;
    const double payoff = b.dot(yr);
    if (payoff <= 1e-10) return false;
    // Farkas direction needs A*(yr) <= 0 relative to its payoff.
    BlockVec a = BlockVec::zero(p_.block_dims, p_.lp_dim);
    for (int k = 0; k < m_; ++k) rows[k].add_scaled_to(yr(k), a);
    double lmax = 0.0;
    for (const auto& mblk : a.mats) {
      if (mblk.rows() == 0) continue;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mblk, Eigen::EigenvaluesOnly);
      lmax = std::max(lmax, es.eigenvalues().maxCoeff());
    }
    if (a.lp.size() > 0) lmax = std::max(lmax, a.lp.maxCoeff());
    if (lmax > 1e-7 * payoff) return false;
    res.status = Status::Infeasible;
    res.infeasibility_ray = Eigen::VectorXd(m_);
    for (int k = 0; k < m_; ++k) res.infeasibility_ray(k) = yr(k) / row_scale_[k];
    return true;
  }

  bool detect_unbounded(const std::vector<ConstraintMatrix>& rows, const BlockVec& c,
                        const BlockVec& x, Result& res) const {
    const double xnorm = x.norm();
    if (xnorm < 1e9) return false;
    BlockVec xr = x;
    xr.scale(1.0 / xnorm);
    if (c.dot(xr) > -1e-10) return false;
    double anorm = 0.0;
    for (int k = 0; k < m_; ++k) anorm = std::max(anorm, std::abs(rows[k].dot(xr)));
    if (anorm > 1e-8) return false;
    res.status = Status::Unbounded;
    return true;
  }

  const Problem& p_;
  Options opts_;
  int m_ = 0;
  std::size_t nblocks_ = 0;
  std::vector<double> row_scale_;
  double obj_scale_ = 1.0;
  double last_ap_ = 0.0;
  double last_ad_ = 0.0;
};

inline Result solve(const Problem& problem, const Options& opts) {
  Solver s(problem, opts);
  return s.run();
}

}  // namespace mdiqkd::conic
