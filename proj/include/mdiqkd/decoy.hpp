#pragma once

// Decoy-state post-processing: linear programs bounding the single-photon
// yield and error rate from the 3x3 intensity grid, and the decoy key rate.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdiqkd/channel.hpp"
#include "mdiqkd/observed.hpp"
#include "mdiqkd/rates.hpp"
#include "mdiqkd/solver.hpp"

namespace mdiqkd {

struct DecoyBounds {
  std::array<double, 2> y11_lower{};  // per basis (0 = Z, 1 = X)
  std::array<double, 2> e11_upper{};
  int photon_cutoff = 12;
  std::array<LpStatus, 2> yield_status{LpStatus::NumericalFailure, LpStatus::NumericalFailure};
  std::array<LpStatus, 2> error_status{LpStatus::NumericalFailure, LpStatus::NumericalFailure};

  bool ok() const {
    for (int b = 0; b < 2; ++b) {
      if (yield_status[b] != LpStatus::Optimal || error_status[b] != LpStatus::Optimal) {
        return false;
      }
    }
    return true;
  }
};

namespace detail {

inline std::vector<double> poisson_weights(double mu, int n_cut) {
  std::vector<double> w(n_cut + 1);
  double term = std::exp(-mu);
  w[0] = term;
  for (int n = 1; n <= n_cut; ++n) {
    term *= mu / n;
    w[n] = term;
  }
  return w;
}

}  // namespace detail

/// LP bounds on the single-photon yield and error mass. Variables are the
/// joint yields Y_nm in [0,1] and error masses b_nm in [0, Y_nm] up to the
/// photon cutoff; the truncated Poisson tail enters as an interval. The
/// yield bound minimizes Y_11; the error bound maximizes b_11 over the full
/// feasible set and divides by Y_11^L (a conservative quotient).
using DecoyPairMask = std::array<std::array<bool, 3>, 3>;

/// Absolute allowance for the accuracy of the observed gains/QBERs. The
/// Poisson tail alone can be narrower than the statistics' own numerical
/// precision (the signal-pair tail is ~1e-17 while quadrature delivers
/// ~1e-9), which would make the LP infeasible in exact arithmetic.
inline constexpr double kDecoyStatTolerance = 1e-9;

inline DecoyBounds bound_single_photon(const ObservedStats& stats, const DecoyIntensities& levels,
                                       int n_cut = 12, const SolverOptions& opts = {},
                                       const DecoyPairMask* pair_mask = nullptr,
                                       double stat_tolerance = kDecoyStatTolerance) {
  levels.validate();
  if (n_cut < 2) throw std::invalid_argument("photon cutoff below 2");
  if (stats.decoy_grid.size() != 2) {
    throw std::invalid_argument("decoy statistics need both bases");
  }

  const auto levels_arr = levels.levels();
  std::array<std::vector<double>, 3> pw;
  for (int l = 0; l < 3; ++l) pw[l] = detail::poisson_weights(levels_arr[l], n_cut);

  const int nvar = (n_cut + 1) * (n_cut + 1);
  const auto yidx = [&](int n, int m) { return n * (n_cut + 1) + m; };
  const auto bidx = [&](int n, int m) { return nvar + n * (n_cut + 1) + m; };

  DecoyBounds out;
  out.photon_cutoff = n_cut;

  for (int basis = 0; basis < 2; ++basis) {
    LpProblem lp;
    lp.objective = Eigen::VectorXd::Zero(2 * nvar);
    lp.var_upper = Eigen::VectorXd::Constant(2 * nvar, 1.0);

    // b_nm <= Y_nm
    for (int n = 0; n <= n_cut; ++n) {
      for (int m = 0; m <= n_cut; ++m) {
        LpProblem::Row row;
        row.coeff = Eigen::VectorXd::Zero(2 * nvar);
        row.coeff(bidx(n, m)) = 1.0;
        row.coeff(yidx(n, m)) = -1.0;
        row.lower = -1.0;  // b - Y ranges in [-1, 0]; finite width aids the dual polish
        row.upper = 0.0;
        lp.rows.push_back(std::move(row));
      }
    }

    // Poissonian mixing per intensity pair, with the tail bracketed.
    for (int ia = 0; ia < 3; ++ia) {
      for (int ib = 0; ib < 3; ++ib) {
        if (pair_mask && !(*pair_mask)[ia][ib]) continue;
        double head = 0.0;
        for (int n = 0; n <= n_cut; ++n) head += pw[ia][n];
        double head_b = 0.0;
        for (int m = 0; m <= n_cut; ++m) head_b += pw[ib][m];
        const double tail = 1.0 - head * head_b;

        const auto& cell = stats.decoy_grid[basis][ia][ib];
        LpProblem::Row gain_row;
        gain_row.coeff = Eigen::VectorXd::Zero(2 * nvar);
        LpProblem::Row err_row;
        err_row.coeff = Eigen::VectorXd::Zero(2 * nvar);
        for (int n = 0; n <= n_cut; ++n) {
          for (int m = 0; m <= n_cut; ++m) {
            const double w = pw[ia][n] * pw[ib][m];
            gain_row.coeff(yidx(n, m)) = w;
            err_row.coeff(bidx(n, m)) = w;
          }
        }
        const double slack = tail + stat_tolerance;
        gain_row.lower = cell.gain - slack;
        gain_row.upper = cell.gain + stat_tolerance;
        const double err_mass = cell.qber * cell.gain;
        err_row.lower = err_mass - slack;
        err_row.upper = err_mass + stat_tolerance;
        lp.rows.push_back(std::move(gain_row));
        lp.rows.push_back(std::move(err_row));
      }
    }

    // Lower bound on Y_11: minimize = maximize the negative.
    lp.objective(yidx(1, 1)) = -1.0;
    const LpReport ylp = solve_lp(lp, opts);
    out.yield_status[basis] = ylp.status;
    // The certified side of the minimization is -dual_value.
    out.y11_lower[basis] = std::clamp(-ylp.dual_value, 0.0, 1.0);

    // Upper bound on the single-photon error mass.
    lp.objective.setZero();
    lp.objective(bidx(1, 1)) = 1.0;
    const LpReport elp = solve_lp(lp, opts);
    out.error_status[basis] = elp.status;
    const double b11 = std::clamp(elp.dual_value, 0.0, 1.0);
    out.e11_upper[basis] =
        out.y11_lower[basis] > 0.0 ? std::min(1.0, b11 / out.y11_lower[basis]) : 1.0;
  }
  return out;
}

/// Interval-flagged observations for the single-photon SDP: Y11 in
/// [Y11^L, 1] and error mass below e11^U per matched basis; mismatched
/// pairs are not estimated by the decoy analysis.
inline ObservedStats decoy_interval_stats(const DecoyBounds& bounds) {
  ObservedStats obs = ObservedStats::empty(2);
  for (int basis = 0; basis < 2; ++basis) {
    auto& entry = obs.pair(basis, basis);
    entry.pass_probability = StatEntry::between(bounds.y11_lower[basis], 1.0);
    entry.bit_error = StatEntry::between(0.0, bounds.e11_upper[basis]);
  }
  obs.pair(0, 1).present = false;
  obs.pair(1, 0).present = false;
  return obs;
}

/// R >= Q11^Z [1 - h2(e_ph^11)] - Q_mumu^Z h2(E_mumu^Z) with
/// Q11^Z = mu^2 exp(-2 mu) Y11^Z.
inline Rate decoy_key_rate(const DecoyBounds& bounds, const ObservedStats& stats,
                           double e_ph11) {
  if (stats.intensities.size() != 3 || stats.decoy_grid.size() != 2) {
    throw std::invalid_argument("decoy statistics missing the intensity grid");
  }
  const double mu = stats.intensities[0];
  const double q11 = mu * mu * std::exp(-2.0 * mu) * bounds.y11_lower[0];
  const auto& signal = stats.decoy_grid[0][0][0];
  const double ep = std::clamp(e_ph11, 0.0, 0.5);
  const double eq = std::clamp(signal.qber, 0.0, 1.0);
  return {q11 * (1.0 - binary_entropy(ep)) - signal.gain * binary_entropy(eq)};
}

}  // namespace mdiqkd
