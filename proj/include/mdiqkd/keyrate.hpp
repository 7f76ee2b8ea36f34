#pragma once

// One sweep point end to end: grid search over source intensities, certified
// SDP bound per candidate, baseline methods, and the winning evaluation.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mdiqkd/channel.hpp"
#include "mdiqkd/coin.hpp"
#include "mdiqkd/decoy.hpp"
#include "mdiqkd/rates.hpp"
#include "mdiqkd/sdp_model.hpp"
#include "mdiqkd/solver.hpp"
#include "mdiqkd/states.hpp"

namespace mdiqkd {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodSelection {
  bool sdp = true;
  bool coin = false;
  bool plob = false;
  bool infinite_test = false;

  bool any() const { return sdp || coin || plob || infinite_test; }
};

struct PointConfig {
  ProtocolFamily family = ProtocolFamily::PhaseEncoding;
  int num_bases = 2;
  double trojan_nu = 0.0;
  DeviceParams device;
  std::vector<double> key_mu_grid = {0.1};
  std::vector<double> test_mu_grid;  // phase matching: grid per test basis (empty = key grid)
  std::vector<double> zeta_grid;     // decoy first decoy intensity
  double omega_ratio = 1000.0;       // omega = mu / ratio (finite extinction)
  int photon_cutoff = 12;
  int quad_order = 64;
  MethodSelection methods;
  SolverOptions solver;
};

struct KeyRatePoint {
  double axis_value = 0.0;
  std::vector<double> intensities;  // chosen source settings (family-dependent layout)
  double e_bit = kNaN;
  double pass_probability = kNaN;
  double e_ph_bound = kNaN;   // certified upper bound
  double duality_gap = kNaN;
  double rate_sdp = kNaN;
  double rate_coin = kNaN;
  double rate_plob = kNaN;
  double rate_infinite = kNaN;
  std::string solver_status = "skipped";
  bool ok = true;
  std::string message;
};

namespace detail {

struct GridIter {
  // Cartesian product of per-basis grids; index 0 is the key basis grid.
  std::vector<const std::vector<double>*> grids;
  std::vector<std::size_t> idx;
  bool done = false;

  explicit GridIter(std::vector<const std::vector<double>*> g) : grids(std::move(g)) {
    idx.assign(grids.size(), 0);
    for (const auto* grid : grids) {
      if (grid->empty()) done = true;
    }
  }

  std::vector<double> values() const {
    std::vector<double> v(grids.size());
    for (std::size_t k = 0; k < grids.size(); ++k) v[k] = (*grids[k])[idx[k]];
    return v;
  }

  void next() {
    for (std::size_t k = grids.size(); k-- > 0;) {
      if (++idx[k] < grids[k]->size()) return;
      idx[k] = 0;
    }
    done = true;
  }
};

}  // namespace detail

/// Coarse exhaustive search over the configured intensity grids, keeping the
/// highest certified SDP key rate (ties resolved toward the earlier grid
/// combination). The coin baseline is optimized over the same grid
/// independently, matching how the per-method curves are produced.
inline KeyRatePoint optimize_point(const PointConfig& cfg) {
  KeyRatePoint out;
  if (!cfg.methods.any()) {
    out.ok = false;
    out.message = "no methods requested";
    return out;
  }

  const double eta_total = cfg.device.total_transmittance();
  if (cfg.methods.plob) out.rate_plob = plob_bound(eta_total);
  if (cfg.methods.infinite_test) {
    double best = -std::numeric_limits<double>::infinity();
    for (double mu : cfg.key_mu_grid) best = std::max(best, infinite_test_rate(mu, eta_total));
    out.rate_infinite = best;
  }

  const bool want_protocol = cfg.methods.sdp || cfg.methods.coin;
  if (!want_protocol) return out;

  double best_sdp = -std::numeric_limits<double>::infinity();
  double best_coin = -std::numeric_limits<double>::infinity();
  bool any_sdp = false, any_coin = false;
  int attempted = 0, failed = 0;
  std::string first_failure;

  const auto note_failure = [&](const std::string& why) {
    ++failed;
    if (first_failure.empty()) first_failure = why;
  };

  if (cfg.family == ProtocolFamily::DecoySinglePhoton) {
    ProtocolParams pp;
    pp.num_bases = 2;
    pp.trojan_nu = cfg.trojan_nu;
    const ProtocolSpec spec = build_protocol(ProtocolFamily::DecoySinglePhoton, pp);
    const std::vector<double>& zg = cfg.zeta_grid.empty() ? cfg.key_mu_grid : cfg.zeta_grid;
    for (double mu : cfg.key_mu_grid) {
      for (double zeta : zg) {
        if (zeta > mu) continue;  // decoy ladder mu >= zeta >= omega
        ++attempted;
        DecoyIntensities levels{mu, zeta, mu / cfg.omega_ratio};
        ObservedStats stats;
        DecoyBounds bounds;
        try {
          stats = decoy_stats(levels, cfg.device, cfg.quad_order);
          bounds = bound_single_photon(stats, levels, cfg.photon_cutoff, cfg.solver);
        } catch (const std::exception& e) {
          note_failure(e.what());
          continue;
        }
        if (!bounds.ok()) {
          note_failure("decoy linear program not optimal");
          continue;
        }
        const ObservedStats intervals = decoy_interval_stats(bounds);

        if (cfg.methods.sdp) {
          const SdpProblem prob = assemble_sdp(spec, intervals);
          const SolveReport rep = solve(prob, cfg.solver);
          const VerificationResult ver =
              verify_certificate(prob, rep, cfg.solver.certificate_tol);
          if (rep.status != SolveStatus::Optimal || !ver.pass) {
            note_failure(std::string("sdp ") + to_string(rep.status));
          } else {
            const double e_ph = std::min(ver.certified_bound, 0.5);
            const Rate rate = decoy_key_rate(bounds, stats, e_ph);
            if (rate.unclamped > best_sdp) {
              best_sdp = rate.unclamped;
              out.rate_sdp = rate.unclamped;
              out.e_ph_bound = e_ph;
              out.duality_gap = rep.duality_gap;
              out.solver_status = to_string(rep.status);
              out.intensities = {mu, zeta, levels.omega};
              out.pass_probability = stats.decoy_grid[0][0][0].gain;
              out.e_bit = stats.decoy_grid[0][0][0].qber;
            }
            any_sdp = true;
          }
        }
        if (cfg.methods.coin) {
          const double delta = delta_init_fidelity(spec);
          if (bounds.y11_lower[0] > 0.0) {
            CoinInputs in;
            in.delta_init = delta;
            in.pass_probability = bounds.y11_lower[0];
            in.test_error = std::min(bounds.e11_upper[1], 0.5);
            in.key_error = std::min(bounds.e11_upper[0], 0.5);
            const double e_ph = coin_phase_error(in);
            const Rate rate = decoy_key_rate(bounds, stats, e_ph);
            if (rate.unclamped > best_coin) {
              best_coin = rate.unclamped;
              out.rate_coin = rate.unclamped;
              if (!cfg.methods.sdp && out.intensities.empty()) {
                out.intensities = {mu, zeta, levels.omega};
                out.pass_probability = stats.decoy_grid[0][0][0].gain;
                out.e_bit = stats.decoy_grid[0][0][0].qber;
              }
            }
            any_coin = true;
          }
        }
      }
    }
  } else {
    // Coherent families: one shared intensity for phase encoding, an
    // independent grid per basis for phase matching.
    std::vector<const std::vector<double>*> grids;
    grids.push_back(&cfg.key_mu_grid);
    if (cfg.family == ProtocolFamily::PhaseMatching) {
      const auto& tg = cfg.test_mu_grid.empty() ? cfg.key_mu_grid : cfg.test_mu_grid;
      for (int x = 1; x < cfg.num_bases; ++x) grids.push_back(&tg);
    }
    for (detail::GridIter it(grids); !it.done; it.next()) {
      ++attempted;
      const std::vector<double> mus = it.values();
      ProtocolParams pp;
      pp.num_bases = cfg.num_bases;
      pp.trojan_nu = cfg.trojan_nu;
      if (cfg.family == ProtocolFamily::PhaseMatching) {
        pp.basis_mu = mus;
        pp.basis_mu.resize(cfg.num_bases, mus.back());
      } else {
        pp.mu = mus[0];
      }
      ProtocolSpec spec;
      ObservedStats stats;
      try {
        spec = build_protocol(cfg.family, pp);
        stats = phase_protocol_stats(spec, cfg.device);
      } catch (const std::exception& e) {
        note_failure(e.what());
        continue;
      }
      const double pass = stats.pair(0, 0).pass_probability.value;
      const double e_bit = stats.pair(0, 0).bit_error.value;

      if (cfg.methods.sdp) {
        const SdpProblem prob = assemble_sdp(spec, stats);
        const SolveReport rep = solve(prob, cfg.solver);
        const VerificationResult ver = verify_certificate(prob, rep, cfg.solver.certificate_tol);
        if (rep.status != SolveStatus::Optimal || !ver.pass) {
          note_failure(std::string("sdp ") + to_string(rep.status));
        } else {
          const double e_ph = std::min(ver.certified_bound, 0.5);
          const Rate rate = shor_preskill_rate(pass, e_ph, e_bit);
          if (rate.unclamped > best_sdp) {
            best_sdp = rate.unclamped;
            out.rate_sdp = rate.unclamped;
            out.e_ph_bound = e_ph;
            out.duality_gap = rep.duality_gap;
            out.solver_status = to_string(rep.status);
            out.intensities = mus;
            out.pass_probability = pass;
            out.e_bit = e_bit;
          }
          any_sdp = true;
        }
      }
      if (cfg.methods.coin && cfg.num_bases >= 2) {
        CoinInputs in;
        in.delta_init = delta_init(spec);
        in.pass_probability = pass;
        in.test_error = std::min(stats.pair(1, 1).bit_error.value, 0.5);
        in.key_error = std::min(e_bit, 0.5);
        if (pass > 0.0) {
          const double e_ph = coin_phase_error(in);
          const Rate rate = coin_key_rate(pass, e_ph, in.key_error);
          if (rate.unclamped > best_coin) {
            best_coin = rate.unclamped;
            out.rate_coin = rate.unclamped;
            if (!cfg.methods.sdp && out.intensities.empty()) {
              out.intensities = mus;
              out.pass_probability = pass;
              out.e_bit = e_bit;
            }
          }
          any_coin = true;
        }
      }
    }
  }

  if (cfg.methods.sdp && !any_sdp) {
    out.ok = false;
    out.solver_status = "failed";
    out.message = "all grid points failed: " + (first_failure.empty() ? "none tried" : first_failure);
  } else if (failed > 0) {
    out.message = std::to_string(failed) + "/" + std::to_string(attempted) +
                  " grid points failed (" + first_failure + ")";
  }
  if (cfg.methods.coin && !any_coin && out.ok && attempted > 0) {
    out.message += (out.message.empty() ? "" : "; ") + std::string("coin baseline unavailable");
  }
  return out;
}

}  // namespace mdiqkd
