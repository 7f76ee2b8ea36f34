#pragma once

// Honest-device statistics: what Alice and Bob observe absent an adversary.
//
// Three simulators live here:
//  - single-mode coherent interference at the node's beam splitter, for the
//    phase-encoding / phase-matching families (closed form);
//  - the honest Gram blocks of the same channel (explicit Eve vectors),
//    used as SDP feasibility witnesses and functional cross-checks;
//  - the time-bin Bell-state analyzer for decoy protocols: phase-randomized
//    coherent pulses averaged by Gauss-Legendre quadrature, plus an exact
//    two-photon Fock computation for the single-photon conditional yields.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mdiqkd/observed.hpp"
#include "mdiqkd/states.hpp"

namespace mdiqkd {

struct DeviceParams {
  double dark_count = 0.0;      // p_dc per detector per gate
  double det_eff = 1.0;         // eta_det
  double loss_db_per_km = 0.2;  // xi
  double misalignment = 0.0;    // e_ali
  double distance_km = 0.0;     // Alice to Bob, node equidistant

  void validate() const {
    if (dark_count < 0 || dark_count > 1) throw std::invalid_argument("dark_count out of range");
    if (det_eff < 0 || det_eff > 1) throw std::invalid_argument("det_eff out of range");
    if (misalignment < 0 || misalignment > 0.5) {
      throw std::invalid_argument("misalignment out of range");
    }
    if (loss_db_per_km < 0) throw std::invalid_argument("loss coefficient must be >= 0");
    if (distance_km < 0) throw std::invalid_argument("distance must be >= 0");
  }

  /// Detector efficiency folded into the arm: eta_det * 10^(-xi (d/2) / 10).
  double arm_transmittance() const {
    return det_eff * std::pow(10.0, -loss_db_per_km * (distance_km / 2.0) / 10.0);
  }

  /// Conceptual end-to-end transmittance (both arms), the PLOB argument.
  double total_transmittance() const {
    const double t = arm_transmittance();
    return t * t;
  }

  /// APD detectors (Table-style Parameter 1).
  static DeviceParams parameter1(double distance_km = 0.0) {
    return {6.02e-6, 0.145, 0.20, 0.015, distance_km};
  }

  /// SNSPD detectors (Parameter 2).
  static DeviceParams parameter2(double distance_km = 0.0) {
    return {5e-8, 0.85, 0.20, 0.015, distance_km};
  }

  /// Loss-only parametrization: a total loss in dB (detector loss included),
  /// split over two equal arms.
  static DeviceParams with_total_loss(double total_loss_db, double dark_count = 0.0,
                                      double misalignment = 0.0) {
    DeviceParams d;
    d.dark_count = dark_count;
    d.det_eff = 1.0;
    d.misalignment = misalignment;
    d.loss_db_per_km = 0.2;
    d.distance_km = total_loss_db / d.loss_db_per_km;
    return d;
  }
};

inline DeviceParams device_preset(const std::string& name, double distance_km = 0.0) {
  if (name == "parameter1") return DeviceParams::parameter1(distance_km);
  if (name == "parameter2") return DeviceParams::parameter2(distance_km);
  throw std::invalid_argument("unknown device preset: " + name);
}

/// Same detectors at the distance that realizes a target total loss (dB),
/// detector loss included. Throws when the detectors alone exceed it.
inline DeviceParams device_at_total_loss(DeviceParams base, double total_loss_db) {
  const double det_db = -20.0 * std::log10(base.det_eff);
  if (total_loss_db < det_db - 1e-12) {
    throw std::invalid_argument("total loss below the detector loss alone");
  }
  base.distance_km = std::max(0.0, (total_loss_db - det_db) / base.loss_db_per_km);
  return base;
}

namespace detail {

inline double click_probability(double intensity, double p_dc) {
  return 1.0 - (1.0 - p_dc) * std::exp(-intensity);
}

// Sesquilinear detector forms on a single mode: <alpha| M |beta> for the
// no-click POVM element (1-p) |0><0| and its complement.
inline Complex noclick_form(Complex a, Complex b, double p_dc) {
  return (1.0 - p_dc) * std::exp(-0.5 * (std::norm(a) + std::norm(b)));
}

inline Complex click_form(Complex a, Complex b, double p_dc) {
  return coherent_overlap(a, b) - noclick_form(a, b, p_dc);
}

inline Complex signal_amplitude(const PureState& s) {
  if (s.factors.empty() || s.factors[0].kind != StateFactor::Kind::Coherent) {
    throw std::invalid_argument("protocol state has a non-coherent signal factor");
  }
  return s.factors[0].alpha;
}

// Overlap of everything past the signal mode (Trojan modes go to Eve).
inline Complex bypass_overlap(const PureState& s, const PureState& t) {
  Complex prod(1.0, 0.0);
  for (std::size_t k = 1; k < s.factors.size(); ++k) {
    prod *= factor_overlap(s.factors[k], t.factors[k]);
  }
  return prod;
}

}  // namespace detail

/// Beam-splitter interference statistics for the coherent-state families,
/// for every ordered basis pair (x, y). Misalignment enters as a relative
/// phase 2*asin(sqrt(e_ali)) on Bob's arm.
inline ObservedStats phase_protocol_stats(const ProtocolSpec& p, const DeviceParams& dev) {
  dev.validate();
  const double eta = dev.arm_transmittance();
  const double t_amp = std::sqrt(eta);
  const Complex mis = std::exp(Complex(0.0, 2.0 * std::asin(std::sqrt(dev.misalignment))));
  const double p_dc = dev.dark_count;

  ObservedStats out = ObservedStats::empty(p.num_bases);
  for (int x = 0; x < p.num_bases; ++x) {
    for (int y = 0; y < p.num_bases; ++y) {
      double pass = 0.0, err = 0.0;
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const Complex alpha =
              t_amp * detail::signal_amplitude(p.alice_states[p.state_index(x, a)]);
          const Complex beta =
              t_amp * mis * detail::signal_amplitude(p.bob_states[p.state_index(y, b)]);
          const double i_plus = 0.5 * std::norm(alpha + beta);
          const double i_minus = 0.5 * std::norm(alpha - beta);
          const double q_plus = detail::click_probability(i_plus, p_dc);
          const double q_minus = detail::click_probability(i_minus, p_dc);
          const double psi_plus = q_plus * (1.0 - q_minus);
          const double psi_minus = q_minus * (1.0 - q_plus);
          const double w = p.bit_prior[a][b];
          pass += w * (psi_plus + psi_minus);
          if (counts_as_error(p.family, x, y, p.key_basis, a, b, true)) err += w * psi_plus;
          if (counts_as_error(p.family, x, y, p.key_basis, a, b, false)) err += w * psi_minus;
        }
      }
      out.pair(x, y).pass_probability = StatEntry::exactly(pass);
      out.pair(x, y).bit_error = StatEntry::exactly(pass > 0 ? err / pass : 0.0);
    }
  }
  return out;
}

/// Gram blocks of Eve's vectors for the honest channel: loss modes and
/// Trojan modes pass to the environment, the detected modes contribute the
/// click/no-click sesquilinear forms. Satisfies  Lambda - G+ - G- >= 0
/// exactly and reproduces phase_protocol_stats on the diagonal.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> honest_gram_blocks(const ProtocolSpec& p,
                                                                        const DeviceParams& dev) {
  dev.validate();
  const double eta = dev.arm_transmittance();
  const double t_amp = std::sqrt(eta);
  const double l_amp = std::sqrt(1.0 - eta);
  const Complex mis = std::exp(Complex(0.0, 2.0 * std::asin(std::sqrt(dev.misalignment))));
  const double p_dc = dev.dark_count;
  const int na = p.states_per_party();
  const int nb = static_cast<int>(p.bob_states.size());
  const int d = na * nb;

  std::vector<Complex> amp_a(na), amp_b(nb);
  for (int i = 0; i < na; ++i) amp_a[i] = detail::signal_amplitude(p.alice_states[i]);
  for (int j = 0; j < nb; ++j) amp_b[j] = detail::signal_amplitude(p.bob_states[j]);

  Eigen::MatrixXcd g_plus(d, d), g_minus(d, d);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      const int row = i * nb + j;
      for (int k = 0; k < na; ++k) {
        for (int l = 0; l < nb; ++l) {
          const int col = k * nb + l;
          const Complex env = coherent_overlap(l_amp * amp_a[i], l_amp * amp_a[k]) *
                              coherent_overlap(l_amp * amp_b[j], l_amp * amp_b[l]);
          const Complex bypass = detail::bypass_overlap(p.alice_states[i], p.alice_states[k]) *
                                 detail::bypass_overlap(p.bob_states[j], p.bob_states[l]);
          const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
          const Complex cp_row = inv_sqrt2 * (t_amp * amp_a[i] + t_amp * mis * amp_b[j]);
          const Complex cm_row = inv_sqrt2 * (t_amp * amp_a[i] - t_amp * mis * amp_b[j]);
          const Complex cp_col = inv_sqrt2 * (t_amp * amp_a[k] + t_amp * mis * amp_b[l]);
          const Complex cm_col = inv_sqrt2 * (t_amp * amp_a[k] - t_amp * mis * amp_b[l]);
          g_plus(row, col) = env * bypass * detail::click_form(cp_row, cp_col, p_dc) *
                             detail::noclick_form(cm_row, cm_col, p_dc);
          g_minus(row, col) = env * bypass * detail::noclick_form(cp_row, cp_col, p_dc) *
                              detail::click_form(cm_row, cm_col, p_dc);
        }
      }
    }
  }
  return {g_plus, g_minus};
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature (nodes and weights on [-1, 1], Newton iteration
// on the Legendre recurrence).

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Quadrature gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be positive");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double z_prev, pp;
    do {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2 * j + 1) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      z_prev = z;
      z = z_prev - p1 / pp;
    } while (std::abs(z - z_prev) > 1e-15);
    q.nodes[i] = -z;
    q.nodes[n - 1 - i] = z;
    q.weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    q.weights[n - 1 - i] = q.weights[i];
  }
  return q;
}

// ---------------------------------------------------------------------------
// Time-bin Bell-state analyzer for the decoy protocol. Detector slots are
// ordered D0-early, D0-late, D1-early, D1-late; conclusive coincidences are
// one click per time bin, same detector = Psi+, cross detector = Psi-.

namespace timebin {

inline Eigen::Vector2cd bin_state(int basis, int bit) {
  Eigen::Vector2cd v;
  if (basis == 0) {
    v << (bit == 0 ? 1.0 : 0.0), (bit == 0 ? 0.0 : 1.0);
  } else {
    const double r = 1.0 / std::sqrt(2.0);
    v << r, (bit == 0 ? r : -r);
  }
  return v;
}

inline Eigen::Matrix2cd misalignment_rotation(double e_ali) {
  const double s = std::sqrt(e_ali);
  const double c = std::sqrt(1.0 - e_ali);
  Eigen::Matrix2cd r;
  r << c, -s, s, c;
  return r;
}

// Conclusive patterns as bitmasks over the 4 slots.
inline constexpr std::array<unsigned, 2> kPsiPlusPatterns = {0b0011, 0b1100};
inline constexpr std::array<unsigned, 2> kPsiMinusPatterns = {0b1001, 0b0110};

// P(exactly the slots in `pattern` click) for independent coherent slots.
inline double pattern_probability(const std::array<double, 4>& intensity, unsigned pattern,
                                  double p_dc) {
  double prob = 1.0;
  for (int s = 0; s < 4; ++s) {
    const double q = detail::click_probability(intensity[s], p_dc);
    prob *= (pattern >> s & 1u) ? q : (1.0 - q);
  }
  return prob;
}

}  // namespace timebin

struct DecoyIntensities {
  double mu = 0.3;
  double zeta = 0.1;
  double omega = 0.3e-3;  // finite extinction: mu / 1000 by convention

  std::array<double, 3> levels() const { return {mu, zeta, omega}; }

  void validate() const {
    if (!(mu >= zeta && zeta >= omega && omega >= 0)) {
      throw std::invalid_argument("decoy intensities must satisfy mu >= zeta >= omega >= 0");
    }
  }
};

/// Gains and QBERs for all 9 intensity pairs and both bases, from
/// phase-randomized coherent pulses through the time-bin analyzer. The two
/// independent pulse phases are averaged with an n x n Gauss-Legendre rule.
inline ObservedStats decoy_stats(const DecoyIntensities& levels, const DeviceParams& dev,
                                 int quad_order = 64) {
  dev.validate();
  levels.validate();
  if (quad_order < 8) throw std::invalid_argument("quadrature order below accuracy floor (8)");

  const double eta = dev.arm_transmittance();
  const double t_amp = std::sqrt(eta);
  const Eigen::Matrix2cd rot = timebin::misalignment_rotation(dev.misalignment);
  const double p_dc = dev.dark_count;
  const Quadrature q = gauss_legendre(quad_order);

  ObservedStats out = ObservedStats::empty(2);  // pair entries filled by decoy post-processing
  out.intensities = {levels.mu, levels.zeta, levels.omega};
  out.decoy_grid.resize(2);

  const auto levels_arr = levels.levels();
  for (int basis = 0; basis < 2; ++basis) {
    for (int ia = 0; ia < 3; ++ia) {
      for (int ib = 0; ib < 3; ++ib) {
        double gain = 0.0, err = 0.0;
        for (int a = 0; a < 2; ++a) {
          for (int bbit = 0; bbit < 2; ++bbit) {
            const Eigen::Vector2cd ua =
                std::sqrt(levels_arr[ia]) * t_amp * timebin::bin_state(basis, a);
            const Eigen::Vector2cd ub0 =
                std::sqrt(levels_arr[ib]) * t_amp * timebin::bin_state(basis, bbit);
            const Eigen::Vector2cd ub = rot * ub0;
            double pass_ab = 0.0, err_ab = 0.0;
            for (int na_ = 0; na_ < quad_order; ++na_) {
              const Complex ph_a = std::exp(Complex(0.0, kPi * (q.nodes[na_] + 1.0)));
              for (int nb_ = 0; nb_ < quad_order; ++nb_) {
                const Complex ph_b = std::exp(Complex(0.0, kPi * (q.nodes[nb_] + 1.0)));
                const Eigen::Vector2cd va = ph_a * ua;
                const Eigen::Vector2cd vb = ph_b * ub;
                const double inv2 = 0.5;
                const std::array<double, 4> intensity = {
                    inv2 * std::norm(va(0) + vb(0)), inv2 * std::norm(va(1) + vb(1)),
                    inv2 * std::norm(va(0) - vb(0)), inv2 * std::norm(va(1) - vb(1))};
                double p_plus = 0.0, p_minus = 0.0;
                for (unsigned pat : timebin::kPsiPlusPatterns) {
                  p_plus += timebin::pattern_probability(intensity, pat, p_dc);
                }
                for (unsigned pat : timebin::kPsiMinusPatterns) {
                  p_minus += timebin::pattern_probability(intensity, pat, p_dc);
                }
                const double w = q.weights[na_] * q.weights[nb_] / 4.0;
                pass_ab += w * (p_plus + p_minus);
                double e = 0.0;
                if (counts_as_error(ProtocolFamily::DecoySinglePhoton, basis, basis, 0, a, bbit, true)) {
                  e += p_plus;
                }
                if (counts_as_error(ProtocolFamily::DecoySinglePhoton, basis, basis, 0, a, bbit, false)) {
                  e += p_minus;
                }
                err_ab += w * e;
              }
            }
            gain += 0.25 * pass_ab;
            err += 0.25 * err_ab;
          }
        }
        out.decoy_grid[basis][ia][ib].gain = gain;
        out.decoy_grid[basis][ia][ib].qber = gain > 0 ? err / gain : 0.0;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact single-photon computation: one photon per party through loss, the
// beam splitter and threshold detectors with dark counts. Small enough to
// enumerate the two-photon occupation basis exactly (6 modes: 4 detector
// slots plus one loss mode per party).

namespace fock {

inline constexpr int kModes = 6;  // 0..3 detector slots, 4 envA, 5 envB

struct TwoPhotonState {
  // amplitude over unordered occupation patterns; index p*kModes+q with p<=q
  std::array<Complex, kModes * kModes> amp{};

  static int index(int p, int q) { return p * kModes + q; }
};

// State a^dag(u) b^dag(v) |0> with u, v orthogonal output-mode vectors.
inline TwoPhotonState two_photon(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
  TwoPhotonState st;
  for (int p = 0; p < kModes; ++p) {
    for (int q = p; q < kModes; ++q) {
      st.amp[TwoPhotonState::index(p, q)] =
          (p == q) ? std::sqrt(2.0) * u(p) * v(p) : u(p) * v(q) + u(q) * v(p);
    }
  }
  return st;
}

// Output-mode image of one party's photon (+1 sign into D0, bs_sign into D1).
inline Eigen::VectorXcd party_modes(const Eigen::Vector2cd& bins, double arm_eta, double bs_sign,
                                    int env_mode) {
  Eigen::VectorXcd u = Eigen::VectorXcd::Zero(kModes);
  const double t = std::sqrt(arm_eta);
  const double r = 1.0 / std::sqrt(2.0);
  u(0) = t * r * bins(0);
  u(1) = t * r * bins(1);
  u(2) = bs_sign * t * r * bins(0);
  u(3) = bs_sign * t * r * bins(1);
  u(env_mode) = std::sqrt(1.0 - arm_eta);
  return u;
}

// Diagonal POVM weight of an exact click pattern on an occupation pattern.
inline double pattern_weight(unsigned click_pattern, int p, int q, double p_dc) {
  double w = 1.0;
  for (int s = 0; s < 4; ++s) {
    const bool occupied = (p == s) || (q == s);
    const bool wants_click = click_pattern >> s & 1u;
    if (wants_click) {
      w *= occupied ? 1.0 : p_dc;
    } else {
      w *= occupied ? 0.0 : (1.0 - p_dc);
    }
    if (w == 0.0) return 0.0;
  }
  return w;
}

// <psi_row| M |psi_col> for M = sum of exact-click-pattern POVMs.
template <std::size_t N>
inline Complex povm_form(const TwoPhotonState& row, const TwoPhotonState& col,
                         const std::array<unsigned, N>& patterns, double p_dc) {
  Complex val(0.0, 0.0);
  for (int p = 0; p < kModes; ++p) {
    for (int q = p; q < kModes; ++q) {
      const int idx = TwoPhotonState::index(p, q);
      const Complex a = row.amp[idx];
      const Complex b = col.amp[idx];
      if (a == Complex(0, 0) && b == Complex(0, 0)) continue;
      double w = 0.0;
      for (unsigned pat : patterns) w += pattern_weight(pat, p, q, p_dc);
      if (w != 0.0) val += std::conj(a) * b * w;
    }
  }
  return val;
}

}  // namespace fock

struct SinglePhotonStats {
  std::array<double, 2> yield{};  // Y11 per basis (0 = Z, 1 = X)
  std::array<double, 2> qber{};   // e11 per basis
};

/// Yields and QBERs conditioned on both parties emitting exactly one photon.
inline SinglePhotonStats single_photon_stats(const DeviceParams& dev) {
  dev.validate();
  const double eta = dev.arm_transmittance();
  const Eigen::Matrix2cd rot = timebin::misalignment_rotation(dev.misalignment);

  SinglePhotonStats out;
  for (int basis = 0; basis < 2; ++basis) {
    double pass = 0.0, err = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const Eigen::VectorXcd u = fock::party_modes(timebin::bin_state(basis, a), eta, +1.0, 4);
        const Eigen::VectorXcd v =
            fock::party_modes(rot * timebin::bin_state(basis, b), eta, -1.0, 5);
        const auto psi = fock::two_photon(u, v);
        const double p_plus =
            fock::povm_form(psi, psi, timebin::kPsiPlusPatterns, dev.dark_count).real();
        const double p_minus =
            fock::povm_form(psi, psi, timebin::kPsiMinusPatterns, dev.dark_count).real();
        pass += 0.25 * (p_plus + p_minus);
        if (counts_as_error(ProtocolFamily::DecoySinglePhoton, basis, basis, 0, a, b, true)) {
          err += 0.25 * p_plus;
        }
        if (counts_as_error(ProtocolFamily::DecoySinglePhoton, basis, basis, 0, a, b, false)) {
          err += 0.25 * p_minus;
        }
      }
    }
    out.yield[basis] = pass;
    out.qber[basis] = pass > 0 ? err / pass : 0.0;
  }
  return out;
}

/// Honest Gram blocks for the decoy single-photon protocol: exact Fock
/// computation for the detected photons, Trojan modes bypassing to Eve.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> single_photon_gram_blocks(
    const ProtocolSpec& p, const DeviceParams& dev) {
  if (p.family != ProtocolFamily::DecoySinglePhoton) {
    throw std::invalid_argument("single-photon Gram blocks apply to the decoy protocol");
  }
  dev.validate();
  const double eta = dev.arm_transmittance();
  const Eigen::Matrix2cd rot = timebin::misalignment_rotation(dev.misalignment);
  const int n = p.states_per_party();
  const int d = p.joint_dim();

  std::vector<fock::TwoPhotonState> psi(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const auto& qa = p.alice_states[i].factors[0].qubit;
    Eigen::Vector2cd ba;
    ba << qa[0], qa[1];
    const Eigen::VectorXcd u = fock::party_modes(ba, eta, +1.0, 4);
    for (int j = 0; j < n; ++j) {
      const auto& qb = p.bob_states[j].factors[0].qubit;
      Eigen::Vector2cd bb;
      bb << qb[0], qb[1];
      const Eigen::VectorXcd v = fock::party_modes((rot * bb).eval(), eta, -1.0, 5);
      psi[i * n + j] = fock::two_photon(u, v);
    }
  }

  Eigen::MatrixXcd g_plus(d, d), g_minus(d, d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const int row = i * n + j;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          const int col = k * n + l;
          const Complex bypass = detail::bypass_overlap(p.alice_states[i], p.alice_states[k]) *
                                 detail::bypass_overlap(p.bob_states[j], p.bob_states[l]);
          g_plus(row, col) =
              bypass * fock::povm_form(psi[row], psi[col], timebin::kPsiPlusPatterns,
                                       dev.dark_count);
          g_minus(row, col) =
              bypass * fock::povm_form(psi[row], psi[col], timebin::kPsiMinusPatterns,
                                       dev.dark_count);
        }
      }
    }
  }
  return {g_plus, g_minus};
}

}  // namespace mdiqkd
