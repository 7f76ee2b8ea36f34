#pragma once

// Quantum-coin baseline: phase-error upper bound from the coin bias and the
// Bloch-sphere bound, for comparison against the SDP bound.

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "mdiqkd/rates.hpp"
#include "mdiqkd/states.hpp"

namespace mdiqkd {

struct CoinInputs {
  double delta_init = 0.0;       // coin bias before conditioning
  double pass_probability = 1.0; // conclusive probability the bias is diluted by
  double test_error = 0.0;       // e_y, observed test-basis error rate
  double key_error = 0.0;        // e_x, observed key-basis error rate
};

namespace detail {

// <Phi_x | Phi_y> for one party: the four-term qubit-overlap x code-overlap
// expansion, with the |+i> branch steering to the bit-1 test state.
inline Complex coin_branch_overlap(const PureState& a0, const PureState& a1,
                                   const PureState& a2, const PureState& a3) {
  const Complex pp(0.5, 0.5);   // <+|+i>
  const Complex pm(0.5, -0.5);  // <+|-i>
  const Complex mp(0.5, -0.5);  // <-|+i>
  const Complex mm(0.5, 0.5);   // <-|-i>
  return 0.5 * (pp * state_overlap(a0, a3) + pm * state_overlap(a0, a2) +
                mp * state_overlap(a1, a3) + mm * state_overlap(a1, a2));
}

}  // namespace detail

/// Delta_init = (1 - Re[<Phi_x^A|Phi_y^A><Phi_x^B|Phi_y^B>]) / 2, built from
/// the key-basis pair and the first test basis of each party.
inline double delta_init(const ProtocolSpec& p) {
  if (p.num_bases < 2) {
    throw std::invalid_argument("coin analysis needs a two-state test basis");
  }
  const int key = p.key_basis;
  const int test = (key == 0) ? 1 : 0;
  const Complex za = detail::coin_branch_overlap(
      p.alice_states[p.state_index(key, 0)], p.alice_states[p.state_index(key, 1)],
      p.alice_states[p.state_index(test, 0)], p.alice_states[p.state_index(test, 1)]);
  const Complex zb = detail::coin_branch_overlap(
      p.bob_states[p.state_index(key, 0)], p.bob_states[p.state_index(key, 1)],
      p.bob_states[p.state_index(test, 0)], p.bob_states[p.state_index(test, 1)]);
  const double v = 0.5 * (1.0 - (za * zb).real());
  return std::clamp(v, 0.0, 1.0);
}

/// Purification-optimal coin bias: Delta_init = (1 - F_A F_B)/2 with F the
/// Uhlmann fidelity between the key- and test-basis mixtures, computed from
/// the party Gram matrix. Used for the single-photon decoy states, whose
/// fixed-pairing overlap stays far from 1 even with no Trojan light.
inline double delta_init_fidelity(const ProtocolSpec& p) {
  if (p.num_bases < 2) {
    throw std::invalid_argument("coin analysis needs a two-state test basis");
  }
  const int key = p.key_basis;
  const int test = (key == 0) ? 1 : 0;
  const auto party_fidelity = [&](const std::vector<PureState>& states) {
    const std::array<int, 4> idx = {p.state_index(key, 0), p.state_index(key, 1),
                                    p.state_index(test, 0), p.state_index(test, 1)};
    Eigen::Matrix4cd gram;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) gram(i, j) = state_overlap(states[idx[i]], states[idx[j]]);
    }
    // Vector realization of the Gram matrix: columns of D^(1/2) U^dagger.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(gram);
    const Eigen::Vector4d evals = es.eigenvalues().cwiseMax(0.0);
    const Eigen::Matrix4cd vecs =
        evals.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    const auto rho = [&](int i, int j) {
      return 0.5 * (vecs.col(i) * vecs.col(i).adjoint() + vecs.col(j) * vecs.col(j).adjoint());
    };
    const Eigen::Matrix4cd rho_key = rho(0, 1);
    const Eigen::Matrix4cd rho_test = rho(2, 3);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> ek(rho_key);
    const Eigen::Matrix4cd sqrt_key = ek.eigenvectors() *
                                      ek.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                                      ek.eigenvectors().adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> em(sqrt_key * rho_test * sqrt_key);
    return em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  };
  const double fa = party_fidelity(p.alice_states);
  const double fb = party_fidelity(p.bob_states);
  return std::clamp(0.5 * (1.0 - fa * fb), 0.0, 1.0);
}

/// Upper bound on the phase error from the Bloch-sphere bound; 1/2 when the
/// diluted bias is vacuous or when the bound's defining root exceeds 1.
inline double coin_phase_error(const CoinInputs& in) {
  if (in.pass_probability <= 0.0) throw std::invalid_argument("pass probability must be > 0");
  if (in.delta_init < 0.0 || in.delta_init > 1.0 || in.test_error < 0.0 ||
      in.test_error > 0.5 || in.key_error < 0.0 || in.key_error > 0.5) {
    throw std::invalid_argument("coin inputs out of range");
  }
  const double delta = in.delta_init / in.pass_probability;
  if (delta >= 0.5) return 0.5;
  const double ey = in.test_error;
  // No binding root: the Bloch inequality holds for every e_ph up to 1.
  if (std::sqrt(ey) >= 1.0 - 2.0 * delta) return 0.5;
  const double bound = ey + 4.0 * delta * (1.0 - delta) * (1.0 - 2.0 * ey) +
                       4.0 * (1.0 - 2.0 * delta) *
                           std::sqrt(delta * (1.0 - delta) * ey * (1.0 - ey));
  return std::min(bound, 0.5);
}

inline Rate coin_key_rate(double pass_probability, double e_ph, double e_x) {
  if (pass_probability < 0.0 || pass_probability > 1.0) {
    throw std::invalid_argument("pass probability outside [0,1]");
  }
  const double ep = std::clamp(e_ph, 0.0, 0.5);
  const double ex = std::clamp(e_x, 0.0, 0.5);
  return {pass_probability * (1.0 - binary_entropy(ep) - binary_entropy(ex))};
}

}  // namespace mdiqkd
