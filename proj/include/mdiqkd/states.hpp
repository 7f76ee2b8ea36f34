#pragma once

// Pure code states of the MDI protocols as tensor products of coherent and
// qubit factors, with closed-form inner products, plus the four built-in
// protocol families and their joint Gram matrix.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mdiqkd {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// Inner product of two coherent states, exp(-(|a|^2+|b|^2)/2 + conj(a)*b).
inline Complex coherent_overlap(Complex alpha, Complex beta) {
  const double na = std::norm(alpha);
  const double nb = std::norm(beta);
  return std::exp(Complex(-0.5 * (na + nb), 0.0) + std::conj(alpha) * beta);
}

struct StateFactor {
  enum class Kind { Coherent, Qubit };

  Kind kind = Kind::Coherent;
  Complex alpha{0.0, 0.0};                    // coherent amplitude
  std::array<Complex, 2> qubit{{{1, 0}, {0, 0}}};  // amplitudes in |0>,|1>

  static StateFactor coherent(Complex amplitude) {
    StateFactor f;
    f.kind = Kind::Coherent;
    f.alpha = amplitude;
    return f;
  }

  static StateFactor qubit_state(Complex c0, Complex c1) {
    const double n = std::norm(c0) + std::norm(c1);
    if (std::abs(n - 1.0) > 1e-12) {
      throw std::invalid_argument("qubit amplitudes must be normalized");
    }
    StateFactor f;
    f.kind = Kind::Qubit;
    f.qubit = {c0, c1};
    return f;
  }
};

inline Complex factor_overlap(const StateFactor& s, const StateFactor& t) {
  if (s.kind != t.kind) {
    throw std::invalid_argument("state factor layout mismatch");
  }
  if (s.kind == StateFactor::Kind::Coherent) {
    return coherent_overlap(s.alpha, t.alpha);
  }
  return std::conj(s.qubit[0]) * t.qubit[0] + std::conj(s.qubit[1]) * t.qubit[1];
}

struct PureState {
  std::vector<StateFactor> factors;
};

/// <s|t> as the product of per-factor overlaps. Throws if layouts differ.
inline Complex state_overlap(const PureState& s, const PureState& t) {
  if (s.factors.size() != t.factors.size()) {
    throw std::invalid_argument("state factor layout mismatch");
  }
  Complex prod(1.0, 0.0);
  for (std::size_t k = 0; k < s.factors.size(); ++k) {
    prod *= factor_overlap(s.factors[k], t.factors[k]);
  }
  return prod;
}

enum class ProtocolFamily {
  PhaseEncoding,        // M-basis phase-encoded coherent states
  PhaseEncodingTrojan,  // same, with a Trojan reflection mode per party
  DecoySinglePhoton,    // single-photon BB84 signals with two Trojan modes
  PhaseMatching,        // phase encoding with per-basis intensities
};

inline std::string to_string(ProtocolFamily f) {
  switch (f) {
    case ProtocolFamily::PhaseEncoding: return "phase_encoding";
    case ProtocolFamily::PhaseEncodingTrojan: return "phase_encoding_tha";
    case ProtocolFamily::DecoySinglePhoton: return "decoy_single_photon";
    case ProtocolFamily::PhaseMatching: return "phase_matching";
  }
  return "unknown";
}

struct ProtocolParams {
  int num_bases = 2;              // M
  double mu = 0.1;                // shared signal intensity
  std::vector<double> basis_mu;   // per-basis intensities (phase matching); empty = all mu
  double trojan_nu = 0.0;         // reflected-light intensity
  int key_basis = 0;
};

/// Both parties' code-state families plus priors and basis roles.
/// Per-party states are indexed s = 2*x + a (basis-major); joint rows are
/// lexicographic in (x, a, y, b), i.e. joint = s_alice * states_per_party + s_bob.
struct ProtocolSpec {
  ProtocolFamily family = ProtocolFamily::PhaseEncoding;
  int num_bases = 2;
  int key_basis = 0;
  std::vector<double> basis_intensity;  // mu_x per basis
  double trojan_intensity = 0.0;        // nu
  std::vector<PureState> alice_states;  // size 2*num_bases
  std::vector<PureState> bob_states;
  std::vector<double> basis_prior;      // f_gamma for matched basis pairs
  std::array<std::array<double, 2>, 2> bit_prior{{{0.25, 0.25}, {0.25, 0.25}}};

  int states_per_party() const { return static_cast<int>(alice_states.size()); }
  int joint_dim() const { return states_per_party() * static_cast<int>(bob_states.size()); }

  int state_index(int basis, int bit) const { return 2 * basis + bit; }

  int joint_index(int x, int a, int y, int b) const {
    return state_index(x, a) * static_cast<int>(bob_states.size()) + state_index(y, b);
  }
};

namespace detail {

inline std::vector<PureState> phase_encoded_family(int num_bases,
                                                   const std::vector<double>& mu_per_basis,
                                                   double nu, bool with_trojan) {
  std::vector<PureState> states;
  states.reserve(2 * num_bases);
  for (int x = 0; x < num_bases; ++x) {
    const Complex phase = std::exp(Complex(0.0, x * kPi / num_bases));
    for (int a = 0; a < 2; ++a) {
      const double sign = (a == 0) ? 1.0 : -1.0;
      PureState s;
      s.factors.push_back(StateFactor::coherent(sign * phase * std::sqrt(mu_per_basis[x])));
      if (with_trojan) {
        s.factors.push_back(StateFactor::coherent(sign * phase * std::sqrt(nu)));
      }
      states.push_back(std::move(s));
    }
  }
  return states;
}

inline std::vector<PureState> decoy_single_photon_family(double nu) {
  const double r2 = 1.0 / std::sqrt(2.0);
  const double t = std::sqrt(nu);        // Trojan amplitude for the Z states
  const double h = std::sqrt(nu / 2.0);  // and for the X states, split over both modes
  std::vector<PureState> states(4);
  states[0].factors = {StateFactor::qubit_state(1, 0), StateFactor::coherent(t),
                       StateFactor::coherent(0)};
  states[1].factors = {StateFactor::qubit_state(0, 1), StateFactor::coherent(0),
                       StateFactor::coherent(t)};
  states[2].factors = {StateFactor::qubit_state(r2, r2), StateFactor::coherent(h),
                       StateFactor::coherent(h)};
  states[3].factors = {StateFactor::qubit_state(r2, -r2), StateFactor::coherent(h),
                       StateFactor::coherent(-h)};
  return states;
}

}  // namespace detail

inline ProtocolSpec build_protocol(ProtocolFamily family, const ProtocolParams& params) {
  if (params.num_bases < 1) throw std::invalid_argument("num_bases must be >= 1");
  if (params.key_basis < 0 || params.key_basis >= params.num_bases) {
    throw std::invalid_argument("key_basis out of range");
  }
  if (params.mu < 0 || params.trojan_nu < 0) {
    throw std::invalid_argument("intensities must be nonnegative");
  }
  for (double m : params.basis_mu) {
    if (m < 0) throw std::invalid_argument("intensities must be nonnegative");
  }

  ProtocolSpec spec;
  spec.family = family;
  spec.num_bases = params.num_bases;
  spec.key_basis = params.key_basis;
  spec.trojan_intensity = params.trojan_nu;
  spec.basis_intensity.assign(params.num_bases, params.mu);
  if (!params.basis_mu.empty()) {
    if (static_cast<int>(params.basis_mu.size()) != params.num_bases) {
      throw std::invalid_argument("basis_mu size must equal num_bases");
    }
    spec.basis_intensity = params.basis_mu;
  }

  switch (family) {
    case ProtocolFamily::PhaseEncoding:
      spec.alice_states = detail::phase_encoded_family(params.num_bases, spec.basis_intensity,
                                                       0.0, false);
      break;
    case ProtocolFamily::PhaseEncodingTrojan:
      spec.alice_states = detail::phase_encoded_family(params.num_bases, spec.basis_intensity,
                                                       params.trojan_nu, true);
      break;
    case ProtocolFamily::DecoySinglePhoton:
      if (params.num_bases != 2) {
        throw std::invalid_argument("decoy_single_photon uses exactly two bases (Z and X)");
      }
      spec.alice_states = detail::decoy_single_photon_family(params.trojan_nu);
      break;
    case ProtocolFamily::PhaseMatching:
      spec.alice_states = detail::phase_encoded_family(params.num_bases, spec.basis_intensity,
                                                       0.0, false);
      break;
    default:
      throw std::invalid_argument("unknown protocol family");
  }

  // Both parties use the same state family (equidistant-node symmetry).
  spec.bob_states = spec.alice_states;
  spec.basis_prior.assign(params.num_bases,
                          1.0 / (static_cast<double>(params.num_bases) * params.num_bases));
  return spec;
}

/// Bit-error index set per basis pair, under the announcement-dependent bit
/// flip. Coherent interference correlates the bits on Psi+ (flip on Psi-
/// only); the two-photon BSM anti-correlates the Z basis on both
/// announcements (Bob always flips there). Mismatched pairs record the same
/// flip-adjusted correlation statistic.
inline bool counts_as_error(ProtocolFamily family, int basis_a, int basis_b, int key_basis,
                            int a, int b, bool announce_plus) {
  if (family == ProtocolFamily::DecoySinglePhoton && basis_a == key_basis &&
      basis_b == key_basis) {
    (void)announce_plus;
    return a == b;
  }
  return announce_plus ? (a != b) : (a == b);
}

/// Gram matrix of per-party code states: entries <s_i|s_j>.
inline Eigen::MatrixXcd party_gram(const std::vector<PureState>& states) {
  const int n = static_cast<int>(states.size());
  Eigen::MatrixXcd g(n, n);
  for (int i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      g(i, j) = state_overlap(states[i], states[j]);
      g(j, i) = std::conj(g(i, j));
    }
  }
  return g;
}

/// Joint-input Gram matrix Lambda with rows ordered lexicographically in
/// (x, a, y, b). Hermitian, unit diagonal, PSD by construction.
inline Eigen::MatrixXcd lambda_matrix(const ProtocolSpec& spec) {
  const Eigen::MatrixXcd ga = party_gram(spec.alice_states);
  const Eigen::MatrixXcd gb = party_gram(spec.bob_states);
  const int na = static_cast<int>(spec.alice_states.size());
  const int nb = static_cast<int>(spec.bob_states.size());
  Eigen::MatrixXcd lambda(na * nb, na * nb);
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < nb; ++j) {
      for (int k = 0; k < na; ++k) {
        for (int l = 0; l < nb; ++l) {
          lambda(i * nb + j, k * nb + l) = ga(i, k) * gb(j, l);
        }
      }
    }
  }
  return lambda;
}

}  // namespace mdiqkd
