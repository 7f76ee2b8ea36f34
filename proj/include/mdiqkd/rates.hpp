#pragma once

// Scalar key-rate formulas.

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdiqkd {

/// A rate value that is clamped at zero for reporting but keeps the raw
/// value available.
struct Rate {
  double unclamped = 0.0;
  double clamped() const { return std::max(0.0, unclamped); }
};

inline double binary_entropy(double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("binary_entropy argument outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// R >= P_pass [1 - h2(e_ph) - h2(e_bit)], error correction at the Shannon
/// limit. Error arguments are clamped into [0, 1/2]; certified bounds may
/// overshoot 1/2 by solver tolerance.
inline Rate shor_preskill_rate(double pass_probability, double e_ph, double e_bit) {
  if (pass_probability < 0.0 || pass_probability > 1.0) {
    throw std::invalid_argument("pass probability outside [0,1]");
  }
  const double ep = std::clamp(e_ph, 0.0, 0.5);
  const double eb = std::clamp(e_bit, 0.0, 0.5);
  return {pass_probability * (1.0 - binary_entropy(ep) - binary_entropy(eb))};
}

/// Repeaterless secret-key capacity -log2(1 - eta) of a lossy channel.
inline double plob_bound(double eta_total) {
  if (eta_total < 0.0 || eta_total >= 1.0) {
    throw std::invalid_argument("plob_bound needs transmittance in [0,1)");
  }
  return -std::log2(1.0 - eta_total);
}

/// Loss-only rate with infinitely many test states; eta is the total
/// transmittance (arms carry sqrt(eta) each).
inline double infinite_test_rate(double mu, double eta_total) {
  if (mu < 0.0) throw std::invalid_argument("intensity must be nonnegative");
  if (eta_total <= 0.0 || eta_total > 1.0) {
    throw std::invalid_argument("transmittance outside (0,1]");
  }
  const double root = std::sqrt(eta_total);
  const double pass = 1.0 - std::exp(-2.0 * mu * root);
  const double arg = (1.0 - std::exp(-4.0 * mu * (1.0 - root)) * std::exp(-2.0 * mu * root)) / 2.0;
  return pass * (1.0 - binary_entropy(arg));
}

}  // namespace mdiqkd
