#pragma once

// Observation records shared by the channel simulators, the decoy
// post-processing and the SDP assembly.

#include <array>
#include <vector>

namespace mdiqkd {

/// One observed statistic: either an exact value or an interval.
struct StatEntry {
  double value = 0.0;  // exact value, or ignored when interval
  double lower = 0.0;
  double upper = 1.0;
  bool exact = true;

  static StatEntry exactly(double v) { return {v, v, v, true}; }
  static StatEntry between(double lo, double hi) { return {0.5 * (lo + hi), lo, hi, false}; }
};

struct BasisPairStats {
  StatEntry pass_probability;  // P_pass^(x,y), or [Y11^L, 1] for decoy
  StatEntry bit_error;         // e_bit^(x,y), or [0, e11^U] for decoy
  bool present = true;         // decoy observations cover matched pairs only
};

struct DecoyPairStats {
  double gain = 0.0;
  double qber = 0.0;
};

/// Honest-device observations, indexed by the ordered basis pair (x, y):
/// every pair's conclusive probability and correlation statistic is public
/// in MDI-QKD, and all of them constrain the Gram matrix. The decoy grid
/// (per-basis 3x3 gains/QBERs over {mu,zeta,omega} pairs) is carried for
/// decoy post-processing and reporting.
struct ObservedStats {
  int num_bases = 0;
  std::vector<BasisPairStats> pairs;  // size num_bases^2, index x*num_bases+y

  BasisPairStats& pair(int x, int y) { return pairs[x * num_bases + y]; }
  const BasisPairStats& pair(int x, int y) const { return pairs[x * num_bases + y]; }

  static ObservedStats empty(int num_bases) {
    ObservedStats s;
    s.num_bases = num_bases;
    s.pairs.resize(static_cast<std::size_t>(num_bases) * num_bases);
    return s;
  }

  std::vector<double> intensities;  // decoy intensity levels {mu, zeta, omega}
  // decoy_grid[basis][i][j]: Alice level i, Bob level j.
  std::vector<std::array<std::array<DecoyPairStats, 3>, 3>> decoy_grid;
};

}  // namespace mdiqkd
