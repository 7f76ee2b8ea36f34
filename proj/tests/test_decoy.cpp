#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mdiqkd/decoy.hpp"

using namespace mdiqkd;
using Catch::Approx;

namespace {

// Statistics generated exactly from a known yield/error table with support
// inside the cutoff, so the truncation tail vanishes by construction.
ObservedStats stats_from_table(const DecoyIntensities& levels,
                               const std::vector<std::vector<double>>& yield,
                               const std::vector<std::vector<double>>& err_mass, int n_gen) {
  ObservedStats obs = ObservedStats::empty(2);
  obs.intensities = {levels.mu, levels.zeta, levels.omega};
  obs.decoy_grid.resize(2);
  const auto lv = levels.levels();
  for (int basis = 0; basis < 2; ++basis) {
    for (int ia = 0; ia < 3; ++ia) {
      for (int ib = 0; ib < 3; ++ib) {
        const auto pa = detail::poisson_weights(lv[ia], n_gen);
        const auto pb = detail::poisson_weights(lv[ib], n_gen);
        double q = 0.0, m = 0.0;
        for (int n = 0; n <= n_gen; ++n) {
          for (int k = 0; k <= n_gen; ++k) {
            q += pa[n] * pb[k] * yield[n][k];
            m += pa[n] * pb[k] * err_mass[n][k];
          }
        }
        obs.decoy_grid[basis][ia][ib].gain = q;
        obs.decoy_grid[basis][ia][ib].qber = q > 0 ? m / q : 0.0;
      }
    }
  }
  return obs;
}

}  // namespace

TEST_CASE("constant yield tables are bracketed") {
  DecoyIntensities levels{0.4, 0.1, 0.4e-3};
  const int n_gen = 12;
  const double c = 0.37;
  std::vector<std::vector<double>> yield(n_gen + 1, std::vector<double>(n_gen + 1, c));
  std::vector<std::vector<double>> mass(n_gen + 1, std::vector<double>(n_gen + 1, 0.0));
  const auto obs = stats_from_table(levels, yield, mass, n_gen);
  const auto bounds = bound_single_photon(obs, levels, 12);
  REQUIRE(bounds.ok());
  CHECK(bounds.y11_lower[0] <= c + 1e-9);
  CHECK(bounds.y11_lower[0] >= 0.0);
  // Zero error statistics force the single-photon error bound to zero.
  CHECK(bounds.e11_upper[0] == Approx(0.0).margin(1e-7));
}

TEST_CASE("generative soundness over random yield tables") {
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 6; ++trial) {
    DecoyIntensities levels{0.25 + 0.2 * u(rng), 0.05 + 0.04 * u(rng), 1e-4};
    const int n_gen = 10;
    std::vector<std::vector<double>> yield(n_gen + 1, std::vector<double>(n_gen + 1));
    std::vector<std::vector<double>> mass(n_gen + 1, std::vector<double>(n_gen + 1));
    for (int n = 0; n <= n_gen; ++n) {
      for (int m = 0; m <= n_gen; ++m) {
        yield[n][m] = u(rng);
        mass[n][m] = yield[n][m] * 0.5 * u(rng);
      }
    }
    const auto obs = stats_from_table(levels, yield, mass, n_gen);
    const auto bounds = bound_single_photon(obs, levels, 12);
    REQUIRE(bounds.ok());
    const double true_y11 = yield[1][1];
    const double true_e11 = mass[1][1] / yield[1][1];
    CHECK(bounds.y11_lower[0] <= true_y11 + 1e-7);
    CHECK(bounds.e11_upper[0] >= true_e11 - 1e-7);
  }
}

TEST_CASE("honest statistics bracket the fock simulator") {
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  DecoyIntensities levels{0.3, 0.1, 0.3e-3};
  const auto obs = decoy_stats(levels, dev, 64);
  const auto bounds = bound_single_photon(obs, levels, 12);
  REQUIRE(bounds.ok());
  const auto sp = single_photon_stats(dev);
  for (int basis = 0; basis < 2; ++basis) {
    CHECK(bounds.y11_lower[basis] <= sp.yield[basis] + 1e-8);
    CHECK(bounds.y11_lower[basis] > 0.0);
    CHECK(bounds.e11_upper[basis] >= sp.qber[basis] - 1e-8);
    CHECK(bounds.e11_upper[basis] < 1.0);
  }
}

TEST_CASE("dropping an intensity pair only loosens the bounds") {
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  DecoyIntensities levels{0.3, 0.1, 0.3e-3};
  const auto obs = decoy_stats(levels, dev, 64);
  const auto full = bound_single_photon(obs, levels, 12);
  REQUIRE(full.ok());

  DecoyPairMask mask;
  for (auto& row : mask) row.fill(true);
  for (int drop_a = 0; drop_a < 3; ++drop_a) {
    mask[drop_a][drop_a] = false;
    const auto loose = bound_single_photon(obs, levels, 12, {}, &mask);
    REQUIRE(loose.ok());
    CHECK(loose.y11_lower[0] <= full.y11_lower[0] + 1e-7);
    CHECK(loose.e11_upper[0] >= full.e11_upper[0] - 1e-7);
    mask[drop_a][drop_a] = true;
  }
}

TEST_CASE("cutoff convergence") {
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  DecoyIntensities levels{0.3, 0.1, 0.3e-3};
  const auto obs = decoy_stats(levels, dev, 64);
  const auto a = bound_single_photon(obs, levels, 12);
  const auto b = bound_single_photon(obs, levels, 16);
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(std::abs(a.y11_lower[0] - b.y11_lower[0]) <= 1e-6);
  CHECK(std::abs(a.e11_upper[0] - b.e11_upper[0]) <= 1e-6);
  CHECK_THROWS_AS(bound_single_photon(obs, levels, 1), std::invalid_argument);
}

TEST_CASE("decoy key rate formula") {
  DecoyBounds bounds;
  bounds.y11_lower = {0.2, 0.2};
  bounds.e11_upper = {0.0, 0.0};
  ObservedStats obs = ObservedStats::empty(2);
  obs.intensities = {0.3, 0.1, 3e-4};
  obs.decoy_grid.resize(2);
  obs.decoy_grid[0][0][0].gain = 0.05;
  obs.decoy_grid[0][0][0].qber = 0.0;

  // e_ph = 1/2 kills the single-photon term.
  const Rate dead = decoy_key_rate(bounds, obs, 0.5);
  CHECK(dead.unclamped <= 0.0 + 1e-12);

  // Error-free statistics: the rate is exactly the single-photon gain term.
  const Rate clean = decoy_key_rate(bounds, obs, 0.0);
  const double q11 = 0.3 * 0.3 * std::exp(-0.6) * 0.2;
  CHECK(clean.unclamped == Approx(q11).epsilon(1e-12));
}
