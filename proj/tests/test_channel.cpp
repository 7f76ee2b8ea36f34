#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "mdiqkd/channel.hpp"
#include "mdiqkd/states.hpp"

using namespace mdiqkd;
using Catch::Approx;

namespace {

ProtocolSpec phase_spec(int m, double mu, double nu = -1.0) {
  ProtocolParams params;
  params.num_bases = m;
  params.mu = mu;
  if (nu >= 0) {
    params.trojan_nu = nu;
    return build_protocol(ProtocolFamily::PhaseEncodingTrojan, params);
  }
  return build_protocol(ProtocolFamily::PhaseEncoding, params);
}

double min_eig(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("no light and no darks means no passes") {
  const auto spec = phase_spec(2, 0.0);
  DeviceParams dev;  // ideal detector, zero darks
  const auto stats = phase_protocol_stats(spec, dev);
  for (const auto& b : stats.pairs) {
    CHECK(b.pass_probability.value == 0.0);
  }
}

TEST_CASE("vacuum input passes only on dark coincidences") {
  const auto spec = phase_spec(2, 0.0);
  DeviceParams dev;
  dev.dark_count = 1e-3;
  const auto stats = phase_protocol_stats(spec, dev);
  const double expected = 2.0 * dev.dark_count * (1.0 - dev.dark_count);
  for (const auto& b : stats.pairs) {
    CHECK(b.pass_probability.value == Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("noiseless key basis has zero bit error") {
  const auto spec = phase_spec(2, 0.1);
  DeviceParams dev;  // eta 1, no darks, no misalignment
  const auto stats = phase_protocol_stats(spec, dev);
  CHECK(stats.pair(0, 0).bit_error.value == Approx(0.0).margin(1e-15));
}

TEST_CASE("pass probability decreases with distance") {
  const auto spec = phase_spec(2, 0.15);
  double last = 1.0;
  for (double dist : {0.0, 10.0, 25.0, 50.0, 100.0}) {
    const auto stats = phase_protocol_stats(spec, DeviceParams::parameter1(dist));
    const double pass = stats.pair(0, 0).pass_probability.value;
    CHECK(pass <= last + 1e-15);
    last = pass;
  }
}

TEST_CASE("Trojan intensity does not change interference statistics") {
  DeviceParams dev = DeviceParams::parameter1(12.0);
  const auto base = phase_protocol_stats(phase_spec(2, 0.2, 0.0), dev);
  const auto leaky = phase_protocol_stats(phase_spec(2, 0.2, 1e-3), dev);
  for (std::size_t g = 0; g < base.pairs.size(); ++g) {
    CHECK(base.pairs[g].pass_probability.value == leaky.pairs[g].pass_probability.value);
    CHECK(base.pairs[g].bit_error.value == leaky.pairs[g].bit_error.value);
  }
}

TEST_CASE("interference statistics agree with Monte-Carlo photon sampling") {
  const auto spec = phase_spec(2, 0.1);
  const DeviceParams dev = DeviceParams::parameter2(0.0);
  const auto stats = phase_protocol_stats(spec, dev);

  const double eta = dev.arm_transmittance();
  const double t = std::sqrt(eta);
  const Complex mis = std::exp(Complex(0.0, 2.0 * std::asin(std::sqrt(dev.misalignment))));

  std::mt19937_64 rng(20240817);
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int gamma = 0;
  const long trials = 5'000'000;
  long pass_count = 0, err_count = 0;
  for (long trial = 0; trial < trials; ++trial) {
    const int a = bit(rng), b = bit(rng);
    const Complex alpha = t * spec.alice_states[spec.state_index(gamma, a)].factors[0].alpha;
    const Complex beta = t * mis * spec.bob_states[spec.state_index(gamma, b)].factors[0].alpha;
    const double ip = 0.5 * std::norm(alpha + beta);
    const double im = 0.5 * std::norm(alpha - beta);
    std::poisson_distribution<int> pp(ip), pm(im);
    const bool click_p = pp(rng) > 0 || unif(rng) < dev.dark_count;
    const bool click_m = pm(rng) > 0 || unif(rng) < dev.dark_count;
    if (click_p == click_m) continue;
    ++pass_count;
    const bool err = counts_as_error(spec.family, gamma, gamma, 0, a, b, click_p);
    if (err) ++err_count;
  }
  const double p_mc = static_cast<double>(pass_count) / trials;
  const double p_th = stats.pair(gamma, gamma).pass_probability.value;
  const double sigma_p = std::sqrt(p_th * (1 - p_th) / trials);
  CHECK(std::abs(p_mc - p_th) < 3.5 * sigma_p);

  const double mass_mc = static_cast<double>(err_count) / trials;
  const double mass_th = stats.pair(gamma, gamma).bit_error.value * p_th;
  const double sigma_m = std::sqrt(mass_th * (1 - mass_th) / trials) + 1e-12;
  CHECK(std::abs(mass_mc - mass_th) < 3.5 * sigma_m);
}

TEST_CASE("honest Gram blocks witness the physical channel") {
  const auto spec = phase_spec(2, 0.1);
  const DeviceParams dev = DeviceParams::parameter2(10.0);
  const auto [gp, gm] = honest_gram_blocks(spec, dev);
  const Eigen::MatrixXcd lambda = lambda_matrix(spec);

  CHECK((gp - gp.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(min_eig(gp) > -1e-10);
  CHECK(min_eig(gm) > -1e-10);
  CHECK(min_eig(lambda - gp - gm) > -1e-10);

  // Diagonals reproduce the interference statistics.
  const auto stats = phase_protocol_stats(spec, dev);
  for (int gamma = 0; gamma < 2; ++gamma) {
    double pass = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const int idx = spec.joint_index(gamma, a, gamma, b);
        pass += 0.25 * (gp(idx, idx).real() + gm(idx, idx).real());
      }
    }
    CHECK(pass == Approx(stats.pair(gamma, gamma).pass_probability.value).margin(1e-10));
  }
}

TEST_CASE("decoy gains vanish without light or darks") {
  DecoyIntensities levels;
  levels.mu = levels.zeta = levels.omega = 0.0;
  DeviceParams dev;
  const auto obs = decoy_stats(levels, dev, 16);
  for (int basis = 0; basis < 2; ++basis) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        CHECK(obs.decoy_grid[basis][i][j].gain == Approx(0.0).margin(1e-15));
      }
    }
  }
}

TEST_CASE("decoy quadrature self-convergence") {
  DecoyIntensities levels{0.3, 0.1, 0.3e-3};
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  const auto a = decoy_stats(levels, dev, 64);
  const auto b = decoy_stats(levels, dev, 128);
  for (int basis = 0; basis < 2; ++basis) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        const double ga = a.decoy_grid[basis][i][j].gain;
        const double gb = b.decoy_grid[basis][i][j].gain;
        CHECK(std::abs(ga - gb) <= 1e-9 * std::max(1.0, std::abs(gb)));
      }
    }
  }
  CHECK_THROWS_AS(decoy_stats(levels, dev, 4), std::invalid_argument);
}

TEST_CASE("decoy gains agree with Monte-Carlo sampling") {
  DecoyIntensities levels{0.3, 0.1, 0.3e-3};
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  const auto obs = decoy_stats(levels, dev, 64);

  const double eta = dev.arm_transmittance();
  const double t = std::sqrt(eta);
  const Eigen::Matrix2cd rot = timebin::misalignment_rotation(dev.misalignment);

  std::mt19937_64 rng(6021);
  std::uniform_int_distribution<int> bit(0, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);

  const int basis = 0;  // Z basis, signal/signal pair
  const long trials = 4'000'000;
  long pass_count = 0;
  for (long trial = 0; trial < trials; ++trial) {
    const int a = bit(rng), b = bit(rng);
    const Eigen::Vector2cd ua =
        std::exp(Complex(0, phase(rng))) * std::sqrt(levels.mu) * t * timebin::bin_state(basis, a);
    const Eigen::Vector2cd ub = std::exp(Complex(0, phase(rng))) * std::sqrt(levels.mu) * t *
                                (rot * timebin::bin_state(basis, b));
    const std::array<double, 4> intensity = {
        0.5 * std::norm(ua(0) + ub(0)), 0.5 * std::norm(ua(1) + ub(1)),
        0.5 * std::norm(ua(0) - ub(0)), 0.5 * std::norm(ua(1) - ub(1))};
    unsigned pattern = 0;
    for (int s = 0; s < 4; ++s) {
      std::poisson_distribution<int> ph(intensity[s]);
      const bool click = ph(rng) > 0 || unif(rng) < dev.dark_count;
      if (click) pattern |= 1u << s;
    }
    for (unsigned pat : timebin::kPsiPlusPatterns) {
      if (pattern == pat) ++pass_count;
    }
    for (unsigned pat : timebin::kPsiMinusPatterns) {
      if (pattern == pat) ++pass_count;
    }
  }
  const double q_mc = static_cast<double>(pass_count) / trials;
  const double q_th = obs.decoy_grid[basis][0][0].gain;
  const double sigma = std::sqrt(q_th * (1 - q_th) / trials);
  CHECK(std::abs(q_mc - q_th) < 3.5 * sigma);
}

TEST_CASE("single-photon yields at a perfect device") {
  DeviceParams dev;  // eta 1, no darks, no misalignment
  const auto sp = single_photon_stats(dev);
  // Z basis: opposite bins always give a cross-bin coincidence; equal bins
  // bunch at the beam splitter and never produce one.
  CHECK(sp.yield[0] == Approx(0.5).margin(1e-12));
  CHECK(sp.qber[0] == Approx(0.0).margin(1e-12));
  // X basis: half the amplitude ends in a conclusive pattern.
  CHECK(sp.yield[1] == Approx(0.5).margin(1e-12));
  CHECK(sp.qber[1] == Approx(0.0).margin(1e-12));
}

TEST_CASE("single-photon Gram blocks are consistent witnesses") {
  ProtocolParams params;
  params.num_bases = 2;
  params.trojan_nu = 1e-4;
  const auto spec = build_protocol(ProtocolFamily::DecoySinglePhoton, params);
  const DeviceParams dev = DeviceParams::parameter1(10.0);

  const auto [gp, gm] = single_photon_gram_blocks(spec, dev);
  const Eigen::MatrixXcd lambda = lambda_matrix(spec);
  CHECK(min_eig(gp) > -1e-10);
  CHECK(min_eig(gm) > -1e-10);
  CHECK(min_eig(lambda - gp - gm) > -1e-10);

  const auto sp = single_photon_stats(dev);
  for (int basis = 0; basis < 2; ++basis) {
    double pass = 0.0, err = 0.0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const int idx = spec.joint_index(basis, a, basis, b);
        const double pp = gp(idx, idx).real();
        const double pm = gm(idx, idx).real();
        pass += 0.25 * (pp + pm);
        if (counts_as_error(spec.family, basis, basis, 0, a, b, true)) err += 0.25 * pp;
        if (counts_as_error(spec.family, basis, basis, 0, a, b, false)) err += 0.25 * pm;
      }
    }
    CHECK(pass == Approx(sp.yield[basis]).margin(1e-12));
    CHECK(err == Approx(sp.qber[basis] * sp.yield[basis]).margin(1e-12));
  }
}

TEST_CASE("decoy yields bracket between quadrature and fock paths") {
  // The coherent-pulse simulator conditioned on n = m = 1 is exactly the
  // Fock computation; spot-check the omega/omega pair, which is dominated
  // by vacuum and single photons, against a first-order expansion.
  const DeviceParams dev = DeviceParams::parameter1(10.0);
  DecoyIntensities levels{1e-3, 5e-4, 1e-6};
  const auto obs = decoy_stats(levels, dev, 64);
  const auto sp = single_photon_stats(dev);
  // Q ~ P(1,1) Y11 + darks; with darks subtracted the ratio to mu_a mu_b
  // exp(...) Y11 should be near 1 at leading order.
  const double mu_a = levels.mu, mu_b = levels.mu;
  const double p11 = mu_a * std::exp(-mu_a) * mu_b * std::exp(-mu_b);
  DeviceParams no_dark = dev;
  no_dark.dark_count = 0.0;
  const auto obs_nd = decoy_stats(levels, no_dark, 64);
  const auto sp_nd = single_photon_stats(no_dark);
  const double q_pred = p11 * sp_nd.yield[0];
  const double q_sim = obs_nd.decoy_grid[0][0][0].gain;
  CHECK(q_sim == Approx(q_pred).epsilon(0.05));
  CHECK(sp.yield[0] > 0.0);
}
