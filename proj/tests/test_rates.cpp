#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mdiqkd/channel.hpp"
#include "mdiqkd/keyrate.hpp"
#include "mdiqkd/rates.hpp"

using namespace mdiqkd;
using Catch::Approx;

TEST_CASE("binary entropy values and symmetry") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == Approx(1.0).margin(1e-15));
  CHECK(binary_entropy(0.11) == Approx(0.499916).margin(5e-7));
  for (double p : {0.01, 0.2, 0.37, 0.49}) {
    CHECK(binary_entropy(p) == Approx(binary_entropy(1 - p)).margin(1e-14));
  }
  CHECK_THROWS_AS(binary_entropy(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(binary_entropy(1.1), std::invalid_argument);
}

TEST_CASE("shor-preskill endpoints") {
  CHECK(shor_preskill_rate(0.37, 0.0, 0.0).unclamped == Approx(0.37).margin(1e-15));
  CHECK(shor_preskill_rate(0.37, 0.5, 0.2).unclamped <= 0.0);
  CHECK(shor_preskill_rate(0.37, 0.5, 0.2).clamped() == 0.0);
}

TEST_CASE("plob bound values and monotonicity") {
  CHECK(plob_bound(0.5) == Approx(1.0).margin(1e-15));
  CHECK(plob_bound(1e-3) == Approx(0.0014434).margin(5e-8));
  // Small-transmittance series: C ~ eta / ln 2.
  const double eta = 1e-9;
  CHECK(plob_bound(eta) * std::log(2.0) / eta == Approx(1.0).margin(1e-6));
  double last = plob_bound(0.9);
  for (double e : {0.5, 0.25, 0.1, 0.01}) {
    const double v = plob_bound(e);
    CHECK(v < last);
    last = v;
  }
  CHECK_THROWS_AS(plob_bound(1.0), std::invalid_argument);
}

TEST_CASE("infinite-test-state rate") {
  CHECK(infinite_test_rate(0.0, 0.01) == Approx(0.0).margin(1e-15));

  // eta = 1 substitution.
  const double mu = 0.2;
  const double direct = infinite_test_rate(mu, 1.0);
  const double pass = 1 - std::exp(-2 * mu);
  CHECK(direct == Approx(pass * (1 - binary_entropy(pass / 2))).margin(1e-12));

  // Double evaluation with a different association order.
  const double eta = 0.01, m2 = 0.1;
  const double root = std::sqrt(eta);
  const long double argl =
      (1.0L - std::exp((long double)(-4.0 * m2 * (1.0 - root) - 2.0 * m2 * root))) / 2.0L;
  const long double passl = 1.0L - std::exp((long double)(-2.0 * m2 * root));
  const double expect = static_cast<double>(
      passl * (1.0L - (-argl * std::log2((double)argl) -
                       (1.0L - argl) * std::log2((double)(1.0L - argl)))));
  CHECK(infinite_test_rate(m2, eta) == Approx(expect).margin(1e-12));
}

TEST_CASE("optimize_point on a single-value grid returns that evaluation") {
  PointConfig cfg;
  cfg.family = ProtocolFamily::PhaseEncoding;
  cfg.num_bases = 2;
  cfg.device = DeviceParams::parameter2(0.0);
  cfg.key_mu_grid = {0.05};
  cfg.methods.sdp = true;
  cfg.methods.coin = true;
  cfg.methods.plob = true;

  const KeyRatePoint pt = optimize_point(cfg);
  REQUIRE(pt.ok);
  REQUIRE(pt.intensities.size() == 1);
  CHECK(pt.intensities[0] == 0.05);
  CHECK(pt.solver_status == "optimal");
  CHECK(pt.rate_sdp > 0.0);
  CHECK(pt.rate_coin <= pt.rate_sdp + 1e-9);
  CHECK(std::isfinite(pt.rate_plob));

  // Argmax dominance: the optimized rate is never below any single point.
  PointConfig multi = cfg;
  multi.key_mu_grid = {0.02, 0.05, 0.1};
  const KeyRatePoint best = optimize_point(multi);
  REQUIRE(best.ok);
  for (double mu : multi.key_mu_grid) {
    PointConfig single = cfg;
    single.key_mu_grid = {mu};
    const KeyRatePoint one = optimize_point(single);
    REQUIRE(one.ok);
    CHECK(best.rate_sdp >= one.rate_sdp - 1e-12);
    CHECK(best.rate_coin >= one.rate_coin - 1e-12);
  }
}

TEST_CASE("device loss helpers") {
  const DeviceParams d = device_at_total_loss(DeviceParams::parameter2(0.0), 30.0);
  CHECK(-10 * std::log10(d.total_transmittance()) == Approx(30.0).margin(1e-9));
  CHECK_THROWS_AS(device_at_total_loss(DeviceParams::parameter2(0.0), 0.5),
                  std::invalid_argument);
  const DeviceParams ideal = DeviceParams::with_total_loss(20.0);
  CHECK(-10 * std::log10(ideal.total_transmittance()) == Approx(20.0).margin(1e-9));
}
