#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mdiqkd/coin.hpp"

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

// Largest e satisfying sqrt(ey e) + sqrt((1-ey)(1-e)) >= 1 - 2 delta, by
// bisection on the decreasing branch.
double bloch_root(double delta, double ey) {
  const double target = 1.0 - 2.0 * delta;
  const auto g = [&](double e) { return std::sqrt(ey * e) + std::sqrt((1 - ey) * (1 - e)); };
  double lo = ey, hi = 1.0;
  if (g(hi) >= target) return 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) >= target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("delta_init closed form for the phase-encoding family") {
  // Hand expansion: <Phi_x|Phi_y> = exp(-mu) (cos mu + sin mu) per party.
  for (double mu : {0.05, 0.1, 0.3}) {
    const auto spec = phase_spec(2, mu);
    const double z = std::exp(-mu) * (std::cos(mu) + std::sin(mu));
    CHECK(delta_init(spec) == Approx(0.5 * (1.0 - z * z)).margin(1e-12));
  }
  // Trojan modes shift mu -> mu + nu in the same expression.
  const double mu = 0.1, nu = 1e-4;
  const auto tha = phase_spec(2, mu, nu);
  const double z = std::exp(-(mu + nu)) * (std::cos(mu + nu) + std::sin(mu + nu));
  CHECK(delta_init(tha) == Approx(0.5 * (1.0 - z * z)).margin(1e-12));
}

TEST_CASE("delta_init limits") {
  // All code states converging to vacuum removes the basis dependence.
  CHECK(delta_init(phase_spec(2, 1e-8)) < 1e-9);

  // Identical key and test families: value forced by the qubit geometry,
  // (1 - Re<a0|a1>)/2 for real key overlaps.
  auto spec = phase_spec(2, 0.07);
  spec.alice_states[2] = spec.alice_states[0];
  spec.alice_states[3] = spec.alice_states[1];
  spec.bob_states = spec.alice_states;
  const double c = std::exp(-2 * 0.07);
  CHECK(delta_init(spec) == Approx(0.5 * (1.0 - c)).margin(1e-12));

  CHECK_THROWS_AS(delta_init(phase_spec(1, 0.1)), std::invalid_argument);
}

TEST_CASE("fidelity-based delta for the single-photon states") {
  ProtocolParams params;
  params.num_bases = 2;
  params.trojan_nu = 0.0;
  const auto clean = build_protocol(ProtocolFamily::DecoySinglePhoton, params);
  CHECK(delta_init_fidelity(clean) == Approx(0.0).margin(1e-10));

  params.trojan_nu = 1e-3;
  const auto leaky = build_protocol(ProtocolFamily::DecoySinglePhoton, params);
  const double d = delta_init_fidelity(leaky);
  CHECK(d > 0.0);
  CHECK(d < 1e-3);

  params.trojan_nu = 1e-5;
  const auto faint = build_protocol(ProtocolFamily::DecoySinglePhoton, params);
  CHECK(delta_init_fidelity(faint) < d);
}

TEST_CASE("coin phase error closed forms") {
  // Delta_init = 0 collapses the bound to e_y.
  CHECK(coin_phase_error({0.0, 0.5, 0.05, 0.0}) == Approx(0.05).margin(1e-12));
  // e_y = 0 leaves the 4 delta (1 - delta) term.
  const double delta = 0.01;
  CHECK(coin_phase_error({delta, 1.0, 0.0, 0.0}) ==
        Approx(4 * delta * (1 - delta)).margin(1e-12));
  // Vacuous regimes clamp at one half.
  CHECK(coin_phase_error({0.3, 0.5, 0.05, 0.0}) == 0.5);
  CHECK(coin_phase_error({0.2, 0.2, 0.05, 0.0}) == 0.5);
  CHECK_THROWS_AS(coin_phase_error({0.1, 0.0, 0.05, 0.0}), std::invalid_argument);
}

TEST_CASE("coin bound equals the Bloch-sphere root") {
  for (double delta : {0.02, 0.05, 0.1}) {
    for (double ey : {0.01, 0.02, 0.05}) {
      const double bound = coin_phase_error({delta, 1.0, ey, 0.0});
      const double root = bloch_root(delta, ey);
      if (bound < 0.5) {
        CHECK(bound == Approx(root).margin(1e-9));
      } else {
        CHECK(root >= 0.5 - 1e-9);
      }
    }
  }
}

TEST_CASE("coin bound monotonicity and floor") {
  double last = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double delta = 0.5 * i / 40.0;
    const double v = coin_phase_error({delta, 1.0, 0.03, 0.0});
    CHECK(v >= last - 1e-12);
    CHECK(v >= 0.03 - 1e-12);
    last = v;
  }
  last = 0.0;
  for (int i = 0; i <= 40; ++i) {
    const double ey = 0.5 * i / 40.0;
    const double v = coin_phase_error({0.02, 1.0, ey, 0.0});
    CHECK(v >= last - 1e-12);
    CHECK(v >= ey - 1e-12);
    last = v;
  }
}

TEST_CASE("coin key rate endpoints") {
  CHECK(coin_key_rate(0.3, 0.0, 0.0).unclamped == Approx(0.3).margin(1e-15));
  CHECK(coin_key_rate(0.3, 0.5, 0.0).unclamped <= 0.0 + 1e-12);
  CHECK(coin_key_rate(0.3, 0.5, 0.0).clamped() == 0.0);
}
