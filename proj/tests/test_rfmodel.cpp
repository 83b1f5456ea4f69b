#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>

#include "selfcal/rfmodel.hpp"
#include "selfcal/rng.hpp"
#include "selfcal/topology.hpp"

using namespace selfcal;

TEST_CASE("generate_gains honors amplitudes and is seed-deterministic") {
  auto g = generate_gains(8, 3, 1.5, 0.5, 42);
  CHECK(g.antenna_count == 8);
  CHECK(g.reference == 3);
  for (int m = 1; m <= 8; ++m) {
    CHECK(std::abs(g.alpha[m]) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(std::abs(g.beta[m]) == doctest::Approx(0.5).epsilon(1e-12));
    const double pa = std::arg(g.alpha[m]);
    CHECK(pa >= -std::numbers::pi);
    CHECK(pa < std::numbers::pi);
  }
  CHECK(g.relative(2) == g.beta[2] / g.alpha[2]);

  auto same = generate_gains(8, 3, 1.5, 0.5, 42);
  auto other = generate_gains(8, 3, 1.5, 0.5, 43);
  CHECK(g.alpha == same.alpha);
  CHECK(g.beta == same.beta);
  CHECK(g.alpha != other.alpha);

  CHECK_THROWS_AS(generate_gains(8, 9, 1, 1, 0), StructuralError);
  CHECK_THROWS_AS(generate_gains(8, 3, 0, 1, 0), StructuralError);
  CHECK_THROWS_AS(generate_gains(8, 3, 1, -1, 0), StructuralError);
}

TEST_CASE("gain phases look uniform") {
  // Mean of exp(i phase) over many draws concentrates near zero.
  cdouble acc{0, 0};
  int n = 0;
  for (int seed = 0; seed < 200; ++seed) {
    auto g = generate_gains(16, 1, 1, 1, 1000 + seed);
    for (int m = 1; m <= 16; ++m) {
      acc += g.alpha[m] + g.beta[m];
      n += 2;
    }
  }
  CHECK(std::abs(acc) / n < 0.03);  // sd ~ 1/sqrt(n) = 0.0125
}

TEST_CASE("noiseless synthesis reproduces the signal model exactly") {
  auto gains = generate_gains(5, 3, 1.2, 0.8, 7);
  auto strategy = build_star(5, 3);
  ChannelModel channel{{0.9, -0.4}, 0.0, 0.0};
  auto ms = synthesize_measurements(gains, strategy, channel, 99);
  for (auto [p, q] : strategy.edges()) {
    CHECK(ms.at(p, q) == gains.beta[p] * channel.line_gain * gains.alpha[q]);
    CHECK(ms.at(q, p) == gains.beta[q] * channel.line_gain * gains.alpha[p]);
  }
}

TEST_CASE("measurement container guards access") {
  auto strategy = build_daisy_chain(4, 2);
  ChannelModel channel{{1, 0}, 0.0, 0.01};
  auto ms = synthesize_measurements(generate_gains(4, 2, 1, 1, 1), strategy, channel, 5);
  CHECK(ms.present(1, 2));
  CHECK(ms.present(2, 1));
  CHECK_FALSE(ms.present(1, 3));
  CHECK_FALSE(ms.present(2, 2));
  CHECK_THROWS_AS(ms.at(1, 3), StructuralError);
  CHECK_THROWS_AS(ms.at(2, 2), StructuralError);
  CHECK_THROWS_AS(ms.at(0, 1), StructuralError);
}

TEST_CASE("synthesis is deterministic in the seed") {
  auto gains = generate_gains(6, 1, 1, 1, 11);
  auto strategy = build_combined(6, 1, 0);
  ChannelModel channel{{1, 0}, 0.01, 0.02};
  CHECK((synthesize_measurements(gains, strategy, channel, 77) ==
         synthesize_measurements(gains, strategy, channel, 77)));
  CHECK_FALSE((synthesize_measurements(gains, strategy, channel, 77) ==
               synthesize_measurements(gains, strategy, channel, 78)));
}

TEST_CASE("sample mean of a measurement approaches beta h alpha") {
  auto gains = generate_gains(3, 1, 1, 1, 3);
  auto strategy = build_star(3, 1);
  ChannelModel channel{{1, 0}, 0.0, 1.0};
  const int trials = 100000;
  cdouble acc{0, 0};
  for (int t = 0; t < trials; ++t)
    acc += synthesize_measurements(gains, strategy, channel, 50000 + t).at(2, 1);
  const cdouble mean = acc / static_cast<double>(trials);
  const cdouble expected = gains.beta[2] * channel.line_gain * gains.alpha[1];
  // |mean - expected| ~ CN(0, sigma_n^2/trials); 4 sigma radius
  CHECK(std::abs(mean - expected) < 4.0 * std::sqrt(1.0 / trials));
}

TEST_CASE("line distortion is reciprocal and varies across lines") {
  auto gains = generate_gains(6, 2, 1, 1, 21);
  auto strategy = build_daisy_chain(6, 2);
  ChannelModel channel{{1, 0}, 0.5, 0.0};  // distortion only, no noise
  auto ms = synthesize_measurements(gains, strategy, channel, 13);
  std::vector<cdouble> realized;
  for (auto [p, q] : strategy.edges()) {
    const cdouble h_pq = ms.at(p, q) / (gains.beta[p] * gains.alpha[q]);
    const cdouble h_qp = ms.at(q, p) / (gains.beta[q] * gains.alpha[p]);
    CHECK(std::abs(h_pq - h_qp) < 1e-14);  // same line both directions
    CHECK(std::abs(h_pq - channel.line_gain) > 1e-6);
    realized.push_back(h_pq);
  }
  for (size_t i = 1; i < realized.size(); ++i)
    CHECK(std::abs(realized[i] - realized[0]) > 1e-9);
}

TEST_CASE("fixed line gains persist across measurement seeds") {
  auto gains = generate_gains(5, 1, 1, 1, 31);
  auto strategy = build_star(5, 1);
  ChannelModel channel{{1, 0}, 0.25, 0.0};
  auto lines = draw_line_gains(strategy, channel, 555);
  CHECK(lines.at(1, 2) == lines.at(2, 1));
  auto ms1 = synthesize_measurements(gains, strategy, channel, lines, 1);
  auto ms2 = synthesize_measurements(gains, strategy, channel, lines, 2);
  // No noise: different seeds give identical measurements under fixed lines.
  CHECK((ms1 == ms2));
  for (auto [p, q] : strategy.edges())
    CHECK(std::abs(ms1.at(p, q) - gains.beta[p] * lines.at(p, q) * gains.alpha[q]) < 1e-15);

  // Zero distortion variance collapses to the nominal gain.
  ChannelModel clean{{1, 0}, 0.0, 0.0};
  auto nominal = draw_line_gains(strategy, clean, 555);
  for (auto [p, q] : strategy.edges()) CHECK(nominal.at(p, q) == clean.line_gain);
}

TEST_CASE("snr_to_noise_variance") {
  CHECK(snr_to_noise_variance(0, 1, 1, {1, 0}) == doctest::Approx(1.0));
  CHECK(snr_to_noise_variance(20, 1, 1, {1, 0}) == doctest::Approx(0.01));
  CHECK(snr_to_noise_variance(10, 1, 2, {1, 0}) == doctest::Approx(0.4));
  CHECK(snr_to_noise_variance(10, 1, 1, {0, 2}) == doctest::Approx(0.4));
  CHECK_THROWS_AS(snr_to_noise_variance(10, 0, 1, {1, 0}), StructuralError);
  CHECK_THROWS_AS(snr_to_noise_variance(10, 1, 1, {0, 0}), StructuralError);
}

TEST_CASE("gain JSON round trip is exact") {
  auto g = generate_gains(7, 4, 1.3, 0.6, 77);
  auto back = gains_from_json(gains_to_json(g));
  CHECK(back.antenna_count == g.antenna_count);
  CHECK(back.reference == g.reference);
  CHECK(back.alpha == g.alpha);
  CHECK(back.beta == g.beta);
  CHECK_THROWS_AS(gains_from_json("{"), StructuralError);
  CHECK_THROWS_AS(gains_from_json("{\"antenna_count\": 3}"), StructuralError);
}

TEST_CASE("measurement JSON round trip is exact") {
  auto gains = generate_gains(5, 3, 1, 1, 9);
  auto strategy = build_combined(5, 3, 1);
  ChannelModel channel{{0.8, 0.1}, 0.001, 0.04};
  auto ms = synthesize_measurements(gains, strategy, channel, 12);
  auto text = measurements_to_json(ms, gains.alpha[3], gains.beta[3]);
  auto file = measurements_from_json(text);
  CHECK((file.measurements == ms));
  CHECK(file.alpha_f == gains.alpha[3]);
  CHECK(file.beta_f == gains.beta[3]);
  CHECK((file.measurements.strategy() == strategy));
  CHECK_THROWS_AS(measurements_from_json("[]"), StructuralError);
}
