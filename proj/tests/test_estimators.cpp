#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <string>

#include "selfcal/estimators.hpp"
#include "selfcal/rng.hpp"

using namespace selfcal;

namespace {

InterconnectionStrategy random_tree(int m, int f, Stream& stream) {
  std::uint64_t total = 1;
  for (int i = 0; i < m - 2; ++i) total *= static_cast<std::uint64_t>(m);
  return SpanningTreeEnumerator::from_index(m, f, stream.bits() % total);
}

double max_gain_error(const FullCalibrationEstimate& est, const RfGainSet& gains) {
  double worst = 0.0;
  for (int m = 1; m <= gains.antenna_count; ++m) {
    worst = std::max(worst, std::abs(est.alpha_hat[m] - gains.alpha[m]));
    worst = std::max(worst, std::abs(est.beta_hat[m] - gains.beta[m]));
  }
  return worst;
}

}  // namespace

TEST_CASE("noiseless recovery is exact on random trees") {
  Stream stream(0xE57);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = 3 + static_cast<int>(stream.bits() % 6);
    const int f = 1 + static_cast<int>(stream.bits() % m);
    auto s = random_tree(m, f, stream);
    auto paths = compute_paths(s);
    auto gains = generate_gains(m, f, 1.4, 0.7, stream.bits());
    ChannelModel ch{{0.9, 0.2}, 0.0, 0.0};
    auto ms = synthesize_measurements(gains, s, ch, stream.bits());

    auto full = estimate_full(ms, paths, gains.alpha[f], gains.beta[f], ch.line_gain);
    CHECK(max_gain_error(full, gains) < 1e-12);
    CHECK(residual_full(full, ms, ch.line_gain) < 1e-20);

    auto rel = estimate_relative(ms, paths, gains.relative(f));
    for (int v = 1; v <= m; ++v)
      CHECK(std::abs(rel.c_hat[v] - gains.relative(v)) < 1e-12);
    CHECK(residual_relative(rel, ms) < 1e-20);
  }
}

TEST_CASE("star estimates equal the direct per-antenna ratios") {
  auto s = build_star(5, 2);
  auto paths = compute_paths(s);
  auto gains = generate_gains(5, 2, 1, 1, 19);
  ChannelModel ch{{1.1, -0.3}, 0.0, 0.05};
  auto ms = synthesize_measurements(gains, s, ch, 77);
  auto est = estimate_full(ms, paths, gains.alpha[2], gains.beta[2], ch.line_gain);
  for (int m = 1; m <= 5; ++m) {
    if (m == 2) continue;
    CHECK(std::abs(est.alpha_hat[m] -
                   ms.at(2, m) / (ch.line_gain * gains.beta[2])) < 1e-15);
    CHECK(std::abs(est.beta_hat[m] -
                   ms.at(m, 2) / (ch.line_gain * gains.alpha[2])) < 1e-15);
  }
}

TEST_CASE("estimates interpolate any tree data exactly") {
  // 2(M-1) observations, 2(M-1) unknowns: the ML fit is an interpolation, so
  // the residual vanishes even for arbitrary (non-model) measurements.
  Stream stream(0xE58);
  auto s = random_tree(7, 4, stream);
  auto paths = compute_paths(s);
  MeasurementSet ms(s, ChannelModel{{1, 0}, 0.0, 0.1});
  for (auto [p, q] : s.edges()) {
    ms.set(p, q, stream.complex_gaussian(1.0));
    ms.set(q, p, stream.complex_gaussian(1.0));
  }
  auto full = estimate_full(ms, paths, {1, 0}, {1, 0}, {1, 0});
  CHECK(residual_full(full, ms, {1, 0}) < 1e-10);
  auto rel = estimate_relative(ms, paths, {1, 0});
  CHECK(residual_relative(rel, ms) < 1e-10);
}

TEST_CASE("nonzero residual off the interpolating estimate") {
  auto s = build_star(4, 1);
  auto gains = generate_gains(4, 1, 1, 1, 3);
  ChannelModel ch{{1, 0}, 0.0, 0.0};
  auto ms = synthesize_measurements(gains, s, ch, 5);
  auto est = estimate_full(ms, compute_paths(s), gains.alpha[1], gains.beta[1], {1, 0});
  est.alpha_hat[2] += cdouble{0.1, 0};
  CHECK(residual_full(est, ms, {1, 0}) > 1e-4);
  auto rel = estimate_relative(ms, compute_paths(s), gains.relative(1));
  rel.c_hat[3] *= 1.1;
  CHECK(residual_relative(rel, ms) > 1e-6);
}

TEST_CASE("relative calibration survives heterogeneous lines, full does not") {
  Stream stream(0xE59);
  auto s = build_daisy_chain(6, 3);
  auto paths = compute_paths(s);
  auto gains = generate_gains(6, 3, 1, 1, 21);
  ChannelModel ch{{1, 0}, 0.4, 0.0};  // strong per-line distortion, no noise
  auto ms = synthesize_measurements(gains, s, ch, 9);

  auto rel = estimate_relative(ms, paths, gains.relative(3));
  for (int m = 1; m <= 6; ++m)
    CHECK(std::abs(rel.c_hat[m] - gains.relative(m)) < 1e-12);

  auto full = estimate_full(ms, paths, gains.alpha[3], gains.beta[3], ch.line_gain);
  CHECK(max_gain_error(full, gains) > 1e-3);
}

TEST_CASE("relative estimates ignore a common line rescaling") {
  auto s = build_combined(6, 3, 1);
  auto paths = compute_paths(s);
  auto gains = generate_gains(6, 3, 1, 1, 33);
  ChannelModel ch{{1, 0}, 0.0, 0.02};
  auto ms = synthesize_measurements(gains, s, ch, 41);
  auto baseline = estimate_relative(ms, paths, gains.relative(3));

  MeasurementSet scaled(s, ch);
  const cdouble factor{2.7, -1.2};
  for (auto [p, q] : s.edges()) {
    scaled.set(p, q, factor * ms.at(p, q));
    scaled.set(q, p, factor * ms.at(q, p));
  }
  auto rescaled = estimate_relative(scaled, paths, gains.relative(3));
  for (int m = 1; m <= 6; ++m)
    CHECK(std::abs(rescaled.c_hat[m] - baseline.c_hat[m]) < 1e-13);
}

TEST_CASE("full estimates are covariant under a receive-chain rescaling") {
  auto s = build_daisy_chain(5, 2);
  auto paths = compute_paths(s);
  auto gains = generate_gains(5, 2, 1, 1, 47);
  ChannelModel ch{{1, 0}, 0.0, 0.0};
  auto base = estimate_full(synthesize_measurements(gains, s, ch, 1), paths,
                            gains.alpha[2], gains.beta[2], ch.line_gain);

  RfGainSet scaled_gains = gains;
  const cdouble sfac{0.6, 1.9};
  for (int m = 1; m <= 5; ++m) scaled_gains.beta[m] *= sfac;
  auto scaled = estimate_full(synthesize_measurements(scaled_gains, s, ch, 1), paths,
                              scaled_gains.alpha[2], scaled_gains.beta[2], ch.line_gain);
  for (int m = 1; m <= 5; ++m) {
    CHECK(std::abs(scaled.alpha_hat[m] - base.alpha_hat[m]) < 1e-12);
    CHECK(std::abs(scaled.beta_hat[m] - sfac * base.beta_hat[m]) < 1e-12);
  }
}

TEST_CASE("propagation singularity names the broken hop") {
  auto s = build_daisy_chain(4, 2);  // paths 2 -> 3 -> 4
  auto paths = compute_paths(s);
  MeasurementSet ms(s, ChannelModel{{1, 0}, 0.0, 0.0});
  ms.set(1, 2, {1, 0});
  ms.set(2, 1, {1, 0});
  ms.set(3, 2, {0, 0});  // beta_3 estimate collapses to zero
  ms.set(2, 3, {1, 0});
  ms.set(4, 3, {1, 0});
  ms.set(3, 4, {1, 0});
  try {
    estimate_full(ms, paths, {1, 0}, {1, 0}, {1, 0});
    FAIL("expected SingularityError");
  } catch (const SingularityError& e) {
    const std::string what = e.what();
    CHECK(what.find("beta") != std::string::npos);
    CHECK(what.find("antenna 3") != std::string::npos);
  }
  // The relative recursion only divides by y_{p,m}; zero there is degenerate.
  MeasurementSet degenerate(s, ChannelModel{{1, 0}, 0.0, 0.0});
  degenerate.set(1, 2, {1, 0});
  degenerate.set(2, 1, {1, 0});
  degenerate.set(3, 2, {1, 0});
  degenerate.set(2, 3, {0, 0});
  degenerate.set(4, 3, {1, 0});
  degenerate.set(3, 4, {1, 0});
  CHECK_THROWS_AS(estimate_relative(degenerate, paths, {1, 0}), SingularityError);
}

TEST_CASE("shape mismatches are rejected") {
  auto s = build_star(4, 1);
  auto other_paths = compute_paths(build_star(5, 1));
  auto gains = generate_gains(4, 1, 1, 1, 2);
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  auto ms = synthesize_measurements(gains, s, ch, 3);
  CHECK_THROWS_AS(estimate_full(ms, other_paths, {1, 0}, {1, 0}, {1, 0}),
                  StructuralError);
  CHECK_THROWS_AS(estimate_relative(ms, other_paths, {1, 0}), StructuralError);
  CHECK_THROWS_AS(estimate_full(ms, compute_paths(s), {1, 0}, {1, 0}, {0, 0}),
                  StructuralError);
}

TEST_CASE("estimate JSON carries every antenna") {
  auto s = build_star(4, 2);
  auto gains = generate_gains(4, 2, 1, 1, 61);
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  auto ms = synthesize_measurements(gains, s, ch, 8);
  auto full = estimate_full(ms, compute_paths(s), gains.alpha[2], gains.beta[2],
                            ch.line_gain);
  auto text = full_estimate_to_json(full);
  for (const char* key : {"\"alpha_hat\"", "\"beta_hat\"", "\"1\"", "\"3\"", "\"4\""})
    CHECK(text.find(key) != std::string::npos);
  auto rel = estimate_relative(ms, compute_paths(s), gains.relative(2));
  CHECK(relative_estimate_to_json(rel).find("\"c_hat\"") != std::string::npos);
}
