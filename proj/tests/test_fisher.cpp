#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "selfcal/fisher.hpp"
#include "selfcal/rng.hpp"

using namespace selfcal;

namespace {

InterconnectionStrategy random_tree(int m, int f, Stream& stream) {
  std::uint64_t total = 1;
  for (int i = 0; i < m - 2; ++i) total *= static_cast<std::uint64_t>(m);
  return SpanningTreeEnumerator::from_index(m, f, stream.bits() % total);
}

// The information matrix written out directly from its definition, term by
// term, with no shared code with the library implementation.
Eigen::MatrixXcd fim_oracle(const RfGainSet& gains, const InterconnectionStrategy& s,
                            const ChannelModel& ch) {
  const int m = s.antenna_count();
  const int f = s.reference();
  ParameterIndexMap map(m, f);
  const double scale = std::norm(ch.line_gain) / ch.sigma_n_sq;
  Eigen::MatrixXcd j = Eigen::MatrixXcd::Zero(map.size(), map.size());
  for (int v = 1; v <= m; ++v) {
    if (v == f) continue;
    double asum = 0.0, bsum = 0.0;
    for (int w : s.neighbors(v)) {
      asum += std::norm(gains.beta[w]);
      bsum += std::norm(gains.alpha[w]);
    }
    j(map.alpha_row(v), map.alpha_row(v)) = scale * asum;
    j(map.beta_row(v), map.beta_row(v)) = scale * bsum;
  }
  for (int v = 1; v <= m; ++v) {
    if (v == f) continue;
    for (int w : s.neighbors(v)) {
      if (w == f) continue;
      j(map.beta_row(v), map.alpha_row(w)) =
          scale * gains.beta[v] * std::conj(gains.alpha[w]);
      j(map.alpha_row(w), map.beta_row(v)) =
          scale * std::conj(gains.beta[v]) * gains.alpha[w];
    }
  }
  return j;
}

double max_abs_diff(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
  return (x - y).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("parameter index map") {
  ParameterIndexMap map(5, 3);
  CHECK(map.size() == 8);
  CHECK(map.alpha_row(1) == 0);
  CHECK(map.alpha_row(2) == 1);
  CHECK(map.alpha_row(4) == 2);
  CHECK(map.alpha_row(5) == 3);
  CHECK(map.beta_row(1) == 4);
  CHECK(map.beta_row(5) == 7);
  for (int row = 0; row < 8; ++row) {
    const int antenna = map.antenna_of(row);
    CHECK((row < 4 ? map.alpha_row(antenna) : map.beta_row(antenna)) == row);
    CHECK(map.is_beta_row(row) == (row >= 4));
  }
  CHECK_THROWS_AS(map.alpha_row(3), StructuralError);
  CHECK_THROWS_AS(map.beta_row(3), StructuralError);
  CHECK_THROWS_AS(map.alpha_row(6), StructuralError);
  CHECK_THROWS_AS(map.antenna_of(8), StructuralError);
}

TEST_CASE("two-antenna information matrix by hand") {
  RfGainSet gains = generate_gains(2, 1, 1.5, 0.5, 1);
  InterconnectionStrategy s(2, 1);
  s.set_edge(1, 2);
  ChannelModel ch{{2, 0}, 0.0, 0.5};
  auto fim = build_fim(gains, s, ch);
  const double scale = 4.0 / 0.5;
  CHECK(fim.scale == doctest::Approx(scale));
  REQUIRE(fim.matrix.rows() == 2);
  // Only the reference is wired to antenna 2, so the cross block is empty.
  CHECK(fim.matrix(0, 0).real() == doctest::Approx(scale * 0.25));  // |beta_1|^2
  CHECK(fim.matrix(0, 0).imag() == 0.0);
  CHECK(fim.matrix(1, 1).real() == doctest::Approx(scale * 2.25));  // |alpha_1|^2
  CHECK(fim.matrix(1, 1).imag() == 0.0);
  CHECK(fim.matrix(0, 1) == cdouble(0, 0));
  CHECK(fim.matrix(1, 0) == cdouble(0, 0));
}

TEST_CASE("information matrix matches its definition on random trees") {
  Stream stream(0xF1);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 3 + static_cast<int>(stream.bits() % 6);
    const int f = 1 + static_cast<int>(stream.bits() % m);
    auto s = random_tree(m, f, stream);
    auto gains = generate_gains(m, f, 1.3, 0.7, stream.bits());
    ChannelModel ch{{0.8, 0.3}, 0.0, 0.04};
    auto fim = build_fim(gains, s, ch);
    CHECK(max_abs_diff(fim.matrix, fim_oracle(gains, s, ch)) < 1e-12);
    CHECK(max_abs_diff(fim.matrix, fim.matrix.adjoint()) == 0.0);
    CHECK((fim.strategy == s));
  }
}

TEST_CASE("information matrix also covers non-tree strategies") {
  auto s = build_star(5, 2);
  s.set_edge(1, 4);  // extra loop-forming line
  s.set_edge(3, 5);
  auto gains = generate_gains(5, 2, 1, 1, 5);
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  auto fim = build_fim(gains, s, ch);
  CHECK(max_abs_diff(fim.matrix, fim_oracle(gains, s, ch)) < 1e-12);
  auto crlb = invert_fim(fim);
  CHECK(max_abs_diff(fim.matrix * crlb.matrix,
                     Eigen::MatrixXcd::Identity(8, 8)) < 1e-12);
}

TEST_CASE("build_fim validates inputs") {
  auto gains = generate_gains(4, 1, 1, 1, 2);
  auto star = build_star(4, 1);
  CHECK_THROWS_AS(build_fim(gains, star, ChannelModel{{1, 0}, 0.0, 0.0}),
                  StructuralError);
  CHECK_THROWS_AS(build_fim(gains, star, ChannelModel{{0, 0}, 0.0, 0.01}),
                  StructuralError);
  InterconnectionStrategy ineffective(4, 1);
  ineffective.set_edge(1, 2);
  CHECK_THROWS_AS(build_fim(gains, ineffective, ChannelModel{{1, 0}, 0.0, 0.01}),
                  StructuralError);
}

TEST_CASE("inversion produces the inverse and flags singular systems") {
  Stream stream(0xF2);
  auto s = random_tree(7, 3, stream);
  auto gains = generate_gains(7, 3, 1, 1, 17);
  auto fim = build_fim(gains, s, ChannelModel{{1, 0}, 0.0, 0.01});
  auto crlb = invert_fim(fim);
  CHECK(max_abs_diff(fim.matrix * crlb.matrix,
                     Eigen::MatrixXcd::Identity(12, 12)) < 1e-10);
  CHECK(crlb.condition_number >= 1.0);

  // A vanishing reference receive gain starves antenna 2's alpha information.
  RfGainSet degenerate = generate_gains(2, 1, 1, 1, 3);
  degenerate.beta[1] = {1e-20, 0};
  InterconnectionStrategy pair(2, 1);
  pair.set_edge(1, 2);
  auto bad = build_fim(degenerate, pair, ChannelModel{{1, 0}, 0.0, 0.01});
  CHECK_THROWS_AS(invert_fim(bad), SingularityError);
}

TEST_CASE("closed-form bounds: direct values") {
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  SUBCASE("star: d = 0 everywhere") {
    auto rep = crlb_closed_form(compute_paths(build_star(6, 2)), 1.0, 1.0, ch);
    for (int m = 1; m <= 6; ++m) {
      if (m == 2) continue;
      CHECK(rep.d[m] == 0);
      CHECK(rep.crlb_alpha[m] == doctest::Approx(0.01));
      CHECK(rep.crlb_beta[m] == doctest::Approx(0.01));
      CHECK(rep.crlb_relative[m] == doctest::Approx(0.02));
    }
    CHECK(rep.trace_objective == doctest::Approx(0.1));  // 2 * 5 * 0.01
    CHECK(rep.condition_number == 0.0);
  }
  SUBCASE("daisy chain M=5 f=3") {
    auto rep = crlb_closed_form(compute_paths(build_daisy_chain(5, 3)), 1.0, 1.0, ch);
    CHECK(rep.crlb_alpha[1] == doctest::Approx(0.02));
    CHECK(rep.crlb_alpha[2] == doctest::Approx(0.01));
    CHECK(rep.crlb_alpha[4] == doctest::Approx(0.01));
    CHECK(rep.crlb_alpha[5] == doctest::Approx(0.02));
    CHECK(rep.crlb_relative[5] == doctest::Approx(0.04));
    CHECK(rep.trace_objective == doctest::Approx(0.12));
  }
  SUBCASE("amplitudes and line gain scale the bounds") {
    ChannelModel ch2{{2, 0}, 0.0, 0.01};
    auto rep = crlb_closed_form(compute_paths(build_star(4, 1)), 2.0, 0.5, ch2);
    // (d+1) sigma^2 / (b^2 |h|^2) and (d+1) sigma^2 / (a^2 |h|^2)
    CHECK(rep.crlb_alpha[2] == doctest::Approx(0.01 / (0.25 * 4.0)));
    CHECK(rep.crlb_beta[2] == doctest::Approx(0.01 / (4.0 * 4.0)));
    // 2 (d+1) sigma^2 / (a^4 |h|^2)
    CHECK(rep.crlb_relative[2] == doctest::Approx(2.0 * 0.01 / (16.0 * 4.0)));
  }
  SUBCASE("combined M=128 f=65 z=5 edge antenna") {
    auto rep = crlb_closed_form(compute_paths(build_combined(128, 65, 5)), 1.0, 1.0, ch);
    CHECK(rep.d[1] == 5);
    CHECK(rep.crlb_alpha[1] == doctest::Approx(0.06));
  }
}

TEST_CASE("closed form matches numerical inversion on random trees") {
  Stream stream(0xF3);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 3 + static_cast<int>(stream.bits() % 6);
    const int f = 1 + static_cast<int>(stream.bits() % m);
    auto s = random_tree(m, f, stream);
    auto gains = generate_gains(m, f, 1.1, 0.6, stream.bits());
    ChannelModel ch{{0.7, -0.5}, 0.0, 0.02};
    auto numerical = crlb_numerical(build_fim(gains, s, ch), gains);
    auto closed = crlb_closed_form(compute_paths(s), gains, ch);
    for (int v = 1; v <= m; ++v) {
      if (v == f) continue;
      CHECK(numerical.d[v] == closed.d[v]);
      CHECK(numerical.crlb_alpha[v] ==
            doctest::Approx(closed.crlb_alpha[v]).epsilon(1e-9));
      CHECK(numerical.crlb_beta[v] ==
            doctest::Approx(closed.crlb_beta[v]).epsilon(1e-9));
      CHECK(numerical.crlb_relative[v] ==
            doctest::Approx(closed.crlb_relative[v]).epsilon(1e-9));
    }
    CHECK(numerical.trace_objective ==
          doctest::Approx(closed.trace_objective).epsilon(1e-9));
  }
}

TEST_CASE("closed form requires equal amplitudes") {
  auto gains = generate_gains(4, 1, 1, 1, 8);
  gains.alpha[2] *= 1.5;
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  CHECK_THROWS_AS(crlb_closed_form(compute_paths(build_star(4, 1)), gains, ch),
                  StructuralError);
}

TEST_CASE("jacobian transform of the bound") {
  Stream stream(0xF4);
  auto s = random_tree(6, 2, stream);
  auto gains = generate_gains(6, 2, 1, 1, 23);
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  auto fim = build_fim(gains, s, ch);
  auto rel = apply_jacobian(invert_fim(fim), gains);
  auto rep = crlb_numerical(fim, gains);
  for (int v = 1; v <= 6; ++v) {
    if (v == 2) continue;
    CHECK(rel[v] == doctest::Approx(rep.crlb_relative[v]).epsilon(1e-12));
    CHECK(rel[v] > 0.0);
  }
  CHECK(rel[2] == 0.0);

  gains.alpha[4] = {0, 0};
  CHECK_THROWS_AS(apply_jacobian(invert_fim(fim), gains), SingularityError);
}

TEST_CASE("elementary rewiring update") {
  ChannelModel ch{{1, 0}, 0.0, 1.0};
  SUBCASE("single step on the 4-antenna chain reaches the star") {
    auto chain = build_daisy_chain(4, 2);  // 1-2, 2-3, 3-4
    auto gains = generate_gains(4, 2, 1.2, 0.9, 31);
    auto fim = build_fim(gains, chain, ch);
    auto seq = star_rewiring_sequence(chain);
    REQUIRE(seq == std::vector<std::pair<int, int>>{{4, 3}});
    auto updated = elementary_update(fim, 4, 3, gains);
    CHECK((updated.strategy == build_star(4, 2)));
    auto direct = build_fim(gains, build_star(4, 2), ch);
    CHECK(max_abs_diff(updated.matrix, direct.matrix) < 1e-12);
  }
  SUBCASE("each step changes exactly six entries") {
    auto chain = build_daisy_chain(5, 1);  // rewire leaf 5 off antenna 4
    auto gains = generate_gains(5, 1, 1, 1, 37);
    auto fim = build_fim(gains, chain, ch);
    auto updated = elementary_update(fim, 5, 4, gains);
    const auto& map = fim.map;
    std::set<std::pair<int, int>> changed;
    for (int r = 0; r < map.size(); ++r)
      for (int c = 0; c < map.size(); ++c)
        if (std::abs(updated.matrix(r, c) - fim.matrix(r, c)) > 1e-13)
          changed.insert({r, c});
    // The parent's two diagonals lose the leaf's power terms; the four cross
    // entries of the dropped line vanish. The leaf's own diagonals stay put.
    const int a5 = map.alpha_row(5), b5 = map.beta_row(5);
    const int a4 = map.alpha_row(4), b4 = map.beta_row(4);
    std::set<std::pair<int, int>> expected{{a4, a4}, {b4, b4}, {b5, a4},
                                           {a4, b5}, {b4, a5}, {a5, b4}};
    CHECK(changed == expected);
  }
  SUBCASE("full sequences over every 4-antenna tree") {
    SpanningTreeEnumerator en(4, 3);
    auto gains = generate_gains(4, 3, 1, 1, 41);
    while (auto tree = en.next()) {
      auto fim = build_fim(gains, *tree, ch);
      for (auto [n, u] : star_rewiring_sequence(*tree)) {
        fim = elementary_update(fim, n, u, gains);
        auto direct = build_fim(gains, fim.strategy, ch);
        CHECK(max_abs_diff(fim.matrix, direct.matrix) < 1e-12);
      }
      CHECK((fim.strategy == build_star(4, 3)));
    }
  }
  SUBCASE("preconditions") {
    auto chain = build_daisy_chain(5, 3);
    auto gains = generate_gains(5, 3, 1, 1, 43);
    auto fim = build_fim(gains, chain, ch);
    CHECK_THROWS_AS(elementary_update(fim, 4, 3, gains), StructuralError);  // u = f
    CHECK_THROWS_AS(elementary_update(fim, 3, 4, gains), StructuralError);  // n = f
    CHECK_THROWS_AS(elementary_update(fim, 5, 2, gains), StructuralError);  // not wired
    CHECK_THROWS_AS(elementary_update(fim, 4, 5, gains), StructuralError);  // 4 not a leaf
    RfGainSet uneven = gains;
    uneven.beta[2] *= 2.0;
    CHECK_THROWS_AS(elementary_update(fim, 5, 4, uneven), StructuralError);
  }
}

TEST_CASE("star rewiring sequence ordering") {
  CHECK(star_rewiring_sequence(build_daisy_chain(3, 2)).empty());
  CHECK(star_rewiring_sequence(build_star(8, 5)).empty());
  auto seq = star_rewiring_sequence(build_daisy_chain(5, 3));
  CHECK(seq == std::vector<std::pair<int, int>>{{1, 2}, {5, 4}});
  // Deep chain: deepest first, and every step's leaf requirement holds.
  auto chain = build_daisy_chain(6, 1);
  auto seq2 = star_rewiring_sequence(chain);
  CHECK(seq2 == std::vector<std::pair<int, int>>{{6, 5}, {5, 4}, {4, 3}, {3, 2}});
}

TEST_CASE("inverse diagonals across a rewiring step") {
  // Removing one intermediate hop lowers the rewired antenna's own bound by
  // exactly the donor antenna's bound, scaled by the amplitude ratio.
  Stream stream(0xF5);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 4 + static_cast<int>(stream.bits() % 4);
    const int f = 1 + static_cast<int>(stream.bits() % m);
    auto tree = random_tree(m, f, stream);
    const double a = 1.3, b = 0.8;
    auto gains = generate_gains(m, f, a, b, stream.bits());
    ChannelModel ch{{1, 0}, 0.0, 1.0};
    auto fim = build_fim(gains, tree, ch);
    for (auto [n, u] : star_rewiring_sequence(tree)) {
      auto before = invert_fim(fim).matrix;
      fim = elementary_update(fim, n, u, gains);
      auto after = invert_fim(fim).matrix;
      const auto& map = fim.map;
      const int an = map.alpha_row(n), bn = map.beta_row(n);
      const int au = map.alpha_row(u), bu = map.beta_row(u);
      CHECK(std::abs(before(an, an) -
                     (after(an, an) + (a * a) / (b * b) * after(bu, bu))) < 1e-10);
      CHECK(std::abs(before(bn, bn) -
                     (after(bn, bn) + (b * b) / (a * a) * after(au, au))) < 1e-10);
      for (int r = 0; r < map.size(); ++r)
        if (r != an && r != bn)
          CHECK(std::abs(before(r, r) - after(r, r)) < 1e-10);
    }
  }
}

TEST_CASE("trace objective is monotone in the total path weight") {
  SpanningTreeEnumerator en(5, 2);
  auto gains = generate_gains(5, 2, 1, 1, 53);
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  std::map<long, std::set<double>> traces_by_weight;
  while (auto tree = en.next()) {
    auto rep = crlb_numerical(build_fim(gains, *tree, ch), gains);
    const long w = compute_paths(*tree).total_path_weight();
    // Round to clear numerical fuzz; equal weights must give equal traces.
    traces_by_weight[w].insert(std::round(rep.trace_objective * 1e9) / 1e9);
  }
  double previous = -1.0;
  for (const auto& [w, traces] : traces_by_weight) {
    CHECK(traces.size() == 1);
    CHECK(*traces.begin() > previous);
    previous = *traces.begin();
  }
  // And the trace is exactly 2 sigma^2 W / (a^2 b^2 |h|^2) at a = b = 1.
  for (const auto& [w, traces] : traces_by_weight)
    CHECK(*traces.begin() == doctest::Approx(2.0 * 0.01 * w).epsilon(1e-9));
}

TEST_CASE("report serialization") {
  ChannelModel ch{{1, 0}, 0.0, 0.01};
  auto rep = crlb_closed_form(compute_paths(build_daisy_chain(5, 3)), 1.0, 1.0, ch);
  auto csv = crlb_report_to_csv(rep);
  CHECK(csv.rfind("antenna,d_m,crlb_alpha,crlb_beta,crlb_relative\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);  // header + 4 antennas
  CHECK(csv.find("1,1,0.02,0.02,0.04") != std::string::npos);
  CHECK(csv.find("2,0,0.01,0.01,0.02") != std::string::npos);
  auto json = crlb_report_to_json(rep);
  CHECK(json.find("\"trace_objective\"") != std::string::npos);
}
