#include "selfcal/fisher.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "json.hpp"

namespace selfcal {

namespace {

// Shortest-path intermediate counts to the reference over any connected
// strategy (coincides with the tree path table when the strategy is a tree).
std::vector<int> bfs_intermediate_counts(const InterconnectionStrategy& strategy) {
  const int M = strategy.antenna_count();
  std::vector<int> hops(M + 1, -1);
  std::deque<int> queue{strategy.reference()};
  hops[strategy.reference()] = 0;
  while (!queue.empty()) {
    const int m = queue.front();
    queue.pop_front();
    for (int q : strategy.neighbors(m)) {
      if (hops[q] >= 0) continue;
      hops[q] = hops[m] + 1;
      queue.push_back(q);
    }
  }
  std::vector<int> d(M + 1, 0);
  for (int m = 1; m <= M; ++m)
    if (m != strategy.reference()) d[m] = hops[m] - 1;
  return d;
}

void require_equal_amplitudes(const RfGainSet& gains, const char* what) {
  const double a = std::abs(gains.alpha[gains.reference]);
  const double b = std::abs(gains.beta[gains.reference]);
  for (int m = 1; m <= gains.antenna_count; ++m) {
    if (std::abs(std::abs(gains.alpha[m]) - a) > 1e-9 * a ||
        std::abs(std::abs(gains.beta[m]) - b) > 1e-9 * b) {
      throw StructuralError(std::string(what) +
                            " requires equal gain amplitudes across antennas");
    }
  }
}

}  // namespace

ParameterIndexMap::ParameterIndexMap(int antenna_count, int reference)
    : antenna_count_(antenna_count), reference_(reference) {
  if (antenna_count < 2 || reference < 1 || reference > antenna_count)
    throw StructuralError("invalid antenna count or reference for parameter map");
  alpha_row_.assign(antenna_count + 1, -1);
  antenna_.assign(antenna_count - 1, 0);
  int row = 0;
  for (int m = 1; m <= antenna_count; ++m) {
    if (m == reference) continue;
    alpha_row_[m] = row;
    antenna_[row] = m;
    ++row;
  }
}

int ParameterIndexMap::alpha_row(int m) const {
  if (m < 1 || m > antenna_count_ || m == reference_)
    throw StructuralError("no parameter row for antenna " + std::to_string(m));
  return alpha_row_[m];
}

int ParameterIndexMap::beta_row(int m) const {
  return antenna_count_ - 1 + alpha_row(m);
}

int ParameterIndexMap::antenna_of(int row) const {
  if (row < 0 || row >= size())
    throw StructuralError("parameter row " + std::to_string(row) + " out of range");
  return antenna_[row % (antenna_count_ - 1)];
}

FisherMatrix build_fim(const RfGainSet& gains, const InterconnectionStrategy& strategy,
                       const ChannelModel& channel) {
  if (gains.antenna_count != strategy.antenna_count())
    throw StructuralError("gain set and strategy antenna counts differ");
  if (!(channel.sigma_n_sq > 0.0))
    throw StructuralError("Fisher information needs positive noise variance");
  if (std::abs(channel.line_gain) == 0.0)
    throw StructuralError("Fisher information needs a nonzero line gain");
  if (!validate_effective(strategy))
    throw StructuralError(
        "strategy is not effective: some antenna cannot reach the reference");

  const int M = strategy.antenna_count();
  ParameterIndexMap map(M, strategy.reference());
  const double scale = std::norm(channel.line_gain) / channel.sigma_n_sq;

  Eigen::MatrixXcd J = Eigen::MatrixXcd::Zero(map.size(), map.size());
  for (int m = 1; m <= M; ++m) {
    if (m == strategy.reference()) continue;
    double beta_power = 0.0, alpha_power = 0.0;
    for (int i : strategy.neighbors(m)) {
      beta_power += std::norm(gains.beta[i]);
      alpha_power += std::norm(gains.alpha[i]);
    }
    J(map.alpha_row(m), map.alpha_row(m)) = scale * beta_power;
    J(map.beta_row(m), map.beta_row(m)) = scale * alpha_power;
  }
  for (int m = 1; m <= M; ++m) {
    if (m == strategy.reference()) continue;
    for (int j = 1; j <= M; ++j) {
      if (j == strategy.reference() || !strategy.connected(m, j)) continue;
      const cdouble dmj = scale * gains.beta[m] * std::conj(gains.alpha[j]);
      J(map.beta_row(m), map.alpha_row(j)) = dmj;
      J(map.alpha_row(j), map.beta_row(m)) = std::conj(dmj);
    }
  }
  return {std::move(J), scale, map, strategy};
}

CrlbMatrix invert_fim(const FisherMatrix& fim) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(fim.matrix);
  if (solver.info() != Eigen::Success)
    throw SingularityError("eigendecomposition of the Fisher matrix failed");
  const Eigen::VectorXd ev = solver.eigenvalues();
  const double lmin = ev.minCoeff();
  const double lmax = ev.maxCoeff();
  const double cond = (lmin > 0.0) ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 0.0) || cond > 1e12) {
    throw SingularityError(
        "Fisher matrix is singular or near-singular (condition number " +
        fmt_double(cond) +
        "): the strategy leaves some antenna effectively unobserved");
  }
  CrlbMatrix out;
  out.matrix = solver.eigenvectors() * ev.cwiseInverse().asDiagonal() *
               solver.eigenvectors().adjoint();
  out.condition_number = cond;
  out.map = fim.map;
  return out;
}

CrlbReport crlb_numerical(const FisherMatrix& fim, const RfGainSet& gains) {
  const CrlbMatrix crlb = invert_fim(fim);
  const int M = fim.map.antenna_count();
  const int f = fim.map.reference();

  CrlbReport report;
  report.antenna_count = M;
  report.reference = f;
  report.d = bfs_intermediate_counts(fim.strategy);
  report.crlb_alpha.assign(M + 1, 0.0);
  report.crlb_beta.assign(M + 1, 0.0);
  report.crlb_relative = apply_jacobian(crlb, gains);
  report.condition_number = crlb.condition_number;
  for (int m = 1; m <= M; ++m) {
    if (m == f) continue;
    report.crlb_alpha[m] = crlb.matrix(fim.map.alpha_row(m), fim.map.alpha_row(m)).real();
    report.crlb_beta[m] = crlb.matrix(fim.map.beta_row(m), fim.map.beta_row(m)).real();
    report.trace_objective += report.crlb_alpha[m] + report.crlb_beta[m];
  }
  return report;
}

CrlbReport crlb_closed_form(const CalibrationPathTable& paths, double a, double b,
                            const ChannelModel& channel) {
  if (!(a > 0.0) || !(b > 0.0))
    throw StructuralError("closed-form CRLB needs positive gain amplitudes");
  if (!(channel.sigma_n_sq > 0.0) || std::abs(channel.line_gain) == 0.0)
    throw StructuralError(
        "closed-form CRLB needs positive noise variance and nonzero line gain");

  const int M = paths.antenna_count();
  const int f = paths.reference();
  const double h2 = std::norm(channel.line_gain);

  CrlbReport report;
  report.antenna_count = M;
  report.reference = f;
  report.d.assign(M + 1, 0);
  report.crlb_alpha.assign(M + 1, 0.0);
  report.crlb_beta.assign(M + 1, 0.0);
  report.crlb_relative.assign(M + 1, 0.0);
  for (int m = 1; m <= M; ++m) {
    if (m == f) continue;
    const int weight = paths.depth(m) + 1;
    report.d[m] = paths.depth(m);
    report.crlb_alpha[m] = weight * channel.sigma_n_sq / (b * b * h2);
    report.crlb_beta[m] = weight * channel.sigma_n_sq / (a * a * h2);
    report.crlb_relative[m] = 2.0 * weight * channel.sigma_n_sq / (a * a * a * a * h2);
    report.trace_objective += report.crlb_alpha[m] + report.crlb_beta[m];
  }
  return report;
}

CrlbReport crlb_closed_form(const CalibrationPathTable& paths, const RfGainSet& gains,
                            const ChannelModel& channel) {
  if (gains.antenna_count != paths.antenna_count())
    throw StructuralError("gain set and path table antenna counts differ");
  require_equal_amplitudes(gains, "closed-form CRLB");
  return crlb_closed_form(paths, std::abs(gains.alpha[gains.reference]),
                          std::abs(gains.beta[gains.reference]), channel);
}

std::vector<double> apply_jacobian(const CrlbMatrix& crlb, const RfGainSet& gains) {
  const int M = crlb.map.antenna_count();
  const int f = crlb.map.reference();
  if (gains.antenna_count != M)
    throw StructuralError("gain set and CRLB matrix antenna counts differ");

  std::vector<double> out(M + 1, 0.0);
  for (int m = 1; m <= M; ++m) {
    if (m == f) continue;
    const cdouble alpha = gains.alpha[m];
    if (std::abs(alpha) == 0.0)
      throw SingularityError("relative coefficient undefined: alpha_" +
                             std::to_string(m) + " is zero");
    const cdouble j_alpha = -gains.beta[m] / (alpha * alpha);
    const cdouble j_beta = cdouble{1.0, 0.0} / alpha;
    const int r = crlb.map.alpha_row(m);
    const int s = crlb.map.beta_row(m);
    const double value =
        std::norm(j_alpha) * crlb.matrix(r, r).real() +
        std::norm(j_beta) * crlb.matrix(s, s).real() +
        2.0 * (j_alpha * crlb.matrix(r, s) * std::conj(j_beta)).real();
    out[m] = value;
  }
  return out;
}

FisherMatrix elementary_update(const FisherMatrix& fim, int n, int u,
                               const RfGainSet& gains) {
  const InterconnectionStrategy& strategy = fim.strategy;
  const int f = strategy.reference();
  if (gains.antenna_count != strategy.antenna_count())
    throw StructuralError("gain set and strategy antenna counts differ");
  if (n == f || u == f)
    throw StructuralError("elementary update rewires ordinary antennas only");
  if (!strategy.connected(n, u))
    throw StructuralError("antennas " + std::to_string(n) + " and " +
                          std::to_string(u) + " are not interconnected");
  if (strategy.degree(n) != 1)
    throw StructuralError("antenna " + std::to_string(n) +
                          " is not a leaf: cannot rewire");
  require_equal_amplitudes(gains, "elementary update");

  const int an = fim.map.alpha_row(n), bn = fim.map.beta_row(n);
  const int au = fim.map.alpha_row(u), bu = fim.map.beta_row(u);
  const cdouble la = -std::conj(gains.beta[n]) * gains.alpha[u] / std::norm(gains.alpha[u]);
  const cdouble lb = -gains.beta[u] * std::conj(gains.alpha[n]) / std::norm(gains.beta[u]);

  FisherMatrix out = fim;
  out.matrix.row(au) += la * out.matrix.row(bn);
  out.matrix.row(bu) += lb * out.matrix.row(an);
  out.matrix.col(au) += std::conj(la) * out.matrix.col(bn);
  out.matrix.col(bu) += std::conj(lb) * out.matrix.col(an);
  out.strategy.clear_edge(n, u);
  out.strategy.set_edge(n, f);
  return out;
}

std::vector<std::pair<int, int>> star_rewiring_sequence(
    const InterconnectionStrategy& strategy) {
  const CalibrationPathTable paths = compute_paths(strategy);
  std::vector<int> pending;
  for (int m = 1; m <= strategy.antenna_count(); ++m) {
    if (m == strategy.reference()) continue;
    if (paths.depth(m) >= 1) pending.push_back(m);
  }
  std::sort(pending.begin(), pending.end(), [&](int lhs, int rhs) {
    if (paths.depth(lhs) != paths.depth(rhs)) return paths.depth(lhs) > paths.depth(rhs);
    return lhs < rhs;
  });
  std::vector<std::pair<int, int>> steps;
  steps.reserve(pending.size());
  for (int m : pending) steps.emplace_back(m, paths.parent(m));
  return steps;
}

std::string crlb_report_to_csv(const CrlbReport& report) {
  std::string out = "antenna,d_m,crlb_alpha,crlb_beta,crlb_relative\n";
  for (int m = 1; m <= report.antenna_count; ++m) {
    if (m == report.reference) continue;
    out += std::to_string(m) + ',' + std::to_string(report.d[m]) + ',' +
           fmt_double(report.crlb_alpha[m]) + ',' + fmt_double(report.crlb_beta[m]) +
           ',' + fmt_double(report.crlb_relative[m]) + '\n';
  }
  return out;
}

std::string crlb_report_to_json(const CrlbReport& report) {
  nlohmann::json j;
  j["antenna_count"] = report.antenna_count;
  j["reference"] = report.reference;
  j["trace_objective"] = report.trace_objective;
  j["condition_number"] = report.condition_number;
  nlohmann::json entries = nlohmann::json::array();
  for (int m = 1; m <= report.antenna_count; ++m) {
    if (m == report.reference) continue;
    entries.push_back({{"antenna", m},
                       {"d", report.d[m]},
                       {"crlb_alpha", report.crlb_alpha[m]},
                       {"crlb_beta", report.crlb_beta[m]},
                       {"crlb_relative", report.crlb_relative[m]}});
  }
  j["entries"] = std::move(entries);
  return j.dump(2) + "\n";
}

}  // namespace selfcal
