#include "selfcal/downlink.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "selfcal/rng.hpp"

namespace selfcal {

namespace {

constexpr long kChunkDraws = 64;

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void run_chunks(long chunk_count, int threads, const std::function<void(long)>& fn) {
  const int workers =
      std::min<long>(std::max(resolve_threads(threads), 1), std::max(chunk_count, 1L));
  if (workers <= 1) {
    for (long c = 0; c < chunk_count; ++c) fn(c);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const long c = next.fetch_add(1);
      if (c >= chunk_count) return;
      try {
        fn(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// Per-antenna column scaling turning H_UL^T into the compensated DL estimate.
Eigen::VectorXcd compensation_diagonal(int antenna_count, const DlCompensation& comp) {
  Eigen::VectorXcd d = Eigen::VectorXcd::Ones(antenna_count);
  auto fill = [&](auto&& value_of, const char* what) {
    for (int m = 1; m <= antenna_count; ++m) {
      const cdouble v = value_of(m);
      if (std::abs(v) == 0.0)
        throw SingularityError(std::string("singular compensation: ") + what +
                               " at antenna " + std::to_string(m) + " is zero");
      d(m - 1) = v;
    }
  };
  if (std::holds_alternative<NoCalibration>(comp)) {
    return d;
  }
  if (const auto* perfect = std::get_if<PerfectCalibration>(&comp)) {
    fill([&](int m) { return perfect->gains.beta[m]; }, "true beta");
    Eigen::VectorXcd alpha(antenna_count);
    for (int m = 1; m <= antenna_count; ++m) alpha(m - 1) = perfect->gains.alpha[m];
    return (alpha.array() / d.array()).matrix();
  }
  if (const auto* full = std::get_if<FullCalibrationEstimate>(&comp)) {
    fill([&](int m) { return full->beta_hat[m]; }, "estimated beta");
    Eigen::VectorXcd alpha(antenna_count);
    for (int m = 1; m <= antenna_count; ++m) alpha(m - 1) = full->alpha_hat[m];
    return (alpha.array() / d.array()).matrix();
  }
  const auto& relative = std::get<RelativeCalibrationEstimate>(comp);
  fill([&](int m) { return relative.c_hat[m]; }, "estimated relative coefficient");
  return d.cwiseInverse();
}

struct CellSums {
  long included = 0;
  long excluded = 0;
  std::vector<double> sum_se;     // per scheme
  std::vector<double> sum_se_sq;  // per scheme
};

}  // namespace

Eigen::MatrixXcd SystemChannels::h_dl() const {
  Eigen::MatrixXcd h = h_phy;
  for (int m = 0; m < antenna_count; ++m) h.col(m) *= bs_gains.alpha[m + 1];
  for (int k = 0; k < user_count; ++k) h.row(k) *= r_ms(k);
  return h;
}

Eigen::MatrixXcd SystemChannels::h_ul() const {
  Eigen::MatrixXcd h = h_phy.transpose();
  for (int m = 0; m < antenna_count; ++m) h.row(m) *= bs_gains.beta[m + 1];
  for (int k = 0; k < user_count; ++k) h.col(k) *= t_ms(k);
  return h;
}

SystemChannels draw_system_channels(const RfGainSet& gains, int user_count,
                                    std::uint64_t seed) {
  if (user_count < 1) throw StructuralError("need at least one user");
  SystemChannels sys;
  sys.antenna_count = gains.antenna_count;
  sys.user_count = user_count;
  sys.bs_gains = gains;
  sys.t_ms = Eigen::VectorXcd::Ones(user_count);
  sys.r_ms = Eigen::VectorXcd::Ones(user_count);
  sys.h_phy.resize(user_count, gains.antenna_count);
  Stream stream(seed);
  for (int k = 0; k < user_count; ++k)
    for (int m = 0; m < gains.antenna_count; ++m)
      sys.h_phy(k, m) = stream.complex_gaussian(1.0);
  return sys;
}

Eigen::MatrixXcd estimate_dl_channel(const Eigen::MatrixXcd& h_ul,
                                     const DlCompensation& compensation) {
  const int antenna_count = static_cast<int>(h_ul.rows());
  const Eigen::VectorXcd d = compensation_diagonal(antenna_count, compensation);
  Eigen::MatrixXcd h_hat = h_ul.transpose();
  for (int m = 0; m < antenna_count; ++m) h_hat.col(m) *= d(m);
  return h_hat;
}

const char* scheme_name(PrecodingScheme scheme) {
  return scheme == PrecodingScheme::MF ? "mf" : "zf";
}

PrecodingScheme parse_scheme(const std::string& text) {
  if (text == "mf") return PrecodingScheme::MF;
  if (text == "zf") return PrecodingScheme::ZF;
  throw StructuralError("bad precoding scheme \"" + text + "\": expected mf | zf");
}

Precoder precode(const Eigen::MatrixXcd& h_hat, PrecodingScheme scheme) {
  Precoder out;
  out.scheme = scheme;
  if (scheme == PrecodingScheme::MF) {
    out.w = h_hat.adjoint();
  } else {
    const Eigen::MatrixXcd gram = h_hat * h_hat.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram);
    if (solver.info() != Eigen::Success)
      throw SingularityError("eigendecomposition of the ZF Gram matrix failed");
    const double lmin = solver.eigenvalues().minCoeff();
    const double lmax = solver.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e12)
      throw SingularityError("ZF Gram matrix is rank deficient: channel rows are "
                             "linearly dependent");
    out.w = h_hat.adjoint() *
            (solver.eigenvectors() *
             solver.eigenvalues().cwiseInverse().asDiagonal() *
             solver.eigenvectors().adjoint());
  }
  out.gamma = out.w.squaredNorm();
  return out;
}

PrecodingReport spectral_efficiency(const Eigen::MatrixXcd& h_dl_true,
                                    const Precoder& precoder, double noise_var) {
  if (noise_var < 0.0) throw StructuralError("noise variance must be nonnegative");
  const Eigen::MatrixXcd g = h_dl_true * precoder.w;
  const int users = static_cast<int>(g.rows());

  PrecodingReport report;
  report.scheme = precoder.scheme;
  report.gamma = precoder.gamma;
  report.se_per_user.resize(users);
  for (int k = 0; k < users; ++k) {
    double interference = 0.0;
    for (int j = 0; j < users; ++j)
      if (j != k) interference += std::norm(g(k, j));
    const double denom = interference + precoder.gamma * noise_var;
    const double sinr = denom > 0.0 ? std::norm(g(k, k)) / denom : 0.0;
    report.se_per_user[k] = std::log2(1.0 + sinr);
    report.sum_se += report.se_per_user[k];
  }
  return report;
}

DlResult run_dl_experiment(const DlExperimentConfig& config) {
  if (config.antenna_count < 2) throw StructuralError("need at least 2 antennas");
  if (config.user_count < 1) throw StructuralError("need at least one user");
  if (config.user_count > config.antenna_count)
    throw StructuralError("more users than antennas");
  if (config.draws < 1) throw StructuralError("need at least one channel draw");
  if (config.calibration_snr_db.empty())
    throw StructuralError("need a nonempty calibration SNR grid");
  if (config.schemes.empty()) throw StructuralError("need at least one precoding scheme");
  if (!(config.noise_var > 0.0))
    throw StructuralError("DL noise variance must be positive");

  const int M = config.antenna_count;
  const int f = config.reference;
  const int schemes = static_cast<int>(config.schemes.size());

  // Pseudo-strategy slots: 0 = perfect, 1..S = requested, S+1 = uncalibrated.
  struct Arm {
    std::string label;
    bool calibrated = false;
    InterconnectionStrategy strategy{2, 1};
    CalibrationPathTable paths;
  };
  std::vector<Arm> arms;
  arms.push_back({"perfect", false, build_star(M, f), {}});
  for (const StrategySpec& spec : config.strategies) {
    Arm arm;
    arm.label = spec.label();
    arm.calibrated = true;
    arm.strategy = realize(spec, M, f);
    arm.paths = compute_paths(arm.strategy);
    arms.push_back(std::move(arm));
  }
  arms.push_back({"uncalibrated", false, build_star(M, f), {}});

  DlResult result;
  result.config = config;

  for (std::size_t s = 0; s < arms.size(); ++s) {
    const Arm& arm = arms[s];
    for (std::size_t n = 0; n < config.calibration_snr_db.size(); ++n) {
      const double snr_db = config.calibration_snr_db[n];
      ChannelModel channel;
      channel.line_gain = config.line_gain;
      channel.sigma_h_sq = config.sigma_h_sq;
      channel.sigma_n_sq = snr_to_noise_variance(snr_db, config.a, config.b,
                                                 config.line_gain);

      const long chunk_count = (config.draws + kChunkDraws - 1) / kChunkDraws;
      std::vector<CellSums> chunks(chunk_count);
      run_chunks(chunk_count, config.threads, [&](long c) {
        CellSums& sums = chunks[c];
        sums.sum_se.assign(schemes, 0.0);
        sums.sum_se_sq.assign(schemes, 0.0);
        const long t_end = std::min<long>((c + 1) * kChunkDraws, config.draws);
        for (long t = c * kChunkDraws; t < t_end; ++t) {
          const std::uint64_t draw = static_cast<std::uint64_t>(t);
          const RfGainSet gains = generate_gains(M, f, config.a, config.b,
                                                 derive(config.base_seed, {0xA, draw}));
          const SystemChannels sys =
              draw_system_channels(gains, config.user_count,
                                   derive(config.base_seed, {0xB, draw}));
          try {
            DlCompensation comp = NoCalibration{};
            if (arm.label == "perfect") {
              comp = PerfectCalibration{gains};
            } else if (arm.calibrated) {
              const MeasurementSet meas = synthesize_measurements(
                  gains, arm.strategy, channel,
                  derive(config.base_seed, {0xC, s, n, draw}));
              if (config.mode == CalibrationMode::Full) {
                comp = estimate_full(meas, arm.paths, gains.alpha[f], gains.beta[f],
                                     channel.line_gain);
              } else {
                comp = estimate_relative(meas, arm.paths, gains.relative(f));
              }
            }
            const Eigen::MatrixXcd h_hat = estimate_dl_channel(sys.h_ul(), comp);
            const Eigen::MatrixXcd h_true = sys.h_dl();
            for (int sc = 0; sc < schemes; ++sc) {
              const Precoder w = precode(h_hat, config.schemes[sc]);
              const PrecodingReport report =
                  spectral_efficiency(h_true, w, config.noise_var);
              sums.sum_se[sc] += report.sum_se;
              sums.sum_se_sq[sc] += report.sum_se * report.sum_se;
            }
            ++sums.included;
          } catch (const SingularityError&) {
            ++sums.excluded;
          }
        }
      });

      for (int sc = 0; sc < schemes; ++sc) {
        DlCell cell;
        cell.strategy = arm.label;
        cell.scheme = scheme_name(config.schemes[sc]);
        cell.calibration_snr_db = snr_db;
        double sum = 0.0, sum_sq = 0.0;
        for (const CellSums& sums : chunks) {
          cell.draws += sums.included;
          sum += sums.sum_se[sc];
          sum_sq += sums.sum_se_sq[sc];
        }
        for (const CellSums& sums : chunks) cell.exclusions += sums.excluded;
        if (cell.draws > 0) {
          cell.avg_sum_se = sum / cell.draws;
          if (cell.draws > 1) {
            const double var =
                (sum_sq - cell.draws * cell.avg_sum_se * cell.avg_sum_se) /
                (cell.draws - 1);
            cell.stderr_se = std::sqrt(std::max(var, 0.0) / cell.draws);
          }
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

std::string dl_to_csv(const DlResult& result) {
  std::string out = "strategy,scheme,calibration_snr_db,avg_sum_se,stderr,draws\n";
  for (const DlCell& cell : result.cells) {
    out += cell.strategy + ',' + cell.scheme + ',' + fmt_double(cell.calibration_snr_db) +
           ',' + fmt_double(cell.avg_sum_se) + ',' + fmt_double(cell.stderr_se) + ',' +
           std::to_string(cell.draws) + '\n';
  }
  return out;
}

std::string dl_to_json(const DlResult& result) {
  nlohmann::json j;
  j["antenna_count"] = result.config.antenna_count;
  j["reference"] = result.config.reference;
  j["user_count"] = result.config.user_count;
  j["mode"] = mode_name(result.config.mode);
  j["sigma_h_sq"] = result.config.sigma_h_sq;
  j["noise_var"] = result.config.noise_var;
  j["draws_requested"] = result.config.draws;
  j["base_seed"] = result.config.base_seed;
  nlohmann::json cells = nlohmann::json::array();
  for (const DlCell& cell : result.cells) {
    cells.push_back({{"strategy", cell.strategy},
                     {"scheme", cell.scheme},
                     {"calibration_snr_db", cell.calibration_snr_db},
                     {"avg_sum_se", cell.avg_sum_se},
                     {"stderr", cell.stderr_se},
                     {"draws", cell.draws},
                     {"exclusions", cell.exclusions}});
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

}  // namespace selfcal
