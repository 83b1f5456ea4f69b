#include "selfcal/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "selfcal/estimators.hpp"
#include "selfcal/fisher.hpp"
#include "selfcal/rng.hpp"

namespace selfcal {

namespace {

constexpr long kChunkTrials = 512;

struct ChunkSums {
  long included = 0;
  long excluded = 0;
  double sum_stat = 0.0;     // per-trial coefficient-averaged squared error
  double sum_stat_sq = 0.0;  // its square, for the standard error
  std::vector<double> per_antenna;
};

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(chunk_index) for every chunk on up to `threads` workers. Each chunk
// writes only its own slot, so the later in-order merge is deterministic.
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

void validate(const SweepConfig& config) {
  if (config.antenna_count < 2) throw StructuralError("sweep needs at least 2 antennas");
  if (config.strategies.empty()) throw StructuralError("sweep needs at least one strategy");
  if (config.snr_grid_db.empty()) throw StructuralError("sweep needs a nonempty SNR grid");
  if (config.trials < 1) throw StructuralError("sweep needs at least one trial");
  if (!(config.a > 0.0) || !(config.b > 0.0))
    throw StructuralError("gain amplitudes must be positive");
  if (config.sigma_h_sq < 0.0)
    throw StructuralError("distortion variance must be nonnegative");
}

}  // namespace

const char* mode_name(CalibrationMode mode) {
  return mode == CalibrationMode::Full ? "full" : "relative";
}

CalibrationMode parse_mode(const std::string& text) {
  if (text == "full") return CalibrationMode::Full;
  if (text == "relative") return CalibrationMode::Relative;
  throw StructuralError("bad calibration mode \"" + text + "\": expected full | relative");
}

SweepResult run_sweep(const SweepConfig& config) {
  validate(config);
  const int M = config.antenna_count;
  const int f = config.reference;
  const bool full = config.mode == CalibrationMode::Full;
  const double coeff_count = full ? 2.0 * (M - 1) : 1.0 * (M - 1);

  SweepResult result;
  result.config = config;

  for (std::size_t s = 0; s < config.strategies.size(); ++s) {
    const InterconnectionStrategy strategy = realize(config.strategies[s], M, f);
    const CalibrationPathTable paths = compute_paths(strategy);

    for (std::size_t n = 0; n < config.snr_grid_db.size(); ++n) {
      const double snr_db = config.snr_grid_db[n];
      ChannelModel channel;
      channel.line_gain = config.line_gain;
      channel.sigma_h_sq = config.sigma_h_sq;
      channel.sigma_n_sq =
          snr_to_noise_variance(snr_db, config.a, config.b, config.line_gain);
      const CrlbReport closed = crlb_closed_form(paths, config.a, config.b, channel);

      LineGains fixed_lines;
      if (config.persistence == DistortionPersistence::PerDeployment) {
        fixed_lines = draw_line_gains(strategy, channel,
                                      derive(config.base_seed, {0xD, s}));
      }

      const long chunk_count = (config.trials + kChunkTrials - 1) / kChunkTrials;
      std::vector<ChunkSums> chunks(chunk_count);
      run_chunks(chunk_count, config.threads, [&](long c) {
        ChunkSums& sums = chunks[c];
        sums.per_antenna.assign(M + 1, 0.0);
        const long t_end = std::min<long>((c + 1) * kChunkTrials, config.trials);
        for (long t = c * kChunkTrials; t < t_end; ++t) {
          const RfGainSet gains = generate_gains(
              M, f, config.a, config.b,
              derive(config.base_seed, {s, n, static_cast<std::uint64_t>(t), 0}));
          const std::uint64_t meas_seed =
              derive(config.base_seed, {s, n, static_cast<std::uint64_t>(t), 1});
          const MeasurementSet meas =
              config.persistence == DistortionPersistence::PerDeployment
                  ? synthesize_measurements(gains, strategy, channel, fixed_lines,
                                            meas_seed)
                  : synthesize_measurements(gains, strategy, channel, meas_seed);
          try {
            double trial_sum = 0.0;
            if (full) {
              const FullCalibrationEstimate est =
                  estimate_full(meas, paths, gains.alpha[f], gains.beta[f],
                                channel.line_gain);
              for (int m = 1; m <= M; ++m) {
                if (m == f) continue;
                const double err = std::norm(est.alpha_hat[m] - gains.alpha[m]) +
                                   std::norm(est.beta_hat[m] - gains.beta[m]);
                sums.per_antenna[m] += err / 2.0;
                trial_sum += err;
              }
            } else {
              const RelativeCalibrationEstimate est =
                  estimate_relative(meas, paths, gains.relative(f));
              for (int m = 1; m <= M; ++m) {
                if (m == f) continue;
                const double err = std::norm(est.c_hat[m] - gains.relative(m));
                sums.per_antenna[m] += err;
                trial_sum += err;
              }
            }
            const double stat = trial_sum / coeff_count;
            sums.sum_stat += stat;
            sums.sum_stat_sq += stat * stat;
            ++sums.included;
          } catch (const SingularityError&) {
            ++sums.excluded;
          }
        }
      });

      SweepCell cell;
      cell.strategy = config.strategies[s].label();
      cell.snr_db = snr_db;
      cell.per_antenna_mse.assign(M + 1, 0.0);
      cell.per_antenna_crlb.assign(M + 1, 0.0);
      double sum_stat = 0.0, sum_stat_sq = 0.0;
      for (const ChunkSums& sums : chunks) {
        cell.trials += sums.included;
        cell.exclusions += sums.excluded;
        sum_stat += sums.sum_stat;
        sum_stat_sq += sums.sum_stat_sq;
        for (int m = 1; m <= M; ++m) cell.per_antenna_mse[m] += sums.per_antenna[m];
      }
      if (cell.trials > 0) {
        cell.avg_mse = sum_stat / cell.trials;
        for (int m = 1; m <= M; ++m) cell.per_antenna_mse[m] /= cell.trials;
        if (cell.trials > 1) {
          const double var =
              (sum_stat_sq - cell.trials * cell.avg_mse * cell.avg_mse) /
              (cell.trials - 1);
          cell.stderr_mse = std::sqrt(std::max(var, 0.0) / cell.trials);
        }
      }
      double crlb_sum = 0.0;
      for (int m = 1; m <= M; ++m) {
        if (m == f) continue;
        if (full) {
          cell.per_antenna_crlb[m] = (closed.crlb_alpha[m] + closed.crlb_beta[m]) / 2.0;
          crlb_sum += closed.crlb_alpha[m] + closed.crlb_beta[m];
        } else {
          cell.per_antenna_crlb[m] = closed.crlb_relative[m];
          crlb_sum += closed.crlb_relative[m];
        }
      }
      cell.avg_crlb = crlb_sum / coeff_count;
      result.cells.push_back(std::move(cell));
    }
  }
  return result;
}

std::vector<OrderingRow> compare_strategies(const SweepResult& result) {
  std::vector<OrderingRow> rows;
  for (std::size_t n = 0; n < result.config.snr_grid_db.size(); ++n) {
    OrderingRow row;
    row.snr_db = result.config.snr_grid_db[n];
    std::vector<const SweepCell*> cells;
    for (const SweepCell& cell : result.cells)
      if (cell.snr_db == row.snr_db) cells.push_back(&cell);

    auto ranked = [&](auto key) {
      std::vector<const SweepCell*> order = cells;
      std::stable_sort(order.begin(), order.end(),
                       [&](const SweepCell* x, const SweepCell* y) {
                         return key(*x) < key(*y);
                       });
      std::vector<std::string> labels;
      labels.reserve(order.size());
      for (const SweepCell* cell : order) labels.push_back(cell->strategy);
      return labels;
    };
    row.by_mse = ranked([](const SweepCell& cell) { return cell.avg_mse; });
    row.by_crlb = ranked([](const SweepCell& cell) { return cell.avg_crlb; });
    row.inversion = row.by_mse != row.by_crlb;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "strategy,snr_db,mode,sigma_h_sq,avg_mse,avg_crlb,stderr,trials,exclusions\n";
  for (const SweepCell& cell : result.cells) {
    out += cell.strategy + ',' + fmt_double(cell.snr_db) + ',' +
           mode_name(result.config.mode) + ',' + fmt_double(result.config.sigma_h_sq) +
           ',' + fmt_double(cell.avg_mse) + ',' + fmt_double(cell.avg_crlb) + ',' +
           fmt_double(cell.stderr_mse) + ',' + std::to_string(cell.trials) + ',' +
           std::to_string(cell.exclusions) + '\n';
  }
  return out;
}

std::string sweep_to_json(const SweepResult& result) {
  nlohmann::json j;
  j["mode"] = mode_name(result.config.mode);
  j["antenna_count"] = result.config.antenna_count;
  j["reference"] = result.config.reference;
  j["sigma_h_sq"] = result.config.sigma_h_sq;
  j["trials_requested"] = result.config.trials;
  j["base_seed"] = result.config.base_seed;
  nlohmann::json cells = nlohmann::json::array();
  for (const SweepCell& cell : result.cells) {
    nlohmann::json per_antenna = nlohmann::json::array();
    for (int m = 1; m <= result.config.antenna_count; ++m) {
      if (m == result.config.reference) continue;
      per_antenna.push_back({{"antenna", m},
                             {"mse", cell.per_antenna_mse[m]},
                             {"crlb", cell.per_antenna_crlb[m]}});
    }
    cells.push_back({{"strategy", cell.strategy},
                     {"snr_db", cell.snr_db},
                     {"avg_mse", cell.avg_mse},
                     {"avg_crlb", cell.avg_crlb},
                     {"stderr", cell.stderr_mse},
                     {"trials", cell.trials},
                     {"exclusions", cell.exclusions},
                     {"per_antenna", std::move(per_antenna)}});
  }
  j["cells"] = std::move(cells);
  return j.dump(2) + "\n";
}

std::string ordering_to_json(const std::vector<OrderingRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const OrderingRow& row : rows) {
    j.push_back({{"snr_db", row.snr_db},
                 {"by_mse", row.by_mse},
                 {"by_crlb", row.by_crlb},
                 {"inversion", row.inversion}});
  }
  return j.dump(2) + "\n";
}

}  // namespace selfcal
