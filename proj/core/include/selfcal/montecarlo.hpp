#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selfcal/common.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/topology.hpp"

namespace selfcal {

enum class CalibrationMode { Full, Relative };

/// Whether per-line distortion is redrawn every trial or frozen once per
/// strategy (a deployed imperfection that all trials share).
enum class DistortionPersistence { PerTrial, PerDeployment };

const char* mode_name(CalibrationMode mode);
CalibrationMode parse_mode(const std::string& text);

struct SweepConfig {
  int antenna_count = 0;
  int reference = 1;
  std::vector<StrategySpec> strategies;
  std::vector<double> snr_grid_db;
  long trials = 1;
  double sigma_h_sq = 0.0;
  double a = 1.0;
  double b = 1.0;
  cdouble line_gain{1.0, 0.0};
  CalibrationMode mode = CalibrationMode::Full;
  DistortionPersistence persistence = DistortionPersistence::PerTrial;
  std::uint64_t base_seed = 0;
  int threads = 1;  // <= 0 picks the hardware concurrency; results identical either way
};

/// One (strategy, SNR) grid point. Averages are arithmetic means over the
/// estimated coefficients and trials jointly: 2(M-1) coefficients per trial in
/// full mode, M-1 in relative mode. Per-antenna vectors are 1-based with the
/// per-antenna coefficient average in each slot.
struct SweepCell {
  std::string strategy;
  double snr_db = 0.0;
  double avg_mse = 0.0;
  double avg_crlb = 0.0;
  double stderr_mse = 0.0;
  long trials = 0;  // trials included in the averages
  long exclusions = 0;
  std::vector<double> per_antenna_mse;
  std::vector<double> per_antenna_crlb;
};

struct SweepResult {
  SweepConfig config;
  std::vector<SweepCell> cells;  // strategy-major, SNR grid order within
};

/// Per-SNR strategy rankings by simulated MSE and by closed-form CRLB, with a
/// flag when the two disagree.
struct OrderingRow {
  double snr_db = 0.0;
  std::vector<std::string> by_mse;   // ascending average MSE
  std::vector<std::string> by_crlb;  // ascending average CRLB
  bool inversion = false;
};

/// Runs the seeded MSE-vs-CRLB sweep. Trials whose estimator raises a
/// singularity are excluded from the averages and counted. Deterministic for
/// fixed config regardless of the thread count.
SweepResult run_sweep(const SweepConfig& config);

std::vector<OrderingRow> compare_strategies(const SweepResult& result);

std::string sweep_to_csv(const SweepResult& result);
std::string sweep_to_json(const SweepResult& result);
std::string ordering_to_json(const std::vector<OrderingRow>& rows);

}  // namespace selfcal
