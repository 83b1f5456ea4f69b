#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "selfcal/common.hpp"
#include "selfcal/estimators.hpp"
#include "selfcal/montecarlo.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/topology.hpp"

namespace selfcal {

/// Physical channel plus the BS/MS gain stages of the TDD link. The downlink
/// and uplink matrices follow H_DL = R_MS H_PHY T_BS, H_UL = R_BS H_PHY^T T_MS
/// with the BS transmit/receive diagonals taken from the RF gain set.
struct SystemChannels {
  int antenna_count = 0;
  int user_count = 0;
  Eigen::MatrixXcd h_phy;  // K x M, i.i.d. CN(0,1)
  RfGainSet bs_gains;
  Eigen::VectorXcd t_ms;  // K, identity by default
  Eigen::VectorXcd r_ms;

  Eigen::MatrixXcd h_dl() const;  // K x M
  Eigen::MatrixXcd h_ul() const;  // M x K
};

SystemChannels draw_system_channels(const RfGainSet& gains, int user_count,
                                    std::uint64_t seed);

/// Reciprocity compensation applied to the transposed uplink channel.
struct NoCalibration {};
struct PerfectCalibration {
  RfGainSet gains;
};
using DlCompensation = std::variant<NoCalibration, PerfectCalibration,
                                    FullCalibrationEstimate, RelativeCalibrationEstimate>;

/// Downlink channel estimate from the uplink channel (M x K) and a
/// compensation rule; returns K x M:
///   none:     H_UL^T
///   full:     H_UL^T Diag{beta_hat}^-1 Diag{alpha_hat}
///   relative: H_UL^T Diag{c_hat}^-1
///   perfect:  same as full with the true gains (equals H_DL for identity MS gains)
Eigen::MatrixXcd estimate_dl_channel(const Eigen::MatrixXcd& h_ul,
                                     const DlCompensation& compensation);

enum class PrecodingScheme { MF, ZF };

const char* scheme_name(PrecodingScheme scheme);
PrecodingScheme parse_scheme(const std::string& text);

struct Precoder {
  PrecodingScheme scheme = PrecodingScheme::MF;
  Eigen::MatrixXcd w;  // M x K
  double gamma = 0.0;  // Tr{W^H W}, power normalization
};

/// W_MF = H_hat^H; W_ZF = H_hat^H (H_hat H_hat^H)^-1.
Precoder precode(const Eigen::MatrixXcd& h_hat, PrecodingScheme scheme);

struct PrecodingReport {
  PrecodingScheme scheme = PrecodingScheme::MF;
  std::vector<double> se_per_user;
  double sum_se = 0.0;
  double gamma = 0.0;
};

/// With G = H_DL W: SINR_k = |G_kk|^2 / (sum_{j != k} |G_kj|^2 + gamma
/// noise_var), SE_k = log2(1 + SINR_k).
PrecodingReport spectral_efficiency(const Eigen::MatrixXcd& h_dl_true,
                                    const Precoder& precoder, double noise_var);

struct DlExperimentConfig {
  int antenna_count = 32;
  int reference = 17;
  int user_count = 6;
  std::vector<StrategySpec> strategies;
  std::vector<double> calibration_snr_db;
  long draws = 1000;
  double a = 1.0;
  double b = 1.0;
  cdouble line_gain{1.0, 0.0};
  double sigma_h_sq = 0.0;
  CalibrationMode mode = CalibrationMode::Full;
  double noise_var = 1.0;  // DL receiver noise variance
  std::vector<PrecodingScheme> schemes{PrecodingScheme::MF, PrecodingScheme::ZF};
  std::uint64_t base_seed = 0;
  int threads = 1;
};

struct DlCell {
  std::string strategy;
  std::string scheme;
  double calibration_snr_db = 0.0;
  double avg_sum_se = 0.0;
  double stderr_se = 0.0;
  long draws = 0;  // draws included in the average
  long exclusions = 0;
};

struct DlResult {
  DlExperimentConfig config;
  std::vector<DlCell> cells;
};

/// Fig.-10-style experiment: per (strategy, calibration SNR, scheme), average
/// DL sum spectral efficiency over channel draws. Perfect-CSI and uncalibrated
/// baselines are included as pseudo-strategies "perfect" and "uncalibrated".
/// Gains and physical channels are seeded per draw and shared across
/// strategies and SNR points, so baselines are flat and comparisons paired.
DlResult run_dl_experiment(const DlExperimentConfig& config);

std::string dl_to_csv(const DlResult& result);
std::string dl_to_json(const DlResult& result);

}  // namespace selfcal
