#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selfcal/common.hpp"
#include "selfcal/topology.hpp"

namespace selfcal {

/// Complex transmit (alpha) and receive (beta) RF gains per antenna.
/// The reference antenna's pair is treated as known; all others are the
/// unknown calibration coefficients. Vectors are 1-based (slot 0 unused).
struct RfGainSet {
  int antenna_count = 0;
  int reference = 1;
  std::vector<cdouble> alpha;
  std::vector<cdouble> beta;

  cdouble relative(int m) const { return beta[m] / alpha[m]; }  // c_m = beta_m / alpha_m
};

/// Transmission-line channel: common nominal gain h, per-line complex Gaussian
/// distortion variance, and measurement AWGN variance.
struct ChannelModel {
  cdouble line_gain{1.0, 0.0};  // h
  double sigma_h_sq = 0.0;
  double sigma_n_sq = 0.0;

  bool operator==(const ChannelModel&) const = default;
};

/// Realized per-line gains h_{p,q} = h + distortion, one draw per unordered
/// pair, shared by both directions (reciprocal lines).
class LineGains {
 public:
  LineGains() = default;
  LineGains(int antenna_count, cdouble nominal);

  cdouble at(int p, int q) const;
  void set(int p, int q, cdouble value);

 private:
  int antenna_count_ = 0;
  std::vector<cdouble> gain_;  // row-major, symmetric
};

/// Pairwise calibration observations y_{p,q} (received at p, transmitted by q).
/// Only entries on interconnected pairs exist; reading any other entry throws.
class MeasurementSet {
 public:
  MeasurementSet() = default;
  MeasurementSet(InterconnectionStrategy strategy, ChannelModel channel);

  int antenna_count() const { return strategy_.antenna_count(); }
  const InterconnectionStrategy& strategy() const { return strategy_; }
  const ChannelModel& channel() const { return channel_; }

  bool present(int p, int q) const;
  cdouble at(int p, int q) const;
  void set(int p, int q, cdouble y);

  bool operator==(const MeasurementSet&) const = default;

 private:
  InterconnectionStrategy strategy_;
  ChannelModel channel_;
  std::vector<cdouble> y_;
  std::vector<std::uint8_t> present_;
};

/// Gains with |alpha_m| = a, |beta_m| = b and phases i.i.d. uniform on [-pi, pi).
RfGainSet generate_gains(int antenna_count, int reference, double a, double b,
                         std::uint64_t seed);

/// One realized gain per interconnected line: h + CN(0, sigma_h_sq).
LineGains draw_line_gains(const InterconnectionStrategy& strategy,
                          const ChannelModel& channel, std::uint64_t seed);

/// Full measurement synthesis: fresh line gains, then for every interconnected
/// pair {p,q} both directed observations
///   y_{p,q} = beta_p h_{p,q} alpha_q + n_{p,q}
/// with noise i.i.d. CN(0, sigma_n_sq) independent across directions.
MeasurementSet synthesize_measurements(const RfGainSet& gains,
                                       const InterconnectionStrategy& strategy,
                                       const ChannelModel& channel, std::uint64_t seed);

/// Same, but with the per-line gains fixed by the caller (deployment-persistent
/// distortion); the seed drives measurement noise only.
MeasurementSet synthesize_measurements(const RfGainSet& gains,
                                       const InterconnectionStrategy& strategy,
                                       const ChannelModel& channel, const LineGains& lines,
                                       std::uint64_t seed);

/// Noise variance giving per-measurement SNR a^2 b^2 |h|^2 / sigma_n^2.
double snr_to_noise_variance(double snr_db, double a, double b, cdouble h);

std::string gains_to_json(const RfGainSet& gains);
RfGainSet gains_from_json(const std::string& text);

/// Measurement JSON carries everything an estimator needs: strategy, channel,
/// the reference antenna's known gains, and all observed entries.
std::string measurements_to_json(const MeasurementSet& measurements, cdouble alpha_f,
                                 cdouble beta_f);

struct MeasurementFile {
  MeasurementSet measurements;
  cdouble alpha_f;
  cdouble beta_f;
};

MeasurementFile measurements_from_json(const std::string& text);

}  // namespace selfcal
