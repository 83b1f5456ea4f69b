#include "selfcal/rfmodel.hpp"

#include <cmath>
#include <complex>
#include <utility>

#include "json.hpp"
#include "selfcal/rng.hpp"

namespace selfcal {

namespace {

using nlohmann::json;

json complex_to_json(cdouble z) { return json::array({z.real(), z.imag()}); }

cdouble complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw StructuralError("expected complex value as [re, im]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

json parse_checked(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw StructuralError("malformed JSON");
  return j;
}

}  // namespace

LineGains::LineGains(int antenna_count, cdouble nominal)
    : antenna_count_(antenna_count),
      gain_(static_cast<std::size_t>(antenna_count) * antenna_count, nominal) {}

cdouble LineGains::at(int p, int q) const {
  return gain_[static_cast<std::size_t>(p - 1) * antenna_count_ + (q - 1)];
}

void LineGains::set(int p, int q, cdouble value) {
  gain_[static_cast<std::size_t>(p - 1) * antenna_count_ + (q - 1)] = value;
  gain_[static_cast<std::size_t>(q - 1) * antenna_count_ + (p - 1)] = value;
}

MeasurementSet::MeasurementSet(InterconnectionStrategy strategy, ChannelModel channel)
    : strategy_(std::move(strategy)),
      channel_(channel),
      y_(static_cast<std::size_t>(strategy_.antenna_count()) * strategy_.antenna_count()),
      present_(y_.size(), 0) {}

bool MeasurementSet::present(int p, int q) const {
  const int m = strategy_.antenna_count();
  if (p < 1 || p > m || q < 1 || q > m || p == q) return false;
  return present_[static_cast<std::size_t>(p - 1) * m + (q - 1)] != 0;
}

cdouble MeasurementSet::at(int p, int q) const {
  if (!present(p, q))
    throw StructuralError("no measurement y_{" + std::to_string(p) + "," +
                          std::to_string(q) + "}: antennas not interconnected");
  return y_[static_cast<std::size_t>(p - 1) * strategy_.antenna_count() + (q - 1)];
}

void MeasurementSet::set(int p, int q, cdouble y) {
  const std::size_t idx =
      static_cast<std::size_t>(p - 1) * strategy_.antenna_count() + (q - 1);
  y_[idx] = y;
  present_[idx] = 1;
}

RfGainSet generate_gains(int antenna_count, int reference, double a, double b,
                         std::uint64_t seed) {
  if (antenna_count < 2) throw StructuralError("need at least two antennas");
  if (reference < 1 || reference > antenna_count)
    throw StructuralError("reference antenna out of range");
  if (!(a > 0.0) || !(b > 0.0))
    throw StructuralError("gain amplitudes must be positive");

  RfGainSet g;
  g.antenna_count = antenna_count;
  g.reference = reference;
  g.alpha.assign(antenna_count + 1, cdouble{});
  g.beta.assign(antenna_count + 1, cdouble{});

  Stream stream(seed);
  for (int m = 1; m <= antenna_count; ++m)
    g.alpha[m] = std::polar(a, stream.uniform_phase());
  for (int m = 1; m <= antenna_count; ++m)
    g.beta[m] = std::polar(b, stream.uniform_phase());
  return g;
}

LineGains draw_line_gains(const InterconnectionStrategy& strategy,
                          const ChannelModel& channel, std::uint64_t seed) {
  LineGains lines(strategy.antenna_count(), channel.line_gain);
  if (channel.sigma_h_sq > 0.0) {
    Stream stream(seed);
    for (const auto& [p, q] : strategy.edges())
      lines.set(p, q, channel.line_gain + stream.complex_gaussian(channel.sigma_h_sq));
  }
  return lines;
}

MeasurementSet synthesize_measurements(const RfGainSet& gains,
                                       const InterconnectionStrategy& strategy,
                                       const ChannelModel& channel, std::uint64_t seed) {
  if (gains.antenna_count != strategy.antenna_count())
    throw StructuralError("gain set and strategy antenna counts differ");
  if (channel.sigma_h_sq < 0.0 || channel.sigma_n_sq < 0.0)
    throw StructuralError("variances must be nonnegative");

  MeasurementSet out(strategy, channel);
  Stream stream(seed);
  for (const auto& [p, q] : strategy.edges()) {
    cdouble h_pq = channel.line_gain;
    if (channel.sigma_h_sq > 0.0) h_pq += stream.complex_gaussian(channel.sigma_h_sq);
    cdouble n_pq{}, n_qp{};
    if (channel.sigma_n_sq > 0.0) {
      n_pq = stream.complex_gaussian(channel.sigma_n_sq);
      n_qp = stream.complex_gaussian(channel.sigma_n_sq);
    }
    out.set(p, q, gains.beta[p] * h_pq * gains.alpha[q] + n_pq);
    out.set(q, p, gains.beta[q] * h_pq * gains.alpha[p] + n_qp);
  }
  return out;
}

MeasurementSet synthesize_measurements(const RfGainSet& gains,
                                       const InterconnectionStrategy& strategy,
                                       const ChannelModel& channel, const LineGains& lines,
                                       std::uint64_t seed) {
  if (gains.antenna_count != strategy.antenna_count())
    throw StructuralError("gain set and strategy antenna counts differ");
  if (channel.sigma_n_sq < 0.0) throw StructuralError("variances must be nonnegative");

  MeasurementSet out(strategy, channel);
  Stream stream(seed);
  for (const auto& [p, q] : strategy.edges()) {
    const cdouble h_pq = lines.at(p, q);
    cdouble n_pq{}, n_qp{};
    if (channel.sigma_n_sq > 0.0) {
      n_pq = stream.complex_gaussian(channel.sigma_n_sq);
      n_qp = stream.complex_gaussian(channel.sigma_n_sq);
    }
    out.set(p, q, gains.beta[p] * h_pq * gains.alpha[q] + n_pq);
    out.set(q, p, gains.beta[q] * h_pq * gains.alpha[p] + n_qp);
  }
  return out;
}

double snr_to_noise_variance(double snr_db, double a, double b, cdouble h) {
  if (!(a > 0.0) || !(b > 0.0) || std::abs(h) == 0.0)
    throw StructuralError("SNR conversion needs positive signal amplitudes");
  return a * a * b * b * std::norm(h) / std::pow(10.0, snr_db / 10.0);
}

std::string gains_to_json(const RfGainSet& gains) {
  json j;
  j["antenna_count"] = gains.antenna_count;
  j["reference"] = gains.reference;
  json alpha = json::array(), beta = json::array();
  for (int m = 1; m <= gains.antenna_count; ++m) {
    alpha.push_back(complex_to_json(gains.alpha[m]));
    beta.push_back(complex_to_json(gains.beta[m]));
  }
  j["alpha"] = std::move(alpha);
  j["beta"] = std::move(beta);
  return j.dump(2) + "\n";
}

RfGainSet gains_from_json(const std::string& text) {
  const json j = parse_checked(text);
  if (!j.contains("antenna_count") || !j.contains("reference") ||
      !j.contains("alpha") || !j.contains("beta")) {
    throw StructuralError("gain JSON missing required fields");
  }
  RfGainSet g;
  g.antenna_count = j["antenna_count"].get<int>();
  g.reference = j["reference"].get<int>();
  if (g.antenna_count < 2 || g.reference < 1 || g.reference > g.antenna_count)
    throw StructuralError("gain JSON has invalid antenna count or reference");
  const json& alpha = j["alpha"];
  const json& beta = j["beta"];
  if (!alpha.is_array() || !beta.is_array() ||
      static_cast<int>(alpha.size()) != g.antenna_count ||
      static_cast<int>(beta.size()) != g.antenna_count) {
    throw StructuralError("gain JSON arrays must have one entry per antenna");
  }
  g.alpha.assign(g.antenna_count + 1, cdouble{});
  g.beta.assign(g.antenna_count + 1, cdouble{});
  for (int m = 1; m <= g.antenna_count; ++m) {
    g.alpha[m] = complex_from_json(alpha[m - 1]);
    g.beta[m] = complex_from_json(beta[m - 1]);
  }
  return g;
}

std::string measurements_to_json(const MeasurementSet& measurements, cdouble alpha_f,
                                 cdouble beta_f) {
  const InterconnectionStrategy& strategy = measurements.strategy();
  json j;
  j["antenna_count"] = strategy.antenna_count();
  j["reference"] = strategy.reference();
  j["channel"] = {{"line_gain", complex_to_json(measurements.channel().line_gain)},
                  {"sigma_h_sq", measurements.channel().sigma_h_sq},
                  {"sigma_n_sq", measurements.channel().sigma_n_sq}};
  j["reference_gains"] = {{"alpha", complex_to_json(alpha_f)},
                          {"beta", complex_to_json(beta_f)}};
  json obs = json::array();
  for (const auto& [p, q] : strategy.edges()) {
    obs.push_back({{"p", p}, {"q", q}, {"y", complex_to_json(measurements.at(p, q))}});
    obs.push_back({{"p", q}, {"q", p}, {"y", complex_to_json(measurements.at(q, p))}});
  }
  j["observations"] = std::move(obs);
  return j.dump(2) + "\n";
}

MeasurementFile measurements_from_json(const std::string& text) {
  const json j = parse_checked(text);
  for (const char* key :
       {"antenna_count", "reference", "channel", "reference_gains", "observations"}) {
    if (!j.contains(key))
      throw StructuralError(std::string("measurement JSON missing field: ") + key);
  }
  const int m = j["antenna_count"].get<int>();
  const int f = j["reference"].get<int>();
  ChannelModel channel;
  channel.line_gain = complex_from_json(j["channel"].at("line_gain"));
  channel.sigma_h_sq = j["channel"].at("sigma_h_sq").get<double>();
  channel.sigma_n_sq = j["channel"].at("sigma_n_sq").get<double>();

  InterconnectionStrategy strategy(m, f);
  const json& obs = j["observations"];
  if (!obs.is_array()) throw StructuralError("observations must be an array");
  for (const json& o : obs) {
    const int p = o.at("p").get<int>();
    const int q = o.at("q").get<int>();
    if (p < 1 || p > m || q < 1 || q > m || p == q)
      throw StructuralError("observation indices out of range");
    strategy.set_edge(p, q);
  }
  MeasurementSet ms(strategy, channel);
  for (const json& o : obs)
    ms.set(o.at("p").get<int>(), o.at("q").get<int>(), complex_from_json(o.at("y")));
  for (const auto& [p, q] : strategy.edges()) {
    if (!ms.present(p, q) || !ms.present(q, p))
      throw StructuralError("measurement JSON must list both directions of every pair");
  }

  MeasurementFile file;
  file.measurements = std::move(ms);
  file.alpha_f = complex_from_json(j["reference_gains"].at("alpha"));
  file.beta_f = complex_from_json(j["reference_gains"].at("beta"));
  return file;
}

}  // namespace selfcal
