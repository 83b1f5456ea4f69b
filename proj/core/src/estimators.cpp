#include "selfcal/estimators.hpp"

#include <cmath>

#include "json.hpp"

namespace selfcal {

namespace {

void check_shapes(const MeasurementSet& measurements, const CalibrationPathTable& paths) {
  if (measurements.antenna_count() != paths.antenna_count() ||
      measurements.strategy().reference() != paths.reference()) {
    throw StructuralError("measurement set and path table do not match");
  }
}

nlohmann::json complex_entry(cdouble z) { return nlohmann::json::array({z.real(), z.imag()}); }

}  // namespace

FullCalibrationEstimate estimate_full(const MeasurementSet& measurements,
                                      const CalibrationPathTable& paths, cdouble alpha_f,
                                      cdouble beta_f, cdouble h) {
  check_shapes(measurements, paths);
  if (std::abs(h) == 0.0)
    throw StructuralError("full calibration needs a known nonzero line gain");
  if (std::abs(alpha_f) == 0.0 || std::abs(beta_f) == 0.0)
    throw StructuralError("reference gains must be nonzero");

  const int M = paths.antenna_count();
  const int f = paths.reference();
  const double alpha_floor = 1e-12 * std::abs(alpha_f);
  const double beta_floor = 1e-12 * std::abs(beta_f);

  FullCalibrationEstimate est;
  est.antenna_count = M;
  est.reference = f;
  est.alpha_hat.assign(M + 1, cdouble{});
  est.beta_hat.assign(M + 1, cdouble{});
  est.alpha_hat[f] = alpha_f;
  est.beta_hat[f] = beta_f;

  for (int r = 0; r <= paths.max_depth(); ++r) {
    for (int m : paths.levels()[r]) {
      const int p = paths.parent(m);
      if (std::abs(est.beta_hat[p]) < beta_floor)
        throw SingularityError("propagation singularity: estimated beta at antenna " +
                               std::to_string(p) + " vanished on the path to antenna " +
                               std::to_string(m) + " (depth " + std::to_string(r) + ")");
      if (std::abs(est.alpha_hat[p]) < alpha_floor)
        throw SingularityError("propagation singularity: estimated alpha at antenna " +
                               std::to_string(p) + " vanished on the path to antenna " +
                               std::to_string(m) + " (depth " + std::to_string(r) + ")");
      est.alpha_hat[m] = measurements.at(p, m) / (h * est.beta_hat[p]);
      est.beta_hat[m] = measurements.at(m, p) / (h * est.alpha_hat[p]);
    }
  }
  return est;
}

RelativeCalibrationEstimate estimate_relative(const MeasurementSet& measurements,
                                              const CalibrationPathTable& paths,
                                              cdouble c_f) {
  check_shapes(measurements, paths);

  const int M = paths.antenna_count();
  const int f = paths.reference();

  RelativeCalibrationEstimate est;
  est.antenna_count = M;
  est.reference = f;
  est.c_hat.assign(M + 1, cdouble{});
  est.c_hat[f] = c_f;

  for (int r = 0; r <= paths.max_depth(); ++r) {
    for (int m : paths.levels()[r]) {
      const int p = paths.parent(m);
      const cdouble denom = measurements.at(p, m);
      if (std::abs(denom) == 0.0)
        throw SingularityError("degenerate measurement: y_{" + std::to_string(p) + "," +
                               std::to_string(m) + "} is zero");
      est.c_hat[m] = (measurements.at(m, p) / denom) * est.c_hat[p];
    }
  }
  return est;
}

double residual_full(const FullCalibrationEstimate& estimate,
                     const MeasurementSet& measurements, cdouble h) {
  double sum = 0.0;
  for (const auto& [p, q] : measurements.strategy().edges()) {
    sum += std::norm(measurements.at(p, q) -
                     h * estimate.beta_hat[p] * estimate.alpha_hat[q]);
    sum += std::norm(measurements.at(q, p) -
                     h * estimate.beta_hat[q] * estimate.alpha_hat[p]);
  }
  return sum;
}

double residual_relative(const RelativeCalibrationEstimate& estimate,
                         const MeasurementSet& measurements) {
  double sum = 0.0;
  for (const auto& [p, q] : measurements.strategy().edges()) {
    const cdouble cp = estimate.c_hat[p];
    const cdouble cq = estimate.c_hat[q];
    const cdouble ypq = measurements.at(p, q);
    const cdouble yqp = measurements.at(q, p);
    const double weight = std::norm(cp) + std::norm(cq);
    if (weight == 0.0) {
      sum += std::norm(ypq) + std::norm(yqp);
      continue;
    }
    const cdouble psi = (std::conj(cp) * ypq + std::conj(cq) * yqp) / weight;
    sum += std::norm(ypq - cp * psi) + std::norm(yqp - cq * psi);
  }
  return sum;
}

std::string full_estimate_to_json(const FullCalibrationEstimate& estimate) {
  nlohmann::json j;
  j["antenna_count"] = estimate.antenna_count;
  j["reference"] = estimate.reference;
  nlohmann::json alpha = nlohmann::json::object(), beta = nlohmann::json::object();
  for (int m = 1; m <= estimate.antenna_count; ++m) {
    alpha[std::to_string(m)] = complex_entry(estimate.alpha_hat[m]);
    beta[std::to_string(m)] = complex_entry(estimate.beta_hat[m]);
  }
  j["alpha_hat"] = std::move(alpha);
  j["beta_hat"] = std::move(beta);
  return j.dump(2) + "\n";
}

std::string relative_estimate_to_json(const RelativeCalibrationEstimate& estimate) {
  nlohmann::json j;
  j["antenna_count"] = estimate.antenna_count;
  j["reference"] = estimate.reference;
  nlohmann::json c = nlohmann::json::object();
  for (int m = 1; m <= estimate.antenna_count; ++m)
    c[std::to_string(m)] = complex_entry(estimate.c_hat[m]);
  j["c_hat"] = std::move(c);
  return j.dump(2) + "\n";
}

}  // namespace selfcal
