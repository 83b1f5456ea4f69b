#pragma once

#include <string>
#include <vector>

#include "selfcal/common.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/topology.hpp"

namespace selfcal {

/// ML estimates of all transmit/receive gains; the reference antenna's slots
/// carry its known values. Vectors are 1-based.
struct FullCalibrationEstimate {
  int antenna_count = 0;
  int reference = 1;
  std::vector<cdouble> alpha_hat;
  std::vector<cdouble> beta_hat;
};

/// ML estimates of the relative coefficients c_m = beta_m / alpha_m.
struct RelativeCalibrationEstimate {
  int antenna_count = 0;
  int reference = 1;
  std::vector<cdouble> c_hat;
};

/// Recursive ML estimator for full calibration on a tree strategy. Levels are
/// processed outward from the reference; for antenna m with parent p:
///   alpha_hat_m = y_{p,m} / (h beta_hat_p),  beta_hat_m = y_{m,p} / (h alpha_hat_p).
/// Intermediate estimates with magnitude below 1e-12 of the reference's raise
/// SingularityError identifying where on the path propagation broke down.
FullCalibrationEstimate estimate_full(const MeasurementSet& measurements,
                                      const CalibrationPathTable& paths, cdouble alpha_f,
                                      cdouble beta_f, cdouble h);

/// Recursive ML estimator for relative calibration; needs neither h nor the
/// per-line gains: c_hat_m = (y_{m,p} / y_{p,m}) c_hat_p.
RelativeCalibrationEstimate estimate_relative(const MeasurementSet& measurements,
                                              const CalibrationPathTable& paths,
                                              cdouble c_f);

/// ML objective value: sum over interconnected ordered pairs of
/// |y_{p,q} - h beta_hat_p alpha_hat_q|^2. Zero for any tree measurement set.
double residual_full(const FullCalibrationEstimate& estimate,
                     const MeasurementSet& measurements, cdouble h);

/// Relative ML objective profiled over the per-line nuisance: for each
/// interconnected pair the optimal common factor psi is eliminated in closed
/// form and the remaining squared error summed. Zero on trees.
double residual_relative(const RelativeCalibrationEstimate& estimate,
                         const MeasurementSet& measurements);

std::string full_estimate_to_json(const FullCalibrationEstimate& estimate);
std::string relative_estimate_to_json(const RelativeCalibrationEstimate& estimate);

}  // namespace selfcal
