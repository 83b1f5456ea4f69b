#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "selfcal/common.hpp"
#include "selfcal/rfmodel.hpp"
#include "selfcal/topology.hpp"

namespace selfcal {

/// Bijection between antenna indices and rows of the stacked parameter vector
/// [alpha; beta] that excludes the reference antenna. Alpha rows come first,
/// antennas in ascending order skipping the reference, then the beta rows in
/// the same antenna order. Rows are 0-based.
class ParameterIndexMap {
 public:
  ParameterIndexMap() = default;
  ParameterIndexMap(int antenna_count, int reference);

  int antenna_count() const { return antenna_count_; }
  int reference() const { return reference_; }
  int size() const { return 2 * (antenna_count_ - 1); }

  int alpha_row(int m) const;
  int beta_row(int m) const;
  int antenna_of(int row) const;
  bool is_beta_row(int row) const { return row >= antenna_count_ - 1; }

  bool operator==(const ParameterIndexMap&) const = default;

 private:
  int antenna_count_ = 0;
  int reference_ = 1;
  std::vector<int> alpha_row_;  // antenna -> row, -1 for the reference
  std::vector<int> antenna_;    // alpha row -> antenna
};

/// Fisher information matrix of the unknown gains, including the common
/// |h|^2 / sigma_n^2 factor. Carries the strategy it was built from.
struct FisherMatrix {
  Eigen::MatrixXcd matrix;
  double scale = 0.0;
  ParameterIndexMap map;
  InterconnectionStrategy strategy;
};

/// Inverse of a Fisher matrix (the CRLB matrix) with its conditioning.
struct CrlbMatrix {
  Eigen::MatrixXcd matrix;
  double condition_number = 0.0;
  ParameterIndexMap map;
};

/// Per-antenna variance lower bounds. Vectors are 1-based; the reference
/// antenna's slots are zero (its gains are known).
struct CrlbReport {
  int antenna_count = 0;
  int reference = 1;
  std::vector<int> d;  // intermediate antennas on the path to the reference
  std::vector<double> crlb_alpha;
  std::vector<double> crlb_beta;
  std::vector<double> crlb_relative;
  double trace_objective = 0.0;
  double condition_number = 0.0;  // 0 when analytically derived
};

/// Fisher information matrix for the unknown transmit/receive gains under the
/// common-line-gain model:
///   J = (|h|^2/sigma_n^2) [[A, D^H], [D, B]]
/// with A, B real diagonal (neighbor power sums) and D = Diag{beta} Abar
/// Diag{alpha^H}, Abar the adjacency with the reference row/column removed.
FisherMatrix build_fim(const RfGainSet& gains, const InterconnectionStrategy& strategy,
                       const ChannelModel& channel);

/// Inverts J with a Hermitian eigensolver; condition numbers above 1e12 (or a
/// nonpositive spectrum) raise SingularityError.
CrlbMatrix invert_fim(const FisherMatrix& fim);

/// CRLB report via numerical inversion; relative-coefficient bounds follow by
/// the Jacobian transform. Works for any effective strategy and any gains.
CrlbReport crlb_numerical(const FisherMatrix& fim, const RfGainSet& gains);

/// Closed-form bounds for tree strategies under equal gain amplitudes:
///   CRLB(alpha_m) = (d_m+1) sigma_n^2 / (b^2 |h|^2)
///   CRLB(beta_m)  = (d_m+1) sigma_n^2 / (a^2 |h|^2)
///   CRLB(c_m)     = 2 (d_m+1) sigma_n^2 / (a^4 |h|^2)
CrlbReport crlb_closed_form(const CalibrationPathTable& paths, double a, double b,
                            const ChannelModel& channel);

/// Convenience overload verifying the gain set actually has equal amplitudes
/// (relative tolerance 1e-9) before delegating to the closed form.
CrlbReport crlb_closed_form(const CalibrationPathTable& paths, const RfGainSet& gains,
                            const ChannelModel& channel);

/// Diagonal of Jac * C * Jac^H where row m of Jac holds the derivatives of
/// c_m = beta_m / alpha_m: -beta_m/alpha_m^2 at the alpha column and 1/alpha_m
/// at the beta column. Returns a 1-based vector, zero at the reference.
std::vector<double> apply_jacobian(const CrlbMatrix& crlb, const RfGainSet& gains);

/// One rewiring step: antenna n, currently a leaf hanging off the ordinary
/// antenna u, is reconnected to the reference. Returns the updated Fisher
/// matrix L J L' together with the rewired strategy. Requires equal gain
/// amplitudes; exact (not approximate) under that assumption.
FisherMatrix elementary_update(const FisherMatrix& fim, int n, int u,
                               const RfGainSet& gains);

/// Ordered leaf-rewire steps (n_k, u_k) that turn a tree strategy into the
/// star; each step satisfies elementary_update's precondition on the evolving
/// strategy. Deepest antennas first, ascending index within a depth.
std::vector<std::pair<int, int>> star_rewiring_sequence(
    const InterconnectionStrategy& strategy);

std::string crlb_report_to_csv(const CrlbReport& report);
std::string crlb_report_to_json(const CrlbReport& report);

}  // namespace selfcal
