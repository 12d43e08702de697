#pragma once

// Derived analyses: fine-structure splitting from polarization-resolved
// peak positions, time-gated fidelity, fidelity versus splitting, and
// per-sample splitting statistics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdent/cascade_sim.hpp"
#include "qdent/correlator.hpp"

namespace qdent {

/// Exciton and biexciton peak energies (ueV offsets) against the analyzer
/// angle (degrees), with one uncertainty per angle.
struct PolarizationSeries {
  std::vector<double> angles_deg;
  std::vector<double> e_x;
  std::vector<double> e_xx;
  std::vector<double> sigma;

  /// Equal lengths, at least 6 points, finite values, sigma > 0.
  void validate() const;
};

struct FssFit {
  double fss = 0.0;             ///< ueV, >= 0
  double fss_sigma = 0.0;       ///< ueV
  double axis_angle_deg = 0.0;  ///< in [0, 180)
  double residual_rms = 0.0;    ///< ueV
  double offset_x = 0.0;
  double offset_xx = 0.0;
};

struct FssFitOptions {
  /// X and XX oscillate in phase instead of in anti-phase.
  bool same_phase = false;
};

/// Joint weighted least squares of
///   e_x  = a + (S/2) cos(2 theta - 2 theta0)
///   e_xx = b -+ (S/2) cos(2 theta - 2 theta0).
/// Throws EstimationFailure on a degenerate angle set or a residual rms
/// above 5x the median uncertainty.
FssFit fit_fss(const PolarizationSeries& series, const FssFitOptions& options = {});

/// `count` angles evenly spaced over [0, 180).
std::vector<double> analyzer_angles(int count = 12);

/// Synthetic series around the model with Gaussian noise of `noise` ueV
/// (zero noise gives the exact model).
PolarizationSeries synthesize_series(double fss_uev, double axis_angle_deg, const std::vector<double>& angles_deg,
                                     double noise_uev, std::uint64_t seed, double offset_x = 0.0,
                                     double offset_xx = 0.0, const FssFitOptions& options = {});

struct GateResult {
  double fidelity = 0.0;
  double retained = 1.0;
};

/// Fidelity to phi+ of the background-mixed, time-averaged state when only
/// delays tau <= gate are kept, with the kept fraction 1 - exp(-gate/T).
/// An infinite gate is the ungated case.
GateResult gate_fidelity(double fss_uev, double lifetime_ns, double gate_ns, double background_beta = 0.0);

struct GateScan {
  std::vector<double> gate_ns;
  std::vector<double> fidelity;
  std::vector<double> retained;
};

GateScan gate_scan(double fss_uev, double lifetime_ns, const std::vector<double>& gates_ns,
                   double background_beta = 0.0);

/// Same scan measured on simulated runs: for each gate the coincidence
/// window becomes [window.lo, gate], the fidelity comes from the three
/// degrees of correlation, and the retained fraction is relative to the
/// coincidences in `window`.
GateScan gate_scan_simulated(const std::vector<SettingRun>& runs, const std::vector<double>& gates_ns,
                             const CoincidenceWindow& window);

struct ThresholdScan {
  std::vector<double> fss_uev;
  std::vector<double> fidelity;
  /// Splitting where F falls to 0.5, refined between grid points.
  std::optional<double> crossing_uev;
  /// Human-readable note when there is no crossing.
  std::string note;
};

ThresholdScan threshold_scan(const std::vector<double>& fss_grid, double lifetime_ns, double background_beta);

struct SampleRecord {
  std::string sample_id;
  double thickness_nm = 0.0;
  double temp_c = 0.0;
  bool udmhy = false;
  std::optional<double> e_x_mev;
  std::optional<double> fss_uev;
};

struct GroupStats {
  std::string sample_id;
  std::size_t count = 0;
  double mean = 0.0;
  std::optional<double> std;  ///< sample standard deviation, needs >= 2 members
  bool flagged = false;       ///< fewer than the minimum count
};

/// Mean and sample standard deviation of the splitting per sample id, in
/// order of first appearance. Records without a splitting are skipped.
/// Throws InvalidInput when no record carries a splitting.
std::vector<GroupStats> group_stats(const std::vector<SampleRecord>& records, std::size_t min_count = 2);

}  // namespace qdent
