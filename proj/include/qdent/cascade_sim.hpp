#pragma once

// Monte Carlo source of biexciton-exciton cascades and the four-detector
// polarization analyzer that records them.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdent/polarization.hpp"
#include "qdent/timetag.hpp"

namespace qdent {

struct EmitterConfig {
  double fss_uev = 0.0;
  /// Phase of the VV amplitude at tau = 0 (rad).
  double phase_origin_rad = 0.0;
  double t_xx_ns = 0.5;
  double t_x_ns = 1.0;
  /// Pulsed repetition period; empty selects CW excitation.
  std::optional<double> rep_period_ns = 25.0;
  /// Mean re-excitation wait in CW mode.
  double cw_mean_interval_ns = 25.0;
  double electron_capture_rate = 0.0;  ///< 1/ns, exciton -> X-
  double hole_capture_rate = 0.0;      ///< 1/ns, exciton -> X+
  /// Probability that the photon of an interrupted cascade (trion) passes
  /// the exciton spectral filter.
  double spectral_leak = 0.0;
  double background_beta = 0.0;
  std::array<double, 4> detector_efficiency{0.5, 0.5, 0.5, 0.5};
  std::array<double, 4> dark_rate_per_ns{0.0, 0.0, 0.0, 0.0};
  double jitter_sigma_ns = 0.0;
  std::uint64_t seed = 1;

  /// Throws InvalidInput on any out-of-range field.
  void validate() const;
  bool pulsed() const { return rep_period_ns.has_value(); }
  /// Probability that the exciton captures a carrier before it decays.
  double interruption_probability() const;
};

/// Fixed offset added to every timestamp so jitter never produces negative
/// times.
inline constexpr double kEpochNs = 1000.0;

struct ChannelMap {
  std::uint8_t xx_co = 0;     ///< biexciton analyzer, transmitted (projector a)
  std::uint8_t xx_cross = 1;  ///< biexciton analyzer, reflected (a-perp)
  std::uint8_t x_co = 2;      ///< exciton analyzer, transmitted (projector b)
  std::uint8_t x_cross = 3;   ///< exciton analyzer, reflected (b-perp)
};

struct AnalyzerSetting {
  PolLabel xx = PolLabel::H;
  PolLabel x = PolLabel::H;
  ChannelMap channels{};

  AnalyzerSetting() = default;
  AnalyzerSetting(PolLabel xx_label, PolLabel x_label, ChannelMap map = {});
  std::string name() const;  ///< e.g. "HV"
};

/// Named setting lists: "corr3" (HH, DD, RR), "bases9" (H/D/R pairs),
/// "tomo16" (James et al. minimal set) and "tomo36" (all 6x6 pairs).
std::vector<AnalyzerSetting> settings_preset(const std::string& name);

struct PairEvent {
  std::uint64_t cycle_index = 0;
  double t_emit_xx_ns = 0.0;  ///< after the excitation pulse
  double tau_ns = 0.0;        ///< biexciton -> exciton delay
  bool interrupted = false;   ///< exciton captured a carrier before decaying
};

PairEvent sample_pair(const EmitterConfig& config, std::uint64_t cycle_index);

/// Clicks produced by one cascade; `cycle_start_ns` is the excitation time.
std::vector<TimeTag> detect(const PairEvent& pair, const AnalyzerSetting& setting,
                            const EmitterConfig& config, double cycle_start_ns,
                            std::uint8_t setting_id = 0);

struct SettingRun {
  AnalyzerSetting setting;
  std::uint8_t setting_id = 0;
  std::uint64_t cycles = 0;
  std::uint64_t interrupted = 0;
  double duration_ns = 0.0;
  std::vector<TimeTag> tags;  ///< time-sorted, includes dark counts
};

struct ExperimentOptions {
  unsigned workers = 1;
  std::uint64_t block_cycles = 1 << 15;
};

/// Simulates one setting of an experiment; `setting_index` selects the
/// block of global cycle indices, so the result equals the corresponding
/// element of run_experiment.
SettingRun run_setting(const EmitterConfig& config, const AnalyzerSetting& setting, std::size_t setting_index,
                       std::uint64_t cycles_per_setting, const ExperimentOptions& options = {});

/// One sorted stream per setting. Cycle indices are global across settings
/// (setting i owns [i*cycles, (i+1)*cycles)), so output is independent of
/// the worker count.
std::vector<SettingRun> run_experiment(const EmitterConfig& config,
                                       const std::vector<AnalyzerSetting>& settings,
                                       std::uint64_t cycles_per_setting,
                                       const ExperimentOptions& options = {});

}  // namespace qdent
