#pragma once

// Coincidence analysis of time-tag streams: start-stop cross-correlation
// histograms, g2 normalization and coincidence tables for tomography.

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qdent/cascade_sim.hpp"
#include "qdent/polarization.hpp"
#include "qdent/timetag.hpp"

namespace qdent {

/// Delay axis [min_ps, max_ps) cut into bins of width_ps; tau = t_b - t_a.
struct HistogramAxis {
  std::int64_t width_ps = 0;
  std::int64_t min_ps = 0;
  std::int64_t max_ps = 0;

  HistogramAxis() = default;
  /// The range must be an exact multiple of the bin width.
  HistogramAxis(std::int64_t width, std::int64_t range_min, std::int64_t range_max);
  std::size_t bins() const { return static_cast<std::size_t>((max_ps - min_ps) / width_ps); }
  std::int64_t bin_start(std::size_t i) const { return min_ps + static_cast<std::int64_t>(i) * width_ps; }
  double bin_center(std::size_t i) const { return static_cast<double>(bin_start(i)) + 0.5 * width_ps; }
  friend bool operator==(const HistogramAxis&, const HistogramAxis&) = default;
};

struct Histogram {
  HistogramAxis axis;
  std::uint8_t channel_a = 0;
  std::uint8_t channel_b = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t singles_a = 0;
  std::uint64_t singles_b = 0;
  /// Time span covered by the contributing tags; empty stream -> no span.
  std::optional<std::uint64_t> first_ps;
  std::optional<std::uint64_t> last_ps;

  std::uint64_t acquisition_ps() const { return first_ps ? *last_ps - *first_ps : 0; }
  std::uint64_t total() const;

  /// Sums counts and singles of a histogram over a disjoint part of the same
  /// stream (same axis and channels).
  Histogram& merge(const Histogram& other);
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

/// Incremental start-stop correlator. Tags are pushed in time order in any
/// chunking; each b tag is binned once every a tag that can pair with it
/// has been seen. Memory is bounded by the tags inside one window span.
class StreamingCorrelator {
 public:
  StreamingCorrelator(std::uint8_t channel_a, std::uint8_t channel_b, HistogramAxis axis);

  void push(std::span<const TimeTag> tags);
  void push(const TimeTag& tag);
  /// Flushes pending b tags and returns the histogram. The object is left
  /// in a finished state; further pushes are rejected.
  Histogram finish();

  std::size_t max_buffered() const { return max_buffered_; }

 private:
  void settle(std::int64_t now);
  void bin_b(std::int64_t t_b);

  Histogram hist_;
  std::deque<std::int64_t> a_times_;
  std::deque<std::int64_t> pending_b_;
  std::optional<std::int64_t> last_;
  std::size_t max_buffered_ = 0;
  bool finished_ = false;
};

/// Single-pass histogram of a sorted stream. Throws InvalidInput on an
/// unsorted stream.
Histogram cross_correlate(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                          const HistogramAxis& axis);

/// Histogram restricted to b tags with timestamps in [begin_ps, end_ps);
/// a tags outside the shard are still used as partners. Summing the shards
/// of a partition of the time axis reproduces cross_correlate exactly.
Histogram cross_correlate_shard(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                                const HistogramAxis& axis, std::uint64_t begin_ps, std::uint64_t end_ps);

/// Splits the stream into `shards` equal time ranges, correlates them on
/// `workers` threads and merges in shard order.
Histogram cross_correlate_sharded(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                                  const HistogramAxis& axis, std::size_t shards, unsigned workers = 1);

enum class G2Mode { Cw, Pulsed };

struct G2Curve {
  std::vector<double> delay_ps;
  std::vector<double> value;
};

struct G2Options {
  G2Mode mode = G2Mode::Cw;
  std::int64_t rep_period_ps = 0;
  /// Pulsed mode: number of side peaks averaged for the normalization.
  std::size_t side_peaks = 6;
};

/// CW: counts / (r_a r_b bin T). Pulsed: one point per complete peak, each
/// peak area divided by the mean area of the nearest `side_peaks` non-zero
/// peaks. Throws EstimationFailure on zero singles, fewer than 5 (or fewer
/// than requested) side peaks, or empty side peaks.
G2Curve normalize_g2(const Histogram& hist, const G2Options& options);

/// Value of the curve at zero delay (pulsed: the central peak).
double g2_at_zero(const G2Curve& curve);

/// Accepted delays t_x - t_xx for a coincidence, inclusive on both ends.
struct CoincidenceWindow {
  std::int64_t lo_ps = -1000;
  std::int64_t hi_ps = 1000;

  static CoincidenceWindow symmetric(std::int64_t half_width_ps) { return {-half_width_ps, half_width_ps}; }
};

enum class PortMode {
  AllPorts,        ///< every setting contributes its four outcome pairs
  TransmittedOnly  ///< one detector per arm: only the (a, b) outcome
};

struct CountsMetadata {
  CoincidenceWindow window{};
  PortMode ports = PortMode::AllPorts;
  std::uint64_t ambiguous_matches = 0;  ///< XX clicks that had >1 X candidate
  std::uint64_t settings = 0;
  std::uint64_t cycles = 0;
  bool flagged() const { return ambiguous_matches > 0; }
};

/// Coincidence counts per (biexciton outcome, exciton outcome) projector pair,
/// with the exposure (cycles analyzed) behind each entry. Entries with zero
/// exposure are absent.
class CountsTable {
 public:
  bool has(PolLabel xx, PolLabel x) const { return exposure_[idx(xx)][idx(x)] > 0.0; }
  std::uint64_t count(PolLabel xx, PolLabel x) const { return counts_[idx(xx)][idx(x)]; }
  double exposure(PolLabel xx, PolLabel x) const { return exposure_[idx(xx)][idx(x)]; }
  /// count / exposure
  double rate(PolLabel xx, PolLabel x) const;

  void add(PolLabel xx, PolLabel x, std::uint64_t count, double exposure);
  void set(PolLabel xx, PolLabel x, std::uint64_t count, double exposure);

  struct Entry {
    PolLabel xx;
    PolLabel x;
    std::uint64_t count;
    double exposure;
  };
  /// Present entries in (H,V,D,A,R,L) x (H,V,D,A,R,L) order.
  std::vector<Entry> entries() const;
  std::size_t size() const { return entries().size(); }
  std::uint64_t total() const;

  /// Adds the counts, exposures and metadata tallies of a table built with
  /// the same window and port mode.
  CountsTable& merge(const CountsTable& other);

  CountsMetadata meta;

  friend bool operator==(const CountsTable& a, const CountsTable& b) {
    return a.counts_ == b.counts_ && a.exposure_ == b.exposure_;
  }

 private:
  static std::size_t idx(PolLabel p) { return static_cast<std::size_t>(p); }
  std::array<std::array<std::uint64_t, 6>, 6> counts_{};
  std::array<std::array<double, 6>, 6> exposure_{};
};

/// Matches biexciton and exciton clicks of each setting greedily in time
/// order (each click used once, earliest partner first) and accumulates the
/// table.
CountsTable coincidence_counts(const std::vector<SettingRun>& runs, const CoincidenceWindow& window,
                               PortMode ports = PortMode::AllPorts);

/// Degrees of correlation in the linear, diagonal and circular bases from
/// the co- and cross-polarized rates of a table.
DegreesOfCorrelation correlations_from_counts(const CountsTable& table);

}  // namespace qdent
