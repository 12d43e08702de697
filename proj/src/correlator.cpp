#include "qdent/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdent/error.hpp"
#include "qdent/parallel.hpp"

namespace qdent {

HistogramAxis::HistogramAxis(std::int64_t width, std::int64_t range_min, std::int64_t range_max)
    : width_ps(width), min_ps(range_min), max_ps(range_max) {
  require(width > 0, "histogram bin width must be > 0");
  require(range_max > range_min, "histogram range must be non-empty");
  require((range_max - range_min) % width == 0, "histogram range must be a whole number of bins");
}

std::uint64_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Histogram& Histogram::merge(const Histogram& other) {
  require(axis.width_ps == other.axis.width_ps && axis.min_ps == other.axis.min_ps &&
              axis.max_ps == other.axis.max_ps,
          "cannot merge histograms with different axes");
  require(channel_a == other.channel_a && channel_b == other.channel_b,
          "cannot merge histograms of different channel pairs");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  singles_a += other.singles_a;
  singles_b += other.singles_b;
  if (other.first_ps) {
    first_ps = first_ps ? std::min(*first_ps, *other.first_ps) : *other.first_ps;
    last_ps = last_ps ? std::max(*last_ps, *other.last_ps) : *other.last_ps;
  }
  return *this;
}

namespace {

Histogram empty_histogram(std::uint8_t a, std::uint8_t b, const HistogramAxis& axis) {
  require(axis.width_ps > 0, "histogram axis not initialized");
  Histogram h;
  h.axis = axis;
  h.channel_a = a;
  h.channel_b = b;
  h.counts.assign(axis.bins(), 0);
  return h;
}

void note_span(Histogram& h, std::uint64_t t) {
  if (!h.first_ps) h.first_ps = t;
  h.last_ps = t;
}

// Bins every a time in (t_b - max, t_b - min] of a sorted container.
template <class Container>
void bin_partners(Histogram& h, const Container& a_times, std::int64_t t_b, bool autocorrelation) {
  const auto& ax = h.axis;
  auto lo = std::upper_bound(a_times.begin(), a_times.end(), t_b - ax.max_ps);
  auto hi = std::upper_bound(lo, a_times.end(), t_b - ax.min_ps);
  for (auto it = lo; it != hi; ++it) {
    const std::int64_t tau = t_b - *it;
    ++h.counts[static_cast<std::size_t>((tau - ax.min_ps) / ax.width_ps)];
  }
  // The b click itself sits in the a list at tau = 0.
  if (autocorrelation && ax.min_ps <= 0 && 0 < ax.max_ps) --h.counts[static_cast<std::size_t>(-ax.min_ps / ax.width_ps)];
}

}  // namespace

StreamingCorrelator::StreamingCorrelator(std::uint8_t channel_a, std::uint8_t channel_b, HistogramAxis axis)
    : hist_(empty_histogram(channel_a, channel_b, axis)) {}

void StreamingCorrelator::push(std::span<const TimeTag> tags) {
  for (const TimeTag& t : tags) push(t);
}

void StreamingCorrelator::push(const TimeTag& tag) {
  require(!finished_, "correlator already finished");
  const auto t = static_cast<std::int64_t>(tag.timestamp_ps);
  if (last_ && t < *last_) throw InvalidInput("stream not timestamp-sorted");
  last_ = t;
  settle(t);
  const bool is_a = tag.channel == hist_.channel_a;
  const bool is_b = tag.channel == hist_.channel_b;
  if (!is_a && !is_b) return;
  note_span(hist_, tag.timestamp_ps);
  if (is_a) {
    ++hist_.singles_a;
    a_times_.push_back(t);
  }
  if (is_b) {
    ++hist_.singles_b;
    pending_b_.push_back(t);
  }
  max_buffered_ = std::max(max_buffered_, a_times_.size() + pending_b_.size());
}

void StreamingCorrelator::settle(std::int64_t now) {
  // A pending b is complete once no future a can land at or before t_b - min.
  while (!pending_b_.empty() && pending_b_.front() - hist_.axis.min_ps < now) {
    bin_b(pending_b_.front());
    pending_b_.pop_front();
  }
  const std::int64_t earliest_b = pending_b_.empty() ? now : std::min(now, pending_b_.front());
  if (earliest_b == std::numeric_limits<std::int64_t>::max()) {
    a_times_.clear();
    return;
  }
  while (!a_times_.empty() && a_times_.front() <= earliest_b - hist_.axis.max_ps) a_times_.pop_front();
}

void StreamingCorrelator::bin_b(std::int64_t t_b) {
  bin_partners(hist_, a_times_, t_b, hist_.channel_a == hist_.channel_b);
}

Histogram StreamingCorrelator::finish() {
  require(!finished_, "correlator already finished");
  settle(std::numeric_limits<std::int64_t>::max());
  finished_ = true;
  return std::move(hist_);
}

Histogram cross_correlate(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                          const HistogramAxis& axis) {
  if (!is_time_sorted(stream)) throw InvalidInput("stream not timestamp-sorted");
  StreamingCorrelator c(channel_a, channel_b, axis);
  c.push(stream);
  return c.finish();
}

Histogram cross_correlate_shard(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                                const HistogramAxis& axis, std::uint64_t begin_ps, std::uint64_t end_ps) {
  if (!is_time_sorted(stream)) throw InvalidInput("stream not timestamp-sorted");
  Histogram h = empty_histogram(channel_a, channel_b, axis);
  auto at_or_after = [&](std::int64_t t) {
    if (t <= 0) return stream.begin();
    return std::lower_bound(stream.begin(), stream.end(), static_cast<std::uint64_t>(t),
                            [](const TimeTag& tag, std::uint64_t v) { return tag.timestamp_ps < v; });
  };
  const auto b0 = static_cast<std::int64_t>(begin_ps);
  const auto b1 = static_cast<std::int64_t>(end_ps);

  // Partner context: a clicks in (begin - max, end - min].
  std::vector<std::int64_t> a_times;
  for (auto it = at_or_after(b0 - axis.max_ps + 1); it != stream.end(); ++it) {
    const auto t = static_cast<std::int64_t>(it->timestamp_ps);
    if (t > b1 - 1 - axis.min_ps) break;
    if (it->channel == channel_a) a_times.push_back(t);
  }
  for (auto it = at_or_after(b0); it != stream.end() && it->timestamp_ps < end_ps; ++it) {
    const bool is_a = it->channel == channel_a;
    const bool is_b = it->channel == channel_b;
    if (!is_a && !is_b) continue;
    note_span(h, it->timestamp_ps);
    if (is_a) ++h.singles_a;
    if (is_b) {
      ++h.singles_b;
      bin_partners(h, a_times, static_cast<std::int64_t>(it->timestamp_ps), channel_a == channel_b);
    }
  }
  return h;
}

Histogram cross_correlate_sharded(std::span<const TimeTag> stream, std::uint8_t channel_a, std::uint8_t channel_b,
                                  const HistogramAxis& axis, std::size_t shards, unsigned workers) {
  require(shards >= 1, "shard count must be >= 1");
  if (!is_time_sorted(stream)) throw InvalidInput("stream not timestamp-sorted");
  if (stream.empty()) return cross_correlate(stream, channel_a, channel_b, axis);
  const std::uint64_t t0 = stream.front().timestamp_ps;
  const std::uint64_t t1 = stream.back().timestamp_ps + 1;
  const std::uint64_t span = t1 - t0;
  std::vector<std::uint64_t> edges(shards + 1);
  for (std::size_t i = 0; i <= shards; ++i)
    edges[i] = t0 + static_cast<std::uint64_t>((static_cast<unsigned __int128>(span) * i) / shards);
  std::vector<Histogram> parts(shards);
  parallel_for(shards, workers, [&](std::size_t i) {
    parts[i] = cross_correlate_shard(stream, channel_a, channel_b, axis, edges[i], edges[i + 1]);
  });
  Histogram out = std::move(parts[0]);
  for (std::size_t i = 1; i < shards; ++i) out.merge(parts[i]);
  return out;
}

G2Curve normalize_g2(const Histogram& hist, const G2Options& options) {
  if (hist.singles_a == 0 || hist.singles_b == 0)
    throw EstimationFailure("g2 normalization needs nonzero singles on both channels");
  const auto& ax = hist.axis;
  G2Curve curve;
  if (options.mode == G2Mode::Cw) {
    const double t_acq = static_cast<double>(hist.acquisition_ps());
    if (t_acq <= 0.0) throw EstimationFailure("g2 normalization needs a nonzero acquisition time");
    const double norm = static_cast<double>(hist.singles_a) * static_cast<double>(hist.singles_b) *
                        static_cast<double>(ax.width_ps) / t_acq;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      curve.delay_ps.push_back(ax.bin_center(i));
      curve.value.push_back(static_cast<double>(hist.counts[i]) / norm);
    }
    return curve;
  }

  require(options.rep_period_ps > 0, "pulsed normalization needs a repetition period");
  require(options.side_peaks >= 5, "pulsed normalization needs at least 5 side peaks");
  const std::int64_t rep = options.rep_period_ps;
  const auto floor_div = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };
  // Complete peaks: [k rep - rep/2, k rep + rep/2) inside the axis range.
  const std::int64_t half = rep / 2;
  const std::int64_t k_min = -floor_div(-(ax.min_ps + half), rep);
  const std::int64_t k_max = floor_div(ax.max_ps - (rep - half), rep);
  if (k_min > 0 || k_max < 0) throw EstimationFailure("histogram range does not contain the zero-delay peak");

  std::vector<double> area(static_cast<std::size_t>(k_max - k_min + 1), 0.0);
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    const double c = ax.bin_center(i);
    const auto k = static_cast<std::int64_t>(std::floor((c + static_cast<double>(half)) / static_cast<double>(rep)));
    if (k < k_min || k > k_max) continue;
    area[static_cast<std::size_t>(k - k_min)] += static_cast<double>(hist.counts[i]);
  }
  std::vector<std::int64_t> side;
  for (std::int64_t k = k_min; k <= k_max; ++k)
    if (k != 0) side.push_back(k);
  if (side.size() < options.side_peaks)
    throw EstimationFailure("only " + std::to_string(side.size()) + " complete side peaks, need " +
                            std::to_string(options.side_peaks));
  std::sort(side.begin(), side.end(), [](std::int64_t a, std::int64_t b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a < b;
  });
  double side_sum = 0.0;
  for (std::size_t i = 0; i < options.side_peaks; ++i) side_sum += area[static_cast<std::size_t>(side[i] - k_min)];
  const double side_mean = side_sum / static_cast<double>(options.side_peaks);
  if (side_mean <= 0.0) throw EstimationFailure("side peaks are empty; cannot normalize");
  for (std::int64_t k = k_min; k <= k_max; ++k) {
    curve.delay_ps.push_back(static_cast<double>(k * rep));
    curve.value.push_back(area[static_cast<std::size_t>(k - k_min)] / side_mean);
  }
  return curve;
}

double g2_at_zero(const G2Curve& curve) {
  if (curve.value.empty()) throw EstimationFailure("empty g2 curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.delay_ps.size(); ++i)
    if (std::abs(curve.delay_ps[i]) < std::abs(curve.delay_ps[best])) best = i;
  return curve.value[best];
}

double CountsTable::rate(PolLabel xx, PolLabel x) const {
  const double e = exposure(xx, x);
  if (e <= 0.0) throw EstimationFailure(std::string("counts table has no entry ") + to_char(xx) + to_char(x));
  return static_cast<double>(count(xx, x)) / e;
}

void CountsTable::add(PolLabel xx, PolLabel x, std::uint64_t count, double exposure) {
  require(std::isfinite(exposure) && exposure >= 0.0, "exposure must be >= 0");
  counts_[idx(xx)][idx(x)] += count;
  exposure_[idx(xx)][idx(x)] += exposure;
}

void CountsTable::set(PolLabel xx, PolLabel x, std::uint64_t count, double exposure) {
  require(std::isfinite(exposure) && exposure >= 0.0, "exposure must be >= 0");
  counts_[idx(xx)][idx(x)] = count;
  exposure_[idx(xx)][idx(x)] = exposure;
}

CountsTable& CountsTable::merge(const CountsTable& other) {
  require(meta.window.lo_ps == other.meta.window.lo_ps && meta.window.hi_ps == other.meta.window.hi_ps &&
              meta.ports == other.meta.ports,
          "cannot merge count tables built with different windows or port modes");
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      counts_[i][j] += other.counts_[i][j];
      exposure_[i][j] += other.exposure_[i][j];
    }
  meta.ambiguous_matches += other.meta.ambiguous_matches;
  meta.settings += other.meta.settings;
  meta.cycles += other.meta.cycles;
  return *this;
}

std::vector<CountsTable::Entry> CountsTable::entries() const {
  std::vector<Entry> out;
  for (PolLabel a : kAllLabels)
    for (PolLabel b : kAllLabels)
      if (has(a, b)) out.push_back({a, b, count(a, b), exposure(a, b)});
  return out;
}

std::uint64_t CountsTable::total() const {
  std::uint64_t t = 0;
  for (const auto& e : entries()) t += e.count;
  return t;
}

CountsTable coincidence_counts(const std::vector<SettingRun>& runs, const CoincidenceWindow& window,
                               PortMode ports) {
  require(window.hi_ps >= window.lo_ps, "coincidence window must satisfy lo <= hi");
  require(window.hi_ps > 0 || window.lo_ps < 0, "coincidence window must have nonzero width");
  CountsTable table;
  table.meta.window = window;
  table.meta.ports = ports;
  for (const SettingRun& run : runs) {
    if (!is_time_sorted(run.tags)) throw InvalidInput("setting " + run.setting.name() + ": stream not sorted");
    const ChannelMap& ch = run.setting.channels;
    const bool all = ports == PortMode::AllPorts;
    std::vector<std::int64_t> x_times;
    std::vector<std::uint8_t> x_channels;
    for (const TimeTag& t : run.tags)
      if (t.channel == ch.x_co || (all && t.channel == ch.x_cross)) {
        x_times.push_back(static_cast<std::int64_t>(t.timestamp_ps));
        x_channels.push_back(t.channel);
      }
    std::vector<char> used(x_times.size(), 0);
    std::uint64_t n[2][2] = {{0, 0}, {0, 0}};
    std::size_t j0 = 0;
    for (const TimeTag& t : run.tags) {
      if (!(t.channel == ch.xx_co || (all && t.channel == ch.xx_cross))) continue;
      const auto t_xx = static_cast<std::int64_t>(t.timestamp_ps);
      while (j0 < x_times.size() && x_times[j0] < t_xx + window.lo_ps) ++j0;
      std::size_t chosen = x_times.size();
      int candidates = 0;
      for (std::size_t j = j0; j < x_times.size() && x_times[j] <= t_xx + window.hi_ps && candidates < 2; ++j) {
        if (used[j]) continue;
        if (candidates++ == 0) chosen = j;
      }
      if (candidates > 1) ++table.meta.ambiguous_matches;
      if (chosen == x_times.size()) continue;
      used[chosen] = 1;
      ++n[t.channel == ch.xx_cross][x_channels[chosen] == ch.x_cross];
    }
    const double exposure = static_cast<double>(std::max<std::uint64_t>(run.cycles, 1));
    const PolLabel a[2] = {run.setting.xx, orthogonal(run.setting.xx)};
    const PolLabel b[2] = {run.setting.x, orthogonal(run.setting.x)};
    for (int i = 0; i < (all ? 2 : 1); ++i)
      for (int j = 0; j < (all ? 2 : 1); ++j) table.add(a[i], b[j], n[i][j], exposure);
    ++table.meta.settings;
    table.meta.cycles += run.cycles;
  }
  return table;
}

DegreesOfCorrelation correlations_from_counts(const CountsTable& table) {
  auto contrast = [&](PolLabel p) {
    const PolLabel q = orthogonal(p);
    const double co = table.rate(p, p) + table.rate(q, q);
    const double cross = table.rate(p, q) + table.rate(q, p);
    return degree_of_correlation(co, cross);
  };
  return {contrast(PolLabel::H), contrast(PolLabel::D), contrast(PolLabel::R)};
}

}  // namespace qdent
