#include "qdent/cascade_sim.hpp"

#include <algorithm>
#include <cmath>

#include "qdent/error.hpp"
#include "qdent/parallel.hpp"
#include "qdent/rng.hpp"

namespace qdent {

namespace {

std::uint64_t to_ps(double t_ns) {
  const double ps = std::round(t_ns * 1000.0);
  return ps <= 0.0 ? 0 : static_cast<std::uint64_t>(ps);
}

// Per-pair draw families inside the Emission stream.
constexpr std::uint32_t kSubPair = 0;
constexpr std::uint32_t kSubDetect = 1;

}  // namespace

void EmitterConfig::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  auto prob = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  require(std::isfinite(fss_uev) && fss_uev >= 0.0, "fss must be >= 0");
  require(std::isfinite(phase_origin_rad), "phase origin must be finite");
  require(std::isfinite(t_xx_ns) && t_xx_ns > 0.0, "biexciton lifetime must be > 0");
  require(std::isfinite(t_x_ns) && t_x_ns > 0.0, "exciton lifetime must be > 0");
  if (rep_period_ns) require(std::isfinite(*rep_period_ns) && *rep_period_ns > 0.0, "repetition period must be > 0");
  require(std::isfinite(cw_mean_interval_ns) && cw_mean_interval_ns > 0.0, "CW mean interval must be > 0");
  require(finite_nonneg(electron_capture_rate), "electron capture rate must be >= 0");
  require(finite_nonneg(hole_capture_rate), "hole capture rate must be >= 0");
  require(prob(spectral_leak), "spectral leak must lie in [0, 1]");
  require(prob(background_beta), "background beta must lie in [0, 1]");
  for (double e : detector_efficiency) require(prob(e), "detector efficiency must lie in [0, 1]");
  for (double d : dark_rate_per_ns) require(finite_nonneg(d), "dark rate must be >= 0");
  require(finite_nonneg(jitter_sigma_ns), "jitter sigma must be >= 0");
}

double EmitterConfig::interruption_probability() const {
  const double capture = electron_capture_rate + hole_capture_rate;
  return capture / (capture + 1.0 / t_x_ns);
}

AnalyzerSetting::AnalyzerSetting(PolLabel xx_label, PolLabel x_label, ChannelMap map)
    : xx(xx_label), x(x_label), channels(map) {
  const std::array<std::uint8_t, 4> ch{map.xx_co, map.xx_cross, map.x_co, map.x_cross};
  for (std::size_t i = 0; i < ch.size(); ++i) {
    require(ch[i] < 4, "analyzer channel ids must be < 4");
    for (std::size_t j = i + 1; j < ch.size(); ++j) require(ch[i] != ch[j], "analyzer channels must be distinct");
  }
}

std::string AnalyzerSetting::name() const { return {to_char(xx), to_char(x)}; }

std::vector<AnalyzerSetting> settings_preset(const std::string& name) {
  using P = PolLabel;
  std::vector<AnalyzerSetting> out;
  if (name == "corr3") {
    out = {{P::H, P::H}, {P::D, P::D}, {P::R, P::R}};
  } else if (name == "bases9") {
    for (P a : {P::H, P::D, P::R})
      for (P b : {P::H, P::D, P::R}) out.emplace_back(a, b);
  } else if (name == "tomo16") {
    const char* pairs[] = {"HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                           "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"};
    for (const char* p : pairs) out.emplace_back(parse_label(p[0]), parse_label(p[1]));
  } else if (name == "tomo36") {
    for (P a : kAllLabels)
      for (P b : kAllLabels) out.emplace_back(a, b);
  } else {
    throw InvalidInput("unknown settings preset '" + name + "' (expected corr3, bases9, tomo16 or tomo36)");
  }
  return out;
}

PairEvent sample_pair(const EmitterConfig& config, std::uint64_t cycle_index) {
  CounterRng rng(config.seed, StreamId::Emission, cycle_index, kSubPair);
  PairEvent ev;
  ev.cycle_index = cycle_index;
  ev.t_emit_xx_ns = rng.exponential(config.t_xx_ns);
  ev.tau_ns = rng.exponential(config.t_x_ns);
  ev.interrupted = rng.bernoulli(config.interruption_probability());
  return ev;
}

std::vector<TimeTag> detect(const PairEvent& pair, const AnalyzerSetting& setting, const EmitterConfig& config,
                            double cycle_start_ns, std::uint8_t setting_id) {
  CounterRng rng(config.seed, StreamId::Emission, pair.cycle_index, kSubDetect);
  const ChannelMap& ch = setting.channels;

  // Outcome index: bit 1 set -> biexciton photon in the cross port,
  // bit 0 set -> exciton photon in the cross port.
  int outcome = 0;
  bool x_emitted = true;
  if (pair.interrupted) {
    // Trion photon: unpolarized, and only visible if it leaks through the
    // exciton filter. The biexciton photon marginal is unpolarized anyway.
    outcome = (rng.bernoulli(0.5) ? 2 : 0) | (rng.bernoulli(0.5) ? 1 : 0);
    x_emitted = rng.bernoulli(config.spectral_leak);
  } else {
    const double phase = config.phase_origin_rad + fss_angular_frequency(config.fss_uev) * pair.tau_ns;
    const cplx vv = std::polar(1.0, phase);
    const auto a = basis_ket(setting.xx).amplitudes();
    const auto b = basis_ket(setting.x).amplitudes();
    const auto ap = basis_ket(orthogonal(setting.xx)).amplitudes();
    const auto bp = basis_ket(orthogonal(setting.x)).amplitudes();
    auto prob = [&](const Eigen::Vector2cd& u, const Eigen::Vector2cd& w) {
      // sqrt2 * <u w|psi>
      const cplx amp = std::conj(u(0)) * std::conj(w(0)) + vv * std::conj(u(1)) * std::conj(w(1));
      return (1.0 - config.background_beta) * 0.5 * std::norm(amp) + 0.25 * config.background_beta;
    };
    const double p[4] = {prob(a, b), prob(a, bp), prob(ap, b), prob(ap, bp)};
    const double u = rng.uniform() * (p[0] + p[1] + p[2] + p[3]);
    double acc = 0.0;
    outcome = 3;
    for (int k = 0; k < 4; ++k) {
      acc += p[k];
      if (u < acc) {
        outcome = k;
        break;
      }
    }
  }

  std::vector<TimeTag> tags;
  const std::uint8_t xx_channel = (outcome & 2) ? ch.xx_cross : ch.xx_co;
  const std::uint8_t x_channel = (outcome & 1) ? ch.x_cross : ch.x_co;
  const double t_xx = kEpochNs + cycle_start_ns + pair.t_emit_xx_ns;
  const double t_x = t_xx + pair.tau_ns;
  const bool xx_survives = rng.bernoulli(config.detector_efficiency[xx_channel]);
  const bool x_survives = rng.bernoulli(config.detector_efficiency[x_channel]);
  const double j_xx = config.jitter_sigma_ns > 0.0 ? config.jitter_sigma_ns * rng.normal() : 0.0;
  const double j_x = config.jitter_sigma_ns > 0.0 ? config.jitter_sigma_ns * rng.normal() : 0.0;
  if (xx_survives) tags.push_back({to_ps(t_xx + j_xx), xx_channel, setting_id});
  if (x_emitted && x_survives) tags.push_back({to_ps(t_x + j_x), x_channel, setting_id});
  if (tags.size() == 2 && tag_less(tags[1], tags[0])) std::swap(tags[0], tags[1]);
  return tags;
}

SettingRun run_setting(const EmitterConfig& config, const AnalyzerSetting& setting, std::size_t setting_index,
                       std::uint64_t cycles_per_setting, const ExperimentOptions& options) {
  config.validate();
  require(cycles_per_setting >= 1, "cycles per setting must be >= 1");
  require(setting_index < 256, "at most 256 analyzer settings fit the 8-bit setting id");
  require(options.block_cycles >= 1, "block size must be >= 1");
  const std::size_t s = setting_index;
  SettingRun run;
  run.setting = setting;
  run.setting_id = static_cast<std::uint8_t>(s);
  run.cycles = cycles_per_setting;
  const std::uint64_t base = s * cycles_per_setting;

  // Cycle start times. CW waits are drawn per cycle and prefix-summed
  // serially; pulsed cycles sit on the clock.
  std::vector<double> starts;
  double duration = 0.0;
  if (config.pulsed()) {
    duration = static_cast<double>(cycles_per_setting) * *config.rep_period_ns;
  } else {
    starts.resize(cycles_per_setting + 1);
    double t = 0.0;
    for (std::uint64_t k = 0; k <= cycles_per_setting; ++k) {
      starts[k] = t;
      if (k < cycles_per_setting) {
        CounterRng rng(config.seed, StreamId::CwWait, base + k);
        t += rng.exponential(config.cw_mean_interval_ns);
      }
    }
    duration = starts.back();
  }
  run.duration_ns = duration;

  const std::uint64_t blocks = (cycles_per_setting + options.block_cycles - 1) / options.block_cycles;
  std::vector<std::vector<TimeTag>> block_tags(blocks);
  std::vector<std::uint64_t> block_interrupted(blocks, 0);
  parallel_for(blocks, options.workers, [&](std::size_t b) {
    const std::uint64_t k0 = b * options.block_cycles;
    const std::uint64_t k1 = std::min(cycles_per_setting, k0 + options.block_cycles);
    auto& out = block_tags[b];
    out.reserve((k1 - k0) * 2);
    for (std::uint64_t k = k0; k < k1; ++k) {
      const double start = config.pulsed() ? static_cast<double>(k) * *config.rep_period_ns : starts[k];
      const double span = config.pulsed() ? *config.rep_period_ns : starts[k + 1] - starts[k];
      const PairEvent pair = sample_pair(config, base + k);
      if (pair.interrupted) ++block_interrupted[b];
      for (const TimeTag& t : detect(pair, run.setting, config, start, run.setting_id)) out.push_back(t);

      CounterRng dark(config.seed, StreamId::Darks, base + k);
      for (std::uint8_t c = 0; c < 4; ++c) {
        const double rate = config.dark_rate_per_ns[c];
        if (rate <= 0.0) continue;
        const std::uint64_t n = dark.poisson(rate * span);
        for (std::uint64_t i = 0; i < n; ++i)
          out.push_back({to_ps(kEpochNs + start + span * dark.uniform()), c, run.setting_id});
      }
    }
  });

  std::size_t total = 0;
  for (const auto& v : block_tags) total += v.size();
  run.tags.reserve(total);
  for (std::size_t b = 0; b < blocks; ++b) {
    run.tags.insert(run.tags.end(), block_tags[b].begin(), block_tags[b].end());
    run.interrupted += block_interrupted[b];
    std::vector<TimeTag>().swap(block_tags[b]);
  }
  std::sort(run.tags.begin(), run.tags.end(), tag_less);
  return run;
}

std::vector<SettingRun> run_experiment(const EmitterConfig& config, const std::vector<AnalyzerSetting>& settings,
                                       std::uint64_t cycles_per_setting, const ExperimentOptions& options) {
  config.validate();
  require(!settings.empty(), "at least one analyzer setting is required");
  require(settings.size() <= 256, "at most 256 analyzer settings fit the 8-bit setting id");
  std::vector<SettingRun> runs;
  runs.reserve(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s)
    runs.push_back(run_setting(config, settings[s], s, cycles_per_setting, options));
  return runs;
}

}  // namespace qdent
