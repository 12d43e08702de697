#include "qdent/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "qdent/analysis.hpp"
#include "qdent/cascade_sim.hpp"
#include "qdent/charge_dynamics.hpp"
#include "qdent/correlator.hpp"
#include "qdent/error.hpp"
#include "qdent/io.hpp"
#include "qdent/parallel.hpp"
#include "qdent/timetag.hpp"
#include "qdent/tomography.hpp"

namespace qdent::cli {

namespace {

namespace fs = std::filesystem;
using io::json;

constexpr double kPi = std::numbers::pi;

double parse_number(const std::string& s, const std::string& what) {
  const std::string t = s;
  if (t == "inf" || t == "infinity") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("invalid number '" + s + "' in " + what);
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_number(part, what));
  require(!out.empty(), what + " must not be empty");
  return out;
}

/// "lo:hi:n" (linear, or log-spaced with `log`) or a comma list.
std::vector<double> parse_grid(const std::string& s, bool log, const std::string& what) {
  const auto parts = split(s, ':');
  if (parts.size() == 1) return parse_list(s, what);
  require(parts.size() == 3, what + " must be lo:hi:n or a comma list");
  const double lo = parse_number(parts[0], what), hi = parse_number(parts[1], what);
  const double n = parse_number(parts[2], what);
  require(n >= 2 && n == std::floor(n) && n <= 100000, what + ": point count must be an integer in [2, 100000]");
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, what + ": need lo < hi");
  if (log) require(lo > 0.0, what + ": log grid needs lo > 0");
  std::vector<double> out;
  const int count = static_cast<int>(n);
  for (int k = 0; k < count; ++k) {
    const double f = static_cast<double>(k) / (count - 1);
    out.push_back(log ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))) : lo + f * (hi - lo));
  }
  return out;
}

// Config files: "key = value" lines, optionally grouped under [sections].
// Section names only organize the file; every key is the long name of an
// option of the chosen subcommand.
std::vector<std::string> config_args(const fs::path& file) {
  const std::string text = io::read_text(file);
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw FormatError(file.string(), e.line(), e.message());
  }
  std::vector<std::string> out;
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      out.push_back("--" + key + "=" + node.data());
      continue;
    }
    for (const auto& [k, v] : node) {
      if (!v.empty()) throw FormatError(file.string(), 0, "nested section '" + key + "." + k + "'");
      out.push_back("--" + k + "=" + v.data());
    }
  }
  return out;
}

/// Splices the options of `--config FILE` in front of the command-line
/// options, which therefore take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> rest;
  std::optional<std::string> config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config") {
      require(i + 1 < args.size(), "--config needs a file");
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  std::vector<std::string> out{args[0]};
  if (config) {
    const auto extra = config_args(*config);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

/// Resolved option values of a subcommand, sorted by name, excluding the
/// options that do not change results (output location, worker count).
std::string canonical_options(const CLI::App* sub) {
  std::map<std::string, std::string> kv;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "--out" || name == "--workers") continue;
    kv[name] = opt->count() ? opt->results().back() : opt->get_default_str();
  }
  std::string s = sub->get_name() + "\n";
  for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
  return s;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  double fss = 0.0;
  double phase_pi = 0.0;
  double t_x = 1.0;
  double t_xx = 0.5;
  std::uint64_t cycles = 0;
  std::string settings = "tomo36";
  bool cw = false;
  double rep = 25.0;
  double cw_interval = 25.0;
  double capture_e = 0.0;
  double capture_h = 0.0;
  double leak = 0.0;
  double beta = 0.0;
  double efficiency = 0.5;
  double dark_hz = 0.0;
  double jitter_ps = 0.0;
  std::uint64_t seed = 1;
  std::string out;
  unsigned workers = 1;
};

void add_simulate(CLI::App& app, SimulateArgs& a) {
  auto* s = app.add_subcommand("simulate", "Simulate cascade emission and write one PTTG stream per setting");
  s->add_option("--fss", a.fss, "Fine-structure splitting (ueV)")->capture_default_str();
  s->add_option("--phase-origin-pi", a.phase_pi, "VV phase at zero delay, in units of pi")->capture_default_str();
  s->add_option("--lifetime-x", a.t_x, "Exciton lifetime (ns)")->capture_default_str();
  s->add_option("--lifetime-xx", a.t_xx, "Biexciton lifetime (ns)")->capture_default_str();
  s->add_option("--cycles", a.cycles, "Excitation cycles per setting")->required()->check(CLI::Range(
      std::uint64_t{1}, std::uint64_t{1} << 40));
  s->add_option("--settings", a.settings, "corr3, bases9, tomo16 or tomo36")->capture_default_str();
  s->add_flag("--cw", a.cw, "Continuous-wave excitation instead of pulsed");
  s->add_option("--rep-period", a.rep, "Pulsed repetition period (ns)")->capture_default_str();
  s->add_option("--cw-interval", a.cw_interval, "Mean CW re-excitation interval (ns)")->capture_default_str();
  s->add_option("--capture-e", a.capture_e, "Electron capture rate during the exciton lifetime (1/ns)")
      ->capture_default_str();
  s->add_option("--capture-h", a.capture_h, "Hole capture rate during the exciton lifetime (1/ns)")
      ->capture_default_str();
  s->add_option("--spectral-leak", a.leak, "Trion photon leak through the exciton filter")->capture_default_str();
  s->add_option("--beta", a.beta, "White background fraction")->capture_default_str();
  s->add_option("--efficiency", a.efficiency, "Detection efficiency of every channel")->capture_default_str();
  s->add_option("--dark-rate", a.dark_hz, "Dark count rate per channel (1/s)")->capture_default_str();
  s->add_option("--jitter-ps", a.jitter_ps, "Gaussian timing jitter sigma (ps)")->capture_default_str();
  s->add_option("--seed", a.seed, "Random seed")->capture_default_str();
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--workers", a.workers, "Worker threads (0 = all cores)")->capture_default_str();
}

json emitter_json(const EmitterConfig& c) {
  return {{"fss_uev", c.fss_uev},
          {"phase_origin_rad", c.phase_origin_rad},
          {"t_xx_ns", c.t_xx_ns},
          {"t_x_ns", c.t_x_ns},
          {"rep_period_ns", c.rep_period_ns ? json(*c.rep_period_ns) : json(nullptr)},
          {"cw_mean_interval_ns", c.cw_mean_interval_ns},
          {"electron_capture_rate", c.electron_capture_rate},
          {"hole_capture_rate", c.hole_capture_rate},
          {"spectral_leak", c.spectral_leak},
          {"background_beta", c.background_beta},
          {"detector_efficiency", c.detector_efficiency},
          {"dark_rate_per_ns", c.dark_rate_per_ns},
          {"jitter_sigma_ns", c.jitter_sigma_ns},
          {"seed", c.seed}};
}

int cmd_simulate(const SimulateArgs& a, const CLI::App* sub, std::ostream& out) {
  EmitterConfig cfg;
  cfg.fss_uev = a.fss;
  cfg.phase_origin_rad = a.phase_pi * kPi;
  cfg.t_x_ns = a.t_x;
  cfg.t_xx_ns = a.t_xx;
  if (a.cw) cfg.rep_period_ns.reset();
  else cfg.rep_period_ns = a.rep;
  cfg.cw_mean_interval_ns = a.cw_interval;
  cfg.electron_capture_rate = a.capture_e;
  cfg.hole_capture_rate = a.capture_h;
  cfg.spectral_leak = a.leak;
  cfg.background_beta = a.beta;
  cfg.detector_efficiency.fill(a.efficiency);
  cfg.dark_rate_per_ns.fill(a.dark_hz * 1e-9);
  cfg.jitter_sigma_ns = a.jitter_ps * 1e-3;
  cfg.seed = a.seed;
  cfg.validate();
  const auto settings = settings_preset(a.settings);

  const fs::path dir(a.out);
  ensure_dir(dir);
  ExperimentOptions opts;
  opts.workers = resolve_workers(a.workers);
  json entries = json::array();
  std::uint64_t total_tags = 0;
  for (std::size_t s = 0; s < settings.size(); ++s) {
    const SettingRun run = run_setting(cfg, settings[s], s, a.cycles, opts);
    const std::string file = fmt::format("{:02d}_{}.pttg", s, run.setting.name());
    write_pttg(dir / file, run.tags);
    std::array<std::uint64_t, 4> per_channel{};
    for (const TimeTag& t : run.tags) ++per_channel[t.channel];
    const ChannelMap& ch = run.setting.channels;
    entries.push_back({{"id", s},
                       {"name", run.setting.name()},
                       {"xx", std::string(1, to_char(run.setting.xx))},
                       {"x", std::string(1, to_char(run.setting.x))},
                       {"channels", {ch.xx_co, ch.xx_cross, ch.x_co, ch.x_cross}},
                       {"file", file},
                       {"cycles", run.cycles},
                       {"interrupted", run.interrupted},
                       {"duration_ns", run.duration_ns},
                       {"tags", run.tags.size()},
                       {"tags_per_channel", per_channel}});
    total_tags += run.tags.size();
  }
  const std::string canon = canonical_options(sub);
  const json manifest = {{"format", "qdent-simulation"},
                         {"version", 1},
                         {"config_hash", io::hex64(io::fnv1a64(canon))},
                         {"seed", cfg.seed},
                         {"settings_preset", a.settings},
                         {"cycles_per_setting", a.cycles},
                         {"emitter", emitter_json(cfg)},
                         {"settings", entries}};
  io::write_text(dir / "manifest.json", dump(manifest));
  out << fmt::format("wrote {} streams ({} tags) and manifest.json to {}\n", settings.size(), total_tags, dir.string());
  return 0;
}

// ------------------------------------------------------- manifest reading

struct Simulation {
  fs::path dir;
  std::optional<double> rep_period_ns;
  std::vector<json> settings;
};

Simulation read_manifest(const fs::path& path) {
  const std::string src = path.string();
  const json j = io::parse_json(io::read_text(path), src);
  try {
    if (j.at("format").get<std::string>() != "qdent-simulation") throw FormatError(src, 0, "not a simulation manifest");
    Simulation sim;
    sim.dir = path.parent_path();
    const json& rep = j.at("emitter").at("rep_period_ns");
    if (!rep.is_null()) sim.rep_period_ns = rep.get<double>();
    for (const json& s : j.at("settings")) sim.settings.push_back(s);
    if (sim.settings.empty()) throw FormatError(src, 0, "manifest lists no settings");
    return sim;
  } catch (const json::exception& e) {
    throw FormatError(src, 0, e.what());
  }
}

SettingRun load_run(const Simulation& sim, std::size_t i) {
  const json& s = sim.settings[i];
  try {
    const auto ch = s.at("channels").get<std::vector<unsigned>>();
    if (ch.size() != 4) throw InvalidInput("manifest setting needs 4 channels");
    ChannelMap map{static_cast<std::uint8_t>(ch[0]), static_cast<std::uint8_t>(ch[1]), static_cast<std::uint8_t>(ch[2]),
                   static_cast<std::uint8_t>(ch[3])};
    SettingRun run;
    run.setting = AnalyzerSetting(parse_label(s.at("xx").get<std::string>()), parse_label(s.at("x").get<std::string>()), map);
    run.setting_id = static_cast<std::uint8_t>(s.at("id").get<unsigned>());
    run.cycles = s.at("cycles").get<std::uint64_t>();
    run.interrupted = s.at("interrupted").get<std::uint64_t>();
    run.duration_ns = s.at("duration_ns").get<double>();
    run.tags = read_pttg(sim.dir / s.at("file").get<std::string>()).tags;
    return run;
  } catch (const json::exception& e) {
    throw FormatError((sim.dir / "manifest.json").string(), 0, e.what());
  }
}

CoincidenceWindow default_window(const Simulation& sim) {
  if (sim.rep_period_ns) return CoincidenceWindow::symmetric(std::llround(*sim.rep_period_ns * 1000.0 / 2.0) - 1);
  return CoincidenceWindow{};
}

CoincidenceWindow parse_window(const std::string& s) {
  const auto v = parse_list(s, "--window-ps");
  require(v.size() == 2, "--window-ps needs lo,hi");
  return {std::llround(v[0]), std::llround(v[1])};
}

// ---------------------------------------------------------------- correlate

struct CorrelateArgs {
  std::string manifest;
  std::string out;
  std::string window;
  double gate_ns = 0.0;
  std::string ports = "all";
  bool histogram = false;
  std::size_t hist_setting = 0;
  std::string hist_channels = "0,2";
  std::int64_t bin_ps = 100;
  std::string range_ps;
  std::size_t shards = 1;
  std::size_t side_peaks = 6;
  unsigned workers = 1;
};

void add_correlate(CLI::App& app, CorrelateArgs& a) {
  auto* s = app.add_subcommand("correlate", "Coincidence tables, correlations and g2 histograms from simulated streams");
  s->add_option("--manifest", a.manifest, "manifest.json written by simulate")->required()->check(CLI::ExistingFile);
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--window-ps", a.window, "Coincidence delay window lo,hi in ps (default: one pulse period)");
  s->add_option("--gate-ns", a.gate_ns, "Keep only delays up to this gate (ns)")->check(CLI::PositiveNumber);
  s->add_option("--ports", a.ports, "all or transmitted")->check(CLI::IsMember({"all", "transmitted"}))
      ->capture_default_str();
  s->add_flag("--histogram", a.histogram, "Also write a cross-correlation histogram and g2 curve");
  s->add_option("--hist-setting", a.hist_setting, "Setting index for the histogram")->capture_default_str();
  s->add_option("--hist-channels", a.hist_channels, "Start,stop channels for the histogram")->capture_default_str();
  s->add_option("--bin-ps", a.bin_ps, "Histogram bin width (ps)")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--range-ps", a.range_ps, "Histogram range min,max in ps (default: +-8 periods)");
  s->add_option("--shards", a.shards, "Time shards for the histogram")->check(CLI::Range(1, 4096))->capture_default_str();
  s->add_option("--side-peaks", a.side_peaks, "Side peaks for pulsed g2 normalization")->capture_default_str();
  s->add_option("--workers", a.workers, "Worker threads (0 = all cores)")->capture_default_str();
}

int cmd_correlate(const CorrelateArgs& a, std::ostream& out) {
  const Simulation sim = read_manifest(a.manifest);
  CoincidenceWindow window = a.window.empty() ? default_window(sim) : parse_window(a.window);
  if (a.gate_ns > 0.0) window.hi_ps = std::min(window.hi_ps, static_cast<std::int64_t>(std::llround(a.gate_ns * 1000.0)));
  const PortMode ports = a.ports == "all" ? PortMode::AllPorts : PortMode::TransmittedOnly;
  const auto ch = parse_list(a.hist_channels, "--hist-channels");
  require(ch.size() == 2 && ch[0] >= 0 && ch[0] < 4 && ch[1] >= 0 && ch[1] < 4, "--hist-channels needs two channels in 0..3");
  require(!a.histogram || a.hist_setting < sim.settings.size(), "--hist-setting out of range");
  HistogramAxis axis;
  if (a.histogram) {
    std::int64_t lo, hi;
    if (!a.range_ps.empty()) {
      const auto r = parse_list(a.range_ps, "--range-ps");
      require(r.size() == 2, "--range-ps needs min,max");
      lo = std::llround(r[0]);
      hi = std::llround(r[1]);
    } else {
      const std::int64_t span = sim.rep_period_ns ? std::llround(*sim.rep_period_ns * 8000.0) : 50000;
      lo = -span;
      hi = span;
    }
    axis = HistogramAxis(a.bin_ps, lo, hi);
  }
  const fs::path dir(a.out);
  ensure_dir(dir);

  CountsTable table;
  table.meta.window = window;
  table.meta.ports = ports;
  for (std::size_t i = 0; i < sim.settings.size(); ++i) {
    const SettingRun run = load_run(sim, i);
    table.merge(coincidence_counts({run}, window, ports));
    if (a.histogram && i == a.hist_setting) {
      const Histogram h = cross_correlate_sharded(run.tags, static_cast<std::uint8_t>(ch[0]),
                                                  static_cast<std::uint8_t>(ch[1]), axis, a.shards,
                                                  resolve_workers(a.workers));
      io::write_text(dir / "histogram.csv", io::histogram_to_csv(h));
      io::write_text(dir / "histogram.json", dump(io::histogram_to_json(h)));
      G2Options g;
      g.mode = sim.rep_period_ns ? G2Mode::Pulsed : G2Mode::Cw;
      g.rep_period_ps = sim.rep_period_ns ? std::llround(*sim.rep_period_ns * 1000.0) : 0;
      g.side_peaks = a.side_peaks;
      const G2Curve curve = normalize_g2(h, g);
      io::write_text(dir / "g2.csv", io::g2_to_csv(curve));
      io::PlotOptions po;
      po.title = fmt::format("g2, setting {} channels {}-{}", run.setting.name(), ch[0], ch[1]);
      po.x_label = "delay (ns)";
      po.y_label = "g2";
      std::vector<double> x_ns;
      for (double d : curve.delay_ps) x_ns.push_back(d / 1000.0);
      io::write_text(dir / "g2.svg", io::svg_line_plot({{"g2", x_ns, curve.value}}, po));
    }
  }
  io::write_text(dir / "counts.csv", io::counts_to_csv(table));
  io::write_text(dir / "counts.json", dump(io::counts_to_json(table)));

  json report = {{"window_ps", {window.lo_ps, window.hi_ps}},
                 {"ports", a.ports},
                 {"coincidences", table.total()},
                 {"ambiguous_matches", table.meta.ambiguous_matches}};
  try {
    const DegreesOfCorrelation c = correlations_from_counts(table);
    report["degrees_of_correlation"] = {{"linear", c.linear}, {"diagonal", c.diagonal}, {"circular", c.circular}};
    report["fidelity_from_correlations"] = fidelity_from_correlations(c);
  } catch (const Error& e) {
    report["degrees_of_correlation"] = nullptr;
    report["note"] = e.what();
  }
  io::write_text(dir / "correlations.json", dump(report));
  out << dump(report);
  return 0;
}

// --------------------------------------------------------------------- tomo

struct TomoArgs {
  std::string counts;
  std::string method = "mle";
  int bootstrap = 0;
  std::uint64_t seed = 1;
  double target_phase_pi = 0.0;
  double background = 0.0;
  double phase_threshold = 0.05;
  std::string out;
  unsigned workers = 1;
};

void add_tomo(CLI::App& app, TomoArgs& a) {
  auto* s = app.add_subcommand("tomo", "Reconstruct the two-photon density matrix from a counts table");
  s->add_option("--counts", a.counts, "Counts table (.csv or .json)")->required()->check(CLI::ExistingFile);
  s->add_option("--method", a.method, "mle or linear")->check(CLI::IsMember({"mle", "linear"}))->capture_default_str();
  s->add_option("--bootstrap", a.bootstrap, "Bootstrap resamples (0 = off, else >= 100)")->capture_default_str();
  s->add_option("--seed", a.seed, "Bootstrap seed")->capture_default_str();
  s->add_option("--target-phase-pi", a.target_phase_pi, "Target (HH + e^{i phi} VV)/sqrt2, phi in units of pi")
      ->capture_default_str();
  s->add_option("--background-rate", a.background, "Flat background per unit exposure to subtract")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--phase-threshold", a.phase_threshold, "Minimum |coherence| for phase extraction")
      ->capture_default_str();
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--workers", a.workers, "Worker threads for the bootstrap (0 = all cores)")->capture_default_str();
}

int cmd_tomo(const TomoArgs& a, std::ostream& out) {
  require(a.bootstrap == 0 || a.bootstrap >= 100, "--bootstrap needs 0 or at least 100 resamples");
  CountsTable table = io::read_counts(a.counts);
  if (a.background > 0.0) table = subtract_flat_background(table, a.background);
  const TwoPhotonKet target = TwoPhotonKet::phi(a.target_phase_pi * kPi);
  const ReconstructionResult r = a.method == "mle" ? mle_reconstruct(table) : linear_reconstruct(table);
  const fs::path dir(a.out);
  ensure_dir(dir);
  io::write_text(dir / "rho.json", dump(io::density_to_json(r.rho)));

  json report = {{"method", to_string(r.method)},
                 {"converged", r.converged},
                 {"iterations", r.iterations},
                 {"log_likelihood", r.log_likelihood},
                 {"gradient_norm", r.gradient_norm},
                 {"min_eigenvalue", r.min_eigenvalue()},
                 {"negative_eigenvalue", r.negative_eigenvalue_flag()},
                 {"target_phase_rad", a.target_phase_pi * kPi},
                 {"fidelity", fidelity(r.rho, target)},
                 {"window_ps", {table.meta.window.lo_ps, table.meta.window.hi_ps}},
                 {"ports", table.meta.ports == PortMode::AllPorts ? "all" : "transmitted"},
                 {"background_rate", a.background},
                 {"total_counts", table.total()}};
  try {
    const double ph = extract_phase(r.rho, a.phase_threshold);
    report["phase_rad"] = ph;
    report["phase_pi"] = ph / kPi;
  } catch (const EstimationFailure& e) {
    report["phase_rad"] = nullptr;
    report["phase_note"] = e.what();
  }
  if (a.bootstrap > 0) {
    const BootstrapResult b = bootstrap_uncertainty(table, a.bootstrap, target, a.seed, resolve_workers(a.workers));
    report["bootstrap"] = {{"fidelity_mean", b.fidelity_mean},
                           {"fidelity_sigma", b.fidelity_sigma},
                           {"n_resamples", b.n_resamples},
                           {"n_failed", b.n_failed},
                           {"seed", a.seed}};
  }
  io::write_text(dir / "report.json", dump(report));
  out << dump(report);
  return 0;
}

// ---------------------------------------------------------------- gate-scan

struct GateArgs {
  double fss = 1.3;
  double lifetime = 1.0;
  double beta = 0.0;
  std::string gates = "0.5,1,1.5,2,3,5,inf";
  std::string manifest;
  std::string window;
  std::string threshold_grid;
  std::string out;
};

void add_gate_scan(CLI::App& app, GateArgs& a) {
  auto* s = app.add_subcommand("gate-scan", "Fidelity and retained fraction versus time gate");
  s->add_option("--fss", a.fss, "Fine-structure splitting (ueV)")->capture_default_str();
  s->add_option("--lifetime", a.lifetime, "Exciton lifetime (ns)")->capture_default_str();
  s->add_option("--beta", a.beta, "White background fraction")->capture_default_str();
  s->add_option("--gates", a.gates, "Comma list of gates in ns ('inf' = ungated)")->capture_default_str();
  s->add_option("--manifest", a.manifest, "Measure the scan on simulated streams instead of the closed form")
      ->check(CLI::ExistingFile);
  s->add_option("--window-ps", a.window, "Ungated coincidence window lo,hi in ps (with --manifest)");
  s->add_option("--threshold-grid", a.threshold_grid, "Also scan ungated fidelity over FSS values lo:hi:n");
  s->add_option("--out", a.out, "Output directory (default: CSV on standard output)");
}

int cmd_gate_scan(const GateArgs& a, std::ostream& out) {
  const auto gates = parse_list(a.gates, "--gates");
  GateScan scan;
  if (a.manifest.empty()) {
    scan = gate_scan(a.fss, a.lifetime, gates, a.beta);
  } else {
    const Simulation sim = read_manifest(a.manifest);
    const CoincidenceWindow w = a.window.empty() ? default_window(sim) : parse_window(a.window);
    std::vector<SettingRun> runs;
    for (std::size_t i = 0; i < sim.settings.size(); ++i) runs.push_back(load_run(sim, i));
    scan = gate_scan_simulated(runs, gates, w);
  }
  std::optional<ThresholdScan> thr;
  if (!a.threshold_grid.empty()) thr = threshold_scan(parse_grid(a.threshold_grid, false, "--threshold-grid"), a.lifetime, a.beta);
  if (a.out.empty()) {
    out << io::gate_scan_to_csv(scan);
    if (thr) out << io::threshold_to_csv(*thr);
    return 0;
  }
  const fs::path dir(a.out);
  ensure_dir(dir);
  io::write_text(dir / "gate_scan.csv", io::gate_scan_to_csv(scan));
  if (thr) io::write_text(dir / "threshold.csv", io::threshold_to_csv(*thr));
  out << "wrote gate_scan.csv" << (thr ? " and threshold.csv" : "") << " to " << dir.string() << "\n";
  return 0;
}

// ------------------------------------------------------------- charge-sweep

struct ChargeArgs {
  std::string axis = "secondary";
  std::string grid = "0:8:81";
  bool log = false;
  PumpConfig pump;
  RadiativeRates radiative;
  bool sequential = false;
  std::string out;
  unsigned workers = 1;
};

void add_charge_sweep(CLI::App& app, ChargeArgs& a) {
  auto* s = app.add_subcommand("charge-sweep", "Steady-state line intensities versus pump power");
  s->add_option("--axis", a.axis, "primary or secondary")->check(CLI::IsMember({"primary", "secondary"}))
      ->capture_default_str();
  s->add_option("--grid", a.grid, "Powers lo:hi:n or a comma list")->capture_default_str();
  s->add_flag("--log", a.log, "Log-spaced lo:hi:n grid");
  s->add_option("--primary", a.pump.primary_power, "Primary pump power")->capture_default_str();
  s->add_option("--secondary", a.pump.secondary_power, "Secondary pump power")->capture_default_str();
  s->add_option("--k-e", a.pump.k_e, "Electron capture per unit primary power (1/ns)")->capture_default_str();
  s->add_option("--k-h-primary", a.pump.k_h_primary, "Hole capture per unit primary power (1/ns)")
      ->capture_default_str();
  s->add_option("--k-h-secondary", a.pump.k_h_secondary, "Hole capture per unit secondary power (1/ns)")
      ->capture_default_str();
  s->add_option("--gamma-x", a.radiative.x, "X radiative rate (1/ns)")->capture_default_str();
  s->add_option("--gamma-x-plus", a.radiative.x_plus, "X+ radiative rate (1/ns)")->capture_default_str();
  s->add_option("--gamma-x-minus", a.radiative.x_minus, "X- radiative rate (1/ns)")->capture_default_str();
  s->add_option("--gamma-xx", a.radiative.xx, "XX radiative rate (1/ns)")->capture_default_str();
  s->add_flag("--sequential", a.sequential, "Sequential carrier capture into XX instead of pair capture");
  s->add_option("--out", a.out, "Output directory")->required();
  s->add_option("--workers", a.workers, "Worker threads (0 = all cores)")->capture_default_str();
}

int cmd_charge_sweep(const ChargeArgs& a, std::ostream& out) {
  const SweepAxis axis = parse_sweep_axis(a.axis);
  const auto grid = parse_grid(a.grid, a.log, "--grid");
  const PairCapture pair = a.sequential ? PairCapture::Sequential : PairCapture::Correlated;
  const SweepTable t = pump_sweep(a.pump, axis, grid, a.radiative, pair, resolve_workers(a.workers));
  const fs::path dir(a.out);
  ensure_dir(dir);
  io::write_text(dir / "sweep.csv", io::sweep_to_csv(t));

  std::vector<io::PlotSeries> series;
  for (Line l : kAllLines) {
    io::PlotSeries ps{"I_" + to_string(l), t.power, {}};
    for (const auto& li : t.intensity) ps.y.push_back(li[l]);
    series.push_back(std::move(ps));
  }
  io::PlotOptions po;
  po.title = to_string(axis) + " pump sweep";
  po.x_label = to_string(axis) + " power (arb. u.)";
  po.y_label = "intensity (1/ns)";
  po.log_x = a.log;
  io::write_text(dir / "sweep.svg", io::svg_line_plot(series, po));

  json trends = json::object();
  for (Line l : kAllLines) trends["I_" + to_string(l)] = to_string(t.trend[static_cast<std::size_t>(l)]);
  json dominant = json::array();
  for (const auto& li : t.intensity) dominant.push_back(to_string(li.dominant()));
  json summary = {{"axis", to_string(axis)}, {"points", grid.size()}, {"trends", trends}, {"dominant_line", dominant}};
  if (axis == SweepAxis::Secondary) {
    const double lo = std::max(grid.front(), 1e-3 * std::max(grid.back(), 1e-300));
    try {
      const Crossover c = find_crossover(a.pump, a.radiative, lo, grid.back(), 41, 0.01, pair);
      summary["crossover"] = {{"lo", c.lo}, {"hi", c.hi}, {"estimate", c.estimate()}};
    } catch (const Error& e) {
      summary["crossover"] = nullptr;
      summary["crossover_note"] = e.what();
    }
  }
  io::write_text(dir / "summary.json", dump(summary));
  out << dump(summary);
  return 0;
}

// ------------------------------------------------------------------ fss-fit

struct FssArgs {
  std::string input;
  bool same_phase = false;
  std::string out;
};

void add_fss_fit(CLI::App& app, FssArgs& a) {
  auto* s = app.add_subcommand("fss-fit", "Fit the fine-structure splitting from polarization-resolved peak energies");
  s->add_option("input", a.input, "CSV with angle_deg,e_x_uev,e_xx_uev,sigma_uev")->required()->check(CLI::ExistingFile);
  s->add_flag("--same-phase", a.same_phase, "X and XX oscillate in phase");
  s->add_option("--out", a.out, "Write the fit JSON to this file");
}

int cmd_fss_fit(const FssArgs& a, std::ostream& out) {
  const PolarizationSeries series = io::series_from_csv(io::read_text(a.input), a.input);
  FssFitOptions o;
  o.same_phase = a.same_phase;
  const FssFit f = fit_fss(series, o);
  const json j = {{"fss_uev", f.fss},
                  {"fss_sigma_uev", f.fss_sigma},
                  {"axis_angle_deg", f.axis_angle_deg},
                  {"residual_rms_uev", f.residual_rms},
                  {"offset_x_uev", f.offset_x},
                  {"offset_xx_uev", f.offset_xx},
                  {"points", series.angles_deg.size()}};
  if (!a.out.empty()) io::write_text(a.out, dump(j));
  out << dump(j);
  return 0;
}

// -------------------------------------------------------------------- stats

struct StatsArgs {
  std::string input;
  std::size_t min_count = 2;
  std::string out;
};

void add_stats(CLI::App& app, StatsArgs& a) {
  auto* s = app.add_subcommand("stats", "Per-sample mean and standard deviation of the FSS");
  s->add_option("input", a.input, "Sample CSV (sample_id,thickness_nm,temp_c,udmhy,e_x_mev,fss_uev)")
      ->required()->check(CLI::ExistingFile);
  s->add_option("--min-count", a.min_count, "Groups with fewer dots are flagged")->capture_default_str();
  s->add_option("--out", a.out, "Write the table to this file");
}

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto records = io::samples_from_csv(io::read_text(a.input), a.input);
  const std::string csv = io::group_stats_to_csv(group_stats(records, a.min_count));
  if (!a.out.empty()) io::write_text(a.out, csv);
  out << csv;
  return 0;
}

void report_error(std::ostream& err, const char* kind, const std::string& message, int code,
                  const FormatError* fe = nullptr) {
  json j = {{"error", kind}, {"message", message}, {"exit_code", code}};
  if (fe) {
    j["file"] = fe->file();
    j["offset"] = fe->offset();
    j["reason"] = fe->reason();
  }
  err << j.dump() << "\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entangled-photon cascade simulator and analysis toolkit", "qdent"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateArgs sim;
  CorrelateArgs cor;
  TomoArgs tomo;
  GateArgs gate;
  ChargeArgs charge;
  FssArgs fss;
  StatsArgs stats;
  add_simulate(app, sim);
  add_correlate(app, cor);
  add_tomo(app, tomo);
  add_gate_scan(app, gate);
  add_charge_sweep(app, charge);
  add_fss_fit(app, fss);
  add_stats(app, stats);

  try {
    std::vector<std::string> argv = expand_config(args);
    std::reverse(argv.begin(), argv.end());
    try {
      app.parse(argv);
    } catch (const CLI::CallForHelp&) {
      const CLI::App* shown = &app;
      for (const CLI::App* s : app.get_subcommands()) shown = s;
      out << shown->help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      report_error(err, "invalid_input", e.what(), 2);
      return 2;
    }
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "simulate") return cmd_simulate(sim, sub, out);
    if (name == "correlate") return cmd_correlate(cor, out);
    if (name == "tomo") return cmd_tomo(tomo, out);
    if (name == "gate-scan") return cmd_gate_scan(gate, out);
    if (name == "charge-sweep") return cmd_charge_sweep(charge, out);
    if (name == "fss-fit") return cmd_fss_fit(fss, out);
    return cmd_stats(stats, out);
  } catch (const FormatError& e) {
    report_error(err, e.kind(), e.what(), e.exit_code(), &e);
    return e.exit_code();
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what(), e.exit_code());
    return e.exit_code();
  } catch (const std::exception& e) {
    report_error(err, "internal_error", e.what(), 1);
    return 1;
  }
}

}  // namespace qdent::cli
