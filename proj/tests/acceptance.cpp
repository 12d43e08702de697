// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "qdent/analysis.hpp"
#include "qdent/cascade_sim.hpp"
#include "qdent/charge_dynamics.hpp"
#include "qdent/cli.hpp"
#include "qdent/correlator.hpp"
#include "qdent/io.hpp"
#include "qdent/tomography.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace qdent;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, std::string what) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  }
  void note(std::string what) { lines.push_back("     " + what); }
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qdent_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int qdent_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << "qdent " << args.front() << " failed: " << err.str();
  return code;
}

std::string fixture(const char* name) { return std::string(QDENT_SOURCE_DIR) + "/fixtures/" + name; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Simulated fidelity follows 1/2 (1 + 1/(1 + x^2)).
Outcome dephasing_law() {
  Outcome o;
  const auto dir = scratch("dephasing");
  for (double s : {0.0, 1.3, 2.9, 5.0, 11.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string tag = fmt::format("S{}", s);
    const std::string sim = (dir / tag / "sim").string(), cor = (dir / tag / "cor").string();
    if (qdent_run({"simulate", "--fss", io::num(s), "--lifetime-x", "1", "--cycles", "1000000", "--settings", "corr3",
                   "--out", sim, "--workers", "0"}) != 0 ||
        qdent_run({"correlate", "--manifest", sim + "/manifest.json", "--out", cor}) != 0) {
      o.check(false, tag + ": pipeline failed");
      continue;
    }
    const double secs = seconds_since(t0);
    const auto report = io::parse_json(io::read_text(cor + "/correlations.json"), "correlations.json");
    const double f = report["fidelity_from_correlations"].get<double>();
    const double ref = dephased_fidelity(s, 1.0);
    o.check(std::abs(f - ref) <= 0.01 && secs < 60.0,
            fmt::format("S = {:>4} ueV: F_sim = {:.4f}, F_law = {:.4f}, |diff| = {:.4f} <= 0.01, {:.1f} s < 60 s", s, f,
                        ref, std::abs(f - ref), secs));
  }
  return o;
}

// 2. Calibrated time-gating scenario.
Outcome time_gating() {
  Outcome o;
  const double t_x = 1.863, gate = 3.0, fss = 0.607;
  const double inf = std::numeric_limits<double>::infinity();
  const GateResult ungated = gate_fidelity(fss, t_x, inf);
  const GateResult gated = gate_fidelity(fss, t_x, gate);
  o.check(std::abs(ungated.fidelity - 0.622) <= 0.005,
          fmt::format("S = {} ueV, T = {} ns: ungated F = {:.4f} within 0.622 +- 0.005", fss, t_x, ungated.fidelity));
  o.check(gated.fidelity - ungated.fidelity >= 0.08,
          fmt::format("gated F(3 ns) = {:.4f}, jump = {:.4f} >= 0.08", gated.fidelity,
                      gated.fidelity - ungated.fidelity));
  o.check(std::abs(gated.retained - 0.80) <= 0.02, fmt::format("retention = {:.4f} within 0.80 +- 0.02", gated.retained));

  EmitterConfig c;
  c.fss_uev = fss;
  c.t_x_ns = t_x;
  const auto runs = run_experiment(c, settings_preset("corr3"), 1'000'000, {0});
  const auto scan = gate_scan_simulated(runs, {gate, inf}, CoincidenceWindow{-12499, 12499});
  o.check(std::abs(scan.fidelity[0] - gated.fidelity) <= 0.01 && std::abs(scan.fidelity[1] - ungated.fidelity) <= 0.01,
          fmt::format("Monte Carlo (10^6 cycles): gated F = {:.4f}, ungated F = {:.4f}, both within 0.01 of the "
                      "closed form",
                      scan.fidelity[0], scan.fidelity[1]));
  o.check(std::abs(scan.retained[0] - 0.80) <= 0.02,
          fmt::format("Monte Carlo retention = {:.4f} within 0.80 +- 0.02", scan.retained[0]));
  o.note("qualitative reproduction of the reported 0.622 -> 0.738 gain; the model has no other");
  o.note("experimental noise sources, so the gated value is not expected to equal 0.738");
  return o;
}

// 3. Tomography round trip.
Outcome tomography() {
  Outcome o;
  {
    EmitterConfig c;
    c.phase_origin_rad = 0.41 * pi;
    const auto table = coincidence_counts(run_experiment(c, settings_preset("tomo36"), 1'000'000, {0}),
                                          CoincidenceWindow{-12499, 12499});
    const auto r = mle_reconstruct(table);
    const double phase = extract_phase(r.rho);
    const double f = fidelity(r.rho, TwoPhotonKet::phi(0.41 * pi));
    o.check(std::abs(phase / pi - 0.41) <= 0.02 && f >= 0.99,
            fmt::format("0.41 pi state, tomo36, 10^6 cycles: phase = {:.4f} pi (+- 0.02 pi), F = {:.5f} >= 0.99",
                        phase / pi, f));
  }
  std::mt19937_64 rng(20190611);
  const auto layout = layout_for(settings_preset("tomo36"));
  {
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto rho = testsupport::random_density(rng, 1 + i % 4);
      worst = std::max(worst, trace_distance(mle_reconstruct(expected_counts(rho, layout, 1e9)).rho, rho));
    }
    o.check(worst < 1e-4, fmt::format("1000 random states, exact counts: max trace distance = {:.2e} < 1e-4", worst));
  }
  {
    int bad = 0;
    double worst_eig = 1.0, worst_trace = 0.0, worst_herm = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto rho = testsupport::random_density(rng, 1 + i % 4);
      const auto clean = expected_counts(rho, layout, 5.0 + static_cast<double>(i % 50));
      CountsTable noisy;
      noisy.meta = clean.meta;
      for (const auto& e : clean.entries()) {
        std::poisson_distribution<std::uint64_t> p(std::max(static_cast<double>(e.count), 0.5));
        noisy.set(e.xx, e.x, p(rng), e.exposure);
      }
      if (noisy.total() == 0) continue;
      const auto m = mle_reconstruct(noisy).rho.matrix();
      const double eig = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd>(m).eigenvalues().minCoeff();
      const double tr = std::abs(m.trace().real() - 1.0) + std::abs(m.trace().imag());
      const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
      worst_eig = std::min(worst_eig, eig);
      worst_trace = std::max(worst_trace, tr);
      worst_herm = std::max(worst_herm, herm);
      bad += eig < DensityMatrix::kEigenTol || tr > DensityMatrix::kTraceTol || herm > DensityMatrix::kHermitianTol;
    }
    o.check(bad == 0, fmt::format("1000 noisy tables: {} invariant violations (min eigenvalue {:.1e}, trace err "
                                  "{:.1e}, Hermiticity err {:.1e})",
                                  bad, worst_eig, worst_trace, worst_herm));
  }
  return o;
}

// 4. Correlator against brute force.
Outcome correlator_oracle() {
  Outcome o;
  std::mt19937_64 rng(4);
  int mismatched_stream = 0, mismatched_shard = 0;
  std::size_t largest = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + rng() % 10000;
    largest = std::max(largest, n);
    const auto s = testsupport::random_stream(rng, n, 1 + rng() % 50'000'000, 4);
    const std::int64_t width = 1 + static_cast<std::int64_t>(rng() % 2000);
    const std::int64_t lo = -static_cast<std::int64_t>(rng() % 50) * width;
    const HistogramAxis axis(width, lo, lo + (1 + static_cast<std::int64_t>(rng() % 100)) * width);
    const std::uint8_t a = rng() % 4, b = rng() % 4;
    const auto ref = testsupport::brute_force_histogram(s, a, b, axis);

    StreamingCorrelator sc(a, b, axis);
    for (std::size_t pos = 0; pos < s.size();) {
      const std::size_t len = std::min<std::size_t>(s.size() - pos, 1 + rng() % 257);
      sc.push(std::span(s).subspan(pos, len));
      pos += len;
    }
    const Histogram streamed = sc.finish();
    const Histogram single = cross_correlate(s, a, b, axis);
    mismatched_stream += streamed.counts != ref || single.counts != ref;
    mismatched_shard += cross_correlate_sharded(s, a, b, axis, 1 + rng() % 16, 4) != single;
  }
  o.check(mismatched_stream == 0,
          fmt::format("streaming vs brute force: {} of 200 streams differ (largest {} tags)", mismatched_stream, largest));
  o.check(mismatched_shard == 0, fmt::format("shard-and-merge vs single pass: {} of 200 differ", mismatched_shard));
  return o;
}

// 5. Charge tuning.
Outcome charge_tuning() {
  Outcome o;
  const PumpConfig base;
  const RadiativeRates rad;
  std::vector<double> grid{0.0};
  for (int i = 0; i <= 60; ++i) grid.push_back(0.01 * std::pow(1e4, i / 60.0));
  const auto t = pump_sweep(base, SweepAxis::Secondary, grid, rad);
  const auto c = find_crossover(base, rad, 0.01, 100.0);
  o.check(t.intensity.front().dominant() == Line::XMinus && t.intensity.back().dominant() == Line::XPlus,
          fmt::format("secondary sweep: {} dominant at P2 = 0, {} dominant at P2 = 100",
                      to_string(t.intensity.front().dominant()), to_string(t.intensity.back().dominant())));
  o.check(t.trend[static_cast<std::size_t>(Line::XMinus)] == Trend::Decreasing &&
              t.trend[static_cast<std::size_t>(Line::XPlus)] == Trend::Increasing,
          fmt::format("I_X- {}, I_X+ {}", to_string(t.trend[static_cast<std::size_t>(Line::XMinus)]),
                      to_string(t.trend[static_cast<std::size_t>(Line::XPlus)])));
  o.check(c.hi / c.lo <= 1.01, fmt::format("neutral crossover bracketed in [{:.5f}, {:.5f}], ratio {:.5f} <= 1.01",
                                           c.lo, c.hi, c.hi / c.lo));
  std::size_t peak = 0;
  for (std::size_t i = 0; i < t.intensity.size(); ++i)
    if (t.intensity[i].neutral_share() > t.intensity[peak].neutral_share()) peak = i;
  const bool peak_brackets = peak > 0 && peak + 1 < t.power.size() && t.power[peak - 1] < c.estimate() &&
                             t.power[peak + 1] > c.estimate();
  o.check(peak_brackets, fmt::format("neutral stage: (I_X + I_XX) share peaks at P2 = {:.4f}, next to the crossover "
                                     "{:.4f}",
                                     t.power[peak], c.estimate()));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  double worst_null = 0.0, worst_residual = 0.0, worst_swap = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const CaptureRates cr{u(rng), u(rng)};
    const RadiativeRates g{u(rng), u(rng), u(rng), u(rng)};
    const auto pair = k % 2 ? PairCapture::Sequential : PairCapture::Correlated;
    const auto q = build_rate_matrix(cr, g, pair);
    const auto p = steady_state(q);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(q.matrix().transpose()), Eigen::ComputeFullV);
    Eigen::VectorXd v = svd.matrixV().col(kChargeStates - 1);
    v /= v.sum();
    for (int i = 0; i < kChargeStates; ++i) worst_null = std::max(worst_null, std::abs(p.p[i] - v(i)));
    worst_residual = std::max(worst_residual, stationarity_residual(p, q));

    const auto s = steady_state(build_rate_matrix(CaptureRates{cr.hole, cr.electron},
                                                  RadiativeRates{g.x, g.x_minus, g.x_plus, g.xx}, pair));
    using S = ChargeState;
    for (auto [x, y] : {std::pair{S::XMinus, S::XPlus}, {S::XPlus, S::XMinus}, {S::E, S::H}, {S::H, S::E}})
      worst_swap = std::max(worst_swap, std::abs(p[x] - s[y]));
  }
  o.check(worst_null < 1e-10 && worst_residual < 1e-10,
          fmt::format("1000 configs vs SVD null space: max |diff| = {:.1e}, max residual = {:.1e} (< 1e-10)",
                      worst_null, worst_residual));
  o.check(worst_swap < 1e-12,
          fmt::format("charge symmetry swap: max |diff| = {:.1e} (< 1e-12, solver rounding)", worst_swap));
  return o;
}

// 6. FSS statistics fixtures and fit.
Outcome fss_statistics() {
  Outcome o;
  const auto stats = group_stats(io::samples_from_csv(io::read_text(fixture("table1_fss.csv")), "table1_fss.csv"));
  const auto find = [&](const std::string& id) -> const GroupStats* {
    for (const auto& g : stats)
      if (g.sample_id == id) return &g;
    return nullptr;
  };
  for (auto [id, mean, sd] : {std::tuple{"S3", 3.5, 1.6}, {"S9", 2.1, 1.2}}) {
    const GroupStats* g = find(id);
    const bool ok = g && g->std && std::abs(g->mean - mean) < 5e-5 && std::abs(*g->std - sd) < 5e-5;
    o.check(ok, g && g->std ? fmt::format("{}: {:.4f} +- {:.4f} ueV (n = {}), reported {} +- {}", id, g->mean, *g->std,
                                          g->count, mean, sd)
                            : fmt::format("{}: group missing", id));
  }
  const auto fit = fit_fss(io::series_from_csv(io::read_text(fixture("fss_series_11uev.csv")), "fss_series_11uev.csv"));
  o.check(std::abs(fit.fss - 11.0) <= 0.01, fmt::format("noiseless 11 ueV series: fit = {:.6f} ueV", fit.fss));
  int covered = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto f = fit_fss(synthesize_series(3.5, 20.0, analyzer_angles(12), 1.0, seed));
    covered += std::abs(f.fss - 3.5) <= 3.0 * f.fss_sigma;
  }
  o.check(covered >= 95, fmt::format("S = 3.5 ueV, noise 1 ueV, 12 angles: 3-sigma coverage {}/100 >= 95", covered));
  return o;
}

// 7. Byte-identical outputs regardless of worker count.
Outcome determinism() {
  Outcome o;
  const auto dir = scratch("determinism");
  const auto pipeline = [&](const std::string& tag, const std::string& workers) {
    const std::string base = (dir / tag).string();
    bool ok = qdent_run({"simulate", "--fss", "1.3", "--cycles", "100000", "--settings", "tomo16", "--dark-rate",
                         "500", "--jitter-ps", "40", "--capture-e", "0.05", "--spectral-leak", "0.3", "--seed", "7",
                         "--out", base + "/sim", "--workers", workers}) == 0;
    ok = ok && qdent_run({"correlate", "--manifest", base + "/sim/manifest.json", "--out", base + "/cor",
                          "--histogram", "--shards", "6", "--workers", workers}) == 0;
    ok = ok && qdent_run({"tomo", "--counts", base + "/cor/counts.csv", "--bootstrap", "100", "--seed", "3", "--out",
                          base + "/tomo", "--workers", workers}) == 0;
    ok = ok && qdent_run({"gate-scan", "--manifest", base + "/sim/manifest.json", "--gates", "1,2,3,inf", "--out",
                          base + "/gate"}) == 0;
    ok = ok && qdent_run({"charge-sweep", "--grid", "0.01:100:25", "--log", "--out", base + "/charge", "--workers",
                          workers}) == 0;
    return ok;
  };
  const bool ran = pipeline("w1", "1") && pipeline("w1_again", "1") && pipeline("w4", "4") && pipeline("w0", "0");
  o.check(ran, "pipeline ran with 1, 1 (repeat), 4 and all-core workers");
  if (!ran) return o;
  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "w1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "w1");
    const std::string ref = io::read_text(e.path());
    ++files;
    for (const char* other : {"w1_again", "w4", "w0"}) {
      const fs::path p = dir / other / rel;
      if (!fs::exists(p) || io::read_text(p) != ref) {
        ++differing;
        o.note(fmt::format("differs: {}/{}", other, rel.string()));
      }
    }
  }
  o.check(files > 0 && differing == 0,
          fmt::format("{} output files compared across 4 runs, {} differ", files, differing));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 dephasing law (simulate -> correlate -> F)", dephasing_law},
      {"2 time gating, T = 1.863 ns, 3 ns gate", time_gating},
      {"3 tomography round trip", tomography},
      {"4 correlator oracle equivalence", correlator_oracle},
      {"5 charge tuning", charge_tuning},
      {"6 FSS statistics fixtures and fit", fss_statistics},
      {"7 determinism across worker counts", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << name << fmt::format("  ({:.1f} s)", seconds_since(t0)) << "\n";
    for (const auto& l : o.lines) std::cout << "         " << l << "\n";
    std::cout.flush();
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
