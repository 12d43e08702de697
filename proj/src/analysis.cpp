#include "qdent/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "qdent/error.hpp"
#include "qdent/polarization.hpp"
#include "qdent/rng.hpp"

namespace qdent {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double fold_angle(double deg) {
  double a = std::fmod(deg, 180.0);
  if (a < 0.0) a += 180.0;
  return a >= 180.0 ? 0.0 : a;
}

}  // namespace

void PolarizationSeries::validate() const {
  const std::size_t n = angles_deg.size();
  require(e_x.size() == n && e_xx.size() == n && sigma.size() == n, "polarization series columns differ in length");
  require(n >= 6, "polarization series needs at least 6 angles");
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(angles_deg[i]) && std::isfinite(e_x[i]) && std::isfinite(e_xx[i]),
            "polarization series values must be finite");
    require(std::isfinite(sigma[i]) && sigma[i] > 0.0, "polarization series uncertainties must be > 0");
  }
}

FssFit fit_fss(const PolarizationSeries& series, const FssFitOptions& options) {
  series.validate();
  const std::size_t n = series.angles_deg.size();
  const double xx_sign = options.same_phase ? 1.0 : -1.0;
  // Parameters (a, b, c, s); rows scaled by 1/sigma.
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 4);
  Eigen::VectorXd y(static_cast<Eigen::Index>(2 * n));
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 1.0 / series.sigma[i];
    const double c2 = std::cos(2.0 * series.angles_deg[i] * kDeg);
    const double s2 = std::sin(2.0 * series.angles_deg[i] * kDeg);
    const auto rx = static_cast<Eigen::Index>(i);
    const auto rxx = static_cast<Eigen::Index>(n + i);
    design.row(rx) << w, 0.0, w * c2, w * s2;
    design.row(rxx) << 0.0, w, xx_sign * w * c2, xx_sign * w * s2;
    y(rx) = w * series.e_x[i];
    y(rxx) = w * series.e_xx[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) throw EstimationFailure("analyzer angles do not resolve the cos/sin terms");
  const Eigen::Vector4d p = qr.solve(y);
  const Eigen::Matrix4d cov = (design.transpose() * design).inverse();

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c2 = std::cos(2.0 * series.angles_deg[i] * kDeg);
    const double s2 = std::sin(2.0 * series.angles_deg[i] * kDeg);
    const double osc = p(2) * c2 + p(3) * s2;
    const double rx = series.e_x[i] - (p(0) + osc);
    const double rxx = series.e_xx[i] - (p(1) + xx_sign * osc);
    ss += rx * rx + rxx * rxx;
  }
  FssFit fit;
  fit.residual_rms = std::sqrt(ss / static_cast<double>(2 * n));
  std::vector<double> sig = series.sigma;
  std::nth_element(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(n / 2), sig.end());
  double median = sig[n / 2];
  if (n % 2 == 0) median = 0.5 * (median + *std::max_element(sig.begin(), sig.begin() + static_cast<std::ptrdiff_t>(n / 2)));
  if (fit.residual_rms > 5.0 * median)
    throw EstimationFailure("FSS fit residual rms " + std::to_string(fit.residual_rms) + " ueV exceeds 5x the median uncertainty");

  const double c = p(2), s = p(3);
  const double r = std::hypot(c, s);
  fit.fss = 2.0 * r;
  fit.offset_x = p(0);
  fit.offset_xx = p(1);
  fit.axis_angle_deg = fold_angle(0.5 * std::atan2(s, c) / kDeg);
  if (r > 0.0) {
    const double var = (c * c * cov(2, 2) + 2.0 * c * s * cov(2, 3) + s * s * cov(3, 3)) / (r * r);
    fit.fss_sigma = 2.0 * std::sqrt(std::max(0.0, var));
  } else {
    fit.fss_sigma = 2.0 * std::sqrt(0.5 * (cov(2, 2) + cov(3, 3)));
  }
  return fit;
}

std::vector<double> analyzer_angles(int count) {
  require(count >= 1, "angle count must be >= 1");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(180.0 * k / count);
  return out;
}

PolarizationSeries synthesize_series(double fss_uev, double axis_angle_deg, const std::vector<double>& angles_deg,
                                     double noise_uev, std::uint64_t seed, double offset_x, double offset_xx,
                                     const FssFitOptions& options) {
  require(fss_uev >= 0.0 && noise_uev >= 0.0, "splitting and noise must be >= 0");
  const double xx_sign = options.same_phase ? 1.0 : -1.0;
  CounterRng rng(seed, StreamId::Test, 0, 7);
  PolarizationSeries s;
  for (double th : angles_deg) {
    const double osc = 0.5 * fss_uev * std::cos(2.0 * (th - axis_angle_deg) * kDeg);
    s.angles_deg.push_back(th);
    s.e_x.push_back(offset_x + osc + noise_uev * rng.normal());
    s.e_xx.push_back(offset_xx + xx_sign * osc + noise_uev * rng.normal());
    s.sigma.push_back(noise_uev > 0.0 ? noise_uev : 0.01);
  }
  return s;
}

GateResult gate_fidelity(double fss_uev, double lifetime_ns, double gate_ns, double background_beta) {
  require(gate_ns > 0.0, "gate must be > 0");
  require(lifetime_ns > 0.0 && std::isfinite(lifetime_ns), "lifetime must be > 0");
  const bool ungated = std::isinf(gate_ns);
  const DensityMatrix rho = mix_with_background(
      time_averaged_rho(fss_uev, lifetime_ns, ungated ? std::nullopt : std::optional<double>(gate_ns)),
      background_beta);
  GateResult r;
  r.fidelity = fidelity(rho, TwoPhotonKet::phi_plus());
  r.retained = ungated ? 1.0 : -std::expm1(-gate_ns / lifetime_ns);
  return r;
}

GateScan gate_scan(double fss_uev, double lifetime_ns, const std::vector<double>& gates_ns, double background_beta) {
  require(!gates_ns.empty(), "gate list must be nonempty");
  GateScan scan;
  for (double g : gates_ns) {
    const GateResult r = gate_fidelity(fss_uev, lifetime_ns, g, background_beta);
    scan.gate_ns.push_back(g);
    scan.fidelity.push_back(r.fidelity);
    scan.retained.push_back(r.retained);
  }
  return scan;
}

GateScan gate_scan_simulated(const std::vector<SettingRun>& runs, const std::vector<double>& gates_ns,
                             const CoincidenceWindow& window) {
  require(!gates_ns.empty(), "gate list must be nonempty");
  const CountsTable full = coincidence_counts(runs, window);
  require(full.total() > 0, "no coincidences inside the ungated window");
  GateScan scan;
  for (double g : gates_ns) {
    require(g > 0.0, "gate must be > 0");
    CoincidenceWindow w = window;
    if (std::isfinite(g)) w.hi_ps = std::min(window.hi_ps, static_cast<std::int64_t>(std::llround(g * 1000.0)));
    const CountsTable t = coincidence_counts(runs, w);
    scan.gate_ns.push_back(g);
    scan.fidelity.push_back(fidelity_from_correlations(correlations_from_counts(t)));
    scan.retained.push_back(static_cast<double>(t.total()) / static_cast<double>(full.total()));
  }
  return scan;
}

ThresholdScan threshold_scan(const std::vector<double>& fss_grid, double lifetime_ns, double background_beta) {
  require(!fss_grid.empty(), "FSS grid must be nonempty");
  for (std::size_t i = 1; i < fss_grid.size(); ++i) require(fss_grid[i] > fss_grid[i - 1], "FSS grid must be ascending");
  auto f = [&](double s) { return gate_fidelity(s, lifetime_ns, std::numeric_limits<double>::infinity(), background_beta).fidelity; };
  ThresholdScan scan;
  scan.fss_uev = fss_grid;
  for (double s : fss_grid) scan.fidelity.push_back(f(s));
  if (background_beta <= 0.0) {
    scan.note = "no crossing (floor 0.5)";
    return scan;
  }
  for (std::size_t i = 1; i < fss_grid.size(); ++i) {
    if (scan.fidelity[i - 1] >= 0.5 && scan.fidelity[i] < 0.5) {
      double lo = fss_grid[i - 1], hi = fss_grid[i];
      for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) >= 0.5 ? lo : hi) = mid;
      }
      scan.crossing_uev = 0.5 * (lo + hi);
      return scan;
    }
  }
  scan.note = "no crossing inside the grid";
  return scan;
}

std::vector<GroupStats> group_stats(const std::vector<SampleRecord>& records, std::size_t min_count) {
  std::vector<GroupStats> out;
  std::vector<std::vector<double>> values;
  for (const auto& r : records) {
    if (!r.fss_uev) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const GroupStats& g) { return g.sample_id == r.sample_id; });
    if (it == out.end()) {
      GroupStats g;
      g.sample_id = r.sample_id;
      out.push_back(g);
      values.emplace_back();
      it = out.end() - 1;
    }
    values[static_cast<std::size_t>(it - out.begin())].push_back(*r.fss_uev);
  }
  require(!out.empty(), "no records with an FSS value");
  for (std::size_t g = 0; g < out.size(); ++g) {
    const auto& v = values[g];
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    out[g].count = v.size();
    out[g].mean = mean;
    if (v.size() >= 2) {
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out[g].std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    out[g].flagged = v.size() < std::max<std::size_t>(min_count, 2);
  }
  return out;
}

}  // namespace qdent
