#pragma once

// Text formats shared by the command-line tools: CSV and JSON for every
// result type, the density-matrix JSON, and minimal SVG line plots.
// Readers throw FormatError with the source name and the 1-based line (CSV)
// or byte offset (JSON) where parsing stopped.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qdent/analysis.hpp"
#include "qdent/charge_dynamics.hpp"
#include "qdent/correlator.hpp"
#include "qdent/polarization.hpp"

namespace qdent::io {

using json = nlohmann::json;

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
json parse_json(std::string_view text, const std::string& source);

/// Shortest representation that reads back to the same double.
std::string num(double v);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// Density matrix: {"basis": "HH,HV,VH,VV", "re": [[...]], "im": [[...]]}.
json density_to_json(const DensityMatrix& rho);
/// `physical` selects the full PSD check; otherwise Hermitian + trace 1.
DensityMatrix density_from_json(const json& j, const std::string& source, bool physical = false);

std::string counts_to_csv(const CountsTable& table);
CountsTable counts_from_csv(std::string_view text, const std::string& source);
json counts_to_json(const CountsTable& table);
CountsTable counts_from_json(const json& j, const std::string& source);
/// Dispatches on the extension (.json, otherwise CSV).
CountsTable read_counts(const std::filesystem::path& path);

std::string histogram_to_csv(const Histogram& h);
Histogram histogram_from_csv(std::string_view text, const std::string& source);
json histogram_to_json(const Histogram& h);
Histogram histogram_from_json(const json& j, const std::string& source);

std::string g2_to_csv(const G2Curve& curve);

std::string samples_to_csv(const std::vector<SampleRecord>& records);
std::vector<SampleRecord> samples_from_csv(std::string_view text, const std::string& source);

std::string series_to_csv(const PolarizationSeries& series);
PolarizationSeries series_from_csv(std::string_view text, const std::string& source);

/// power, I_X, I_X+, I_X-, I_XX
std::string sweep_to_csv(const SweepTable& table);
/// Powers and intensities only; occupations are not stored.
SweepTable sweep_from_csv(std::string_view text, const std::string& source);

std::string gate_scan_to_csv(const GateScan& scan);
GateScan gate_scan_from_csv(std::string_view text, const std::string& source);
std::string threshold_to_csv(const ThresholdScan& scan);

std::string group_stats_to_csv(const std::vector<GroupStats>& stats);

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  int width = 640;
  int height = 420;
};

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace qdent::io
