#include "qdent/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "qdent/error.hpp"

namespace qdent::io {

namespace {

struct Row {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

struct CsvDoc {
  std::string source;
  std::map<std::string, std::pair<std::size_t, std::string>> meta;
  std::vector<Row> rows;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

CsvDoc parse_csv(std::string_view text, const std::string& source, const std::vector<std::string>& header) {
  CsvDoc doc;
  doc.source = source;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) doc.meta[trim(body.substr(0, eq))] = {line_no, trim(body.substr(eq + 1))};
      continue;
    }
    auto fields = split(line);
    if (!have_header) {
      if (fields != header)
        throw FormatError(source, line_no, "expected header '" + join(header) + "', got '" + line + "'");
      have_header = true;
      continue;
    }
    if (fields.size() != header.size())
      throw FormatError(source, line_no,
                        "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    doc.rows.push_back({line_no, std::move(fields)});
  }
  if (!have_header) throw FormatError(source, line_no, "missing header '" + join(header) + "'");
  return doc;
}

double parse_double(const std::string& s, const std::string& source, std::size_t line, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last)
    throw FormatError(source, line, std::string("invalid number for ") + what + ": '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const std::string& source, std::size_t line, const char* what) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw FormatError(source, line, std::string("invalid integer for ") + what + ": '" + s + "'");
  return v;
}

std::string xml_escape(std::string_view in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const std::pair<std::size_t, std::string>* meta_of(const CsvDoc& d, const std::string& key) {
  const auto it = d.meta.find(key);
  return it == d.meta.end() ? nullptr : &it->second;
}

template <class Int>
Int require_meta_int(const CsvDoc& d, const std::string& key) {
  const auto* m = meta_of(d, key);
  if (!m) throw FormatError(d.source, 1, "missing metadata line '# " + key + "=...'");
  return parse_int<Int>(m->second, d.source, m->first, key.c_str());
}

std::string ports_name(PortMode p) { return p == PortMode::AllPorts ? "all" : "transmitted"; }

PortMode parse_ports(const std::string& s, const std::string& source, std::uint64_t where) {
  if (s == "all") return PortMode::AllPorts;
  if (s == "transmitted") return PortMode::TransmittedOnly;
  throw FormatError(source, where, "ports must be 'all' or 'transmitted', got '" + s + "'");
}

PolLabel label_at(const std::string& s, const std::string& source, std::uint64_t where) {
  if (s.size() != 1) throw FormatError(source, where, "invalid polarization label '" + s + "'");
  try {
    return parse_label(s[0]);
  } catch (const InvalidInput&) {
    throw FormatError(source, where, "invalid polarization label '" + s + "'");
  }
}

// JSON accessors with located errors. nlohmann does not keep offsets after
// parsing, so structural errors are reported at offset 0.
const json& field(const json& j, const char* key, const std::string& source) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(source, 0, std::string("missing field '") + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const char* key, const std::string& source) {
  try {
    return field(j, key, source).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(source, 0, std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path.string() + "'");
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

json parse_json(std::string_view text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann counts bytes from 1
    throw FormatError(source, e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
}

std::string num(double v) { return fmt::format("{}", v); }

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

json density_to_json(const DensityMatrix& rho) {
  json re = json::array(), im = json::array();
  for (int r = 0; r < 4; ++r) {
    json rr = json::array(), ir = json::array();
    for (int c = 0; c < 4; ++c) {
      rr.push_back(rho.matrix()(r, c).real());
      ir.push_back(rho.matrix()(r, c).imag());
    }
    re.push_back(rr);
    im.push_back(ir);
  }
  return {{"basis", "HH,HV,VH,VV"}, {"re", re}, {"im", im}};
}

DensityMatrix density_from_json(const json& j, const std::string& source, bool physical) {
  if (get_as<std::string>(j, "basis", source) != "HH,HV,VH,VV")
    throw FormatError(source, 0, "basis must be \"HH,HV,VH,VV\"");
  const auto re = get_as<std::vector<std::vector<double>>>(j, "re", source);
  const auto im = get_as<std::vector<std::vector<double>>>(j, "im", source);
  auto square4 = [](const std::vector<std::vector<double>>& m) {
    return m.size() == 4 && std::all_of(m.begin(), m.end(), [](const auto& r) { return r.size() == 4; });
  };
  if (!square4(re) || !square4(im)) throw FormatError(source, 0, "re and im must be 4x4 arrays");
  Eigen::Matrix4cd m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = cplx(re[r][c], im[r][c]);
  try {
    return DensityMatrix(m, physical ? DensityMatrix::Check::Physical : DensityMatrix::Check::HermitianTrace);
  } catch (const InvalidInput& e) {
    throw FormatError(source, 0, e.what());
  }
}

std::string counts_to_csv(const CountsTable& t) {
  std::string s;
  s += fmt::format("# window_ps={},{}\n", t.meta.window.lo_ps, t.meta.window.hi_ps);
  s += "# ports=" + ports_name(t.meta.ports) + "\n";
  s += fmt::format("# ambiguous_matches={}\n# settings={}\n# cycles={}\n", t.meta.ambiguous_matches, t.meta.settings,
                   t.meta.cycles);
  s += "xx,x,count,exposure\n";
  for (const auto& e : t.entries()) s += fmt::format("{},{},{},{}\n", to_char(e.xx), to_char(e.x), e.count, num(e.exposure));
  return s;
}

CountsTable counts_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"xx", "x", "count", "exposure"});
  CountsTable t;
  if (const auto* w = meta_of(d, "window_ps")) {
    const auto parts = split(w->second);
    if (parts.size() != 2) throw FormatError(source, w->first, "window_ps needs two values");
    t.meta.window.lo_ps = parse_int<std::int64_t>(parts[0], source, w->first, "window_ps");
    t.meta.window.hi_ps = parse_int<std::int64_t>(parts[1], source, w->first, "window_ps");
  }
  if (const auto* p = meta_of(d, "ports")) t.meta.ports = parse_ports(p->second, source, p->first);
  if (meta_of(d, "ambiguous_matches")) t.meta.ambiguous_matches = require_meta_int<std::uint64_t>(d, "ambiguous_matches");
  if (meta_of(d, "settings")) t.meta.settings = require_meta_int<std::uint64_t>(d, "settings");
  if (meta_of(d, "cycles")) t.meta.cycles = require_meta_int<std::uint64_t>(d, "cycles");
  for (const Row& r : d.rows) {
    const PolLabel xx = label_at(r.fields[0], source, r.line);
    const PolLabel x = label_at(r.fields[1], source, r.line);
    const auto count = parse_int<std::uint64_t>(r.fields[2], source, r.line, "count");
    const double exposure = parse_double(r.fields[3], source, r.line, "exposure");
    if (!(exposure > 0.0) || !std::isfinite(exposure)) throw FormatError(source, r.line, "exposure must be > 0");
    if (t.has(xx, x)) throw FormatError(source, r.line, "duplicate entry " + r.fields[0] + r.fields[1]);
    t.set(xx, x, count, exposure);
  }
  return t;
}

json counts_to_json(const CountsTable& t) {
  json entries = json::array();
  for (const auto& e : t.entries())
    entries.push_back({{"xx", std::string(1, to_char(e.xx))},
                       {"x", std::string(1, to_char(e.x))},
                       {"count", e.count},
                       {"exposure", e.exposure}});
  return {{"window_ps", {t.meta.window.lo_ps, t.meta.window.hi_ps}},
          {"ports", ports_name(t.meta.ports)},
          {"ambiguous_matches", t.meta.ambiguous_matches},
          {"settings", t.meta.settings},
          {"cycles", t.meta.cycles},
          {"entries", entries}};
}

CountsTable counts_from_json(const json& j, const std::string& source) {
  CountsTable t;
  const auto w = get_as<std::vector<std::int64_t>>(j, "window_ps", source);
  if (w.size() != 2) throw FormatError(source, 0, "window_ps needs two values");
  t.meta.window = {w[0], w[1]};
  t.meta.ports = parse_ports(get_as<std::string>(j, "ports", source), source, 0);
  t.meta.ambiguous_matches = get_as<std::uint64_t>(j, "ambiguous_matches", source);
  t.meta.settings = get_as<std::uint64_t>(j, "settings", source);
  t.meta.cycles = get_as<std::uint64_t>(j, "cycles", source);
  const json& entries = field(j, "entries", source);
  if (!entries.is_array()) throw FormatError(source, 0, "entries must be an array");
  for (const json& e : entries) {
    const PolLabel xx = label_at(get_as<std::string>(e, "xx", source), source, 0);
    const PolLabel x = label_at(get_as<std::string>(e, "x", source), source, 0);
    const double exposure = get_as<double>(e, "exposure", source);
    if (!(exposure > 0.0)) throw FormatError(source, 0, "exposure must be > 0");
    t.set(xx, x, get_as<std::uint64_t>(e, "count", source), exposure);
  }
  return t;
}

CountsTable read_counts(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  if (path.extension() == ".json") return counts_from_json(parse_json(text, path.string()), path.string());
  return counts_from_csv(text, path.string());
}

std::string histogram_to_csv(const Histogram& h) {
  std::string s = fmt::format("# channel_a={}\n# channel_b={}\n# width_ps={}\n# min_ps={}\n# max_ps={}\n", h.channel_a,
                              h.channel_b, h.axis.width_ps, h.axis.min_ps, h.axis.max_ps);
  s += fmt::format("# singles_a={}\n# singles_b={}\n", h.singles_a, h.singles_b);
  if (h.first_ps) s += fmt::format("# first_ps={}\n# last_ps={}\n", *h.first_ps, *h.last_ps);
  s += "bin_start_ps,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) s += fmt::format("{},{}\n", h.axis.bin_start(i), h.counts[i]);
  return s;
}

Histogram histogram_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"bin_start_ps", "count"});
  Histogram h;
  h.channel_a = static_cast<std::uint8_t>(require_meta_int<unsigned>(d, "channel_a"));
  h.channel_b = static_cast<std::uint8_t>(require_meta_int<unsigned>(d, "channel_b"));
  try {
    h.axis = HistogramAxis(require_meta_int<std::int64_t>(d, "width_ps"), require_meta_int<std::int64_t>(d, "min_ps"),
                           require_meta_int<std::int64_t>(d, "max_ps"));
  } catch (const FormatError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw FormatError(source, 1, e.what());
  }
  h.singles_a = require_meta_int<std::uint64_t>(d, "singles_a");
  h.singles_b = require_meta_int<std::uint64_t>(d, "singles_b");
  if (meta_of(d, "first_ps")) {
    h.first_ps = require_meta_int<std::uint64_t>(d, "first_ps");
    h.last_ps = require_meta_int<std::uint64_t>(d, "last_ps");
  }
  if (d.rows.size() != h.axis.bins())
    throw FormatError(source, d.rows.empty() ? 1 : d.rows.back().line,
                      "expected " + std::to_string(h.axis.bins()) + " bins, got " + std::to_string(d.rows.size()));
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    const Row& r = d.rows[i];
    if (parse_int<std::int64_t>(r.fields[0], source, r.line, "bin_start_ps") != h.axis.bin_start(i))
      throw FormatError(source, r.line, "bin start does not match the axis");
    h.counts.push_back(parse_int<std::uint64_t>(r.fields[1], source, r.line, "count"));
  }
  return h;
}

json histogram_to_json(const Histogram& h) {
  json j = {{"channel_a", h.channel_a}, {"channel_b", h.channel_b}, {"width_ps", h.axis.width_ps},
            {"min_ps", h.axis.min_ps},   {"max_ps", h.axis.max_ps},     {"singles_a", h.singles_a},
            {"singles_b", h.singles_b},  {"counts", h.counts}};
  if (h.first_ps) {
    j["first_ps"] = *h.first_ps;
    j["last_ps"] = *h.last_ps;
  }
  return j;
}

Histogram histogram_from_json(const json& j, const std::string& source) {
  Histogram h;
  h.channel_a = get_as<std::uint8_t>(j, "channel_a", source);
  h.channel_b = get_as<std::uint8_t>(j, "channel_b", source);
  try {
    h.axis = HistogramAxis(get_as<std::int64_t>(j, "width_ps", source), get_as<std::int64_t>(j, "min_ps", source),
                           get_as<std::int64_t>(j, "max_ps", source));
  } catch (const FormatError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw FormatError(source, 0, e.what());
  }
  h.singles_a = get_as<std::uint64_t>(j, "singles_a", source);
  h.singles_b = get_as<std::uint64_t>(j, "singles_b", source);
  h.counts = get_as<std::vector<std::uint64_t>>(j, "counts", source);
  if (h.counts.size() != h.axis.bins()) throw FormatError(source, 0, "counts length does not match the axis");
  if (j.contains("first_ps")) {
    h.first_ps = get_as<std::uint64_t>(j, "first_ps", source);
    h.last_ps = get_as<std::uint64_t>(j, "last_ps", source);
  }
  return h;
}

std::string g2_to_csv(const G2Curve& curve) {
  std::string s = "delay_ps,g2\n";
  for (std::size_t i = 0; i < curve.delay_ps.size(); ++i) s += num(curve.delay_ps[i]) + "," + num(curve.value[i]) + "\n";
  return s;
}

std::string samples_to_csv(const std::vector<SampleRecord>& records) {
  std::string s = "sample_id,thickness_nm,temp_c,udmhy,e_x_mev,fss_uev\n";
  for (const auto& r : records)
    s += fmt::format("{},{},{},{},{},{}\n", r.sample_id, num(r.thickness_nm), num(r.temp_c), r.udmhy ? "yes" : "no",
                     r.e_x_mev ? num(*r.e_x_mev) : "", r.fss_uev ? num(*r.fss_uev) : "");
  return s;
}

std::vector<SampleRecord> samples_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"sample_id", "thickness_nm", "temp_c", "udmhy", "e_x_mev", "fss_uev"});
  std::vector<SampleRecord> out;
  for (const Row& r : d.rows) {
    SampleRecord s;
    s.sample_id = r.fields[0];
    if (s.sample_id.empty()) throw FormatError(source, r.line, "empty sample_id");
    s.thickness_nm = parse_double(r.fields[1], source, r.line, "thickness_nm");
    s.temp_c = parse_double(r.fields[2], source, r.line, "temp_c");
    if (r.fields[3] == "yes") s.udmhy = true;
    else if (r.fields[3] != "no") throw FormatError(source, r.line, "udmhy must be yes or no");
    if (!r.fields[4].empty()) s.e_x_mev = parse_double(r.fields[4], source, r.line, "e_x_mev");
    if (!r.fields[5].empty()) {
      s.fss_uev = parse_double(r.fields[5], source, r.line, "fss_uev");
      if (*s.fss_uev < 0.0) throw FormatError(source, r.line, "fss_uev must be >= 0");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string series_to_csv(const PolarizationSeries& series) {
  std::string s = "angle_deg,e_x_uev,e_xx_uev,sigma_uev\n";
  for (std::size_t i = 0; i < series.angles_deg.size(); ++i)
    s += fmt::format("{},{},{},{}\n", num(series.angles_deg[i]), num(series.e_x[i]), num(series.e_xx[i]),
                     num(series.sigma[i]));
  return s;
}

PolarizationSeries series_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"angle_deg", "e_x_uev", "e_xx_uev", "sigma_uev"});
  PolarizationSeries s;
  for (const Row& r : d.rows) {
    s.angles_deg.push_back(parse_double(r.fields[0], source, r.line, "angle_deg"));
    s.e_x.push_back(parse_double(r.fields[1], source, r.line, "e_x_uev"));
    s.e_xx.push_back(parse_double(r.fields[2], source, r.line, "e_xx_uev"));
    s.sigma.push_back(parse_double(r.fields[3], source, r.line, "sigma_uev"));
  }
  return s;
}

std::string sweep_to_csv(const SweepTable& t) {
  std::string s = "# axis=" + to_string(t.axis) + "\n";
  s += "power,I_X,I_X+,I_X-,I_XX\n";
  for (std::size_t i = 0; i < t.power.size(); ++i) {
    const auto& r = t.intensity[i].rate;
    s += fmt::format("{},{},{},{},{}\n", num(t.power[i]), num(r[0]), num(r[1]), num(r[2]), num(r[3]));
  }
  return s;
}

SweepTable sweep_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"power", "I_X", "I_X+", "I_X-", "I_XX"});
  SweepTable t;
  if (const auto* a = meta_of(d, "axis")) {
    try {
      t.axis = parse_sweep_axis(a->second);
    } catch (const InvalidInput& e) {
      throw FormatError(source, a->first, e.what());
    }
  }
  for (const Row& r : d.rows) {
    t.power.push_back(parse_double(r.fields[0], source, r.line, "power"));
    LineIntensities li;
    for (std::size_t k = 0; k < 4; ++k) li.rate[k] = parse_double(r.fields[k + 1], source, r.line, "intensity");
    t.intensity.push_back(li);
  }
  for (Line l : kAllLines) {
    std::vector<double> v;
    for (const auto& li : t.intensity) v.push_back(li[l]);
    t.trend[static_cast<std::size_t>(l)] = trend_of(v);
  }
  return t;
}

std::string gate_scan_to_csv(const GateScan& scan) {
  std::string s = "gate_ns,fidelity,retained\n";
  for (std::size_t i = 0; i < scan.gate_ns.size(); ++i)
    s += fmt::format("{},{},{}\n", num(scan.gate_ns[i]), num(scan.fidelity[i]), num(scan.retained[i]));
  return s;
}

GateScan gate_scan_from_csv(std::string_view text, const std::string& source) {
  const CsvDoc d = parse_csv(text, source, {"gate_ns", "fidelity", "retained"});
  GateScan g;
  for (const Row& r : d.rows) {
    g.gate_ns.push_back(parse_double(r.fields[0], source, r.line, "gate_ns"));
    g.fidelity.push_back(parse_double(r.fields[1], source, r.line, "fidelity"));
    g.retained.push_back(parse_double(r.fields[2], source, r.line, "retained"));
  }
  return g;
}

std::string threshold_to_csv(const ThresholdScan& scan) {
  std::string s;
  if (scan.crossing_uev) s += "# crossing_uev=" + num(*scan.crossing_uev) + "\n";
  else s += "# note=" + scan.note + "\n";
  s += "fss_uev,fidelity\n";
  for (std::size_t i = 0; i < scan.fss_uev.size(); ++i) s += num(scan.fss_uev[i]) + "," + num(scan.fidelity[i]) + "\n";
  return s;
}

std::string group_stats_to_csv(const std::vector<GroupStats>& stats) {
  std::string s = "sample_id,n,mean_uev,std_uev,flagged\n";
  for (const auto& g : stats)
    s += fmt::format("{},{},{:.6f},{},{}\n", g.sample_id, g.count, g.mean, g.std ? fmt::format("{:.6f}", *g.std) : "",
                     g.flagged ? "yes" : "no");
  return s;
}

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& o) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  const double left = 70, right = 150, top = 40, bottom = 55;
  const double pw = o.width - left - right, ph = o.height - top - bottom;
  auto tx = [&](double x) { return o.log_x ? std::log10(x) : x; };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i]) || (o.log_x && s.x[i] <= 0.0)) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      o.width, o.height);
  s += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", left + pw / 2,
                   xml_escape(o.title));
  s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                   left, top, pw, ph);
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0;
    const double fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = left + pw * k / 4.0;
    const double sy = top + ph * (1.0 - k / 4.0);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", sx,
                     top + ph, top + ph + 5);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n", sx, top + ph + 18,
                     o.log_x ? std::pow(10.0, fx) : fx);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"black\"/>\n", left - 5, sy,
                     left);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 8, sy + 4, fy);
  }
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, o.height - 12.0,
                   xml_escape(o.x_label));
  s += fmt::format("<text x=\"16\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1f})\">{}</text>\n",
                   top + ph / 2, top + ph / 2, xml_escape(o.y_label));
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& sr = series[k];
    const char* color = palette[k % 6];
    std::string pts;
    for (std::size_t i = 0; i < sr.x.size() && i < sr.y.size(); ++i) {
      if (!std::isfinite(sr.y[i]) || !std::isfinite(sr.x[i]) || (o.log_x && sr.x[i] <= 0.0)) continue;
      pts += fmt::format("{}{:.2f},{:.2f}", pts.empty() ? "" : " ", px(sr.x[i]), py(sr.y[i]));
    }
    s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", color, pts);
    const double ly = top + 14.0 + 18.0 * static_cast<double>(k);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" stroke-width=\"2\"/>\n",
                     left + pw + 12, ly, left + pw + 36, color);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", left + pw + 42, ly + 4, xml_escape(sr.name));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace qdent::io
