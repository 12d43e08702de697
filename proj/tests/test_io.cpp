#include <doctest.h>

#include <cmath>
#include <random>

#include "qdent/error.hpp"
#include "qdent/io.hpp"
#include "qdent/tomography.hpp"
#include "support.hpp"

using namespace qdent;

namespace {

template <class F>
std::uint64_t offset_of(F&& parse) {
  try {
    parse();
  } catch (const FormatError& e) {
    return e.offset();
  }
  FAIL("no FormatError");
  return 0;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / 7.0;
    CHECK(std::stod(io::num(v)) == v);
  }
  CHECK(io::num(0.5) == "0.5");
  CHECK(io::hex64(io::fnv1a64("")) == "cbf29ce484222325");
  CHECK(io::hex64(io::fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("density matrix JSON") {
  std::mt19937_64 rng(2);
  const auto rho = testsupport::random_density(rng);
  const auto back = io::density_from_json(io::parse_json(io::density_to_json(rho).dump(), "x"), "x", true);
  CHECK(back.matrix() == rho.matrix());
  auto j = io::density_to_json(rho);
  j["basis"] = "HH,VV,HV,VH";
  CHECK_THROWS_AS(io::density_from_json(j, "x"), FormatError);
  j = io::density_to_json(rho);
  j["re"][0][0] = 5.0;
  CHECK_THROWS_AS(io::density_from_json(j, "x"), InvalidInput);
  CHECK(offset_of([] { io::parse_json("{\"a\": [1, 2,,]}", "f.json"); }) == 12);
}

TEST_CASE("counts tables in CSV and JSON") {
  auto t = expected_counts(DensityMatrix::pure(TwoPhotonKet::phi(0.3)), layout_for(settings_preset("tomo36")), 1e4);
  t.meta.window = {-500, 700};
  t.meta.ambiguous_matches = 3;
  t.meta.settings = 36;
  t.meta.cycles = 3600;
  const auto csv = io::counts_to_csv(t);
  const auto a = io::counts_from_csv(csv, "c.csv");
  CHECK(a == t);
  CHECK(a.meta.window.lo_ps == -500);
  CHECK(a.meta.window.hi_ps == 700);
  CHECK(a.meta.ambiguous_matches == 3);
  CHECK(a.meta.cycles == 3600);
  const auto b = io::counts_from_json(io::counts_to_json(t), "c.json");
  CHECK(b == t);
  CHECK(b.meta.ports == PortMode::AllPorts);

  const std::string head = "# window_ps=-1,1\n# ports=all\nxx,x,count,exposure\n";
  CHECK(offset_of([&] { io::counts_from_csv(head + "H,H,5,1\nH,Q,1,1\n", "c"); }) == 5);
  CHECK(offset_of([&] { io::counts_from_csv(head + "H,H,5,1\nH,H,1,1\n", "c"); }) == 5);
  CHECK(offset_of([&] { io::counts_from_csv(head + "H,H,-5,1\n", "c"); }) == 4);
  CHECK(offset_of([&] { io::counts_from_csv(head + "H,H,5,0\n", "c"); }) == 4);
  CHECK(offset_of([&] { io::counts_from_csv("# ports=all\nxx,x,n,exposure\n", "c"); }) == 2);
  CHECK(offset_of([&] { io::counts_from_csv("# window_ps=-1,1\n# ports=some\nxx,x,count,exposure\n", "c"); }) == 2);
  CHECK_THROWS_AS(io::read_counts("/nonexistent/counts.csv"), IoError);
}

TEST_CASE("histograms") {
  std::mt19937_64 rng(3);
  const auto s = testsupport::random_stream(rng, 2000, 10'000'000, 2);
  const auto h = cross_correlate(s, 0, 1, HistogramAxis(100, -5000, 5000));
  CHECK(io::histogram_from_csv(io::histogram_to_csv(h), "h.csv") == h);
  CHECK(io::histogram_from_json(io::histogram_to_json(h), "h.json") == h);
  const auto empty = cross_correlate({}, 0, 1, HistogramAxis(100, -5000, 5000));
  CHECK(io::histogram_from_csv(io::histogram_to_csv(empty), "h.csv") == empty);
}

TEST_CASE("sample, series, sweep and gate tables") {
  std::vector<SampleRecord> recs{{"S1", 0.5, 640, true, 1371.25, 3.2}, {"S2", 1.0, 700, false, {}, {}}};
  const auto back = io::samples_from_csv(io::samples_to_csv(recs), "s.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].udmhy);
  CHECK(*back[0].e_x_mev == 1371.25);
  CHECK(*back[0].fss_uev == 3.2);
  CHECK_FALSE(back[1].fss_uev.has_value());
  const std::string sh = "sample_id,thickness_nm,temp_c,udmhy,e_x_mev,fss_uev\n";
  CHECK(offset_of([&] { io::samples_from_csv(sh + "S1,0.5,640,maybe,,\n", "s"); }) == 2);
  CHECK(offset_of([&] { io::samples_from_csv(sh + "S1,0.5,640,no,,1\nS2,0.5,640,no,,-1\n", "s"); }) == 3);
  CHECK(offset_of([&] { io::samples_from_csv(sh + "S1,0.5,640,no,,abc\n", "s"); }) == 2);
  CHECK(offset_of([&] { io::samples_from_csv("# c\nid,fss\n", "s"); }) == 2);

  const auto series = synthesize_series(4.0, 10.0, analyzer_angles(), 0.2, 5);
  const auto sb = io::series_from_csv(io::series_to_csv(series), "p.csv");
  CHECK(sb.e_x == series.e_x);
  CHECK(sb.sigma == series.sigma);

  const auto sweep = pump_sweep(PumpConfig{}, SweepAxis::Secondary, {0.0, 1.0, 10.0}, RadiativeRates{});
  const auto sw = io::sweep_from_csv(io::sweep_to_csv(sweep), "w.csv");
  CHECK(sw.axis == SweepAxis::Secondary);
  CHECK(sw.power == sweep.power);
  for (std::size_t i = 0; i < 3; ++i) CHECK(sw.intensity[i].rate == sweep.intensity[i].rate);

  const auto g = gate_scan(1.0, 1.0, {1.0, 2.0});
  const auto gb = io::gate_scan_from_csv(io::gate_scan_to_csv(g), "g.csv");
  CHECK(gb.fidelity == g.fidelity);
  CHECK(gb.retained == g.retained);
}

TEST_CASE("SVG output is well formed and escapes text") {
  const auto svg = io::svg_line_plot({{"I<X>", {1, 2, 3}, {1, 4, 9}}}, {"a & b", "P", "I", true});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("a &amp; b") != std::string::npos);
  CHECK(svg.find("I&lt;X&gt;") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}
