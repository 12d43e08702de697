#include <doctest.h>

#include <cmath>
#include <random>

#include "qdent/charge_dynamics.hpp"
#include "qdent/error.hpp"

using namespace qdent;
using S = ChargeState;

namespace {

// Normalized right-singular vector of Q^T for the smallest singular value.
Occupation null_space_oracle(const RateMatrix& q) {
  Eigen::MatrixXd qt = q.matrix().transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qt, Eigen::ComputeFullV);
  Eigen::VectorXd v = svd.matrixV().col(kChargeStates - 1);
  v /= v.sum();
  Occupation o;
  for (int i = 0; i < kChargeStates; ++i) o.p[static_cast<std::size_t>(i)] = v(i);
  return o;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, i / double(n - 1)));
  return g;
}

}  // namespace

TEST_CASE("rate matrix structure") {
  const auto q = build_rate_matrix(CaptureRates{3.0, 0.5}, RadiativeRates{});
  CHECK(q.rate(S::Empty, S::E) == 3.0);
  CHECK(q.rate(S::Empty, S::H) == 0.5);
  CHECK(q.rate(S::E, S::X) == 0.5);
  CHECK(q.rate(S::H, S::X) == 3.0);
  CHECK(q.rate(S::X, S::XMinus) == 3.0);
  CHECK(q.rate(S::X, S::XPlus) == 0.5);
  CHECK(q.rate(S::X, S::XX) == 0.5);
  CHECK(q.rate(S::XX, S::X) == 2.0);
  CHECK(q.rate(S::XMinus, S::E) == 1.0);
  CHECK(q.rate(S::XPlus, S::H) == 1.0);
  CHECK(q.rate(S::X, S::Empty) == 1.0);
  const auto seq = build_rate_matrix(CaptureRates{3.0, 0.5}, RadiativeRates{}, PairCapture::Sequential);
  CHECK(seq.rate(S::X, S::XX) == 0.0);
  CHECK(seq.rate(S::XMinus, S::XX) == 0.5);
  CHECK(seq.rate(S::XPlus, S::XX) == 3.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const auto m = build_rate_matrix(CaptureRates{u(rng), u(rng)}, RadiativeRates{u(rng), u(rng), u(rng), u(rng)});
    CHECK(m.matrix().rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(build_rate_matrix(CaptureRates{-1.0, 0.0}, RadiativeRates{}), InvalidInput);
  RateMatrix::Matrix bad = RateMatrix::Matrix::Zero();
  bad(0, 1) = 1.0;
  CHECK_THROWS_AS(RateMatrix{bad}, InvalidInput);
  PumpConfig p;
  p.secondary_power = -1.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
}

TEST_CASE("zero pumps leave the dot empty") {
  PumpConfig p;
  p.primary_power = 0.0;
  const auto pi = steady_state(build_rate_matrix(p, RadiativeRates{}));
  CHECK(pi[S::Empty] == 1.0);
  CHECK(line_intensities(pi, RadiativeRates{}).total() == 0.0);
}

TEST_CASE("steady states match a dense null-space oracle") {
  // fixed example
  const auto q = build_rate_matrix(CaptureRates{2.7, 1.3}, RadiativeRates{1.1, 0.9, 1.2, 2.3});
  const auto pi = steady_state(q);
  const auto ref = null_space_oracle(q);
  for (int i = 0; i < kChargeStates; ++i) CHECK(std::abs(pi.p[i] - ref.p[i]) < 1e-10);
  CHECK(stationarity_residual(pi, q) < 1e-10);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  for (int k = 0; k < 200; ++k) {
    const auto pair = k % 2 ? PairCapture::Sequential : PairCapture::Correlated;
    const auto m = build_rate_matrix(CaptureRates{u(rng), u(rng)}, RadiativeRates{u(rng), u(rng), u(rng), u(rng)}, pair);
    const auto p = steady_state(m);
    const auto o = null_space_oracle(m);
    double sum = 0.0;
    for (int i = 0; i < kChargeStates; ++i) {
      CHECK(std::abs(p.p[i] - o.p[i]) < 1e-10);
      CHECK(p.p[i] >= 0.0);
      sum += p.p[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(stationarity_residual(p, m) < 1e-10);
  }
}

TEST_CASE("electron-rich capture favours X- over X") {
  const auto pi = steady_state(build_rate_matrix(CaptureRates{10.0, 1.0}, RadiativeRates{}));
  CHECK(pi[S::XMinus] > pi[S::X]);
  // oracle value from a generic dense solve
  const auto ref = null_space_oracle(build_rate_matrix(CaptureRates{10.0, 1.0}, RadiativeRates{}));
  CHECK(pi[S::XMinus] == doctest::Approx(ref[S::XMinus]).epsilon(1e-10));
}

TEST_CASE("charge-balance symmetry") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 8.0);
  for (int k = 0; k < 100; ++k) {
    const double ce = u(rng), ch = u(rng), gx = u(rng), gp = u(rng), gm = u(rng), gxx = u(rng);
    const auto pair = k % 2 ? PairCapture::Sequential : PairCapture::Correlated;
    const auto a = steady_state(build_rate_matrix(CaptureRates{ce, ch}, RadiativeRates{gx, gp, gm, gxx}, pair));
    const auto b = steady_state(build_rate_matrix(CaptureRates{ch, ce}, RadiativeRates{gx, gm, gp, gxx}, pair));
    // pivoting order differs between the two solves, so agreement is to rounding
    CHECK(std::abs(a[S::XMinus] - b[S::XPlus]) < 1e-12);
    CHECK(std::abs(a[S::XPlus] - b[S::XMinus]) < 1e-12);
    CHECK(std::abs(a[S::E] - b[S::H]) < 1e-12);
    CHECK(std::abs(a[S::X] - b[S::X]) < 1e-12);
  }
  const auto s = steady_state(build_rate_matrix(CaptureRates{2.0, 2.0}, RadiativeRates{}));
  CHECK(std::abs(s[S::XPlus] - s[S::XMinus]) < 1e-15);
}

TEST_CASE("line intensities") {
  Occupation only_minus;
  only_minus.p[static_cast<std::size_t>(index_of(S::XMinus))] = 1.0;
  const auto l = line_intensities(only_minus, RadiativeRates{1.0, 1.0, 1.5, 2.0});
  CHECK(l[Line::XMinus] == 1.5);
  CHECK(l.total() == 1.5);
  CHECK(l.dominant() == Line::XMinus);

  // balanced capture below the radiative rates: trions ~ c/Gamma relative to X
  const auto n = line_intensities(steady_state(build_rate_matrix(CaptureRates{0.1, 0.1}, RadiativeRates{})),
                                  RadiativeRates{});
  CHECK(n[Line::X] > 0.0);
  CHECK(n[Line::XX] > 0.0);
  CHECK(n[Line::XPlus] == doctest::Approx(n[Line::XMinus]));
  CHECK(n[Line::XPlus] < 0.15 * n[Line::X]);
  CHECK(n.neutral_share() > 0.8);

  // every photon removes one electron: emission rate equals electron capture rate
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 8.0);
  for (int k = 0; k < 50; ++k) {
    const CaptureRates c{u(rng), u(rng)};
    const RadiativeRates g{u(rng), u(rng), u(rng), u(rng)};
    const auto pi = steady_state(build_rate_matrix(c, g));
    const double capture =
        c.electron * (pi[S::Empty] + pi[S::H] + pi[S::X]) + std::min(c.electron, c.hole) * pi[S::X];
    CHECK(line_intensities(pi, g).total() == doctest::Approx(capture).epsilon(1e-10));
  }
}

TEST_CASE("secondary sweep tunes the dot from negative through neutral to positive") {
  const PumpConfig base;  // c_e = 4, c_h = 2 at P2 = 0
  const auto grid = log_grid(0.01, 100.0, 61);
  std::vector<double> with_zero{0.0};
  with_zero.insert(with_zero.end(), grid.begin(), grid.end());
  const auto t = pump_sweep(base, SweepAxis::Secondary, with_zero, RadiativeRates{}, PairCapture::Correlated, 3);
  CHECK(t.trend[static_cast<std::size_t>(Line::XMinus)] == Trend::Decreasing);
  CHECK(t.trend[static_cast<std::size_t>(Line::XPlus)] == Trend::Increasing);
  CHECK(t.intensity.front().dominant() == Line::XMinus);
  CHECK(t.intensity.back().dominant() == Line::XPlus);

  const auto c = find_crossover(base, RadiativeRates{}, 0.01, 100.0);
  CHECK(c.hi / c.lo <= 1.01);
  // with Gamma+ = Gamma-, the lines balance where c_h = c_e, i.e. P2 = 2
  CHECK(c.lo <= 2.0);
  CHECK(c.hi >= 2.0);
  const auto at = [&](double p2) {
    PumpConfig p = base;
    p.secondary_power = p2;
    return line_intensities(steady_state(build_rate_matrix(p, RadiativeRates{})), RadiativeRates{});
  };
  CHECK(at(c.lo)[Line::XPlus] < at(c.lo)[Line::XMinus]);
  CHECK(at(c.hi)[Line::XPlus] >= at(c.hi)[Line::XMinus]);

  // the neutral share of the spectrum peaks at the crossover
  std::size_t best = 0;
  for (std::size_t i = 0; i < t.intensity.size(); ++i)
    if (t.intensity[i].neutral_share() > t.intensity[best].neutral_share()) best = i;
  CHECK(t.power[best] == doctest::Approx(c.estimate()).epsilon(0.2));

  PumpConfig hole_rich = base;
  hole_rich.k_h_primary = 5.0;
  CHECK_THROWS_AS(find_crossover(hole_rich, RadiativeRates{}, 0.01, 100.0), EstimationFailure);
  CHECK_THROWS_AS(find_crossover(base, RadiativeRates{}, 0.01, 0.1), EstimationFailure);
}

TEST_CASE("primary sweep") {
  SUBCASE("biexciton grows superlinearly at low power") {
    PumpConfig p;
    p.k_e = 1.0;
    p.k_h_primary = 1.0;
    const auto t = pump_sweep(p, SweepAxis::Primary, {0.001, 0.002}, RadiativeRates{});
    const auto slope = [&](Line l) {
      return std::log(t.intensity[1][l] / t.intensity[0][l]) / std::log(t.power[1] / t.power[0]);
    };
    CHECK(slope(Line::XX) > 1.0);
    CHECK(slope(Line::XX) > slope(Line::X));
    CHECK(slope(Line::XX) == doctest::Approx(2.0).epsilon(0.05));
  }
  SUBCASE("strongly electron-rich capture keeps X weak at every power") {
    PumpConfig p;
    p.k_e = 10.0;
    p.k_h_primary = 1.0;
    const auto t = pump_sweep(p, SweepAxis::Primary, log_grid(1.0, 100.0, 21), RadiativeRates{});
    for (const auto& l : t.intensity) {
      CHECK(l.dominant() == Line::XMinus);
      CHECK(l[Line::X] < 0.25 * l[Line::XMinus]);
    }
  }
  CHECK_THROWS_AS(pump_sweep(PumpConfig{}, SweepAxis::Primary, {}, RadiativeRates{}), InvalidInput);
  CHECK_THROWS_AS(pump_sweep(PumpConfig{}, SweepAxis::Primary, {2.0, 1.0}, RadiativeRates{}), InvalidInput);
}

TEST_CASE("reducible chains with several closed classes are rejected") {
  RateMatrix::Matrix q = RateMatrix::Matrix::Zero();
  // empty -> e and empty -> h, both absorbing
  q(0, 1) = 1.0;
  q(0, 2) = 1.0;
  q(0, 0) = -2.0;
  CHECK_THROWS_AS(steady_state(RateMatrix(q)), InvalidInput);
  // a single absorbing state reachable from empty is fine
  RateMatrix::Matrix r = RateMatrix::Matrix::Zero();
  r(0, 1) = 1.0;
  r(0, 0) = -1.0;
  CHECK(steady_state(RateMatrix(r))[S::E] == 1.0);
}

TEST_CASE("trend classification") {
  CHECK(trend_of({1, 1, 1}) == Trend::Constant);
  CHECK(trend_of({1, 2, 2, 3}) == Trend::Increasing);
  CHECK(trend_of({3, 2, 1}) == Trend::Decreasing);
  CHECK(trend_of({1, 3, 2}) == Trend::NonMonotonic);
  CHECK(parse_sweep_axis("primary") == SweepAxis::Primary);
  CHECK_THROWS_AS(parse_sweep_axis("tertiary"), InvalidInput);
}
