#include "qdent/charge_dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "qdent/error.hpp"
#include "qdent/parallel.hpp"

namespace qdent {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

using S = ChargeState;

}  // namespace

std::string to_string(ChargeState s) {
  switch (s) {
    case S::Empty: return "empty";
    case S::E: return "e";
    case S::H: return "h";
    case S::X: return "X";
    case S::XPlus: return "X+";
    case S::XMinus: return "X-";
    case S::XX: return "XX";
  }
  return "?";
}

std::string to_string(Line l) {
  switch (l) {
    case Line::X: return "X";
    case Line::XPlus: return "X+";
    case Line::XMinus: return "X-";
    case Line::XX: return "XX";
  }
  return "?";
}

std::string to_string(Trend t) {
  switch (t) {
    case Trend::Constant: return "constant";
    case Trend::Increasing: return "increasing";
    case Trend::Decreasing: return "decreasing";
    case Trend::NonMonotonic: return "non-monotonic";
  }
  return "?";
}

std::string to_string(SweepAxis a) { return a == SweepAxis::Primary ? "primary" : "secondary"; }

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "primary") return SweepAxis::Primary;
  if (s == "secondary") return SweepAxis::Secondary;
  throw InvalidInput("sweep axis must be 'primary' or 'secondary', got '" + s + "'");
}

void PumpConfig::validate() const {
  require(finite_nonneg(primary_power), "primary power must be >= 0");
  require(finite_nonneg(secondary_power), "secondary power must be >= 0");
  require(finite_nonneg(k_e), "k_e must be >= 0");
  require(finite_nonneg(k_h_primary), "k_h_primary must be >= 0");
  require(finite_nonneg(k_h_secondary), "k_h_secondary must be >= 0");
}

CaptureRates capture_rates(const PumpConfig& pump) {
  pump.validate();
  return {pump.k_e * pump.primary_power, pump.k_h_primary * pump.primary_power + pump.k_h_secondary * pump.secondary_power};
}

void RadiativeRates::validate() const {
  require(finite_nonneg(x) && finite_nonneg(x_plus) && finite_nonneg(x_minus) && finite_nonneg(xx),
          "radiative rates must be >= 0");
}

RateMatrix::RateMatrix(const Matrix& q) : q_(q) {
  for (int i = 0; i < kChargeStates; ++i) {
    double sum = 0.0;
    for (int j = 0; j < kChargeStates; ++j) {
      require(std::isfinite(q(i, j)), "rate matrix entries must be finite");
      if (i != j) require(q(i, j) >= 0.0, "off-diagonal rates must be >= 0");
      sum += q(i, j);
    }
    require(std::abs(sum) <= 1e-12 * std::max(1.0, -q(i, i)), "rate matrix rows must sum to zero");
  }
}

RateMatrix build_rate_matrix(const CaptureRates& c, const RadiativeRates& g, PairCapture pair) {
  require(finite_nonneg(c.electron) && finite_nonneg(c.hole), "capture rates must be >= 0");
  g.validate();
  RateMatrix::Matrix q = RateMatrix::Matrix::Zero();
  auto edge = [&](S from, S to, double r) { q(index_of(from), index_of(to)) += r; };
  edge(S::Empty, S::E, c.electron);
  edge(S::Empty, S::H, c.hole);
  edge(S::E, S::X, c.hole);
  edge(S::H, S::X, c.electron);
  edge(S::X, S::XMinus, c.electron);
  edge(S::X, S::XPlus, c.hole);
  if (pair == PairCapture::Correlated) {
    edge(S::X, S::XX, std::min(c.electron, c.hole));
  } else {
    edge(S::XMinus, S::XX, c.hole);
    edge(S::XPlus, S::XX, c.electron);
  }
  edge(S::X, S::Empty, g.x);
  edge(S::XMinus, S::E, g.x_minus);
  edge(S::XPlus, S::H, g.x_plus);
  edge(S::XX, S::X, g.xx);
  for (int i = 0; i < kChargeStates; ++i) {
    double out = 0.0;
    for (int j = 0; j < kChargeStates; ++j)
      if (j != i) out += q(i, j);
    q(i, i) = -out;
  }
  return RateMatrix(q);
}

RateMatrix build_rate_matrix(const PumpConfig& pump, const RadiativeRates& radiative, PairCapture pair) {
  return build_rate_matrix(capture_rates(pump), radiative, pair);
}

Occupation steady_state(const RateMatrix& rm) {
  const auto& q = rm.matrix();
  constexpr int n = kChargeStates;
  // reach[i][j]: j reachable from i along positive-rate edges.
  std::array<std::array<bool, n>, n> reach{};
  for (int i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (int j = 0; j < n; ++j)
      if (i != j && q(i, j) > 0.0) reach[i][j] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;

  // A state is recurrent iff everything it reaches can reach it back.
  const int start = index_of(S::Empty);
  std::vector<std::vector<int>> classes;
  std::array<bool, n> assigned{};
  for (int i = 0; i < n; ++i) {
    if (!reach[start][i] || assigned[i]) continue;
    bool closed = true;
    for (int j = 0; j < n; ++j)
      if (reach[i][j] && !reach[j][i]) closed = false;
    if (!closed) continue;
    std::vector<int> cls;
    for (int j = 0; j < n; ++j)
      if (reach[i][j]) {
        cls.push_back(j);
        assigned[j] = true;
      }
    classes.push_back(std::move(cls));
  }
  if (classes.size() != 1) {
    std::string msg = "charge network is reducible: closed classes reachable from the empty dot:";
    for (const auto& cls : classes) {
      msg += " {";
      for (std::size_t k = 0; k < cls.size(); ++k) msg += (k ? "," : "") + to_string(static_cast<S>(cls[k]));
      msg += "}";
    }
    throw InvalidInput(msg);
  }

  const auto& cls = classes.front();
  const int m = static_cast<int>(cls.size());
  Eigen::MatrixXd a(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) a(r, c) = q(cls[c], cls[r]);  // Q^T restricted
  a.row(m - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(m - 1) = 1.0;
  const Eigen::VectorXd x = a.fullPivLu().solve(rhs);

  Occupation pi;
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    const double v = std::max(0.0, x(k));
    pi.p[static_cast<std::size_t>(cls[k])] = v;
    sum += v;
  }
  for (double& v : pi.p) v /= sum;
  return pi;
}

double stationarity_residual(const Occupation& pi, const RateMatrix& rm) {
  Eigen::Matrix<double, 1, kChargeStates> row;
  for (int i = 0; i < kChargeStates; ++i) row(i) = pi.p[static_cast<std::size_t>(i)];
  return (row * rm.matrix()).cwiseAbs().maxCoeff();
}

Line LineIntensities::dominant() const {
  const auto it = std::max_element(rate.begin(), rate.end());
  return static_cast<Line>(it - rate.begin());
}

double LineIntensities::neutral_share() const {
  const double t = total();
  return t > 0.0 ? (rate[0] + rate[3]) / t : 0.0;
}

LineIntensities line_intensities(const Occupation& pi, const RadiativeRates& g) {
  g.validate();
  LineIntensities out;
  out.rate = {g.x * pi[S::X], g.x_plus * pi[S::XPlus], g.x_minus * pi[S::XMinus], g.xx * pi[S::XX]};
  return out;
}

Trend trend_of(const std::vector<double>& v, double tol) {
  bool up = false, down = false;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double d = v[i] - v[i - 1];
    const double scale = std::max(std::abs(v[i]), std::abs(v[i - 1]));
    if (std::abs(d) <= tol * scale) continue;
    (d > 0 ? up : down) = true;
  }
  if (up && down) return Trend::NonMonotonic;
  if (up) return Trend::Increasing;
  if (down) return Trend::Decreasing;
  return Trend::Constant;
}

SweepTable pump_sweep(const PumpConfig& base, SweepAxis axis, const std::vector<double>& grid,
                      const RadiativeRates& radiative, PairCapture pair, unsigned workers) {
  require(!grid.empty(), "sweep grid must be nonempty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    require(finite_nonneg(grid[i]), "sweep powers must be >= 0");
    if (i) require(grid[i] > grid[i - 1], "sweep grid must be strictly ascending");
  }
  base.validate();
  radiative.validate();
  SweepTable t;
  t.axis = axis;
  t.power = grid;
  t.occupation.resize(grid.size());
  t.intensity.resize(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t i) {
    PumpConfig p = base;
    (axis == SweepAxis::Primary ? p.primary_power : p.secondary_power) = grid[i];
    t.occupation[i] = steady_state(build_rate_matrix(p, radiative, pair));
    t.intensity[i] = line_intensities(t.occupation[i], radiative);
  });
  for (Line l : kAllLines) {
    std::vector<double> series;
    for (const auto& li : t.intensity) series.push_back(li[l]);
    t.trend[static_cast<std::size_t>(l)] = trend_of(series);
  }
  return t;
}

double Crossover::estimate() const { return std::sqrt(lo * hi); }

Crossover find_crossover(const PumpConfig& base, const RadiativeRates& radiative, double p_min, double p_max,
                         int points, double rel_tol, PairCapture pair) {
  require(p_min > 0.0 && p_max > p_min && std::isfinite(p_max), "crossover search needs 0 < p_min < p_max");
  require(points >= 2, "crossover search needs at least 2 grid points");
  require(rel_tol > 0.0, "crossover tolerance must be > 0");
  auto positive_side = [&](double p2) {
    PumpConfig p = base;
    p.secondary_power = p2;
    const auto li = line_intensities(steady_state(build_rate_matrix(p, radiative, pair)), radiative);
    return li[Line::XPlus] >= li[Line::XMinus];
  };
  const double l0 = std::log(p_min), l1 = std::log(p_max);
  double prev = p_min;
  if (positive_side(prev)) throw EstimationFailure("I_X+ >= I_X- already at the lowest secondary power");
  for (int k = 1; k < points; ++k) {
    const double p = std::exp(l0 + (l1 - l0) * k / (points - 1));
    if (!positive_side(p)) {
      prev = p;
      continue;
    }
    Crossover c{prev, p};
    while (c.hi / c.lo > 1.0 + rel_tol) {
      const double mid = std::sqrt(c.lo * c.hi);
      (positive_side(mid) ? c.hi : c.lo) = mid;
    }
    return c;
  }
  throw EstimationFailure("no X+/X- crossover on the secondary-power grid");
}

}  // namespace qdent
