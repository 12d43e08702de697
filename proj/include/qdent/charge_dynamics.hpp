#pragma once

// Rate-equation model of the dot's charge configuration under one or two
// non-resonant pumps, and the steady-state intensities of the X, X+, X- and
// XX lines.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qdent {

enum class ChargeState : int { Empty = 0, E = 1, H = 2, X = 3, XPlus = 4, XMinus = 5, XX = 6 };
inline constexpr int kChargeStates = 7;
inline constexpr std::array<ChargeState, kChargeStates> kAllChargeStates{
    ChargeState::Empty, ChargeState::E,      ChargeState::H, ChargeState::X,
    ChargeState::XPlus, ChargeState::XMinus, ChargeState::XX};
std::string to_string(ChargeState s);
inline int index_of(ChargeState s) { return static_cast<int>(s); }

/// Pump powers in arbitrary units. The primary (above-bandgap) pump feeds
/// both carriers, the secondary pump feeds holes only.
struct PumpConfig {
  double primary_power = 1.0;
  double secondary_power = 0.0;
  double k_e = 4.0;            ///< electron capture, 1/ns per unit primary power
  double k_h_primary = 2.0;    ///< hole capture, 1/ns per unit primary power
  double k_h_secondary = 1.0;  ///< hole capture, 1/ns per unit secondary power

  void validate() const;
};

struct CaptureRates {
  double electron = 0.0;  ///< c_e, 1/ns
  double hole = 0.0;      ///< c_h, 1/ns
};
CaptureRates capture_rates(const PumpConfig& pump);

/// Radiative rates in 1/ns.
struct RadiativeRates {
  double x = 1.0;
  double x_plus = 1.0;
  double x_minus = 1.0;
  double xx = 2.0;

  void validate() const;
};

enum class PairCapture {
  Correlated,  ///< X -> XX at min(c_e, c_h)
  Sequential   ///< X- -> XX at c_h and X+ -> XX at c_e; no direct X -> XX
};

/// Generator matrix: q(i, j) is the rate i -> j, rows sum to zero.
class RateMatrix {
 public:
  using Matrix = Eigen::Matrix<double, kChargeStates, kChargeStates>;
  /// Validates off-diagonals >= 0 and row sums within 1e-12.
  explicit RateMatrix(const Matrix& q);
  const Matrix& matrix() const { return q_; }
  double rate(ChargeState from, ChargeState to) const { return q_(index_of(from), index_of(to)); }

 private:
  Matrix q_;
};

RateMatrix build_rate_matrix(const CaptureRates& capture, const RadiativeRates& radiative,
                             PairCapture pair = PairCapture::Correlated);
RateMatrix build_rate_matrix(const PumpConfig& pump, const RadiativeRates& radiative,
                             PairCapture pair = PairCapture::Correlated);

struct Occupation {
  std::array<double, kChargeStates> p{};
  double operator[](ChargeState s) const { return p[static_cast<std::size_t>(index_of(s))]; }
};

/// Stationary distribution of the chain started from the empty dot. States
/// not reachable from the empty dot, and transient states, carry zero
/// weight. Throws InvalidInput (listing the closed classes) when more than
/// one closed class is reachable, since the stationary state is then not
/// unique.
Occupation steady_state(const RateMatrix& q);

/// max_j |(pi Q)_j|
double stationarity_residual(const Occupation& pi, const RateMatrix& q);

enum class Line : int { X = 0, XPlus = 1, XMinus = 2, XX = 3 };
inline constexpr std::array<Line, 4> kAllLines{Line::X, Line::XPlus, Line::XMinus, Line::XX};
std::string to_string(Line l);

struct LineIntensities {
  std::array<double, 4> rate{};  ///< photons/ns, indexed by Line
  double operator[](Line l) const { return rate[static_cast<std::size_t>(l)]; }
  double total() const { return rate[0] + rate[1] + rate[2] + rate[3]; }
  Line dominant() const;
  /// (I_X + I_XX) / total
  double neutral_share() const;
};

LineIntensities line_intensities(const Occupation& pi, const RadiativeRates& radiative);

enum class SweepAxis { Primary, Secondary };
enum class Trend { Constant, Increasing, Decreasing, NonMonotonic };
std::string to_string(Trend t);
std::string to_string(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& s);

struct SweepTable {
  SweepAxis axis = SweepAxis::Secondary;
  std::vector<double> power;
  std::vector<Occupation> occupation;
  std::vector<LineIntensities> intensity;
  std::array<Trend, 4> trend{};  ///< per Line over the whole grid
};

/// Steady state at every grid power (nonempty, ascending, >= 0), with the
/// swept power replacing the corresponding field of `base`.
SweepTable pump_sweep(const PumpConfig& base, SweepAxis axis, const std::vector<double>& grid,
                      const RadiativeRates& radiative, PairCapture pair = PairCapture::Correlated,
                      unsigned workers = 1);

/// Trend of a series; steps with relative size below `tol` count as flat.
Trend trend_of(const std::vector<double>& v, double tol = 1e-12);

struct Crossover {
  double lo = 0.0;  ///< secondary power with I_X+ < I_X-
  double hi = 0.0;  ///< secondary power with I_X+ >= I_X-
  double estimate() const;  ///< geometric midpoint
};

/// Brackets the secondary power where I_X+ = I_X- to a ratio hi/lo <=
/// 1 + rel_tol: a log grid of `points` over [p_min, p_max] finds the first
/// sign change, bisection in log space narrows it. Throws EstimationFailure
/// if no sign change exists on the grid.
Crossover find_crossover(const PumpConfig& base, const RadiativeRates& radiative, double p_min, double p_max,
                         int points = 41, double rel_tol = 0.01, PairCapture pair = PairCapture::Correlated);

}  // namespace qdent
