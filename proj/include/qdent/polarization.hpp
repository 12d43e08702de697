#pragma once

// Two-photon polarization algebra for the biexciton-exciton cascade.
//
// Conventions used everywhere in the project:
//   * single-photon basis order (H, V)
//   * two-photon basis order (HH, HV, VH, VV), first photon = biexciton
//   * circular states R = (H + iV)/sqrt2, L = (H - iV)/sqrt2
//   * energies in ueV, times in ns

#include <array>
#include <cstdint>
#include <complex>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace qdent {

using cplx = std::complex<double>;

/// Planck constant in ueV*ns (CODATA 2018, exact in SI).
inline constexpr double kPlanckUeVNs = 4.135667696;

enum class PolLabel : std::uint8_t { H, V, D, A, R, L };

inline constexpr std::array<PolLabel, 6> kAllLabels = {PolLabel::H, PolLabel::V, PolLabel::D,
                                                       PolLabel::A, PolLabel::R, PolLabel::L};

char to_char(PolLabel label);
PolLabel parse_label(char c);
PolLabel parse_label(std::string_view s);
/// The label of the orthogonal state in the same basis (H<->V, D<->A, R<->L).
PolLabel orthogonal(PolLabel label);

enum class Basis : std::uint8_t { Linear, Diagonal, Circular };
Basis basis_of(PolLabel label);
char to_char(Basis basis);

class SinglePhotonKet {
 public:
  /// Normalized on construction; rejects the zero vector.
  SinglePhotonKet(cplx h, cplx v);

  const Eigen::Vector2cd& amplitudes() const { return amp_; }
  cplx h() const { return amp_(0); }
  cplx v() const { return amp_(1); }
  Eigen::Matrix2cd projector() const { return amp_ * amp_.adjoint(); }

 private:
  Eigen::Vector2cd amp_;
};

SinglePhotonKet basis_ket(PolLabel label);

class TwoPhotonKet {
 public:
  /// Amplitudes in (HH, HV, VH, VV) order; normalized on construction.
  explicit TwoPhotonKet(const Eigen::Vector4cd& amplitudes);

  const Eigen::Vector4cd& amplitudes() const { return amp_; }
  Eigen::Matrix4cd projector() const { return amp_ * amp_.adjoint(); }

  static TwoPhotonKet product(const SinglePhotonKet& xx, const SinglePhotonKet& x);
  /// (|HH> + e^{i phase}|VV>)/sqrt2
  static TwoPhotonKet phi(double phase);
  static TwoPhotonKet phi_plus() { return phi(0.0); }
  static TwoPhotonKet phi_minus();

 private:
  Eigen::Vector4cd amp_;
};

class DensityMatrix {
 public:
  enum class Check {
    Physical,       ///< Hermitian, unit trace and positive semidefinite
    HermitianTrace  ///< Hermitian and unit trace only (linear estimates)
  };

  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigenTol = -1e-9;

  explicit DensityMatrix(const Eigen::Matrix4cd& m, Check check = Check::Physical);

  static DensityMatrix pure(const TwoPhotonKet& ket);
  static DensityMatrix maximally_mixed();

  const Eigen::Matrix4cd& matrix() const { return m_; }
  cplx operator()(int row, int col) const { return m_(row, col); }
  /// <VV|rho|HH>; for (|HH> + e^{i phi}|VV>)/sqrt2 this is e^{i phi}/2.
  cplx coherence() const { return m_(3, 0); }

  Eigen::Vector4d eigenvalues() const;
  double min_eigenvalue() const { return eigenvalues().minCoeff(); }
  bool is_positive() const { return min_eigenvalue() >= kEigenTol; }

 private:
  Eigen::Matrix4cd m_;
};

/// Magnitude of the exciton fine-structure splitting; sign conventions are
/// absorbed in the phase origin of the emitted state.
struct FssSplitting {
  double value_uev = 0.0;
  double uncertainty_uev = 0.0;

  FssSplitting() = default;
  FssSplitting(double value, double uncertainty = 0.0);
};

struct DegreesOfCorrelation {
  double linear = 0.0;
  double diagonal = 0.0;
  double circular = 0.0;
};

/// Angular beat frequency 2*pi*S/h in rad/ns.
double fss_angular_frequency(double fss_uev);

TwoPhotonKet cascade_ket(const FssSplitting& fss, double tau_ns, double phase_origin = 0.0);

/// E[exp(i*omega*tau)] for tau ~ Exp(lifetime), optionally conditioned on
/// tau <= gate.
cplx dephasing_factor(double fss_uev, double lifetime_ns, std::optional<double> gate_ns = {});

DensityMatrix time_averaged_rho(double fss_uev, double lifetime_ns,
                                std::optional<double> gate_ns = {});

DensityMatrix mix_with_background(const DensityMatrix& rho, double beta);

double fidelity(const DensityMatrix& rho, const TwoPhotonKet& target);

double fidelity_from_correlations(const DegreesOfCorrelation& c);

/// Contrast of co- and cross-polarized correlation amplitudes.
double degree_of_correlation(double g2_co, double g2_cross);

/// Born-rule probability of the (a, b) projector pair, a on the biexciton
/// photon and b on the exciton photon.
double joint_probability(const DensityMatrix& rho, const SinglePhotonKet& a,
                         const SinglePhotonKet& b);

/// Exact degrees of correlation of a state, each basis measured with both
/// photons in the same basis.
DegreesOfCorrelation correlations_of(const DensityMatrix& rho);

/// Closed form 1/2 (1 + 1/(1 + x^2)), x = 2*pi*S*T/h.
double dephased_fidelity(double fss_uev, double lifetime_ns);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

}  // namespace qdent
