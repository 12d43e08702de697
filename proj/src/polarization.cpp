#include "qdent/polarization.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qdent/error.hpp"

namespace qdent {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

Eigen::Vector4cd kron(const Eigen::Vector2cd& a, const Eigen::Vector2cd& b) {
  Eigen::Vector4cd out;
  out << a(0) * b(0), a(0) * b(1), a(1) * b(0), a(1) * b(1);
  return out;
}

}  // namespace

char to_char(PolLabel label) {
  static constexpr char kChars[] = {'H', 'V', 'D', 'A', 'R', 'L'};
  return kChars[static_cast<int>(label)];
}

PolLabel parse_label(char c) {
  switch (c) {
    case 'H': return PolLabel::H;
    case 'V': return PolLabel::V;
    case 'D': return PolLabel::D;
    case 'A': return PolLabel::A;
    case 'R': return PolLabel::R;
    case 'L': return PolLabel::L;
    default: throw InvalidInput(std::string("unknown polarization label '") + c + "'");
  }
}

PolLabel parse_label(std::string_view s) {
  if (s.size() != 1) throw InvalidInput("unknown polarization label '" + std::string(s) + "'");
  return parse_label(s.front());
}

PolLabel orthogonal(PolLabel label) {
  switch (label) {
    case PolLabel::H: return PolLabel::V;
    case PolLabel::V: return PolLabel::H;
    case PolLabel::D: return PolLabel::A;
    case PolLabel::A: return PolLabel::D;
    case PolLabel::R: return PolLabel::L;
    case PolLabel::L: return PolLabel::R;
  }
  return label;
}

Basis basis_of(PolLabel label) {
  switch (label) {
    case PolLabel::H:
    case PolLabel::V: return Basis::Linear;
    case PolLabel::D:
    case PolLabel::A: return Basis::Diagonal;
    default: return Basis::Circular;
  }
}

char to_char(Basis basis) {
  switch (basis) {
    case Basis::Linear: return 'L';
    case Basis::Diagonal: return 'D';
    default: return 'C';
  }
}

SinglePhotonKet::SinglePhotonKet(cplx h, cplx v) {
  amp_ << h, v;
  const double n = amp_.norm();
  require(n > 0.0, "single-photon ket must be nonzero");
  amp_ /= n;
}

SinglePhotonKet basis_ket(PolLabel label) {
  const cplx i{0.0, 1.0};
  switch (label) {
    case PolLabel::H: return {1.0, 0.0};
    case PolLabel::V: return {0.0, 1.0};
    case PolLabel::D: return {kInvSqrt2, kInvSqrt2};
    case PolLabel::A: return {kInvSqrt2, -kInvSqrt2};
    case PolLabel::R: return {kInvSqrt2, i * kInvSqrt2};
    case PolLabel::L: return {kInvSqrt2, -i * kInvSqrt2};
  }
  throw InvalidInput("unknown polarization label");
}

TwoPhotonKet::TwoPhotonKet(const Eigen::Vector4cd& amplitudes) : amp_(amplitudes) {
  const double n = amp_.norm();
  require(n > 0.0, "two-photon ket must be nonzero");
  amp_ /= n;
}

TwoPhotonKet TwoPhotonKet::product(const SinglePhotonKet& xx, const SinglePhotonKet& x) {
  return TwoPhotonKet(kron(xx.amplitudes(), x.amplitudes()));
}

TwoPhotonKet TwoPhotonKet::phi(double phase) {
  Eigen::Vector4cd a = Eigen::Vector4cd::Zero();
  a(0) = kInvSqrt2;
  a(3) = std::polar(kInvSqrt2, phase);
  return TwoPhotonKet(a);
}

TwoPhotonKet TwoPhotonKet::phi_minus() { return phi(std::numbers::pi); }

DensityMatrix::DensityMatrix(const Eigen::Matrix4cd& m, Check check) : m_(m) {
  if (!m_.allFinite()) throw InvalidInput("density matrix has non-finite entries");
  const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol)
    throw InvalidInput("density matrix not Hermitian (deviation " + std::to_string(herm) + ")");
  const double tr_err = std::abs(m_.trace() - 1.0);
  if (tr_err > kTraceTol)
    throw InvalidInput("density matrix trace differs from 1 by " + std::to_string(tr_err));
  // Store the exactly Hermitian part so eigen-solvers see a clean input.
  m_ = 0.5 * (m_ + m_.adjoint()).eval();
  if (check == Check::Physical && min_eigenvalue() < kEigenTol)
    throw InvalidInput("density matrix not positive semidefinite (min eigenvalue " +
                       std::to_string(min_eigenvalue()) + ")");
}

DensityMatrix DensityMatrix::pure(const TwoPhotonKet& ket) { return DensityMatrix(ket.projector()); }

DensityMatrix DensityMatrix::maximally_mixed() {
  return DensityMatrix(Eigen::Matrix4cd::Identity() * 0.25);
}

Eigen::Vector4d DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

FssSplitting::FssSplitting(double value, double uncertainty)
    : value_uev(value), uncertainty_uev(uncertainty) {
  require(std::isfinite(value) && value >= 0.0, "FSS magnitude must be finite and >= 0");
  require(std::isfinite(uncertainty) && uncertainty >= 0.0, "FSS uncertainty must be >= 0");
}

double fss_angular_frequency(double fss_uev) {
  return 2.0 * std::numbers::pi * fss_uev / kPlanckUeVNs;
}

TwoPhotonKet cascade_ket(const FssSplitting& fss, double tau_ns, double phase_origin) {
  require(std::isfinite(tau_ns) && tau_ns >= 0.0, "cascade delay tau must be >= 0");
  return TwoPhotonKet::phi(phase_origin + fss_angular_frequency(fss.value_uev) * tau_ns);
}

cplx dephasing_factor(double fss_uev, double lifetime_ns, std::optional<double> gate_ns) {
  require(std::isfinite(lifetime_ns) && lifetime_ns > 0.0, "lifetime must be > 0");
  require(std::isfinite(fss_uev) && fss_uev >= 0.0, "FSS magnitude must be >= 0");
  const double x = fss_angular_frequency(fss_uev) * lifetime_ns;
  const cplx ungated = 1.0 / cplx(1.0, -x);
  if (!gate_ns || std::isinf(*gate_ns)) {
    if (gate_ns) require(*gate_ns > 0.0, "gate must be > 0");
    return ungated;
  }
  const double g = *gate_ns;
  require(!std::isnan(g) && g > 0.0, "gate must be > 0");
  // 1 - exp(z g) with z = i*omega - 1/T, written to stay accurate for small g.
  const double a = -g / lifetime_ns;
  const double b = fss_angular_frequency(fss_uev) * g;
  const double s = std::sin(0.5 * b);
  const cplx em1 = std::expm1(a) * std::polar(1.0, b) + cplx(-2.0 * s * s, std::sin(b));
  const double retained = -std::expm1(a);
  return -em1 * ungated / retained;
}

DensityMatrix time_averaged_rho(double fss_uev, double lifetime_ns, std::optional<double> gate_ns) {
  const cplx e = dephasing_factor(fss_uev, lifetime_ns, gate_ns);
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  m(0, 0) = 0.5;
  m(3, 3) = 0.5;
  // <HH|rho|VV> = 1/2 E[conj(e^{i phi})]: the ket carries e^{i phi} on VV.
  m(0, 3) = 0.5 * std::conj(e);
  m(3, 0) = 0.5 * e;
  return DensityMatrix(m);
}

DensityMatrix mix_with_background(const DensityMatrix& rho, double beta) {
  require(beta >= 0.0 && beta <= 1.0, "background fraction beta must lie in [0, 1]");
  Eigen::Matrix4cd m = (1.0 - beta) * rho.matrix();
  m.diagonal().array() += beta * 0.25;
  return DensityMatrix(m);
}

double fidelity(const DensityMatrix& rho, const TwoPhotonKet& target) {
  const auto& psi = target.amplitudes();
  return (psi.adjoint() * rho.matrix() * psi)(0, 0).real();
}

double fidelity_from_correlations(const DegreesOfCorrelation& c) {
  for (double v : {c.linear, c.diagonal, c.circular})
    require(std::isfinite(v) && v >= -1.0 && v <= 1.0, "degree of correlation must lie in [-1, 1]");
  return (1.0 + c.linear + c.diagonal - c.circular) / 4.0;
}

double degree_of_correlation(double g2_co, double g2_cross) {
  require(g2_co >= 0.0 && g2_cross >= 0.0, "correlation amplitudes must be >= 0");
  if (g2_co + g2_cross <= 0.0)
    throw EstimationFailure("degree of correlation undefined: co- and cross-polarized signals both zero");
  return (g2_co - g2_cross) / (g2_co + g2_cross);
}

double joint_probability(const DensityMatrix& rho, const SinglePhotonKet& a, const SinglePhotonKet& b) {
  const Eigen::Vector4cd ab = kron(a.amplitudes(), b.amplitudes());
  return (ab.adjoint() * rho.matrix() * ab)(0, 0).real();
}

DegreesOfCorrelation correlations_of(const DensityMatrix& rho) {
  auto contrast = [&](PolLabel p) {
    const auto a = basis_ket(p);
    const auto b = basis_ket(orthogonal(p));
    const double co = joint_probability(rho, a, a) + joint_probability(rho, b, b);
    const double cross = joint_probability(rho, a, b) + joint_probability(rho, b, a);
    return degree_of_correlation(co, cross);
  };
  return {contrast(PolLabel::H), contrast(PolLabel::D), contrast(PolLabel::R)};
}

double dephased_fidelity(double fss_uev, double lifetime_ns) {
  const double x = fss_angular_frequency(fss_uev) * lifetime_ns;
  return 0.5 * (1.0 + 1.0 / (1.0 + x * x));
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  const Eigen::Matrix4cd d = a.matrix() - b.matrix();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace qdent
