#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "qdent/error.hpp"
#include "qdent/polarization.hpp"
#include "support.hpp"

using namespace qdent;
using std::numbers::pi;

TEST_CASE("basis kets are normalized, orthogonal within a basis and unbiased across bases") {
  for (PolLabel a : kAllLabels) {
    const auto u = basis_ket(a).amplitudes();
    CHECK(u.norm() == doctest::Approx(1.0));
    CHECK(std::abs(u.dot(basis_ket(orthogonal(a)).amplitudes())) < 1e-15);
    for (PolLabel b : kAllLabels)
      if (basis_of(a) != basis_of(b)) CHECK(std::norm(u.dot(basis_ket(b).amplitudes())) == doctest::Approx(0.5));
  }
  const auto r = basis_ket(PolLabel::R).amplitudes();
  CHECK(std::abs(r(1) - cplx(0.0, 1.0 / std::sqrt(2.0))) < 1e-15);
  CHECK(parse_label("D") == PolLabel::D);
  CHECK_THROWS_AS(parse_label('X'), InvalidInput);
  CHECK_THROWS_AS(SinglePhotonKet(0.0, 0.0), InvalidInput);
}

TEST_CASE("density matrix invariants are enforced") {
  CHECK_NOTHROW(DensityMatrix::maximally_mixed());
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Identity() * 0.25;
  m(0, 1) = cplx(0.1, 0.0);
  CHECK_THROWS_AS(DensityMatrix{m}, InvalidInput);  // not Hermitian
  Eigen::Matrix4cd t = Eigen::Matrix4cd::Identity() * 0.3;
  CHECK_THROWS_AS(DensityMatrix{t}, InvalidInput);  // trace 1.2
  Eigen::Matrix4cd neg = Eigen::Matrix4cd::Zero();
  neg(0, 0) = 1.2;
  neg(1, 1) = -0.2;
  CHECK_THROWS_AS(DensityMatrix{neg}, InvalidInput);
  CHECK_NOTHROW(DensityMatrix(neg, DensityMatrix::Check::HermitianTrace));
  CHECK(DensityMatrix(neg, DensityMatrix::Check::HermitianTrace).min_eigenvalue() == doctest::Approx(-0.2));
}

TEST_CASE("dephasing factor agrees with direct numerical integration") {
  for (double s : {0.0, 0.7, 1.3, 2.9, 11.0})
    for (double life : {0.4, 1.0, 1.863})
      for (double gate : {0.0, 0.05, 1.0, 3.0}) {
        const double w = 2.0 * pi * s / kPlanckUeVNs;
        const double upper = gate > 0.0 ? gate : 40.0 * life;
        const auto integrand = [&](double tau) { return std::polar(1.0, w * tau) * std::exp(-tau / life) / life; };
        std::complex<double> ref = testsupport::simpson(integrand, upper);
        if (gate > 0.0) ref /= 1.0 - std::exp(-gate / life);
        const cplx got = gate > 0.0 ? dephasing_factor(s, life, gate) : dephasing_factor(s, life);
        CAPTURE(s);
        CAPTURE(life);
        CAPTURE(gate);
        CHECK(std::abs(got - ref) < 1e-9);
      }
  // very narrow gates: the factor tends to 1 without cancellation trouble
  CHECK(std::abs(dephasing_factor(11.0, 1.0, 1e-9) - cplx(1.0, 0.0)) < 1e-8);
  CHECK(dephasing_factor(1.3, 1.0, std::numeric_limits<double>::infinity()) == dephasing_factor(1.3, 1.0));
}

TEST_CASE("ungated fidelities follow the dephasing law") {
  // 1/2 (1 + 1/(1 + x^2)), x = 2 pi S T / h, evaluated independently in Python.
  const std::pair<double, double> table[] = {{0.0, 1.0},
                                             {1.3, 0.6020238814267365},
                                             {2.9, 0.524495707120991},
                                             {5.0, 0.5085172579135684},
                                             {11.0, 0.5017838730542289}};
  for (auto [s, f] : table) {
    CHECK(dephased_fidelity(s, 1.0) == doctest::Approx(f).epsilon(1e-12));
    CHECK(fidelity(time_averaged_rho(s, 1.0), TwoPhotonKet::phi_plus()) == doctest::Approx(f).epsilon(1e-12));
  }
  const auto c = correlations_of(time_averaged_rho(1.3, 1.0));
  CHECK(c.linear == doctest::Approx(1.0));
  CHECK(c.diagonal == doctest::Approx(0.20404776285347154).epsilon(1e-10));
  CHECK(c.circular == doctest::Approx(-0.20404776285347154).epsilon(1e-10));
  CHECK(std::abs(time_averaged_rho(1.3, 1.0).coherence()) == doctest::Approx(0.2258582314492168).epsilon(1e-10));
}

TEST_CASE("three-correlation fidelity equals the matrix fidelity to phi+ for any state") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const DensityMatrix rho = testsupport::random_density(rng, 1 + i % 4);
    CHECK(fidelity_from_correlations(correlations_of(rho)) ==
          doctest::Approx(fidelity(rho, TwoPhotonKet::phi_plus())).epsilon(1e-12));
  }
  // but not to a phase-rotated target
  const DensityMatrix rotated = DensityMatrix::pure(TwoPhotonKet::phi(0.41 * pi));
  CHECK(fidelity(rotated, TwoPhotonKet::phi(0.41 * pi)) == doctest::Approx(1.0));
  CHECK(fidelity_from_correlations(correlations_of(rotated)) < 0.9);
}

TEST_CASE("cascade ket phase grows as 2 pi S tau / h") {
  const double s = 2.9, tau = 0.2923;
  const TwoPhotonKet k = cascade_ket(FssSplitting(s), tau);
  const double phase = std::arg(k.amplitudes()(3) / k.amplitudes()(0));
  CHECK(phase / pi == doctest::Approx(2.0 * s * tau / kPlanckUeVNs).epsilon(1e-12));
  CHECK(std::abs(k.amplitudes()(1)) < 1e-15);
  CHECK(std::abs(k.amplitudes()(2)) < 1e-15);
  const double origin = std::arg(cascade_ket(FssSplitting(0.0), 1.0, 0.3 * pi).amplitudes()(3));
  CHECK(origin == doctest::Approx(0.3 * pi));
}
