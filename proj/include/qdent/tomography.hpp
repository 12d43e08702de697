#pragma once

// Two-photon polarization state reconstruction from coincidence counts.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qdent/correlator.hpp"
#include "qdent/polarization.hpp"

namespace qdent {

enum class ReconstructionMethod { Linear, Mle };
std::string to_string(ReconstructionMethod m);

struct ReconstructionResult {
  explicit ReconstructionResult(DensityMatrix r) : rho(std::move(r)) {}

  DensityMatrix rho;
  double log_likelihood = 0.0;  ///< Poisson log-likelihood of the observed counts
  int iterations = 0;
  bool converged = false;
  ReconstructionMethod method = ReconstructionMethod::Linear;
  double gradient_norm = 0.0;
  /// Log-likelihood after every accepted optimizer step (MLE only).
  std::vector<double> log_likelihood_trace;

  double min_eigenvalue() const { return rho.min_eigenvalue(); }
  /// Linear estimates may be unphysical; MLE estimates never are.
  bool negative_eigenvalue_flag() const { return min_eigenvalue() < DensityMatrix::kEigenTol; }
};

struct MleOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
};

/// Subtracts a flat accidental level (counts per unit exposure) from every
/// entry, clamping at zero.
CountsTable subtract_flat_background(const CountsTable& table, double rate_per_exposure);

/// Least-squares inversion of the count rates onto the 16 two-qubit Pauli
/// products. Throws InvalidInput on an empty table or a setting set that
/// does not span the operator space.
ReconstructionResult linear_reconstruct(const CountsTable& counts);

/// Maximum-likelihood estimate rho = T^dag T / Tr(T^dag T), T upper
/// triangular with a real diagonal, fitted with a damped Newton iteration
/// on the Poisson likelihood. Non-convergence is reported through
/// `converged`, with the best iterate returned.
ReconstructionResult mle_reconstruct(const CountsTable& counts, const MleOptions& options = {});

struct BootstrapResult {
  double fidelity_mean = 0.0;
  double fidelity_sigma = 0.0;
  int n_resamples = 0;
  int n_failed = 0;
};

/// Parametric bootstrap: every count resampled as Poisson(observed) with a
/// per-resample counter-based stream, each resample refitted by MLE.
BootstrapResult bootstrap_uncertainty(const CountsTable& counts, int n_resamples, const TwoPhotonKet& target,
                                      std::uint64_t seed = 1, unsigned workers = 1);

/// arg(<VV|rho|HH>) in (-pi, pi]. Throws EstimationFailure when the
/// coherence magnitude is at or below `threshold`.
double extract_phase(const DensityMatrix& rho, double threshold = 0.05);

/// Rounded expected counts mean_per_exposure * exposure * p(a, b) for every
/// entry present in `layout`.
CountsTable expected_counts(const DensityMatrix& rho, const CountsTable& layout, double mean_per_exposure);

/// Layout of a table holding the four outcome pairs of each setting, unit
/// exposure per setting.
CountsTable layout_for(const std::vector<AnalyzerSetting>& settings, PortMode ports = PortMode::AllPorts);

}  // namespace qdent
