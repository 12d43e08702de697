#include "qdent/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include "qdent/error.hpp"
#include "qdent/parallel.hpp"
#include "qdent/rng.hpp"

namespace qdent {

std::string to_string(ReconstructionMethod m) { return m == ReconstructionMethod::Mle ? "mle" : "linear"; }

namespace {

using Vec16 = Eigen::Matrix<double, 16, 1>;
using Mat16 = Eigen::Matrix<double, 16, 16>;

std::array<Eigen::Matrix2cd, 4> paulis() {
  const cplx i{0.0, 1.0};
  Eigen::Matrix2cd id, x, y, z;
  id << 1, 0, 0, 1;
  x << 0, 1, 1, 0;
  y << 0, -i, i, 0;
  z << 1, 0, 0, -1;
  return {id, x, y, z};
}

Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
  return out;
}

Eigen::Matrix4cd projector(PolLabel xx, PolLabel x) {
  return kron(basis_ket(xx).projector(), basis_ket(x).projector());
}

// Parameter m -> basis matrix E_m of the upper-triangular factor T.
// m = 0..3: real diagonal; then (re, im) pairs for (0,1) (0,2) (0,3) (1,2) (1,3) (2,3).
const std::array<Eigen::Matrix4cd, 16>& factor_basis() {
  static const std::array<Eigen::Matrix4cd, 16> basis = [] {
    std::array<Eigen::Matrix4cd, 16> b;
    for (auto& m : b) m.setZero();
    for (int d = 0; d < 4; ++d) b[d](d, d) = 1.0;
    int m = 4;
    for (int r = 0; r < 4; ++r)
      for (int c = r + 1; c < 4; ++c) {
        b[m++](r, c) = 1.0;
        b[m++](r, c) = cplx(0.0, 1.0);
      }
    return b;
  }();
  return basis;
}

Eigen::Matrix4cd factor_from(const Vec16& t) {
  const auto& b = factor_basis();
  Eigen::Matrix4cd T = Eigen::Matrix4cd::Zero();
  for (int m = 0; m < 16; ++m) T += t(m) * b[m];
  return T;
}

Vec16 params_from(const Eigen::Matrix4cd& T) {
  Vec16 t;
  for (int d = 0; d < 4; ++d) t(d) = T(d, d).real();
  int m = 4;
  for (int r = 0; r < 4; ++r)
    for (int c = r + 1; c < 4; ++c) {
      t(m++) = T(r, c).real();
      t(m++) = T(r, c).imag();
    }
  return t;
}

struct Term {
  double freq;    // observed count / total
  double counts;  // observed count
  Mat16 A;        // mu = t^T A t
};

struct Evaluation {
  double ll = -std::numeric_limits<double>::infinity();
  Vec16 grad = Vec16::Zero();
  Mat16 hess = Mat16::Zero();
};

Evaluation evaluate(const std::vector<Term>& terms, const Vec16& t, bool derivatives) {
  Evaluation e;
  double ll = 0.0;
  for (const Term& k : terms) {
    const Vec16 At = k.A * t;
    const double mu = t.dot(At);
    if (mu <= 0.0) {
      if (k.freq > 0.0) return e;
      continue;
    }
    ll += (k.freq > 0.0 ? k.freq * std::log(mu) : 0.0) - mu;
    if (!derivatives) continue;
    const double r = k.freq / mu - 1.0;
    e.grad += 2.0 * r * At;
    e.hess += 2.0 * r * k.A - (4.0 * k.freq / (mu * mu)) * (At * At.transpose());
  }
  e.ll = ll;
  return e;
}

DensityMatrix normalized(const Eigen::Matrix4cd& g) {
  Eigen::Matrix4cd m = 0.5 * (g + g.adjoint());
  m /= m.trace().real();
  return DensityMatrix(m);
}

double poisson_log_likelihood(const std::vector<Term>& terms, double total, const Vec16& t) {
  double ll = 0.0;
  for (const Term& k : terms) {
    const double m = total * t.dot(k.A * t);
    if (m > 0.0) ll += k.counts * std::log(m) - m - std::lgamma(k.counts + 1.0);
    else if (k.counts > 0.0) return -std::numeric_limits<double>::infinity();
  }
  return ll;
}

}  // namespace

CountsTable subtract_flat_background(const CountsTable& table, double rate_per_exposure) {
  require(std::isfinite(rate_per_exposure) && rate_per_exposure >= 0.0, "background rate must be >= 0");
  CountsTable out = table;
  for (const auto& e : table.entries()) {
    const double c = static_cast<double>(e.count) - rate_per_exposure * e.exposure;
    out.set(e.xx, e.x, c > 0.0 ? static_cast<std::uint64_t>(std::llround(c)) : 0, e.exposure);
  }
  return out;
}

ReconstructionResult linear_reconstruct(const CountsTable& counts) {
  const auto entries = counts.entries();
  require(!entries.empty() && counts.total() > 0, "linear reconstruction needs a table with nonzero counts");
  const auto sigma = paulis();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(entries.size()), 16);
  Eigen::VectorXd rates(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t r = 0; r < entries.size(); ++r) {
    const auto& e = entries[r];
    const auto a = basis_ket(e.xx).amplitudes();
    const auto b = basis_ket(e.x).amplitudes();
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double ea = (a.adjoint() * sigma[i] * a)(0, 0).real();
        const double eb = (b.adjoint() * sigma[j] * b)(0, 0).real();
        design(static_cast<Eigen::Index>(r), 4 * i + j) = 0.25 * ea * eb;
      }
    rates(static_cast<Eigen::Index>(r)) = static_cast<double>(e.count) / e.exposure;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 16)
    throw InvalidInput("measurement settings do not span the two-qubit operator space (rank " +
                       std::to_string(qr.rank()) + " < 16)");
  const Eigen::VectorXd s = qr.solve(rates);
  if (s(0) <= 0.0) throw EstimationFailure("linear inversion produced a non-positive trace");
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m += 0.25 * s(4 * i + j) * kron(sigma[i], sigma[j]);
  m /= m.trace().real();
  m = 0.5 * (m + m.adjoint()).eval();

  ReconstructionResult res(DensityMatrix(m, DensityMatrix::Check::HermitianTrace));
  res.method = ReconstructionMethod::Linear;
  res.converged = true;
  return res;
}

ReconstructionResult mle_reconstruct(const CountsTable& counts, const MleOptions& options) {
  const ReconstructionResult linear = linear_reconstruct(counts);
  const auto entries = counts.entries();
  const double total = static_cast<double>(counts.total());
  double max_exposure = 0.0;
  for (const auto& e : entries) max_exposure = std::max(max_exposure, e.exposure);

  const auto& basis = factor_basis();
  std::vector<Term> terms;
  terms.reserve(entries.size());
  for (const auto& e : entries) {
    Term k;
    k.counts = static_cast<double>(e.count);
    k.freq = k.counts / total;
    const Eigen::Matrix4cd P = projector(e.xx, e.x) * (e.exposure / max_exposure);
    for (int m = 0; m < 16; ++m)
      for (int n = m; n < 16; ++n) {
        const double v = (basis[m].adjoint() * basis[n] * P).trace().real();
        k.A(m, n) = v;
        k.A(n, m) = v;
      }
    terms.push_back(std::move(k));
  }

  // Start from the linear estimate pulled into the interior of the state space.
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(linear.rho.matrix());
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  ev /= ev.sum();
  Eigen::Matrix4cd start = es.eigenvectors() * ev.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
  start = 0.99 * start + 0.0025 * Eigen::Matrix4cd::Identity();
  start = 0.5 * (start + start.adjoint()).eval();
  const Eigen::Matrix4cd L = start.llt().matrixL();
  Vec16 t = params_from(L.adjoint());
  double mu_sum = 0.0;
  for (const Term& k : terms) mu_sum += t.dot(k.A * t);
  t *= std::sqrt(1.0 / mu_sum);

  ReconstructionResult res(normalized(factor_from(t).adjoint() * factor_from(t)));
  res.method = ReconstructionMethod::Mle;
  Evaluation cur = evaluate(terms, t, true);
  res.log_likelihood_trace.push_back(cur.ll);
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < options.max_iterations; ++it) {
    if (cur.grad.norm() < options.gradient_tolerance) {
      converged = true;
      break;
    }
    // Damped Newton step on -LL; damping grows until the step improves LL.
    bool accepted = false;
    Vec16 step = Vec16::Zero();
    const Mat16 neg_h = -cur.hess;
    const double scale = std::max(1.0, neg_h.diagonal().cwiseAbs().maxCoeff());
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      const Mat16 m = neg_h + lambda * scale * Mat16::Identity();
      Eigen::LLT<Mat16> llt(m);
      if (llt.info() != Eigen::Success) {
        lambda = std::max(lambda * 10.0, 1e-12);
        continue;
      }
      step = llt.solve(cur.grad);
      const Evaluation trial = evaluate(terms, t + step, false);
      if (trial.ll >= cur.ll) {
        accepted = true;
        t += step;
        cur = evaluate(terms, t, true);
        res.log_likelihood_trace.push_back(cur.ll);
        lambda = std::max(lambda / 10.0, 1e-15);
      } else {
        lambda = std::max(lambda * 10.0, 1e-12);
      }
    }
    if (!accepted || step.norm() < options.step_tolerance) {
      converged = step.norm() < options.step_tolerance || cur.grad.norm() < options.gradient_tolerance;
      ++it;
      break;
    }
  }
  if (!converged && cur.grad.norm() < options.gradient_tolerance) converged = true;

  const Eigen::Matrix4cd T = factor_from(t);
  res.rho = normalized(T.adjoint() * T);
  res.iterations = it;
  res.converged = converged;
  res.gradient_norm = cur.grad.norm();
  res.log_likelihood = poisson_log_likelihood(terms, total, t);
  return res;
}

BootstrapResult bootstrap_uncertainty(const CountsTable& counts, int n_resamples, const TwoPhotonKet& target,
                                      std::uint64_t seed, unsigned workers) {
  require(n_resamples >= 100, "bootstrap needs at least 100 resamples");
  const auto entries = counts.entries();
  std::vector<double> fid(static_cast<std::size_t>(n_resamples), std::numeric_limits<double>::quiet_NaN());
  parallel_for(fid.size(), workers, [&](std::size_t r) {
    CounterRng rng(seed, StreamId::Bootstrap, r);
    CountsTable resampled = counts;
    for (const auto& e : entries)
      resampled.set(e.xx, e.x, rng.poisson(static_cast<double>(e.count)), e.exposure);
    try {
      fid[r] = fidelity(mle_reconstruct(resampled).rho, target);
    } catch (const Error&) {
      // counted as a failed resample below
    }
  });
  BootstrapResult out;
  out.n_resamples = n_resamples;
  std::vector<double> ok;
  for (double f : fid)
    if (std::isfinite(f)) ok.push_back(f);
  out.n_failed = n_resamples - static_cast<int>(ok.size());
  if (ok.size() < 2) throw EstimationFailure("bootstrap: fewer than two resamples could be reconstructed");
  const double mean = std::accumulate(ok.begin(), ok.end(), 0.0) / static_cast<double>(ok.size());
  double ss = 0.0;
  for (double f : ok) ss += (f - mean) * (f - mean);
  out.fidelity_mean = mean;
  out.fidelity_sigma = std::sqrt(ss / static_cast<double>(ok.size() - 1));
  return out;
}

double extract_phase(const DensityMatrix& rho, double threshold) {
  const cplx c = rho.coherence();
  if (std::abs(c) <= threshold)
    throw EstimationFailure("HH-VV coherence " + std::to_string(std::abs(c)) + " below threshold " +
                            std::to_string(threshold));
  const double phase = std::arg(c);
  return phase <= -std::numbers::pi ? std::numbers::pi : phase;
}

CountsTable expected_counts(const DensityMatrix& rho, const CountsTable& layout, double mean_per_exposure) {
  require(mean_per_exposure > 0.0, "expected count scale must be > 0");
  CountsTable out;
  out.meta = layout.meta;
  for (const auto& e : layout.entries()) {
    const double p = std::max(0.0, joint_probability(rho, basis_ket(e.xx), basis_ket(e.x)));
    out.set(e.xx, e.x, static_cast<std::uint64_t>(std::llround(mean_per_exposure * e.exposure * p)), e.exposure);
  }
  return out;
}

CountsTable layout_for(const std::vector<AnalyzerSetting>& settings, PortMode ports) {
  CountsTable t;
  for (const auto& s : settings) {
    const PolLabel a[2] = {s.xx, orthogonal(s.xx)};
    const PolLabel b[2] = {s.x, orthogonal(s.x)};
    const int n = ports == PortMode::AllPorts ? 2 : 1;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t.add(a[i], b[j], 0, 1.0);
  }
  t.meta.ports = ports;
  t.meta.settings = settings.size();
  return t;
}

}  // namespace qdent
