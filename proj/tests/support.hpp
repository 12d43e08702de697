#pragma once

// Helpers shared by the unit tests and the acceptance suite. Everything
// here is deliberately independent of the library internals: its own RNG
// (std::mt19937_64) and plain O(n^2) loops.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qdent/correlator.hpp"
#include "qdent/polarization.hpp"
#include "qdent/timetag.hpp"

namespace testsupport {

/// Ginibre ensemble G G^dag / Tr; `rank` columns.
inline qdent::DensityMatrix random_density(std::mt19937_64& rng, int rank = 4) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXcd g(4, rank);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < rank; ++c) g(r, c) = {n(rng), n(rng)};
  Eigen::Matrix4cd m = g * g.adjoint();
  m /= m.trace().real();
  m = 0.5 * (m + m.adjoint()).eval();
  return qdent::DensityMatrix(m);
}

/// Sorted random stream; channels drawn from [0, channels).
inline std::vector<qdent::TimeTag> random_stream(std::mt19937_64& rng, std::size_t n, std::uint64_t span_ps,
                                                 int channels = 4) {
  std::uniform_int_distribution<std::uint64_t> t(0, span_ps);
  std::uniform_int_distribution<int> c(0, channels - 1);
  std::vector<qdent::TimeTag> v(n);
  for (auto& tag : v) tag = {t(rng), static_cast<std::uint8_t>(c(rng)), 0};
  std::sort(v.begin(), v.end(), qdent::tag_less);
  return v;
}

/// All-pairs histogram; a == b excludes pairing a tag with itself.
inline std::vector<std::uint64_t> brute_force_histogram(const std::vector<qdent::TimeTag>& s, std::uint8_t a,
                                                        std::uint8_t b, const qdent::HistogramAxis& axis) {
  std::vector<std::pair<std::size_t, std::int64_t>> as, bs;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto t = static_cast<std::int64_t>(s[i].timestamp_ps);
    if (s[i].channel == a) as.emplace_back(i, t);
    if (s[i].channel == b) bs.emplace_back(i, t);
  }
  std::vector<std::uint64_t> h(axis.bins(), 0);
  for (const auto& [i, ta] : as)
    for (const auto& [j, tb] : bs) {
      if (i == j) continue;
      const std::int64_t tau = tb - ta;
      if (tau < axis.min_ps || tau >= axis.max_ps) continue;
      // floor division, tau - min >= 0 here
      ++h[static_cast<std::size_t>((tau - axis.min_ps) / axis.width_ps)];
    }
  return h;
}

/// Composite Simpson rule on [0, upper] for f(tau) exp(-tau/T)/T.
template <class F>
std::complex<double> simpson(F f, double upper, int panels = 200000) {
  const double hstep = upper / panels;
  std::complex<double> acc = f(0.0) + f(upper);
  for (int k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(k * hstep);
  return acc * hstep / 3.0;
}

}  // namespace testsupport
