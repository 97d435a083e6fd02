// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_DIAGNOSTICS_HPP
#define ROMBAYES_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "rombayes/common.hpp"

namespace rombayes {

// Normalized autocorrelation at lags 0..max_lag. The covariance estimator
// divides by the series length at every lag (not by the overlap count), so the
// sequence is positive semidefinite. A constant series returns rho_0 = 1 and
// zeros beyond.
inline Vector acf(const Vector& x, std::size_t max_lag) {
  const std::size_t m = x.size();
  require(m >= 2, "acf: need at least two samples");
  require(max_lag < m, "acf: max_lag must be below the series length");
  Vector rho(max_lag + 1, 0.0);
  rho[0] = 1.0;
  // An exactly constant series has no correlation structure; testing values
  // (not the variance) avoids the roundoff in mean subtraction.
  if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) return rho;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(m);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(m);
  if (c0 == 0.0) return rho;
  for (std::size_t j = 1; j <= max_lag; ++j) {
    double cj = 0.0;
    for (std::size_t t = 0; t + j < m; ++t) cj += (x[t] - mean) * (x[t + j] - mean);
    cj /= static_cast<double>(m);
    rho[j] = cj / c0;
  }
  return rho;
}

// Integrated autocorrelation time with a Bartlett-tapered window of width
// J = floor(10 log10(M)): tau = 1 + 2 sum_{j<J} (1 - j/J) rho_j.
inline double iact(const Vector& x) {
  const std::size_t m = x.size();
  require(m >= 2, "iact: need at least two samples");
  const std::size_t window =
      static_cast<std::size_t>(std::floor(10.0 * std::log10(static_cast<double>(m))));
  if (window <= 1) return 1.0;
  const Vector rho = acf(x, std::min(window - 1, m - 1));
  double tau = 1.0;
  for (std::size_t j = 1; j < window && j < rho.size(); ++j)
    tau += 2.0 * (1.0 - static_cast<double>(j) / static_cast<double>(window)) * rho[j];
  return tau;
}

struct GewekeResult {
  double z = 0.0;
  double p = 1.0;
};

// Equality-of-means z-test between the first frac_a and last frac_b of the
// series. Each segment's mean variance is estimated by batch means (16
// batches), which absorbs autocorrelation. Constant input gives (z, p) =
// (0, 1). p = 2 (1 - Phi(|z|)).
inline GewekeResult geweke(const Vector& x, double frac_a = 0.1, double frac_b = 0.5,
                           std::size_t batches = 16) {
  const std::size_t m = x.size();
  require(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0, "geweke: bad segment fractions");
  const std::size_t na = static_cast<std::size_t>(std::floor(frac_a * static_cast<double>(m)));
  const std::size_t nb = static_cast<std::size_t>(std::floor(frac_b * static_cast<double>(m)));
  require(na >= 32 && nb >= 32, "geweke: segments need at least 32 samples");

  auto segment_stats = [batches](const double* seg, std::size_t len, double& mean, double& var_mean) {
    const std::size_t bs = len / batches;  // batch size; trailing remainder unused
    Vector mu(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < bs; ++i) s += seg[b * bs + i];
      mu[b] = s / static_cast<double>(bs);
    }
    double mbar = 0.0;
    for (double v : mu) mbar += v;
    mbar /= static_cast<double>(batches);
    double s2 = 0.0;
    for (double v : mu) s2 += (v - mbar) * (v - mbar);
    s2 /= static_cast<double>(batches - 1);
    mean = mbar;
    var_mean = s2 / static_cast<double>(batches);
  };

  double mean_a, var_a, mean_b, var_b;
  segment_stats(x.data(), na, mean_a, var_a);
  segment_stats(x.data() + (m - nb), nb, mean_b, var_b);

  GewekeResult out;
  const double denom = var_a + var_b;
  if (denom == 0.0) return out;  // constant segments
  out.z = (mean_a - mean_b) / std::sqrt(denom);
  out.p = std::erfc(std::abs(out.z) / std::sqrt(2.0));
  return out;
}

struct IntervalEstimate {
  double lo = 0.0;
  double hi = 0.0;
  double midpoint = 0.0;
};

// Central interval by order statistics with linear interpolation between
// adjacent ranks; the midpoint is the reported point estimate.
inline IntervalEstimate confidence_interval(const Vector& x, double level = 0.95) {
  require(!x.empty(), "confidence_interval: empty input");
  require(level > 0.0 && level < 1.0, "confidence_interval: level must be in (0,1)");
  Vector s = x;
  std::sort(s.begin(), s.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(s.size() - 1);
    const std::size_t i = static_cast<std::size_t>(std::floor(pos));
    const double w = pos - static_cast<double>(i);
    if (i + 1 >= s.size()) return s.back();
    return (1.0 - w) * s[i] + w * s[i + 1];
  };
  IntervalEstimate out;
  out.lo = quantile(0.5 * (1.0 - level));
  out.hi = quantile(1.0 - 0.5 * (1.0 - level));
  out.midpoint = 0.5 * (out.lo + out.hi);
  return out;
}

struct Histogram {
  Vector edges;                    // bins + 1 ascending edges
  std::vector<std::size_t> counts;  // bins entries, summing to the sample count
};

// Uniform-width histogram over [min, max]. The maximum lands in the last bin.
// All-equal input occupies the first bin with degenerate edges.
inline Histogram histogram(const Vector& x, std::size_t bins) {
  require(!x.empty(), "histogram: empty input");
  require(bins >= 1, "histogram: need at least one bin");
  const auto [mn_it, mx_it] = std::minmax_element(x.begin(), x.end());
  const double mn = *mn_it, mx = *mx_it;
  Histogram h;
  h.edges.resize(bins + 1);
  h.counts.assign(bins, 0);
  const double width = (mx - mn) / static_cast<double>(bins);
  for (std::size_t j = 0; j <= bins; ++j) h.edges[j] = mn + width * static_cast<double>(j);
  if (width == 0.0) {
    h.counts[0] = x.size();
    return h;
  }
  for (double v : x) {
    std::size_t idx = static_cast<std::size_t>((v - mn) / width);
    if (idx >= bins) idx = bins - 1;
    h.counts[idx] += 1;
  }
  return h;
}

// Drops the first count samples.
inline Vector burn_in(const Vector& x, std::size_t count) {
  require(count < x.size(), "burn_in: count must be below the series length");
  return Vector(x.begin() + static_cast<std::ptrdiff_t>(count), x.end());
}

}  // namespace rombayes

#endif  // ROMBAYES_DIAGNOSTICS_HPP
