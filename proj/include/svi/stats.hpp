#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "svi/errors.hpp"

namespace svi {

// Fixed-order pairwise summation; the result depends only on the sequence.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct McStats {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
};

// Sample mean, standard error (sample std / sqrt n) and normal 95% interval.
inline McStats mc_stats(std::span<const double> samples) {
  if (samples.size() < 2) throw UsageError("mc_stats: at least two samples required");
  const auto n = static_cast<double>(samples.size());
  const double mean = pairwise_sum(samples) / n;
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double d = samples[i] - mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / (n - 1.0);
  const double se = std::sqrt(var / n);
  return McStats{mean, se, mean - 1.96 * se, mean + 1.96 * se, samples.size()};
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

// Least squares on (log axis, log error), using points with positive error
// and positive axis value only. Empty when fewer than two such points remain.
inline std::optional<RateFit> fit_rate(std::span<const double> axis,
                                       std::span<const double> errors) {
  if (axis.size() != errors.size()) throw UsageError("fit_rate: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (errors[i] > 0.0 && axis[i] > 0.0 && std::isfinite(errors[i])) {
      lx.push_back(std::log(axis[i]));
      ly.push_back(std::log(errors[i]));
    }
  }
  if (lx.size() < 2) return std::nullopt;
  const auto n = static_cast<double>(lx.size());
  const double mx = pairwise_sum(lx) / n, my = pairwise_sum(ly) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  f.points = lx.size();
  return f;
}

}  // namespace svi
