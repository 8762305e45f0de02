#pragma once

// Coefficient bundles for the X- and Y-systems, the control process, and
// sampled audits of the structural conditions the coefficients must satisfy.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "svi/convex.hpp"
#include "svi/errors.hpp"
#include "svi/paths.hpp"

namespace svi {

// Declared regularity of the X coefficients: drift (1/2 + alpha)-Hoelder with
// modulus l0, diffusions with moduli l1, l2.
struct XRegularity {
  double alpha = 0.5;
  double l0 = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
};

struct XCoefficients {
  std::size_t dim = 1;
  std::size_t dim_w = 1;
  std::size_t dim_b = 1;
  std::function<Vec(double, const PathView&)> drift;
  std::function<Mat(double, const PathView&)> sigma1;  // dim x dim_w
  std::function<Mat(double, const PathView&)> sigma2;  // dim x dim_b
  XRegularity meta;
};

// Declared regularity of the Y coefficients: Lipschitz envelope L_R in y,
// joint envelope c with exponent 1 + 2 gamma.
struct YRegularity {
  double lipschitz_y = 0.0;
  double c = 0.0;
  double gamma = 0.5;
};

struct YCoefficients {
  std::size_t dim = 1;
  std::size_t dim_b = 1;
  std::function<Vec(double, const PathView& x, const PathView& y, double q)> drift;
  std::function<Mat(double, const PathView& x, const PathView& y, double q)> diffusion;
  YRegularity meta;
};

// Piecewise-constant control with values in [lambda1, lambda2]. Left
// continuous: the value on (b_j, b_{j+1}] is values[j], and values[0] also
// holds at t = 0.
class ControlProcess {
 public:
  ControlProcess(std::vector<double> breakpoints, std::vector<double> values, double lambda1,
                 double lambda2)
      : breakpoints_(std::move(breakpoints)),
        values_(std::move(values)),
        lambda1_(lambda1),
        lambda2_(lambda2) {
    if (!(lambda1_ <= lambda2_)) throw UsageError("ControlProcess: lambda1 > lambda2");
    if (values_.size() != breakpoints_.size() + 1)
      throw UsageError("ControlProcess: need exactly one more value than breakpoints");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i)
      if (!(breakpoints_[i] > breakpoints_[i - 1]))
        throw UsageError("ControlProcess: breakpoints must be strictly increasing");
    for (double v : values_)
      if (!(v >= lambda1_ && v <= lambda2_))
        throw UsageError("ControlProcess: value outside [lambda1, lambda2]");
  }

  static ControlProcess constant(double v) { return ControlProcess({}, {v}, v, v); }
  static ControlProcess constant(double v, double lambda1, double lambda2) {
    return ControlProcess({}, {v}, lambda1, lambda2);
  }

  double lambda1() const noexcept { return lambda1_; }
  double lambda2() const noexcept { return lambda2_; }
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double operator()(double t) const {
    const auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return values_[static_cast<std::size_t>(it - breakpoints_.begin())];
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> values_;
  double lambda1_;
  double lambda2_;
};

inline double evaluate_control(const ControlProcess& q, double t, double horizon) {
  if (!(t >= 0.0 && t <= horizon)) throw UsageError("evaluate_control: t outside [0, T]");
  return q(t);
}

// ---------------------------------------------------------------------------
// Condition probes

struct ProbeReport {
  std::size_t samples = 0;
  double worst_violation = 0.0;
  double modulus = 0.0;
  bool pass = true;
};

// Two paths on a common grid, compared at step `index`.
struct PathPair {
  SamplePath a;
  SamplePath b;
  std::size_t index = 0;
};

using PairSampler = std::function<PathPair(std::size_t)>;

// All ordered pairs of a uniform grid of `points` states in [lo, hi]^1, as
// single-step constant paths; index i maps to the pair (i / points, i % points).
inline PairSampler grid_pairs_1d(double lo, double hi, std::size_t points) {
  if (points < 2) throw UsageError("grid_pairs_1d: need at least two points");
  const MeshGrid g(1.0, 1);
  return [=](std::size_t i) {
    const auto node = [&](std::size_t j) {
      return lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
    };
    return PathPair{SamplePath::constant(g, Vec::Constant(1, node(i / points))),
                    SamplePath::constant(g, Vec::Constant(1, node(i % points))), 1};
  };
}

inline std::size_t grid_pair_count(std::size_t points) { return points * points; }

// Random paths of `steps` steps in [lo, hi]^dim: a uniform start followed by a
// clamped random walk. Deterministic per (seed, index).
inline PairSampler random_path_pairs(std::size_t dim, double lo, double hi, std::size_t steps,
                                     std::uint64_t seed) {
  const MeshGrid g(1.0, std::max<std::size_t>(steps, 1));
  return [=](std::size_t i) {
    std::mt19937_64 gen(detail::splitmix64(seed ^ detail::splitmix64(i)));
    std::uniform_real_distribution<double> u(lo, hi);
    std::normal_distribution<double> n(0.0, 0.1 * (hi - lo));
    auto make = [&] {
      SamplePath p(g, dim);
      for (std::size_t c = 0; c < dim; ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        p.values(0, col) = u(gen);
        for (std::size_t k = 1; k <= g.steps(); ++k) {
          const auto r = static_cast<Eigen::Index>(k);
          p.values(r, col) = std::clamp(p.values(r - 1, col) + n(gen), lo, hi);
        }
      }
      return p;
    };
    SamplePath a = make();
    SamplePath b = make();
    return PathPair{std::move(a), std::move(b), g.steps()};
  };
}

inline constexpr double kMonotoneTolerance = 1e-10;

// worst violation = max <b(x) - b(x'), x_t - x'_t>; passes when <= 1e-10.
inline ProbeReport probe_monotone_drift(const std::function<Vec(double, const PathView&)>& drift,
                                        const PairSampler& sampler, std::size_t n,
                                        double tol = kMonotoneTolerance) {
  ProbeReport r;
  r.worst_violation = -kInf;
  for (std::size_t i = 0; i < n; ++i) {
    const PathPair pp = sampler(i);
    const PathView va(pp.a, pp.index), vb(pp.b, pp.index);
    const double t = va.time();
    const double v = (drift(t, va) - drift(t, vb)).dot(va.current() - vb.current());
    r.worst_violation = std::max(r.worst_violation, v);
    ++r.samples;
  }
  if (r.samples == 0) r.worst_violation = 0.0;
  r.modulus = std::max(0.0, r.worst_violation);
  r.pass = r.worst_violation <= tol;
  return r;
}

inline ProbeReport probe_monotone_drift(const XCoefficients& c, const PairSampler& sampler,
                                        std::size_t n, double tol = kMonotoneTolerance) {
  return probe_monotone_drift(c.drift, sampler, n, tol);
}

namespace detail {
template <class T>
double difference_norm(const T& a, const T& b) {
  if constexpr (std::is_arithmetic_v<T>)
    return std::abs(a - b);
  else
    return (a - b).norm();
}
}  // namespace detail

// Estimated modulus = max |f(x) - f(x')| / ||x - x'||_t^exponent (sup norm of
// the path difference up to the compared step). Pairs at distance 0 are
// skipped. Passes when the estimate is finite and <= 1.01 x envelope;
// worst_violation is estimate - envelope.
template <class F>
ProbeReport probe_holder(F&& f, double exponent, const PairSampler& sampler, std::size_t n,
                         double envelope) {
  if (!(exponent > 0.0 && exponent <= 1.0))
    throw UsageError("probe_holder: exponent must lie in (0, 1]");
  ProbeReport r;
  for (std::size_t i = 0; i < n; ++i) {
    const PathPair pp = sampler(i);
    const PathView va(pp.a, pp.index), vb(pp.b, pp.index);
    const auto k = static_cast<Eigen::Index>(pp.index + 1);
    const double dist =
        (pp.a.values.topRows(k) - pp.b.values.topRows(k)).rowwise().norm().maxCoeff();
    if (dist == 0.0) continue;
    const double t = va.time();
    const double ratio = detail::difference_norm(f(t, va), f(t, vb)) / std::pow(dist, exponent);
    r.modulus = std::max(r.modulus, ratio);
    ++r.samples;
  }
  r.worst_violation = r.modulus - envelope;
  r.pass = std::isfinite(r.modulus) && r.modulus <= envelope * 1.01;
  return r;
}

}  // namespace svi
