#pragma once

// Convex potentials with closed-form proximal maps, their Moreau-Yosida
// envelopes, and subdifferential membership tests.
//
// Every potential is normalized so that psi(0) = 0 and psi >= 0. Indicator
// potentials take the value 0 on their (closed) domain and +inf elsewhere.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "svi/errors.hpp"

namespace svi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { above, below };

inline const char* to_string(Side s) { return s == Side::above ? "above" : "below"; }

class ConvexPotential;

// Indicator of the box [lower, upper]; bounds may be infinite.
struct IndicatorBox {
  Vec lower;
  Vec upper;
};

// Indicator of [barrier, inf) (side above) or (-inf, barrier] (side below).
struct IndicatorHalfLine {
  double barrier = 0.0;
  Side side = Side::above;
};

// x -> sum_i weight_i |x_i|.
struct AbsValue {
  Vec weight;
};

// Coordinate-wise sum of one-dimensional potentials.
struct Composite {
  std::vector<ConvexPotential> parts;
};

namespace detail {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;
}  // namespace detail

class ConvexPotential {
 public:
  using Variant = std::variant<IndicatorBox, IndicatorHalfLine, AbsValue, Composite>;

  static ConvexPotential box(Vec lower, Vec upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw UsageError("box: lower and upper must be non-empty and of equal size");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i]))
        throw UsageError("box: NaN bound");
      if (!(lower[i] < upper[i]))
        throw UsageError("box: empty interior (coordinate " + std::to_string(i) + ")");
      if (!(lower[i] <= 0.0 && 0.0 <= upper[i]))
        throw UsageError("box: domain must contain 0 (coordinate " + std::to_string(i) + ")");
    }
    const auto d = static_cast<std::size_t>(lower.size());
    return ConvexPotential(IndicatorBox{std::move(lower), std::move(upper)}, d);
  }

  static ConvexPotential box(double lower, double upper) {
    return box(Vec::Constant(1, lower), Vec::Constant(1, upper));
  }

  // The half-line must contain 0 so that psi(0) = 0.
  static ConvexPotential half_line(double barrier, Side side) {
    if (!std::isfinite(barrier)) throw UsageError("half_line: barrier must be finite");
    if ((side == Side::above && barrier > 0.0) || (side == Side::below && barrier < 0.0))
      throw UsageError("half_line: domain must contain 0 (barrier " + std::to_string(barrier) +
                       ", side " + to_string(side) + ")");
    return ConvexPotential(IndicatorHalfLine{barrier, side}, 1);
  }

  static ConvexPotential abs_value(Vec weight) {
    if (weight.size() == 0) throw UsageError("abs_value: empty weight");
    for (Eigen::Index i = 0; i < weight.size(); ++i)
      if (!(weight[i] > 0.0) || !std::isfinite(weight[i]))
        throw UsageError("abs_value: weights must be positive and finite");
    const auto d = static_cast<std::size_t>(weight.size());
    return ConvexPotential(AbsValue{std::move(weight)}, d);
  }

  static ConvexPotential abs_value(double weight, std::size_t dim = 1) {
    return abs_value(Vec::Constant(static_cast<Eigen::Index>(dim), weight));
  }

  static ConvexPotential composite(std::vector<ConvexPotential> parts) {
    if (parts.empty()) throw UsageError("composite: no parts");
    for (const auto& p : parts)
      if (p.dim() != 1) throw UsageError("composite: every part must be one-dimensional");
    const auto d = parts.size();
    return ConvexPotential(Composite{std::move(parts)}, d);
  }

  std::size_t dim() const noexcept { return dim_; }
  const Variant& variant() const noexcept { return v_; }

  // True when psi only takes the values 0 and +inf.
  bool is_indicator() const {
    return std::visit(detail::overloaded{
                          [](const IndicatorBox&) { return true; },
                          [](const IndicatorHalfLine&) { return true; },
                          [](const AbsValue&) { return false; },
                          [](const Composite& c) {
                            return std::all_of(c.parts.begin(), c.parts.end(),
                                               [](const auto& p) { return p.is_indicator(); });
                          }},
                      v_);
  }

 private:
  ConvexPotential(Variant v, std::size_t dim) : v_(std::move(v)), dim_(dim) {}

  Variant v_;
  std::size_t dim_;
};

namespace detail {

inline void check_dim(const ConvexPotential& p, const Vec& x, const char* op) {
  if (static_cast<std::size_t>(x.size()) != p.dim())
    throw UsageError(std::string(op) + ": dimension mismatch (potential " +
                     std::to_string(p.dim()) + ", point " + std::to_string(x.size()) + ")");
}

inline double half_line_project(const IndicatorHalfLine& h, double x) {
  return h.side == Side::above ? std::max(x, h.barrier) : std::min(x, h.barrier);
}

inline bool half_line_contains(const IndicatorHalfLine& h, double x) {
  return h.side == Side::above ? x >= h.barrier : x <= h.barrier;
}

inline double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Radical inverse of i in the given base (Halton coordinate).
inline double radical_inverse(std::size_t i, unsigned base) {
  double f = 1.0, r = 0.0;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

inline unsigned nth_prime(std::size_t k) {
  static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                        37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};
  constexpr std::size_t count = sizeof(primes) / sizeof(primes[0]);
  if (k >= count) throw UsageError("quasi-random probes support at most 22 dimensions");
  return primes[k];
}

}  // namespace detail

// psi(x); +inf exactly when x is outside the effective domain.
inline double evaluate(const ConvexPotential& p, const Vec& x) {
  detail::check_dim(p, x, "evaluate");
  return std::visit(
      detail::overloaded{
          [&](const IndicatorBox& b) {
            for (Eigen::Index i = 0; i < x.size(); ++i)
              if (!(x[i] >= b.lower[i] && x[i] <= b.upper[i])) return kInf;
            return 0.0;
          },
          [&](const IndicatorHalfLine& h) {
            return detail::half_line_contains(h, x[0]) ? 0.0 : kInf;
          },
          [&](const AbsValue& a) { return a.weight.dot(x.cwiseAbs()); },
          [&](const Composite& c) {
            double s = 0.0;
            for (std::size_t i = 0; i < c.parts.size(); ++i)
              s += evaluate(c.parts[i], Vec::Constant(1, x[static_cast<Eigen::Index>(i)]));
            return s;
          }},
      p.variant());
}

inline bool in_domain(const ConvexPotential& p, const Vec& x) {
  return std::isfinite(evaluate(p, x));
}

// argmin_{x'} |x' - x|^2 / (2 lambda) + psi(x').
inline Vec prox(const ConvexPotential& p, double lambda, const Vec& x) {
  detail::check_dim(p, x, "prox");
  if (!(lambda > 0.0)) throw UsageError("prox: lambda must be positive");
  return std::visit(
      detail::overloaded{
          [&](const IndicatorBox& b) -> Vec { return x.cwiseMax(b.lower).cwiseMin(b.upper); },
          [&](const IndicatorHalfLine& h) -> Vec {
            return Vec::Constant(1, detail::half_line_project(h, x[0]));
          },
          [&](const AbsValue& a) -> Vec {
            Vec r(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i)
              r[i] = detail::soft_threshold(x[i], lambda * a.weight[i]);
            return r;
          },
          [&](const Composite& c) -> Vec {
            Vec r(x.size());
            for (std::size_t i = 0; i < c.parts.size(); ++i) {
              const auto j = static_cast<Eigen::Index>(i);
              r[j] = prox(c.parts[i], lambda, Vec::Constant(1, x[j]))[0];
            }
            return r;
          }},
      p.variant());
}

// Euclidean projection onto the closed effective domain. Identity on
// coordinates whose potential has full domain.
inline Vec project_to_domain(const ConvexPotential& p, const Vec& x) {
  detail::check_dim(p, x, "project_to_domain");
  return std::visit(
      detail::overloaded{
          [&](const IndicatorBox& b) -> Vec { return x.cwiseMax(b.lower).cwiseMin(b.upper); },
          [&](const IndicatorHalfLine& h) -> Vec {
            return Vec::Constant(1, detail::half_line_project(h, x[0]));
          },
          [&](const AbsValue&) -> Vec { return x; },
          [&](const Composite& c) -> Vec {
            Vec r(x.size());
            for (std::size_t i = 0; i < c.parts.size(); ++i) {
              const auto j = static_cast<Eigen::Index>(i);
              r[j] = project_to_domain(c.parts[i], Vec::Constant(1, x[j]))[0];
            }
            return r;
          }},
      p.variant());
}

// Projection for indicator potentials; coincides with prox for every lambda.
inline Vec project(const ConvexPotential& p, const Vec& x) {
  if (!p.is_indicator()) throw UsageError("project: potential is not an indicator");
  return project_to_domain(p, x);
}

inline double distance_to_domain(const ConvexPotential& p, const Vec& x) {
  return (x - project_to_domain(p, x)).norm();
}

// Distance from x to the topological boundary of the domain (+inf when the
// domain is all of R^d). Points outside the domain return their distance to it.
inline double distance_to_boundary(const ConvexPotential& p, const Vec& x) {
  detail::check_dim(p, x, "distance_to_boundary");
  const double outside = distance_to_domain(p, x);
  if (outside > 0.0) return outside;
  return std::visit(detail::overloaded{
                        [&](const IndicatorBox& b) {
                          double d = kInf;
                          for (Eigen::Index i = 0; i < x.size(); ++i)
                            d = std::min({d, x[i] - b.lower[i], b.upper[i] - x[i]});
                          return d;
                        },
                        [&](const IndicatorHalfLine& h) { return std::abs(x[0] - h.barrier); },
                        [&](const AbsValue&) { return kInf; },
                        [&](const Composite& c) {
                          double d = kInf;
                          for (std::size_t i = 0; i < c.parts.size(); ++i)
                            d = std::min(d, distance_to_boundary(
                                                c.parts[i],
                                                Vec::Constant(1, x[static_cast<Eigen::Index>(i)])));
                          return d;
                        }},
                    p.variant());
}

// Exact sup over x' of <x' - x, z> - (psi(x') - psi(x)) for x in the domain.
// Zero exactly when z is a subgradient at x; +inf when z is unbounded above
// on the domain.
inline double support_gap(const ConvexPotential& p, const Vec& x, const Vec& z) {
  detail::check_dim(p, x, "support_gap");
  detail::check_dim(p, z, "support_gap");
  if (!in_domain(p, x)) throw DomainError("support_gap: point outside the domain");
  auto linear = [](double bound, double xi, double zi) {
    if (zi == 0.0) return 0.0;
    if (!std::isfinite(bound)) return kInf;
    return (bound - xi) * zi;
  };
  return std::visit(
      detail::overloaded{
          [&](const IndicatorBox& b) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i)
              s += z[i] > 0.0 ? linear(b.upper[i], x[i], z[i]) : linear(b.lower[i], x[i], z[i]);
            return s;
          },
          [&](const IndicatorHalfLine& h) {
            const bool unbounded = h.side == Side::above ? z[0] > 0.0 : z[0] < 0.0;
            if (unbounded) return kInf;
            return (h.barrier - x[0]) * z[0];
          },
          [&](const AbsValue& a) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
              if (std::abs(z[i]) > a.weight[i]) return kInf;
              s += a.weight[i] * std::abs(x[i]) - x[i] * z[i];
            }
            return s;
          },
          [&](const Composite& c) {
            double s = 0.0;
            for (std::size_t i = 0; i < c.parts.size(); ++i) {
              const auto j = static_cast<Eigen::Index>(i);
              s += support_gap(c.parts[i], Vec::Constant(1, x[j]), Vec::Constant(1, z[j]));
            }
            return s;
          }},
      p.variant());
}

// A closed-form element of the subdifferential at x (the minimal-norm one).
inline Vec subgradient(const ConvexPotential& p, const Vec& x) {
  detail::check_dim(p, x, "subgradient");
  if (!in_domain(p, x)) throw DomainError("subgradient: point outside the domain");
  return std::visit(detail::overloaded{
                        [&](const IndicatorBox& b) -> Vec { return Vec::Zero(b.lower.size()); },
                        [&](const IndicatorHalfLine&) -> Vec { return Vec::Zero(1); },
                        [&](const AbsValue& a) -> Vec {
                          Vec g(x.size());
                          for (Eigen::Index i = 0; i < x.size(); ++i)
                            g[i] = x[i] > 0.0 ? a.weight[i] : (x[i] < 0.0 ? -a.weight[i] : 0.0);
                          return g;
                        },
                        [&](const Composite& c) -> Vec {
                          Vec g(x.size());
                          for (std::size_t i = 0; i < c.parts.size(); ++i) {
                            const auto j = static_cast<Eigen::Index>(i);
                            g[j] = subgradient(c.parts[i], Vec::Constant(1, x[j]))[0];
                          }
                          return g;
                        }},
                    p.variant());
}

struct SubgradientWitness {
  Vec point;
  Vec subgradient;
  double slack = 0.0;
  bool member = false;
};

inline constexpr double kSubgradientTolerance = 1e-9;

// Tests z in the subdifferential of p at x. Indicator boxes and half-lines use
// the closed-form normal cone; other potentials are probed at `probes`
// quasi-random points of the domain plus the coordinate kinks and, for
// bounded domains, the box vertices.
inline SubgradientWitness subdiff_check(const ConvexPotential& p, const Vec& x, const Vec& z,
                                        std::size_t probes,
                                        double tol = kSubgradientTolerance) {
  detail::check_dim(p, x, "subdiff_check");
  detail::check_dim(p, z, "subdiff_check");
  if (!in_domain(p, x)) throw DomainError("subdiff_check: point outside the domain");

  SubgradientWitness w{x, z, 0.0, false};
  if (p.is_indicator()) {
    w.slack = support_gap(p, x, z);
    w.member = w.slack <= tol;
    return w;
  }

  const double psi_x = evaluate(p, x);
  double slack = 0.0;
  auto probe = [&](const Vec& candidate) {
    const Vec xp = project_to_domain(p, candidate);
    const double gap = (xp - x).dot(z) - (evaluate(p, xp) - psi_x);
    if (gap > slack) slack = gap;
  };

  const auto d = static_cast<Eigen::Index>(p.dim());
  const double radius =
      1.0 + 2.0 * (x.lpNorm<Eigen::Infinity>() + z.lpNorm<Eigen::Infinity>());
  probe(Vec::Zero(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    Vec e = x;
    e[i] = 0.0;
    probe(e);
    e[i] = x[i] + radius;
    probe(e);
    e[i] = x[i] - radius;
    probe(e);
  }
  for (std::size_t k = 1; k <= probes; ++k) {
    Vec c(d);
    for (Eigen::Index i = 0; i < d; ++i)
      c[i] = x[i] + radius * (2.0 * detail::radical_inverse(k, detail::nth_prime(
                                                                   static_cast<std::size_t>(i))) -
                              1.0);
    probe(c);
  }
  w.slack = slack;
  w.member = slack <= tol;
  return w;
}

// Moreau-Yosida regularization psi^n(x) = inf_{x'} { n/2 |x' - x|^2 + psi(x') }.
struct YosidaApprox {
  ConvexPotential base;
  int n = 1;

  YosidaApprox(ConvexPotential p, int index) : base(std::move(p)), n(index) {
    if (n < 1) throw UsageError("YosidaApprox: regularization index must be >= 1");
  }
};

// J_n x = prox_{1/n}(x).
inline Vec resolvent(const YosidaApprox& y, const Vec& x) {
  return prox(y.base, 1.0 / static_cast<double>(y.n), x);
}

inline double yosida_value(const YosidaApprox& y, const Vec& x) {
  const Vec j = resolvent(y, x);
  return 0.5 * static_cast<double>(y.n) * (x - j).squaredNorm() + evaluate(y.base, j);
}

// grad psi^n(x) = n (x - J_n x).
inline Vec yosida_grad(const YosidaApprox& y, const Vec& x) {
  return static_cast<double>(y.n) * (x - resolvent(y, x));
}

}  // namespace svi
