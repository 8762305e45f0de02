#pragma once

// Catalog of example models: reflected Brownian motion, a toy monotone
// system, a Heston-type model with running-maximum local volatility, a
// reflected stochastic local volatility model, and a local-maximum
// stochastic volatility model.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svi/coefficients.hpp"
#include "svi/convex.hpp"
#include "svi/errors.hpp"
#include "svi/paths.hpp"

namespace svi {

enum class ProbeTarget { x_drift, x_sigma1, x_sigma2, y_drift, y_diffusion };
enum class ProbeKind { monotone, holder };

// A condition the model claims to satisfy, checked on a grid of states
// (constant one-step paths) in [lo, hi]. Y targets vary y with x and q fixed
// at x_ref and q_ref. The envelope is the analytic modulus over the grid.
struct DeclaredProbe {
  std::string name;
  ProbeTarget target = ProbeTarget::x_drift;
  ProbeKind kind = ProbeKind::holder;
  double exponent = 1.0;
  double envelope = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t points = 1000;
  double x_ref = 0.0;
  double q_ref = 1.0;
};

struct SviModel {
  std::string name;
  XCoefficients x;
  std::optional<YCoefficients> y;
  ConvexPotential psi1;
  std::optional<ConvexPotential> psi2;
  Vec x0;
  Vec y0;
  CorrelationSpec correlation;
  std::vector<DeclaredProbe> probes;

  bool has_y() const { return y.has_value(); }
};

namespace detail {
inline Mat scalar_mat(double v) { return Mat::Constant(1, 1, v); }
inline Vec scalar_vec(double v) { return Vec::Constant(1, v); }
inline double pos_sqrt(double v) { return std::sqrt(std::max(v, 0.0)); }

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}
}  // namespace detail

// Reflected Brownian motion in `dim` dimensions: b = 0, unit diffusion split
// across (W, B) by rho, psi1 = indicator of the orthant [0, inf)^dim.
inline SviModel make_reflected_bm(std::size_t dim = 1, double rho = 0.0, double x0 = 0.0) {
  detail::require(dim >= 1, "reflected_bm: dim must be >= 1");
  const CorrelationSpec corr(rho);
  const auto d = static_cast<Eigen::Index>(dim);
  SviModel m{
      "reflected_bm",
      XCoefficients{dim, dim, dim, [d](double, const PathView&) -> Vec { return Vec::Zero(d); },
                    [d, w = corr.w_weight()](double, const PathView&) -> Mat {
                      return w * Mat::Identity(d, d);
                    },
                    [d, b = corr.b_weight()](double, const PathView&) -> Mat {
                      return b * Mat::Identity(d, d);
                    },
                    XRegularity{0.5, 0.0, 0.0, 0.0}},
      std::nullopt,
      dim == 1 ? ConvexPotential::half_line(0.0, Side::above)
               : ConvexPotential::composite(std::vector<ConvexPotential>(
                     dim, ConvexPotential::half_line(0.0, Side::above))),
      std::nullopt,
      Vec::Constant(d, x0),
      Vec(),
      corr,
      {}};
  if (!in_domain(m.psi1, m.x0)) throw UsageError("reflected_bm: x0 outside the domain");
  if (dim == 1) {
    m.probes = {
        {"drift monotone", ProbeTarget::x_drift, ProbeKind::monotone, 1.0, 0.0, -1.0, 3.0, 200},
        {"sigma1 Lipschitz", ProbeTarget::x_sigma1, ProbeKind::holder, 1.0, 0.0, 0.0, 3.0, 200},
    };
  }
  return m;
}

struct ToyMonotoneParams {
  double linear = 0.0;     // b(x) = -linear x - cubic x^3
  double cubic = 1.0;
  double sigma = 0.3;
  double x0 = 0.5;
  double y0 = 0.0;
  double y_reversion = 1.0;  // alpha = -y_reversion y + q x
  double y_sigma = 0.1;      // beta constant
  double bound = 2.0;        // psi1 = indicator of [-bound, bound]
  double rho = 0.0;
};

// One-dimensional monotone system with a Lipschitz Y companion.
inline SviModel make_toy_monotone(const ToyMonotoneParams& p = {}) {
  detail::require(p.linear >= 0.0 && p.cubic >= 0.0,
                  "toy_monotone: linear and cubic must be nonnegative");
  detail::require(p.sigma >= 0.0 && p.y_sigma >= 0.0, "toy_monotone: volatilities must be >= 0");
  detail::require(p.bound > 0.0, "toy_monotone: bound must be positive");
  const CorrelationSpec corr(p.rho);
  const double a = p.linear, c = p.cubic, r = p.y_reversion;
  auto drift = [a, c](double, const PathView& x) -> Vec {
    const double v = x.current(0);
    return detail::scalar_vec(-a * v - c * v * v * v);
  };
  const double s1 = corr.w_weight() * p.sigma, s2 = corr.b_weight() * p.sigma;
  SviModel m{
      "toy_monotone",
      XCoefficients{1, 1, 1, drift,
                    [s1](double, const PathView&) { return detail::scalar_mat(s1); },
                    [s2](double, const PathView&) { return detail::scalar_mat(s2); },
                    XRegularity{0.5, a + 3.0 * c * p.bound * p.bound, 0.0, 0.0}},
      YCoefficients{1, 1,
                    [r](double, const PathView& x, const PathView& y, double q) {
                      return detail::scalar_vec(-r * y.current(0) + q * x.current(0));
                    },
                    [ys = p.y_sigma](double, const PathView&, const PathView&, double) {
                      return detail::scalar_mat(ys);
                    },
                    YRegularity{std::abs(r), r * r, 0.5}},
      ConvexPotential::box(-p.bound, p.bound),
      ConvexPotential::box(-1e6, 1e6),
      detail::scalar_vec(p.x0),
      detail::scalar_vec(p.y0),
      corr,
      {}};
  if (!in_domain(m.psi1, m.x0)) throw UsageError("toy_monotone: x0 outside the domain");
  m.probes = {
      {"drift monotone", ProbeTarget::x_drift, ProbeKind::monotone, 1.0, 0.0, -p.bound, p.bound,
       400},
      {"drift Lipschitz", ProbeTarget::x_drift, ProbeKind::holder, 1.0,
       a + 3.0 * c * p.bound * p.bound, -p.bound, p.bound, 1000},
      {"sigma1 Lipschitz", ProbeTarget::x_sigma1, ProbeKind::holder, 1.0, 0.0, -p.bound, p.bound,
       200},
      {"Y drift Lipschitz in y", ProbeTarget::y_drift, ProbeKind::holder, 1.0, std::abs(r), -2.0,
       2.0, 400, 0.5, 1.0},
      {"Y drift monotone in y", ProbeTarget::y_drift, ProbeKind::monotone, 1.0, 0.0, -2.0, 2.0,
       400, 0.5, 1.0},
  };
  return m;
}

// Local volatility as a function of (t, S, M) with M the running maximum.
using LocalVolFn = std::function<double(double t, double s, double m)>;

struct HestonParams {
  double kappa = 2.0;
  double theta = 0.04;
  double xi = 0.2;
  double rho = 0.0;
  double v0 = 0.04;
  double s0 = 1.0;
  LocalVolFn mu_fn = [](double, double, double) { return 0.0; };
  LocalVolFn sigma_fn = [](double, double, double) { return 1.0; };
  double v_max = 1.0;  // upper end of the probe grid for V
};

// V follows dV = kappa (theta - V) dt + xi sqrt(V) dW^V reflected at 0, with
// W^V = sqrt(1 - rho^2) W + rho B. S follows
// dS = mu(t, S, M) S dt + q sqrt(V) sigma(t, S, M) S dB with M the discrete
// running maximum of S.
inline SviModel make_heston_path_dependent(const HestonParams& p) {
  detail::require(p.kappa > 0.0 && p.theta > 0.0 && p.xi > 0.0,
                  "heston_pd: kappa, theta, xi must be positive");
  detail::require(p.v0 >= 0.0, "heston_pd: v0 must be nonnegative");
  const CorrelationSpec corr(p.rho);
  const double kappa = p.kappa, theta = p.theta;
  const double s1 = corr.w_weight() * p.xi, s2 = corr.b_weight() * p.xi;
  SviModel m{
      "heston_pd",
      XCoefficients{1, 1, 1,
                    [kappa, theta](double, const PathView& v) {
                      return detail::scalar_vec(kappa * (theta - v.current(0)));
                    },
                    [s1](double, const PathView& v) {
                      return detail::scalar_mat(s1 * detail::pos_sqrt(v.current(0)));
                    },
                    [s2](double, const PathView& v) {
                      return detail::scalar_mat(s2 * detail::pos_sqrt(v.current(0)));
                    },
                    XRegularity{0.0, kappa * std::sqrt(p.v_max), std::abs(s1), std::abs(s2)}},
      YCoefficients{1, 1,
                    [mu = p.mu_fn](double t, const PathView&, const PathView& s, double) {
                      const double sv = s.current(0);
                      return detail::scalar_vec(mu(t, sv, s.running_max(0)) * sv);
                    },
                    [sig = p.sigma_fn](double t, const PathView& v, const PathView& s, double q) {
                      const double sv = s.current(0);
                      return detail::scalar_mat(q * detail::pos_sqrt(v.current(0)) *
                                                sig(t, sv, s.running_max(0)) * sv);
                    },
                    YRegularity{0.0, 0.0, 0.5}},
      ConvexPotential::half_line(0.0, Side::above),
      ConvexPotential::half_line(0.0, Side::above),
      detail::scalar_vec(p.v0),
      detail::scalar_vec(p.s0),
      corr,
      {}};
  m.probes = {
      {"drift monotone", ProbeTarget::x_drift, ProbeKind::monotone, 1.0, 0.0, 0.0, p.v_max, 400},
      {"drift Lipschitz", ProbeTarget::x_drift, ProbeKind::holder, 1.0, kappa, 0.0, p.v_max, 1000},
      {"sigma1 1/2-Hoelder", ProbeTarget::x_sigma1, ProbeKind::holder, 0.5, std::abs(s1), 0.0,
       p.v_max, 1000},
      {"sigma2 1/2-Hoelder", ProbeTarget::x_sigma2, ProbeKind::holder, 0.5, std::abs(s2), 0.0,
       p.v_max, 1000},
  };
  return m;
}

// Reflection side from the skew parameter p of the local-time formulation;
// only the pure reflections p = 1 (above) and p = 0 (below) are supported.
inline Side side_from_skew(double p) {
  if (p == 1.0) return Side::above;
  if (p == 0.0) return Side::below;
  throw UsageError("reflected_slv: skew parameter must be 0 or 1 (got " + std::to_string(p) + ")");
}

struct ReflectedSlvParams {
  std::function<double(double s, double x)> gamma_drift = [](double s, double) {
    return 0.05 * s;
  };
  std::function<double(double s)> gamma_vol = [](double s) { return s; };
  std::function<double(double x)> m_fn = [](double x) { return 0.2 * std::sqrt(1.0 + x * x); };
  std::function<double(double x)> mu_fn = [](double x) { return -x; };
  std::function<double(double x)> sigma_fn = [](double) { return 0.3; };
  double barrier = 0.0;
  Side side = Side::above;
  double rho = 0.0;
  double x0 = 0.0;
  double s0 = 1.0;
  // Declared moduli of mu_fn / sigma_fn on [probe_lo, probe_hi].
  double mu_lipschitz = 1.0;
  double sigma_lipschitz = 0.0;
  double probe_lo = -2.0;
  double probe_hi = 2.0;
};

// X reflected at the barrier: dX = mu(X) dt + sigma(X) dW^(2) + reflection,
// S: dS = gamma(S, X) dt + q m(X) gamma(S) dW^(1), d<W^(1), W^(2)> = rho dt.
inline SviModel make_reflected_slv(const ReflectedSlvParams& p) {
  detail::require(static_cast<bool>(p.gamma_drift) && p.gamma_vol && p.m_fn && p.mu_fn &&
                      p.sigma_fn,
                  "reflected_slv: all coefficient functions must be set");
  const CorrelationSpec corr(p.rho);
  const double wa = corr.w_weight(), wb = corr.b_weight();
  SviModel m{
      "reflected_slv",
      XCoefficients{1, 1, 1,
                    [mu = p.mu_fn](double, const PathView& x) {
                      return detail::scalar_vec(mu(x.current(0)));
                    },
                    [sig = p.sigma_fn, wa](double, const PathView& x) {
                      return detail::scalar_mat(wa * sig(x.current(0)));
                    },
                    [sig = p.sigma_fn, wb](double, const PathView& x) {
                      return detail::scalar_mat(wb * sig(x.current(0)));
                    },
                    XRegularity{0.5, p.mu_lipschitz, wa * p.sigma_lipschitz,
                                std::abs(wb) * p.sigma_lipschitz}},
      YCoefficients{1, 1,
                    [g = p.gamma_drift](double, const PathView& x, const PathView& s, double) {
                      return detail::scalar_vec(g(s.current(0), x.current(0)));
                    },
                    [g = p.gamma_vol, mf = p.m_fn](double, const PathView& x, const PathView& s,
                                                   double q) {
                      return detail::scalar_mat(q * mf(x.current(0)) * g(s.current(0)));
                    },
                    YRegularity{0.0, 0.0, 0.5}},
      ConvexPotential::half_line(p.barrier, p.side),
      ConvexPotential::box(-1e6, 1e6),
      detail::scalar_vec(p.x0),
      detail::scalar_vec(p.s0),
      corr,
      {}};
  if (!in_domain(m.psi1, m.x0)) throw UsageError("reflected_slv: x0 outside the domain");
  m.probes = {
      {"drift monotone", ProbeTarget::x_drift, ProbeKind::monotone, 1.0, 0.0, p.probe_lo,
       p.probe_hi, 400},
      {"drift Lipschitz", ProbeTarget::x_drift, ProbeKind::holder, 1.0, p.mu_lipschitz,
       p.probe_lo, p.probe_hi, 1000},
      {"sigma1 Lipschitz", ProbeTarget::x_sigma1, ProbeKind::holder, 1.0, wa * p.sigma_lipschitz,
       p.probe_lo, p.probe_hi, 1000},
  };
  return m;
}

struct LocalMaxSvParams {
  double kappa = 1.0;
  double theta = 0.2;
  double xi = 0.1;
  double rho = 0.0;
  double x0 = 0.2;
  double s0 = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
  double max_sensitivity = 0.5;  // sigma(S, M) = sigma (1 + c (M - S) / M)
};

// Volatility factor X: reflected Ornstein-Uhlenbeck on [0, inf). Asset S with
// running-maximum local volatility driven by X.
inline SviModel make_local_max_sv(const LocalMaxSvParams& p) {
  detail::require(p.kappa > 0.0 && p.xi >= 0.0 && p.sigma >= 0.0,
                  "local_max_sv: kappa > 0, xi >= 0, sigma >= 0 required");
  detail::require(p.x0 >= 0.0, "local_max_sv: x0 must be nonnegative");
  const CorrelationSpec corr(p.rho);
  const double kappa = p.kappa, theta = p.theta;
  const double s1 = corr.w_weight() * p.xi, s2 = corr.b_weight() * p.xi;
  auto local_vol = [sig = p.sigma, c = p.max_sensitivity](double s, double mx) {
    return sig * (1.0 + c * (mx - s) / std::max(std::abs(mx), 1e-12));
  };
  SviModel m{
      "local_max_sv",
      XCoefficients{1, 1, 1,
                    [kappa, theta](double, const PathView& x) {
                      return detail::scalar_vec(kappa * (theta - x.current(0)));
                    },
                    [s1](double, const PathView&) { return detail::scalar_mat(s1); },
                    [s2](double, const PathView&) { return detail::scalar_mat(s2); },
                    XRegularity{0.5, kappa, 0.0, 0.0}},
      YCoefficients{1, 1,
                    [mu = p.mu](double, const PathView&, const PathView& s, double) {
                      return detail::scalar_vec(mu * s.current(0));
                    },
                    [local_vol](double, const PathView& x, const PathView& s, double q) {
                      const double sv = s.current(0);
                      return detail::scalar_mat(q * std::max(x.current(0), 0.0) *
                                                local_vol(sv, s.running_max(0)) * sv);
                    },
                    YRegularity{std::abs(p.mu), 0.0, 0.5}},
      ConvexPotential::half_line(0.0, Side::above),
      ConvexPotential::half_line(0.0, Side::above),
      detail::scalar_vec(p.x0),
      detail::scalar_vec(p.s0),
      corr,
      {}};
  m.probes = {
      {"drift monotone", ProbeTarget::x_drift, ProbeKind::monotone, 1.0, 0.0, 0.0, 2.0, 400},
      {"drift Lipschitz", ProbeTarget::x_drift, ProbeKind::holder, 1.0, kappa, 0.0, 2.0, 1000},
      {"sigma1 Lipschitz", ProbeTarget::x_sigma1, ProbeKind::holder, 1.0, 0.0, 0.0, 2.0, 200},
      {"Y drift Lipschitz in y", ProbeTarget::y_drift, ProbeKind::holder, 1.0, std::abs(p.mu),
       0.5, 2.0, 400, 0.2, 1.0},
  };
  return m;
}

// ---------------------------------------------------------------------------
// Running the declared probes

struct ProbeOutcome {
  DeclaredProbe probe;
  ProbeReport report;
  // Estimated modulus within 1% of the declared (analytic) envelope.
  bool matches_envelope = false;
};

namespace detail {
inline std::function<Vec(double, const PathView&)> scalarize_y_drift(const YCoefficients& y,
                                                                     double x_ref, double q) {
  return [&y, x_ref, q](double t, const PathView& yv) {
    const SamplePath xp = SamplePath::constant(yv.path().grid, Vec::Constant(1, x_ref));
    return y.drift(t, PathView(xp, yv.index()), yv, q);
  };
}
}  // namespace detail

inline ProbeOutcome run_probe(const DeclaredProbe& pr, const XCoefficients& x,
                              const std::optional<YCoefficients>& y, double envelope_scale = 1.0) {
  const PairSampler sampler = grid_pairs_1d(pr.lo, pr.hi, pr.points);
  const std::size_t n = grid_pair_count(pr.points);
  const double env = pr.envelope * envelope_scale;
  ProbeOutcome out{pr, {}, false};

  std::function<Vec(double, const PathView&)> vec_fn;
  std::function<Mat(double, const PathView&)> mat_fn;
  switch (pr.target) {
    case ProbeTarget::x_drift: vec_fn = x.drift; break;
    case ProbeTarget::x_sigma1: mat_fn = x.sigma1; break;
    case ProbeTarget::x_sigma2: mat_fn = x.sigma2; break;
    case ProbeTarget::y_drift:
      if (!y) throw UsageError("run_probe: model has no Y system");
      vec_fn = detail::scalarize_y_drift(*y, pr.x_ref, pr.q_ref);
      break;
    case ProbeTarget::y_diffusion:
      if (!y) throw UsageError("run_probe: model has no Y system");
      mat_fn = [&y, xr = pr.x_ref, q = pr.q_ref](double t, const PathView& yv) {
        const SamplePath xp = SamplePath::constant(yv.path().grid, Vec::Constant(1, xr));
        return y->diffusion(t, PathView(xp, yv.index()), yv, q);
      };
      break;
  }

  if (pr.kind == ProbeKind::monotone) {
    if (!vec_fn) throw UsageError("run_probe: monotonicity applies to drifts only");
    out.report = probe_monotone_drift(vec_fn, sampler, n);
    out.matches_envelope = out.report.pass;
    return out;
  }
  out.report = vec_fn ? probe_holder(vec_fn, pr.exponent, sampler, n, env)
                      : probe_holder(mat_fn, pr.exponent, sampler, n, env);
  out.matches_envelope = out.report.pass && out.report.modulus >= 0.99 * env;
  return out;
}

inline std::vector<ProbeOutcome> run_declared_probes(const SviModel& m) {
  std::vector<ProbeOutcome> out;
  for (const auto& p : m.probes) out.push_back(run_probe(p, m.x, m.y));
  return out;
}

}  // namespace svi
