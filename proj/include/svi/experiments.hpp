#pragma once

// Monte-Carlo studies on coupled drivers: mesh refinement (Cauchy in dt),
// Moreau-Yosida index sweeps against the proximal reference, and stability
// under epsilon-perturbation of the X coefficients.
//
// Per-path results are stored in path order and reduced with fixed-order
// pairwise summation, so reports do not depend on the worker count.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svi/coefficients.hpp"
#include "svi/convex.hpp"
#include "svi/errors.hpp"
#include "svi/models.hpp"
#include "svi/parallel.hpp"
#include "svi/paths.hpp"
#include "svi/solver.hpp"
#include "svi/stats.hpp"

namespace svi {

struct ExperimentReport {
  std::string name;
  std::string axis_label;
  std::string metric;
  std::vector<double> axis;
  std::vector<double> rate_axis;  // abscissa of the log-log fit
  std::vector<McStats> errors;
  std::optional<RateFit> rate;
  std::uint64_t driver_checksum = 0;
};

enum class Trend {
  nonincreasing,        // e[i+1] <= e[i] + k * combined stderr
  strictly_decreasing,  // e[i+1] <  e[i] - k * combined stderr
};

inline bool check_trend(const ExperimentReport& r, Trend trend, double k = 2.0) {
  for (std::size_t i = 0; i + 1 < r.errors.size(); ++i) {
    const auto& a = r.errors[i];
    const auto& b = r.errors[i + 1];
    const double combined = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
    const bool ok = trend == Trend::nonincreasing ? b.mean <= a.mean + k * combined
                                                  : b.mean < a.mean - k * combined;
    if (!ok) return false;
  }
  return true;
}

// FNV-1a over the raw bits of the increments.
inline std::uint64_t increments_checksum(const DriverIncrements& d,
                                         std::uint64_t h = 0xcbf29ce484222325ULL) {
  const double* p = d.values.data();
  for (Eigen::Index i = 0; i < d.values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, p + i, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      h ^= (bits >> (8 * byte)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

struct DriverPair {
  DriverIncrements w;
  DriverIncrements b;

  std::uint64_t checksum() const { return increments_checksum(b, increments_checksum(w)); }
};

inline DriverPair make_drivers(const XCoefficients& c, const MeshGrid& grid,
                               const SeedSpec& seed, std::uint64_t path) {
  return {generate_increments(grid, c.dim_w, seed, path, DriverTag::W),
          generate_increments(grid, c.dim_b, seed, path, DriverTag::B)};
}

inline DriverPair coarsen(const DriverPair& d, std::size_t factor) {
  return {coarsen(d.w, factor), coarsen(d.b, factor)};
}

struct ExperimentOptions {
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

namespace detail {

inline std::uint64_t combine_checksums(const std::vector<std::uint64_t>& sums) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto s : sums) h = splitmix64(h ^ s);
  return h;
}

inline std::vector<McStats> column_stats(const std::vector<std::vector<double>>& per_path,
                                         std::size_t columns) {
  std::vector<McStats> out;
  std::vector<double> col(per_path.size());
  for (std::size_t j = 0; j < columns; ++j) {
    for (std::size_t i = 0; i < per_path.size(); ++i) col[i] = per_path[i][j];
    out.push_back(mc_stats(col));
  }
  return out;
}

inline std::vector<double> means(const std::vector<McStats>& s) {
  std::vector<double> m;
  for (const auto& e : s) m.push_back(e.mean);
  return m;
}

struct PathResult {
  std::vector<double> values;
  std::uint64_t checksum = 0;
};

}  // namespace detail

// Error at level L: mean over paths of max_k |X^(L)_k - X^(2L)_{2k}| with both
// runs driven by the same Brownian path. Levels must double at every step.
inline ExperimentReport cauchy_refinement(const SviModel& m, const SchemeChoice& scheme,
                                          double horizon, const std::vector<std::size_t>& levels,
                                          const ExperimentOptions& opt) {
  if (levels.empty()) throw UsageError("cauchy_refinement: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == 0 || !std::has_single_bit(levels[i]))
      throw UsageError("cauchy_refinement: levels must be powers of two");
    if (i > 0 && levels[i] != 2 * levels[i - 1])
      throw UsageError("cauchy_refinement: levels must be dyadic (each twice the previous)");
  }
  if (opt.n_paths < 2) throw UsageError("cauchy_refinement: need at least two paths");
  const std::size_t finest = 2 * levels.back();
  const MeshGrid fine(horizon, finest);
  const SeedSpec seed{opt.seed};

  auto per_path = parallel_map(opt.n_paths, opt.threads, [&](std::size_t i) {
    const DriverPair drivers = make_drivers(m.x, fine, seed, i);
    std::vector<SamplePath> sols;
    for (std::size_t L : levels) {
      const DriverPair d = coarsen(drivers, finest / L);
      sols.push_back(solve_x(m.x, m.psi1, scheme, d.w.grid, d.w, d.b, m.x0).x);
    }
    sols.push_back(solve_x(m.x, m.psi1, scheme, fine, drivers.w, drivers.b, m.x0).x);
    detail::PathResult r;
    for (std::size_t j = 0; j < levels.size(); ++j) {
      const auto& coarse = sols[j].values;
      const auto& finer = sols[j + 1].values;
      double e = 0.0;
      for (Eigen::Index k = 0; k < coarse.rows(); ++k)
        e = std::max(e, (coarse.row(k) - finer.row(2 * k)).norm());
      r.values.push_back(e);
    }
    r.checksum = drivers.checksum();
    return r;
  });

  ExperimentReport rep;
  rep.name = "cauchy";
  rep.axis_label = "steps";
  rep.metric = "E sup_k |X^(L) - X^(2L)|";
  std::vector<std::vector<double>> vals;
  std::vector<std::uint64_t> sums;
  for (auto& r : per_path) {
    vals.push_back(std::move(r.values));
    sums.push_back(r.checksum);
  }
  for (std::size_t L : levels) {
    rep.axis.push_back(static_cast<double>(L));
    rep.rate_axis.push_back(horizon / static_cast<double>(L));
  }
  rep.errors = detail::column_stats(vals, levels.size());
  rep.rate = fit_rate(rep.rate_axis, detail::means(rep.errors));
  rep.driver_checksum = detail::combine_checksums(sums);
  return rep;
}

// Error at n: mean over paths of sup_k |X^{Yosida(n)} - X^{ProxStep}| on the
// same grid and drivers. One-dimensional models only.
inline ExperimentReport yosida_sweep(const SviModel& m, const std::vector<int>& n_values,
                                     const MeshGrid& grid, const ExperimentOptions& opt) {
  if (m.x.dim != 1)
    throw UsageError("yosida_sweep: the penalization theory is one-dimensional (model has dim " +
                     std::to_string(m.x.dim) + ")");
  if (n_values.empty()) throw UsageError("yosida_sweep: no n values");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 1) throw UsageError("yosida_sweep: n must be >= 1");
    if (i > 0 && n_values[i] <= n_values[i - 1])
      throw UsageError("yosida_sweep: n values must be increasing");
  }
  if (opt.n_paths < 2) throw UsageError("yosida_sweep: need at least two paths");
  const SeedSpec seed{opt.seed};

  auto per_path = parallel_map(opt.n_paths, opt.threads, [&](std::size_t i) {
    const DriverPair d = make_drivers(m.x, grid, seed, i);
    const SamplePath ref =
        solve_x(m.x, m.psi1, SchemeChoice::prox_step(), grid, d.w, d.b, m.x0).x;
    detail::PathResult r;
    for (int n : n_values) {
      const SamplePath xn = solve_x(m.x, m.psi1, SchemeChoice::yosida(n), grid, d.w, d.b, m.x0).x;
      r.values.push_back(sup_distance(xn, ref));
    }
    r.checksum = d.checksum();
    return r;
  });

  ExperimentReport rep;
  rep.name = "yosida_sweep";
  rep.axis_label = "n";
  rep.metric = "E sup_k |X^(n) - X^(prox)|";
  std::vector<std::vector<double>> vals;
  std::vector<std::uint64_t> sums;
  for (auto& r : per_path) {
    vals.push_back(std::move(r.values));
    sums.push_back(r.checksum);
  }
  for (int n : n_values) {
    rep.axis.push_back(n);
    rep.rate_axis.push_back(n);
  }
  rep.errors = detail::column_stats(vals, n_values.size());
  rep.rate = fit_rate(rep.rate_axis, detail::means(rep.errors));
  rep.driver_checksum = detail::combine_checksums(sums);
  return rep;
}

// ---------------------------------------------------------------------------
// Perturbation

struct PerturbationSpec {
  enum class Mode { drift_shift, diffusion_scale, custom };

  Mode mode = Mode::drift_shift;
  std::vector<double> epsilons;
  // drift_shift: b^eps = b + eps g; g defaults to the constant vector `shift`.
  std::function<Vec(double, const PathView&)> g;
  double shift = 1.0;
  // custom: full replacement of the X coefficients.
  std::function<XCoefficients(const XCoefficients&, double)> custom;
};

inline const char* to_string(PerturbationSpec::Mode m) {
  switch (m) {
    case PerturbationSpec::Mode::drift_shift: return "drift_shift";
    case PerturbationSpec::Mode::diffusion_scale: return "diffusion_scale";
    case PerturbationSpec::Mode::custom: return "custom";
  }
  return "?";
}

// eps = 0 returns the base coefficients unchanged.
inline XCoefficients perturb(const XCoefficients& base, const PerturbationSpec& spec, double eps) {
  if (eps == 0.0) return base;
  XCoefficients c = base;
  switch (spec.mode) {
    case PerturbationSpec::Mode::drift_shift: {
      auto g = spec.g;
      if (!g) {
        g = [d = static_cast<Eigen::Index>(base.dim), s = spec.shift](double, const PathView&) {
          return Vec::Constant(d, s);
        };
      }
      c.drift = [b = base.drift, g, eps](double t, const PathView& x) -> Vec {
        return b(t, x) + eps * g(t, x);
      };
      break;
    }
    case PerturbationSpec::Mode::diffusion_scale:
      c.sigma1 = [s = base.sigma1, eps](double t, const PathView& x) -> Mat {
        return (1.0 + eps) * s(t, x);
      };
      c.sigma2 = [s = base.sigma2, eps](double t, const PathView& x) -> Mat {
        return (1.0 + eps) * s(t, x);
      };
      c.meta.l1 *= 1.0 + eps;
      c.meta.l2 *= 1.0 + eps;
      break;
    case PerturbationSpec::Mode::custom:
      if (!spec.custom) throw UsageError("perturb: custom mode without a perturbation function");
      c = spec.custom(base, eps);
      break;
  }
  return c;
}

// Raised when perturbed coefficients fail the model's declared X probes.
class ProbeRejected : public UsageError {
 public:
  ProbeRejected(const std::string& what, std::vector<ProbeOutcome> outcomes)
      : UsageError(what), outcomes_(std::move(outcomes)) {}
  const std::vector<ProbeOutcome>& outcomes() const noexcept { return outcomes_; }

 private:
  std::vector<ProbeOutcome> outcomes_;
};

// Runs the model's X-targeted probes against perturbed coefficients. Diffusion
// scaling enlarges the admissible diffusion moduli by (1 + eps).
inline std::vector<ProbeOutcome> probe_perturbed(const SviModel& m, const PerturbationSpec& spec,
                                                 double eps, std::size_t max_points = 200) {
  const XCoefficients c = perturb(m.x, spec, eps);
  std::vector<ProbeOutcome> out;
  for (DeclaredProbe p : m.probes) {
    if (p.target == ProbeTarget::y_drift || p.target == ProbeTarget::y_diffusion) continue;
    p.points = std::min(p.points, max_points);
    const bool sigma = p.target != ProbeTarget::x_drift;
    const double scale =
        sigma && spec.mode == PerturbationSpec::Mode::diffusion_scale ? 1.0 + eps : 1.0;
    out.push_back(run_probe(p, c, std::nullopt, scale));
  }
  return out;
}

struct PerturbationResult {
  ExperimentReport x_sq;    // E sup |X^eps - X|^2
  ExperimentReport x_abs;   // E sup |X^eps - X|
  std::optional<ExperimentReport> y_sq;      // E sup |Y^eps - Y|^2
  std::optional<ExperimentReport> y_exceed;  // P(sup |Y^eps - Y| > eta)
  double eta = 1e-2;
};

inline constexpr double kDefaultEta = 1e-2;

inline PerturbationResult perturbation_sweep(const SviModel& m, const PerturbationSpec& spec,
                                             const SchemeChoice& scheme, const MeshGrid& grid,
                                             const ControlProcess& q,
                                             const ExperimentOptions& opt,
                                             double eta = kDefaultEta) {
  if (spec.epsilons.empty()) throw UsageError("perturbation_sweep: no epsilons");
  for (std::size_t i = 0; i < spec.epsilons.size(); ++i) {
    if (!(spec.epsilons[i] >= 0.0)) throw UsageError("perturbation_sweep: epsilons must be >= 0");
    if (i > 0 && !(spec.epsilons[i] < spec.epsilons[i - 1]))
      throw UsageError("perturbation_sweep: epsilons must be strictly decreasing");
  }
  if (!(eta > 0.0)) throw UsageError("perturbation_sweep: eta must be positive");
  if (opt.n_paths < 2) throw UsageError("perturbation_sweep: need at least two paths");

  for (double eps : spec.epsilons) {
    auto outcomes = probe_perturbed(m, spec, eps);
    for (const auto& o : outcomes)
      if (!o.report.pass)
        throw ProbeRejected("perturbation_sweep: perturbed coefficients fail probe '" +
                                o.probe.name + "' at eps " + std::to_string(eps),
                            std::move(outcomes));
  }

  std::vector<SviModel> perturbed;
  for (double eps : spec.epsilons) {
    SviModel pm = m;
    pm.x = perturb(m.x, spec, eps);
    perturbed.push_back(std::move(pm));
  }

  const SeedSpec seed{opt.seed};
  const std::size_t ne = spec.epsilons.size();
  const bool with_y = m.has_y();
  auto per_path = parallel_map(opt.n_paths, opt.threads, [&](std::size_t i) {
    const DriverPair d = make_drivers(m.x, grid, seed, i);
    const SimOutput base = simulate(m, scheme, grid, q, d.w, d.b, false);
    detail::PathResult r;  // layout: [x_sq | x_abs | y_sq | y_exceed] x ne
    r.values.assign(4 * ne, 0.0);
    for (std::size_t j = 0; j < ne; ++j) {
      const SimOutput s = simulate(perturbed[j], scheme, grid, q, d.w, d.b, false);
      const double dx = sup_distance(s.x, base.x);
      r.values[j] = dx * dx;
      r.values[ne + j] = dx;
      if (with_y) {
        const double dy = sup_distance(*s.y, *base.y);
        r.values[2 * ne + j] = dy * dy;
        r.values[3 * ne + j] = dy > eta ? 1.0 : 0.0;
      }
    }
    r.checksum = d.checksum();
    return r;
  });

  std::vector<std::uint64_t> sums;
  auto report = [&](std::size_t offset, const std::string& name, const std::string& metric) {
    std::vector<std::vector<double>> vals;
    for (const auto& r : per_path)
      vals.emplace_back(r.values.begin() + static_cast<std::ptrdiff_t>(offset * ne),
                        r.values.begin() + static_cast<std::ptrdiff_t>((offset + 1) * ne));
    ExperimentReport rep;
    rep.name = name;
    rep.axis_label = "epsilon";
    rep.metric = metric;
    rep.axis = spec.epsilons;
    rep.rate_axis = spec.epsilons;
    rep.errors = detail::column_stats(vals, ne);
    rep.rate = fit_rate(rep.rate_axis, detail::means(rep.errors));
    return rep;
  };
  for (const auto& r : per_path) sums.push_back(r.checksum);
  const std::uint64_t checksum = detail::combine_checksums(sums);

  PerturbationResult res;
  res.eta = eta;
  res.x_sq = report(0, "perturbation_x_sq", "E sup |X^eps - X|^2");
  res.x_abs = report(1, "perturbation_x_abs", "E sup |X^eps - X|");
  res.x_sq.driver_checksum = res.x_abs.driver_checksum = checksum;
  if (with_y) {
    res.y_sq = report(2, "perturbation_y_sq", "E sup |Y^eps - Y|^2");
    res.y_exceed = report(3, "perturbation_y_exceed", "P(sup |Y^eps - Y| > eta)");
    res.y_sq->driver_checksum = res.y_exceed->driver_checksum = checksum;
  }
  return res;
}

// Per-path Monte-Carlo estimate of E sup_k |X_k|^2 on a given mesh.
inline McStats second_moment(const SviModel& m, const SchemeChoice& scheme, const MeshGrid& grid,
                             const ExperimentOptions& opt) {
  const SeedSpec seed{opt.seed};
  auto vals = parallel_map(opt.n_paths, opt.threads, [&](std::size_t i) {
    const DriverPair d = make_drivers(m.x, grid, seed, i);
    const SamplePath x = solve_x(m.x, m.psi1, scheme, grid, d.w, d.b, m.x0).x;
    const double s = sup_norm(x, grid.steps());
    return s * s;
  });
  return mc_stats(vals);
}

}  // namespace svi
