#pragma once

// Time stepping for the X- and Y-systems with projection, proximal and
// Moreau-Yosida treatments of the subdifferential term, plus runtime checks
// of the solution characterization.
//
// Every step evaluates coefficients on the path frozen at the left grid point
// t_k, forms the explicit pre-point
//     P = X_k + b dt + sigma1 dW + sigma2 dB,
// and splits it as X_{k+1} = P - dphi_k. The reflection record accumulates
// what is subtracted from the state.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svi/coefficients.hpp"
#include "svi/convex.hpp"
#include "svi/errors.hpp"
#include "svi/models.hpp"
#include "svi/paths.hpp"

namespace svi {

struct SchemeChoice {
  enum class Kind { projection, prox_step, yosida };

  Kind kind = Kind::prox_step;
  int n = 0;  // Yosida index

  static SchemeChoice projection() { return {Kind::projection, 0}; }
  static SchemeChoice prox_step() { return {Kind::prox_step, 0}; }
  static SchemeChoice yosida(int n) {
    if (n < 1) throw UsageError("yosida scheme: n must be >= 1");
    return {Kind::yosida, n};
  }

  std::string name() const {
    switch (kind) {
      case Kind::projection: return "projection";
      case Kind::prox_step: return "prox_step";
      case Kind::yosida: return "yosida";
    }
    return "?";
  }

  friend bool operator==(const SchemeChoice&, const SchemeChoice&) = default;
};

struct ReflectionRecord {
  SamplePath phi;          // phi_0 = 0
  RowMatrix increments;    // steps x dim, row k = phi_{k+1} - phi_k
  double total_variation = 0.0;
};

inline double total_variation(const ReflectionRecord& r) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < r.increments.rows(); ++k) s += r.increments.row(k).norm();
  return s;
}

struct XSolution {
  SamplePath x;
  ReflectionRecord phi;
};

struct YSolution {
  SamplePath y;
  ReflectionRecord phi;
};

namespace detail {

inline void check_scheme(const ConvexPotential& psi, const SchemeChoice& s) {
  if (s.kind == SchemeChoice::Kind::projection && !psi.is_indicator())
    throw UsageError("projection scheme requires an indicator potential");
  if (s.kind == SchemeChoice::Kind::yosida && s.n < 1)
    throw UsageError("yosida scheme: n must be >= 1");
}

inline void check_driver(const DriverIncrements& d, const MeshGrid& grid, std::size_t dim,
                         const char* what) {
  if (d.steps() != grid.steps() || d.grid.horizon() != grid.horizon())
    throw UsageError(std::string(what) + ": driver grid does not match the solver grid");
  if (d.dim() != dim)
    throw UsageError(std::string(what) + ": driver dimension " + std::to_string(d.dim()) +
                     " does not match coefficient dimension " + std::to_string(dim));
}

inline void check_start(const ConvexPotential& psi, const Vec& x0, std::size_t dim,
                        const char* what) {
  if (static_cast<std::size_t>(x0.size()) != dim || psi.dim() != dim)
    throw UsageError(std::string(what) + ": initial value / potential dimension mismatch");
  if (!x0.allFinite() || !in_domain(psi, x0))
    throw DomainError(std::string(what) + ": initial value outside the closed domain");
}

// One reflection step. `current` is X_k, `pre` the explicit pre-point.
inline void reflect(const ConvexPotential& psi, const SchemeChoice& s, double dt,
                    const Vec& current, const Vec& pre, Vec& next, Vec& dphi) {
  switch (s.kind) {
    case SchemeChoice::Kind::projection:
      next = project(psi, pre);
      dphi = pre - next;
      break;
    case SchemeChoice::Kind::prox_step:
      next = prox(psi, dt, pre);
      dphi = pre - next;
      break;
    case SchemeChoice::Kind::yosida: {
      // grad psi^n evaluated at X_k (explicit).
      const double n = static_cast<double>(s.n);
      dphi = (n * (current - prox(psi, 1.0 / n, current))) * dt;
      next = pre - dphi;
      break;
    }
  }
}

inline ReflectionRecord empty_record(const MeshGrid& grid, std::size_t dim) {
  return ReflectionRecord{SamplePath(grid, dim),
                          RowMatrix::Zero(static_cast<Eigen::Index>(grid.steps()),
                                          static_cast<Eigen::Index>(dim)),
                          0.0};
}

inline void record_step(ReflectionRecord& rec, std::size_t k, const Vec& dphi) {
  const auto i = static_cast<Eigen::Index>(k);
  rec.increments.row(i) = dphi.transpose();
  rec.phi.values.row(i + 1) = rec.phi.values.row(i) + dphi.transpose();
  rec.total_variation += dphi.norm();
}

inline void check_output(const Vec& v, Eigen::Index rows, const char* what, std::size_t k) {
  if (v.size() != rows) throw UsageError(std::string(what) + ": wrong output dimension");
  if (!v.allFinite()) throw NumericalError(std::string(what) + " produced a non-finite value", k);
}

inline void check_output(const Mat& m, Eigen::Index rows, Eigen::Index cols, const char* what,
                         std::size_t k) {
  if (m.rows() != rows || m.cols() != cols)
    throw UsageError(std::string(what) + ": wrong output shape");
  if (!m.allFinite()) throw NumericalError(std::string(what) + " produced a non-finite value", k);
}

}  // namespace detail

inline XSolution solve_x(const XCoefficients& c, const ConvexPotential& psi1,
                         const SchemeChoice& scheme, const MeshGrid& grid,
                         const DriverIncrements& w, const DriverIncrements& b, const Vec& x0) {
  detail::check_scheme(psi1, scheme);
  detail::check_start(psi1, x0, c.dim, "solve_x");
  detail::check_driver(w, grid, c.dim_w, "solve_x (W)");
  detail::check_driver(b, grid, c.dim_b, "solve_x (B)");

  const auto d = static_cast<Eigen::Index>(c.dim);
  const double dt = grid.dt();
  XSolution sol{SamplePath(grid, c.dim), detail::empty_record(grid, c.dim)};
  sol.x.set_row(0, x0);
  PathFunctionals f(sol.x);
  f.extend(sol.x, 0);

  Vec current = x0, pre(d), next(d), dphi(d);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const PathView view(sol.x, k, &f);
    const double t = grid.time(k);
    const Vec drift = c.drift(t, view);
    const Mat s1 = c.sigma1(t, view);
    const Mat s2 = c.sigma2(t, view);
    detail::check_output(drift, d, "drift", k);
    detail::check_output(s1, d, static_cast<Eigen::Index>(c.dim_w), "sigma1", k);
    detail::check_output(s2, d, static_cast<Eigen::Index>(c.dim_b), "sigma2", k);

    pre = current + drift * dt + s1 * w.row(k) + s2 * b.row(k);
    detail::reflect(psi1, scheme, dt, current, pre, next, dphi);
    if (!next.allFinite()) throw NumericalError("solve_x: non-finite state", k);

    sol.x.set_row(k + 1, next);
    detail::record_step(sol.phi, k, dphi);
    f.extend(sol.x, k + 1);
    current = next;
  }
  return sol;
}

namespace detail {

// Y stepping; when `frozen` is given the Y argument of the coefficients is
// read from that path instead of the solution being built.
inline YSolution solve_y_impl(const YCoefficients& c, const ConvexPotential& psi2,
                              const SamplePath& x, const ControlProcess& q,
                              const SchemeChoice& scheme, const MeshGrid& grid,
                              const DriverIncrements& b, const Vec& y0,
                              const SamplePath* frozen) {
  check_scheme(psi2, scheme);
  check_start(psi2, y0, c.dim, "solve_y");
  check_driver(b, grid, c.dim_b, "solve_y (B)");
  if (!(x.grid == grid)) throw UsageError("solve_y: X path lives on a different grid");
  if (frozen && (!(frozen->grid == grid) || frozen->dim() != c.dim))
    throw UsageError("solve_y: frozen path does not match grid/dimension");

  const auto d = static_cast<Eigen::Index>(c.dim);
  const double dt = grid.dt();
  YSolution sol{SamplePath(grid, c.dim), empty_record(grid, c.dim)};
  sol.y.set_row(0, y0);
  const PathFunctionals fx = PathFunctionals::complete(x);
  std::optional<PathFunctionals> fz;
  if (frozen) fz.emplace(PathFunctionals::complete(*frozen));
  PathFunctionals fy(sol.y);
  fy.extend(sol.y, 0);

  Vec current = y0, pre(d), next(d), dphi(d);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const PathView xv(x, k, &fx);
    const PathView yv = frozen ? PathView(*frozen, k, &*fz) : PathView(sol.y, k, &fy);
    const double t = grid.time(k);
    const double qk = q(t);
    const Vec drift = c.drift(t, xv, yv, qk);
    const Mat beta = c.diffusion(t, xv, yv, qk);
    check_output(drift, d, "Y drift", k);
    check_output(beta, d, static_cast<Eigen::Index>(c.dim_b), "Y diffusion", k);

    pre = current + drift * dt + beta * b.row(k);
    reflect(psi2, scheme, dt, current, pre, next, dphi);
    if (!next.allFinite()) throw NumericalError("solve_y: non-finite state", k);

    sol.y.set_row(k + 1, next);
    record_step(sol.phi, k, dphi);
    fy.extend(sol.y, k + 1);
    current = next;
  }
  return sol;
}

}  // namespace detail

inline YSolution solve_y(const YCoefficients& c, const ConvexPotential& psi2,
                         const SamplePath& x, const ControlProcess& q,
                         const SchemeChoice& scheme, const MeshGrid& grid,
                         const DriverIncrements& b, const Vec& y0) {
  return detail::solve_y_impl(c, psi2, x, q, scheme, grid, b, y0, nullptr);
}

inline double sup_distance(const SamplePath& a, const SamplePath& b) {
  if (!(a.grid == b.grid) || a.dim() != b.dim())
    throw UsageError("sup_distance: paths live on different grids");
  return (a.values - b.values).rowwise().norm().maxCoeff();
}

struct PicardTrace {
  std::vector<SamplePath> iterates;  // iterate 0 is the constant path y0
  std::vector<double> distances;     // distances[i] = sup |iterate i+1 - iterate i|
};

// Picard iteration for the Y-system: iterate k+1 solves the Y dynamics with
// the Y argument of the coefficients frozen to iterate k.
inline PicardTrace picard_y(const YCoefficients& c, const ConvexPotential& psi2,
                            const SamplePath& x, const ControlProcess& q, const MeshGrid& grid,
                            const DriverIncrements& b, const Vec& y0, std::size_t iterations,
                            const SchemeChoice& scheme = SchemeChoice::prox_step()) {
  if (iterations < 1) throw UsageError("picard_y: iterations must be >= 1");
  PicardTrace trace;
  trace.iterates.push_back(SamplePath::constant(grid, y0));
  for (std::size_t i = 0; i < iterations; ++i) {
    YSolution next =
        detail::solve_y_impl(c, psi2, x, q, scheme, grid, b, y0, &trace.iterates.back());
    trace.distances.push_back(sup_distance(next.y, trace.iterates.back()));
    trace.iterates.push_back(std::move(next.y));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Solution checks

struct ComplementarityReport {
  double slack = 0.0;
  bool pass = true;
};

// Discrete form of the variational inequality
//   sum <rho_u - X_u, dphi_u> + sum psi(X_u) dt - sum psi(rho_u) dt <= 0
// over every window of steps, with u the right endpoint of each step. The
// slack is the largest window sum (0 for the empty window).
inline ComplementarityReport check_complementarity(const SamplePath& x,
                                                   const ReflectionRecord& phi,
                                                   const ConvexPotential& psi,
                                                   const std::vector<SamplePath>& test_paths,
                                                   double tol) {
  if (x.dim() != psi.dim() || static_cast<std::size_t>(phi.increments.cols()) != x.dim() ||
      static_cast<std::size_t>(phi.increments.rows()) != x.steps())
    throw UsageError("check_complementarity: dimension mismatch");
  const double dt = x.grid.dt();
  std::vector<double> psi_x(x.steps() + 1);
  for (std::size_t k = 0; k <= x.steps(); ++k) psi_x[k] = evaluate(psi, x.row(k));

  ComplementarityReport rep;
  for (const auto& rho : test_paths) {
    if (!(rho.grid == x.grid) || rho.dim() != x.dim())
      throw UsageError("check_complementarity: test path does not match the solution grid");
    double best = 0.0, run = 0.0;
    for (std::size_t k = 0; k < x.steps(); ++k) {
      const auto u = static_cast<Eigen::Index>(k + 1);
      const double psi_rho = evaluate(psi, rho.row(k + 1));
      if (!std::isfinite(psi_rho))
        throw UsageError("check_complementarity: test path leaves the domain");
      const double term =
          (rho.values.row(u) - x.values.row(u)).dot(phi.increments.row(u - 1)) +
          dt * (psi_x[k + 1] - psi_rho);
      run = std::max(0.0, run + term);
      best = std::max(best, run);
    }
    rep.slack = std::max(rep.slack, best);
  }
  rep.pass = rep.slack <= tol;
  return rep;
}

struct BoundaryActivityReport {
  double max_offending_distance = 0.0;
  double max_cone_slack = 0.0;
  std::size_t active_steps = 0;
  bool pass = true;
};

// For indicator potentials: the reflection may only act at the boundary and
// in the normal-cone direction at the post-step state.
inline BoundaryActivityReport boundary_activity(const SamplePath& x, const ReflectionRecord& phi,
                                                const ConvexPotential& psi, double tol) {
  if (!psi.is_indicator()) throw UsageError("boundary_activity: indicator potential required");
  if (x.dim() != psi.dim() || static_cast<std::size_t>(phi.increments.rows()) != x.steps())
    throw UsageError("boundary_activity: dimension mismatch");
  BoundaryActivityReport rep;
  for (std::size_t k = 0; k < x.steps(); ++k) {
    const Vec dphi = phi.increments.row(static_cast<Eigen::Index>(k)).transpose();
    if (dphi.norm() <= tol) continue;
    ++rep.active_steps;
    const Vec xn = x.row(k + 1);
    const double dist = distance_to_boundary(psi, xn);
    if (dist > tol) rep.max_offending_distance = std::max(rep.max_offending_distance, dist);
    const double gap = in_domain(psi, xn) ? support_gap(psi, xn, dphi) : kInf;
    rep.max_cone_slack = std::max(rep.max_cone_slack, gap);
  }
  rep.pass = rep.max_offending_distance <= tol && rep.max_cone_slack <= tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Whole-model simulation

struct SimDiagnostics {
  std::size_t domain_violations = 0;
  double complementarity_slack = 0.0;  // against the zero test path
  double boundary_offending_distance = 0.0;
  double boundary_cone_slack = 0.0;
};

struct SimOutput {
  SamplePath x;
  std::optional<SamplePath> y;
  ReflectionRecord phi1;
  std::optional<ReflectionRecord> phi2;
  SimDiagnostics diagnostics;
};

inline constexpr double kDomainTolerance = 1e-12;

namespace detail {
inline void accumulate_diagnostics(SimDiagnostics& d, const SamplePath& p,
                                   const ReflectionRecord& r, const ConvexPotential& psi) {
  for (std::size_t k = 0; k <= p.steps(); ++k)
    if (distance_to_domain(psi, p.row(k)) > kDomainTolerance) ++d.domain_violations;
  const std::vector<SamplePath> zero{SamplePath(p.grid, p.dim())};
  d.complementarity_slack =
      std::max(d.complementarity_slack, check_complementarity(p, r, psi, zero, kInf).slack);
  if (psi.is_indicator()) {
    const auto b = boundary_activity(p, r, psi, kDomainTolerance);
    d.boundary_offending_distance =
        std::max(d.boundary_offending_distance, b.max_offending_distance);
    d.boundary_cone_slack = std::max(d.boundary_cone_slack, b.max_cone_slack);
  }
}
}  // namespace detail

// Solves X and, when the model has one, Y on the given drivers. psi overrides
// default to the model's potentials.
inline SimOutput simulate(const SviModel& m, const SchemeChoice& scheme, const MeshGrid& grid,
                          const ControlProcess& q, const DriverIncrements& w,
                          const DriverIncrements& b, bool with_diagnostics = true) {
  XSolution xs = solve_x(m.x, m.psi1, scheme, grid, w, b, m.x0);
  SimOutput out{std::move(xs.x), std::nullopt, std::move(xs.phi), std::nullopt, {}};
  if (m.y) {
    if (!m.psi2) throw UsageError("simulate: model has a Y system but no psi2");
    YSolution ys = solve_y(*m.y, *m.psi2, out.x, q, scheme, grid, b, m.y0);
    out.y = std::move(ys.y);
    out.phi2 = std::move(ys.phi);
  }
  if (with_diagnostics) {
    detail::accumulate_diagnostics(out.diagnostics, out.x, out.phi1, m.psi1);
    if (out.y) detail::accumulate_diagnostics(out.diagnostics, *out.y, *out.phi2, *m.psi2);
  }
  return out;
}

}  // namespace svi
