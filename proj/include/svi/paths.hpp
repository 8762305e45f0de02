#pragma once

// Uniform meshes, sample paths with their running functionals, and seeded
// Brownian increments.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "svi/convex.hpp"
#include "svi/errors.hpp"

namespace svi {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class MeshGrid {
 public:
  MeshGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw UsageError("MeshGrid: horizon must be positive and finite");
    if (steps == 0) throw UsageError("MeshGrid: steps must be positive");
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }

  // t_k = k dt, with t_steps = T exactly.
  double time(std::size_t k) const {
    if (k > steps_) throw UsageError("MeshGrid::time: index out of range");
    return k == steps_ ? horizon_ : static_cast<double>(k) * dt();
  }

  MeshGrid refined(std::size_t factor) const { return MeshGrid(horizon_, steps_ * factor); }

  friend bool operator==(const MeshGrid&, const MeshGrid&) = default;

 private:
  double horizon_;
  std::size_t steps_;
};

// Values on a grid: row k holds the state at t_k.
struct SamplePath {
  MeshGrid grid;
  RowMatrix values;

  SamplePath(MeshGrid g, std::size_t dim)
      : grid(g), values(RowMatrix::Zero(static_cast<Eigen::Index>(g.steps() + 1),
                                        static_cast<Eigen::Index>(dim))) {}

  static SamplePath constant(MeshGrid g, const Vec& v) {
    SamplePath p(g, static_cast<std::size_t>(v.size()));
    p.values.rowwise() = v.transpose();
    return p;
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
  std::size_t steps() const noexcept { return grid.steps(); }

  Vec row(std::size_t k) const { return values.row(static_cast<Eigen::Index>(k)).transpose(); }
  void set_row(std::size_t k, const Vec& v) {
    values.row(static_cast<Eigen::Index>(k)) = v.transpose();
  }
};

namespace detail {
inline void check_index(const SamplePath& p, std::size_t k, const char* op) {
  if (k > p.steps()) throw UsageError(std::string(op) + ": step index out of range");
}
}  // namespace detail

// max of values[0..k] for a scalar path.
inline double running_max(const SamplePath& path, std::size_t k) {
  if (path.dim() != 1) throw UsageError("running_max: path must be one-dimensional");
  detail::check_index(path, k, "running_max");
  return path.values.col(0).head(static_cast<Eigen::Index>(k + 1)).maxCoeff();
}

// max over j <= k of |values[j]|.
inline double sup_norm(const SamplePath& path, std::size_t k) {
  detail::check_index(path, k, "sup_norm");
  return path.values.topRows(static_cast<Eigen::Index>(k + 1)).rowwise().norm().maxCoeff();
}

// Incrementally maintained running functionals so path-dependent coefficients
// stay O(1) per step.
class PathFunctionals {
 public:
  explicit PathFunctionals(const SamplePath& p)
      : max_(static_cast<Eigen::Index>(p.steps() + 1), static_cast<Eigen::Index>(p.dim())),
        sup_(p.steps() + 1, 0.0) {}

  static PathFunctionals complete(const SamplePath& p) {
    PathFunctionals f(p);
    for (std::size_t k = 0; k <= p.steps(); ++k) f.extend(p, k);
    return f;
  }

  // Must be called in order k = 0, 1, 2, ...
  void extend(const SamplePath& p, std::size_t k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double norm = p.values.row(i).norm();
    if (k == 0) {
      max_.row(0) = p.values.row(0);
      sup_[0] = norm;
    } else {
      max_.row(i) = max_.row(i - 1).cwiseMax(p.values.row(i));
      sup_[k] = std::max(sup_[k - 1], norm);
    }
  }

  double running_max(std::size_t k, std::size_t coord) const {
    return max_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(coord));
  }
  double sup_norm(std::size_t k) const { return sup_[k]; }

 private:
  RowMatrix max_;
  std::vector<double> sup_;
};

// A path observed up to (and including) step k: the X(t) = X_{t ^ .} of
// path-dependent coefficients.
class PathView {
 public:
  PathView(const SamplePath& p, std::size_t k, const PathFunctionals* f = nullptr)
      : path_(&p), k_(k), f_(f) {
    detail::check_index(p, k, "PathView");
  }

  std::size_t index() const noexcept { return k_; }
  double time() const { return path_->grid.time(k_); }
  std::size_t dim() const noexcept { return path_->dim(); }
  const SamplePath& path() const noexcept { return *path_; }

  Vec current() const { return path_->row(k_); }
  double current(std::size_t coord) const {
    return path_->values(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(coord));
  }
  Vec at(std::size_t j) const {
    if (j > k_) throw UsageError("PathView::at: future value requested");
    return path_->row(j);
  }

  double running_max(std::size_t coord = 0) const {
    if (f_) return f_->running_max(k_, coord);
    return path_->values.col(static_cast<Eigen::Index>(coord))
        .head(static_cast<Eigen::Index>(k_ + 1))
        .maxCoeff();
  }
  double sup_norm() const { return f_ ? f_->sup_norm(k_) : svi::sup_norm(*path_, k_); }

 private:
  const SamplePath* path_;
  std::size_t k_;
  const PathFunctionals* f_;
};

// ---------------------------------------------------------------------------
// Drivers

struct DriverIncrements {
  MeshGrid grid;
  RowMatrix values;  // steps x dim

  std::size_t dim() const noexcept { return static_cast<std::size_t>(values.cols()); }
  std::size_t steps() const noexcept { return static_cast<std::size_t>(values.rows()); }

  Vec row(std::size_t k) const { return values.row(static_cast<Eigen::Index>(k)).transpose(); }
};

enum class DriverTag : std::uint64_t { W = 1, B = 2 };

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

struct SeedSpec {
  std::uint64_t master = 0;

  // Substream seed for (path index, driver tag).
  std::uint64_t substream(std::uint64_t path_index, DriverTag tag) const {
    std::uint64_t h = detail::splitmix64(master);
    h = detail::splitmix64(h ^ path_index);
    h = detail::splitmix64(h ^ static_cast<std::uint64_t>(tag));
    return h;
  }
};

// steps x dim i.i.d. N(0, dt) increments from the (seed, path, tag) substream.
inline DriverIncrements generate_increments(const MeshGrid& grid, std::size_t dim,
                                            const SeedSpec& seed, std::uint64_t path_index,
                                            DriverTag tag) {
  if (dim == 0) throw UsageError("generate_increments: dim must be >= 1");
  std::mt19937_64 gen(seed.substream(path_index, tag));
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt()));
  DriverIncrements inc{grid, RowMatrix(static_cast<Eigen::Index>(grid.steps()),
                                       static_cast<Eigen::Index>(dim))};
  double* data = inc.values.data();
  const auto n = inc.values.size();
  for (Eigen::Index i = 0; i < n; ++i) data[i] = normal(gen);
  return inc;
}

// Aggregates increments onto a grid `factor` times coarser by repeated
// pairwise halving; factor must be a power of two.
inline DriverIncrements coarsen(const DriverIncrements& fine, std::size_t factor) {
  if (factor == 0 || !std::has_single_bit(factor))
    throw UsageError("coarsen: factor must be a power of two");
  if (fine.steps() % factor != 0) throw UsageError("coarsen: steps not divisible by factor");
  DriverIncrements cur = fine;
  for (std::size_t f = factor; f > 1; f /= 2) {
    const auto half = cur.values.rows() / 2;
    RowMatrix next(half, cur.values.cols());
    for (Eigen::Index k = 0; k < half; ++k)
      next.row(k) = cur.values.row(2 * k) + cur.values.row(2 * k + 1);
    cur = DriverIncrements{MeshGrid(cur.grid.horizon(), static_cast<std::size_t>(half)),
                           std::move(next)};
  }
  return cur;
}

// Correlation between the X and Y drivers. In composite mode the scalar X
// driver is sqrt(1 - rho^2) W + rho B; in split form this is
// sigma1 = sqrt(1 - rho^2) sigma, sigma2 = rho sigma against independent W, B.
struct CorrelationSpec {
  double rho = 0.0;

  explicit CorrelationSpec(double r = 0.0) : rho(r) {
    if (!(std::abs(r) <= 1.0)) throw UsageError("CorrelationSpec: |rho| must be <= 1");
  }

  double w_weight() const { return std::sqrt(std::max(0.0, 1.0 - rho * rho)); }
  double b_weight() const { return rho; }
};

inline DriverIncrements compose_driver(const DriverIncrements& w, const DriverIncrements& b,
                                       const CorrelationSpec& corr) {
  if (!(w.grid == b.grid) || w.values.rows() != b.values.rows() ||
      w.values.cols() != b.values.cols())
    throw UsageError("compose_driver: drivers live on different grids");
  return DriverIncrements{w.grid, corr.w_weight() * w.values + corr.b_weight() * b.values};
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
}  // namespace detail

struct CsvColumn {
  std::string name;
  const SamplePath* path;
  std::size_t coord;
};

// Columns for a path: "<prefix>" when one-dimensional, "<prefix>_1".. otherwise.
inline void append_columns(std::vector<CsvColumn>& cols, const std::string& prefix,
                           const SamplePath& p) {
  for (std::size_t c = 0; c < p.dim(); ++c)
    cols.push_back({p.dim() == 1 ? prefix : prefix + "_" + std::to_string(c + 1), &p, c});
}

inline void write_paths_csv(std::ostream& out, const MeshGrid& grid,
                            const std::vector<CsvColumn>& cols) {
  out << "t";
  for (const auto& c : cols) out << ',' << c.name;
  out << '\n';
  for (std::size_t k = 0; k <= grid.steps(); ++k) {
    out << detail::format_double(grid.time(k));
    for (const auto& c : cols) {
      if (c.path->steps() != grid.steps()) throw UsageError("write_paths_csv: grid mismatch");
      out << ',' << detail::format_double(c.path->values(static_cast<Eigen::Index>(k),
                                                         static_cast<Eigen::Index>(c.coord)));
    }
    out << '\n';
  }
}

inline void write_csv(std::ostream& out, const SamplePath& p, const std::string& prefix = "x") {
  std::vector<CsvColumn> cols;
  append_columns(cols, prefix, p);
  write_paths_csv(out, p.grid, cols);
}

}  // namespace svi
