#pragma once

// Executes a validated config and writes its artifacts:
//   report.csv      per-path rows (simulate) or per-level rows (sweeps)
//   summary.json    aggregate statistics, rate fits and trend flags
//   manifest.json   config hash, seed, version, file list, timestamp
//   paths/path_NNNNNN.csv  optional per-path dumps
// report.csv and summary.json depend only on the config, never on threads.

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svi/config.hpp"
#include "svi/errors.hpp"
#include "svi/experiments.hpp"
#include "svi/parallel.hpp"
#include "svi/paths.hpp"
#include "svi/solver.hpp"
#include "svi/stats.hpp"

namespace svi {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kExitOk = 0, kExitTrend = 1, kExitUsage = 2, kExitNumerical = 3 };

struct RunOptions {
  std::optional<std::string> out_dir;  // overrides config.output
  std::size_t threads = 1;
  bool dump_paths = false;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::string> files;  // relative to the output directory
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline json stats_json(const McStats& s) {
  return {{"mean", s.mean}, {"stderr", s.std_error}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi},
          {"n", s.n}};
}

inline json report_json(const ExperimentReport& r) {
  json rows = json::array();
  for (std::size_t i = 0; i < r.axis.size(); ++i)
    rows.push_back({{r.axis_label, r.axis[i]}, {"error", stats_json(r.errors[i])}});
  json rate = nullptr;
  if (r.rate)
    rate = {{"axis", r.name == "cauchy" ? "dt" : r.axis_label},
            {"slope", r.rate->slope},
            {"intercept", r.rate->intercept},
            {"r2", r.rate->r2},
            {"points", r.rate->points}};
  return {{"name", r.name},
          {"metric", r.metric},
          {"rows", rows},
          {"rate", rate},
          {"nonincreasing_within_noise", check_trend(r, Trend::nonincreasing)},
          {"strictly_decreasing", check_trend(r, Trend::strictly_decreasing)},
          {"driver_checksum", hex64(r.driver_checksum)}};
}

inline void write_report_csv(std::ostream& out, const ExperimentReport& r) {
  out << r.axis_label << ",rate_axis,mean,stderr,ci_lo,ci_hi,n_paths\n";
  for (std::size_t i = 0; i < r.axis.size(); ++i) {
    const auto& e = r.errors[i];
    out << format_double(r.axis[i]) << ',' << format_double(r.rate_axis[i]) << ','
        << format_double(e.mean) << ',' << format_double(e.std_error) << ','
        << format_double(e.ci_lo) << ',' << format_double(e.ci_hi) << ',' << e.n << '\n';
  }
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot write " + p.string());
  f << text;
  if (!f) throw UsageError("failed writing " + p.string());
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct SimRow {
  std::vector<double> values;
  std::uint64_t checksum = 0;
  std::optional<SimOutput> kept;  // retained for path dumps
};

struct Artifacts {
  std::string report_csv;
  json summary;
  std::vector<std::pair<std::string, std::string>> extra;  // name, contents
  bool trend_failed = false;
};

inline std::string path_csv(const SimOutput& s) {
  std::vector<CsvColumn> cols;
  append_columns(cols, "x", s.x);
  if (s.y) append_columns(cols, "y", *s.y);
  append_columns(cols, s.y ? "phi1" : "phi", s.phi1.phi);
  if (s.phi2) append_columns(cols, "phi2", s.phi2->phi);
  std::ostringstream out;
  write_paths_csv(out, s.x.grid, cols);
  return out.str();
}

inline Artifacts run_simulate(const ExperimentConfig& c, const SviModel& m,
                              const RunOptions& opt) {
  const MeshGrid grid(c.horizon, c.steps);
  const ControlProcess q = build_control(c);
  const SeedSpec seed{c.seed};
  const std::size_t dx = m.x.dim, dy = m.y ? m.y->dim : 0;
  const std::size_t keep = opt.dump_paths ? std::min(c.dump_limit, c.n_paths) : 0;

  auto rows = parallel_map(c.n_paths, opt.threads, [&](std::size_t i) {
    const DriverPair d = make_drivers(m.x, grid, seed, i);
    SimOutput s = simulate(m, c.scheme, grid, q, d.w, d.b, true);
    SimRow r;
    for (std::size_t j = 0; j < dx; ++j)
      r.values.push_back(s.x.values(static_cast<Eigen::Index>(c.steps), static_cast<Eigen::Index>(j)));
    r.values.push_back(sup_norm(s.x, c.steps));
    r.values.push_back(s.phi1.total_variation);
    if (s.y) {
      for (std::size_t j = 0; j < dy; ++j)
        r.values.push_back(s.y->values(static_cast<Eigen::Index>(c.steps), static_cast<Eigen::Index>(j)));
      r.values.push_back(sup_norm(*s.y, c.steps));
      r.values.push_back(s.phi2->total_variation);
    }
    r.values.push_back(s.diagnostics.complementarity_slack);
    r.values.push_back(static_cast<double>(s.diagnostics.domain_violations));
    r.values.push_back(s.diagnostics.boundary_offending_distance);
    r.checksum = d.checksum();
    if (i < keep) r.kept = std::move(s);
    return r;
  });

  std::vector<std::string> names;
  auto coord_names = [&](const std::string& prefix, std::size_t dim) {
    for (std::size_t j = 0; j < dim; ++j)
      names.push_back(dim == 1 ? prefix : prefix + "_" + std::to_string(j + 1));
  };
  coord_names("x_T", dx);
  names.push_back("sup_abs_x");
  names.push_back(dy ? "tv_phi1" : "tv_phi");
  if (dy) {
    coord_names("y_T", dy);
    names.push_back("sup_abs_y");
    names.push_back("tv_phi2");
  }
  names.push_back("complementarity_slack");
  names.push_back("domain_violations");
  names.push_back("boundary_offending_distance");

  Artifacts a;
  std::ostringstream csv;
  csv << "path";
  for (const auto& n : names) csv << ',' << n;
  csv << '\n';
  std::vector<std::uint64_t> sums;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    csv << i;
    for (double v : rows[i].values) csv << ',' << format_double(v);
    csv << '\n';
    sums.push_back(rows[i].checksum);
  }
  a.report_csv = csv.str();

  json columns = json::object();
  double worst_slack = 0.0, worst_boundary = 0.0, violations = 0.0;
  const std::size_t slack_col = names.size() - 3;
  for (const auto& r : rows) {
    worst_slack = std::max(worst_slack, r.values[slack_col]);
    violations += r.values[slack_col + 1];
    worst_boundary = std::max(worst_boundary, r.values[slack_col + 2]);
  }
  if (rows.size() >= 2) {
    std::vector<double> col(rows.size());
    for (std::size_t j = 0; j < slack_col; ++j) {
      for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i].values[j];
      columns[names[j]] = stats_json(mc_stats(col));
    }
  }
  a.summary = {{"statistics", columns},
               {"max_complementarity_slack", worst_slack},
               {"domain_violations", static_cast<std::uint64_t>(violations)},
               {"max_boundary_offending_distance", worst_boundary},
               {"driver_checksum", hex64(combine_checksums(sums))}};
  for (std::size_t i = 0; i < keep; ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "paths/path_%06zu.csv", i);
    a.extra.emplace_back(name, path_csv(*rows[i].kept));
  }
  return a;
}

inline void dump_reference_paths(Artifacts& a, const ExperimentConfig& c, const SviModel& m,
                                 const RunOptions& opt) {
  if (!opt.dump_paths) return;
  const MeshGrid grid(c.horizon, c.steps);
  const ControlProcess q = build_control(c);
  const SeedSpec seed{c.seed};
  const std::size_t keep = std::min(c.dump_limit, c.n_paths);
  auto outs = parallel_map(keep, opt.threads, [&](std::size_t i) {
    const DriverPair d = make_drivers(m.x, grid, seed, i);
    return path_csv(simulate(m, c.scheme, grid, q, d.w, d.b, false));
  });
  for (std::size_t i = 0; i < keep; ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "paths/path_%06zu.csv", i);
    a.extra.emplace_back(name, std::move(outs[i]));
  }
}

inline Artifacts run_sweep(const ExperimentConfig& c, const SviModel& m, const RunOptions& opt) {
  const ExperimentOptions eo{c.n_paths, c.seed, opt.threads};
  Artifacts a;
  std::vector<const ExperimentReport*> asserted;
  std::optional<ExperimentReport> single;
  std::optional<PerturbationResult> pert;

  if (c.kind == ExperimentKind::cauchy) {
    single = cauchy_refinement(m, c.scheme, c.horizon, c.levels, eo);
  } else if (c.kind == ExperimentKind::yosida_sweep) {
    single = yosida_sweep(m, c.n_values, MeshGrid(c.horizon, c.steps), eo);
  } else {
    pert = perturbation_sweep(m, build_perturbation(c), c.scheme, MeshGrid(c.horizon, c.steps),
                              build_control(c), eo, c.eta);
  }

  if (single) {
    std::ostringstream csv;
    write_report_csv(csv, *single);
    a.report_csv = csv.str();
    a.summary = {{"report", report_json(*single)}};
    asserted.push_back(&*single);
  } else {
    std::vector<const ExperimentReport*> reps{&pert->x_sq, &pert->x_abs};
    if (pert->y_sq) {
      reps.push_back(&*pert->y_sq);
      reps.push_back(&*pert->y_exceed);
    }
    std::ostringstream csv;
    csv << "epsilon";
    for (const auto* r : reps) csv << ',' << r->name << "_mean," << r->name << "_stderr";
    csv << '\n';
    for (std::size_t i = 0; i < pert->x_sq.axis.size(); ++i) {
      csv << format_double(pert->x_sq.axis[i]);
      for (const auto* r : reps)
        csv << ',' << format_double(r->errors[i].mean) << ','
            << format_double(r->errors[i].std_error);
      csv << '\n';
    }
    a.report_csv = csv.str();
    json reports = json::array();
    for (const auto* r : reps) reports.push_back(report_json(*r));
    a.summary = {{"reports", reports}, {"eta", pert->eta}};
    asserted = reps;
  }

  if (c.assert_decreasing)
    for (const auto* r : asserted)
      if (!check_trend(*r, Trend::nonincreasing)) a.trend_failed = true;
  a.summary["trend_asserted"] = c.assert_decreasing;
  a.summary["trend_pass"] = !a.trend_failed;
  dump_reference_paths(a, c, m, opt);
  return a;
}

}  // namespace detail

// Runs the experiment and writes its artifacts. Errors map onto exit codes:
// 1 trend assertion failed, 2 usage or config error, 3 numerical failure.
inline RunResult run(const ExperimentConfig& c, const RunOptions& opt = {}) {
  namespace fs = std::filesystem;
  RunResult res;
  try {
    const SviModel m = build_model(c);
    detail::Artifacts a = c.kind == ExperimentKind::simulate ? detail::run_simulate(c, m, opt)
                                                             : detail::run_sweep(c, m, opt);

    json summary = {{"kind", to_string(c.kind)},
                    {"model", c.model},
                    {"scheme", c.scheme.name()},
                    {"horizon", c.horizon},
                    {"steps", c.steps},
                    {"n_paths", c.n_paths},
                    {"seed", c.seed}};
    summary.update(a.summary);

    const fs::path out = opt.out_dir.value_or(c.output);
    fs::create_directories(out);
    detail::write_file(out / "report.csv", a.report_csv);
    detail::write_file(out / "summary.json", summary.dump(2) + "\n");
    res.files = {"report.csv", "summary.json"};
    if (!a.extra.empty()) fs::create_directories(out / "paths");
    for (const auto& [name, text] : a.extra) {
      detail::write_file(out / name, text);
      res.files.push_back(name);
    }
    res.files.push_back("manifest.json");
    const json manifest = {{"config_hash", detail::hex64(detail::fnv1a(serialize(c)))},
                           {"seed", c.seed},
                           {"version", kVersion},
                           {"files", res.files},
                           {"timestamp", detail::utc_timestamp()},
                           {"config", to_json(c)}};
    detail::write_file(out / "manifest.json", manifest.dump(2) + "\n");

    if (a.trend_failed) {
      res.exit_code = kExitTrend;
      res.message = "trend assertion failed: errors do not decrease within noise";
    }
  } catch (const NumericalError& e) {
    res.exit_code = kExitNumerical;
    res.message = e.what();
  } catch (const UsageError& e) {
    res.exit_code = kExitUsage;
    res.message = e.what();
  } catch (const DomainError& e) {
    res.exit_code = kExitUsage;
    res.message = e.what();
  } catch (const fs::filesystem_error& e) {
    res.exit_code = kExitUsage;
    res.message = e.what();
  }
  return res;
}

}  // namespace svi
