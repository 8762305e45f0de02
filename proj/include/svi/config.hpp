#pragma once

// Declarative experiment description: a JSON document validated against a
// fixed key schema. Unknown keys are errors. Every diagnostic carries the
// config path it refers to (for example "solver.scheme").

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "svi/coefficients.hpp"
#include "svi/convex.hpp"
#include "svi/errors.hpp"
#include "svi/experiments.hpp"
#include "svi/models.hpp"
#include "svi/solver.hpp"

namespace svi {

using json = nlohmann::json;

enum class ExperimentKind { simulate, cauchy, yosida_sweep, perturbation_sweep };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::simulate: return "simulate";
    case ExperimentKind::cauchy: return "cauchy";
    case ExperimentKind::yosida_sweep: return "yosida_sweep";
    case ExperimentKind::perturbation_sweep: return "perturbation_sweep";
  }
  return "?";
}

struct ControlConfig {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  std::vector<double> breakpoints;
  std::vector<double> values{1.0};
};

struct PerturbationConfig {
  PerturbationSpec::Mode mode = PerturbationSpec::Mode::drift_shift;
  std::vector<double> epsilons{0.1, 0.05, 0.025};
  double shift = 1.0;
};

struct ExperimentConfig {
  std::string model = "reflected_bm";
  json model_params = json::object();  // fully resolved, defaults filled in
  std::optional<ConvexPotential> psi1;
  std::optional<ConvexPotential> psi2;
  double rho = 0.0;
  ControlConfig control;
  SchemeChoice scheme = SchemeChoice::prox_step();
  double horizon = 1.0;
  std::size_t steps = 1024;
  ExperimentKind kind = ExperimentKind::simulate;
  std::vector<std::size_t> levels{64, 128, 256, 512};
  std::vector<int> n_values{4, 16, 64, 256};
  PerturbationConfig perturbation;
  double eta = kDefaultEta;
  bool assert_decreasing = false;
  std::uint64_t seed = 1;
  std::size_t n_paths = 100;
  std::string output = "out";
  std::size_t dump_limit = 100;
};

struct ConfigError {
  std::string path;
  std::string message;
};

struct ConfigResult {
  std::optional<ExperimentConfig> config;
  std::vector<ConfigError> errors;

  bool ok() const { return config.has_value() && errors.empty(); }
};

// ---------------------------------------------------------------------------
// Potential descriptors

inline json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

inline json potential_to_json(const ConvexPotential& p) {
  return std::visit(
      detail::overloaded{
          [](const IndicatorBox& b) {
            json lo = json::array(), hi = json::array();
            for (Eigen::Index i = 0; i < b.lower.size(); ++i) {
              lo.push_back(number_to_json(b.lower[i]));
              hi.push_back(number_to_json(b.upper[i]));
            }
            return json{{"kind", "box"}, {"lower", lo}, {"upper", hi}};
          },
          [](const IndicatorHalfLine& h) {
            return json{{"kind", "halfline"}, {"barrier", h.barrier}, {"side", to_string(h.side)}};
          },
          [](const AbsValue& a) {
            json w = json::array();
            for (Eigen::Index i = 0; i < a.weight.size(); ++i) w.push_back(a.weight[i]);
            return json{{"kind", "abs"}, {"weight", w}};
          },
          [](const Composite& c) {
            json parts = json::array();
            for (const auto& p : c.parts) parts.push_back(potential_to_json(p));
            return json{{"kind", "composite"}, {"parts", parts}};
          }},
      p.variant());
}

namespace detail {

class ConfigReader {
 public:
  std::vector<ConfigError> errors;

  void error(const std::string& path, const std::string& msg) { errors.push_back({path, msg}); }

  static std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
  }

  bool object(const json& j, const std::string& path) {
    if (!j.is_object()) {
      error(path, "expected an object");
      return false;
    }
    return true;
  }

  void keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> ok) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (auto k : ok) known = known || it.key() == k;
      if (!known) error(join(path, it.key()), "unknown key");
    }
  }

  std::optional<double> number(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return kInf;
      if (s == "-inf") return -kInf;
    }
    error(path, "expected a number");
    return std::nullopt;
  }

  double number_or(const json& obj, std::string_view key, const std::string& path, double def) {
    if (!obj.contains(key)) return def;
    const auto v = number(obj.at(std::string(key)), join(path, key));
    if (v && !std::isfinite(*v)) {
      error(join(path, key), "expected a finite number");
      return def;
    }
    return v.value_or(def);
  }

  std::optional<std::uint64_t> unsigned_int(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    error(path, "expected a nonnegative integer");
    return std::nullopt;
  }

  std::uint64_t unsigned_or(const json& obj, std::string_view key, const std::string& path,
                            std::uint64_t def) {
    if (!obj.contains(key)) return def;
    return unsigned_int(obj.at(std::string(key)), join(path, key)).value_or(def);
  }

  std::string string_or(const json& obj, std::string_view key, const std::string& path,
                        const std::string& def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(std::string(key));
    if (!v.is_string()) {
      error(join(path, key), "expected a string");
      return def;
    }
    return v.get<std::string>();
  }

  bool bool_or(const json& obj, std::string_view key, const std::string& path, bool def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(std::string(key));
    if (!v.is_boolean()) {
      error(join(path, key), "expected a boolean");
      return def;
    }
    return v.get<bool>();
  }

  std::optional<std::vector<double>> numbers(const json& v, const std::string& path,
                                             bool allow_scalar = false) {
    if (allow_scalar && (v.is_number() || v.is_string())) {
      auto x = number(v, path);
      if (!x) return std::nullopt;
      return std::vector<double>{*x};
    }
    if (!v.is_array()) {
      error(path, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
      auto x = number(v[i], path + "[" + std::to_string(i) + "]");
      if (x)
        out.push_back(*x);
      else
        ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<ConvexPotential> potential(const json& j, const std::string& path) {
    if (!object(j, path)) return std::nullopt;
    const std::string kind = string_or(j, "kind", path, "");
    try {
      if (kind == "box") {
        keys(j, path, {"kind", "lower", "upper"});
        if (!j.contains("lower") || !j.contains("upper")) {
          error(path, "box requires lower and upper");
          return std::nullopt;
        }
        auto lo = numbers(j.at("lower"), join(path, "lower"), true);
        auto hi = numbers(j.at("upper"), join(path, "upper"), true);
        if (!lo || !hi) return std::nullopt;
        if (lo->size() != hi->size()) {
          error(path, "lower and upper must have equal length");
          return std::nullopt;
        }
        return ConvexPotential::box(Eigen::Map<const Vec>(lo->data(), static_cast<Eigen::Index>(lo->size())),
                                    Eigen::Map<const Vec>(hi->data(), static_cast<Eigen::Index>(hi->size())));
      }
      if (kind == "halfline") {
        keys(j, path, {"kind", "barrier", "side"});
        const double barrier = number_or(j, "barrier", path, 0.0);
        const std::string side = string_or(j, "side", path, "above");
        if (side != "above" && side != "below") {
          error(join(path, "side"), "side must be \"above\" or \"below\"");
          return std::nullopt;
        }
        return ConvexPotential::half_line(barrier, side == "above" ? Side::above : Side::below);
      }
      if (kind == "abs") {
        keys(j, path, {"kind", "weight"});
        std::vector<double> w{1.0};
        if (j.contains("weight")) {
          auto v = numbers(j.at("weight"), join(path, "weight"), true);
          if (!v) return std::nullopt;
          w = *v;
        }
        return ConvexPotential::abs_value(
            Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size())));
      }
      if (kind == "composite") {
        keys(j, path, {"kind", "parts"});
        if (!j.contains("parts") || !j.at("parts").is_array()) {
          error(join(path, "parts"), "composite requires an array of parts");
          return std::nullopt;
        }
        std::vector<ConvexPotential> parts;
        bool ok = true;
        for (std::size_t i = 0; i < j.at("parts").size(); ++i) {
          auto p = potential(j.at("parts")[i], join(path, "parts") + "[" + std::to_string(i) + "]");
          if (p)
            parts.push_back(std::move(*p));
          else
            ok = false;
        }
        if (!ok) return std::nullopt;
        return ConvexPotential::composite(std::move(parts));
      }
      error(join(path, "kind"), "unknown potential kind \"" + kind +
                                    "\" (expected box, halfline, abs, composite)");
    } catch (const UsageError& e) {
      error(path, e.what());
    }
    return std::nullopt;
  }
};

struct ParamSpec {
  std::string_view key;
  json def;
};

inline const std::vector<ParamSpec>* model_param_specs(const std::string& name) {
  static const std::vector<ParamSpec> reflected_bm{{"dim", 1}, {"x0", 0.0}};
  static const std::vector<ParamSpec> toy{{"linear", 0.0},      {"cubic", 1.0},  {"sigma", 0.3},
                                          {"x0", 0.5},          {"y0", 0.0},     {"y_reversion", 1.0},
                                          {"y_sigma", 0.1},     {"bound", 2.0}};
  static const std::vector<ParamSpec> heston{{"kappa", 2.0}, {"theta", 0.04}, {"xi", 0.2},
                                             {"v0", 0.04},   {"s0", 1.0},     {"mu", 0.0},
                                             {"sigma", 1.0}, {"max_sensitivity", 0.0},
                                             {"v_max", 1.0}};
  static const std::vector<ParamSpec> slv{{"barrier", 0.0}, {"p", 1.0},        {"x_reversion", 1.0},
                                          {"x_sigma", 0.3}, {"s_drift", 0.05}, {"vol_level", 0.2},
                                          {"x0", 0.0},      {"s0", 1.0}};
  static const std::vector<ParamSpec> lmsv{{"kappa", 1.0}, {"theta", 0.2}, {"xi", 0.1},
                                           {"x0", 0.2},    {"s0", 1.0},    {"mu", 0.0},
                                           {"sigma", 1.0}, {"max_sensitivity", 0.5}};
  if (name == "reflected_bm") return &reflected_bm;
  if (name == "toy_monotone") return &toy;
  if (name == "heston_pd") return &heston;
  if (name == "reflected_slv") return &slv;
  if (name == "local_max_sv") return &lmsv;
  return nullptr;
}

}  // namespace detail

inline const std::vector<std::string>& model_catalog() {
  static const std::vector<std::string> names{"heston_pd", "reflected_slv", "local_max_sv",
                                              "toy_monotone", "reflected_bm"};
  return names;
}

// Instantiates the catalog model named in the config with its resolved
// parameters, correlation, and potential overrides.
inline SviModel build_model(const ExperimentConfig& c) {
  const json& p = c.model_params;
  auto num = [&](const char* k) { return p.at(k).get<double>(); };
  SviModel m = [&]() -> SviModel {
    if (c.model == "reflected_bm")
      return make_reflected_bm(p.at("dim").get<std::size_t>(), c.rho, num("x0"));
    if (c.model == "toy_monotone") {
      ToyMonotoneParams t;
      t.linear = num("linear");
      t.cubic = num("cubic");
      t.sigma = num("sigma");
      t.x0 = num("x0");
      t.y0 = num("y0");
      t.y_reversion = num("y_reversion");
      t.y_sigma = num("y_sigma");
      t.bound = num("bound");
      t.rho = c.rho;
      return make_toy_monotone(t);
    }
    if (c.model == "heston_pd") {
      HestonParams h;
      h.kappa = num("kappa");
      h.theta = num("theta");
      h.xi = num("xi");
      h.v0 = num("v0");
      h.s0 = num("s0");
      h.rho = c.rho;
      h.v_max = num("v_max");
      h.mu_fn = [mu = num("mu")](double, double, double) { return mu; };
      h.sigma_fn = [s = num("sigma"), ms = num("max_sensitivity")](double, double sv, double mx) {
        return s * (1.0 + ms * (mx - sv) / std::max(std::abs(mx), 1e-12));
      };
      return make_heston_path_dependent(h);
    }
    if (c.model == "reflected_slv") {
      ReflectedSlvParams r;
      r.barrier = num("barrier");
      r.side = side_from_skew(num("p"));
      const double k = num("x_reversion"), sx = num("x_sigma"), sd = num("s_drift"),
                   vl = num("vol_level");
      r.mu_fn = [k](double x) { return -k * x; };
      r.sigma_fn = [sx](double) { return sx; };
      r.gamma_drift = [sd](double s, double) { return sd * s; };
      r.m_fn = [vl](double x) { return vl * std::sqrt(1.0 + x * x); };
      r.mu_lipschitz = k;
      r.sigma_lipschitz = 0.0;
      r.rho = c.rho;
      r.x0 = num("x0");
      r.s0 = num("s0");
      return make_reflected_slv(r);
    }
    if (c.model == "local_max_sv") {
      LocalMaxSvParams l;
      l.kappa = num("kappa");
      l.theta = num("theta");
      l.xi = num("xi");
      l.x0 = num("x0");
      l.s0 = num("s0");
      l.mu = num("mu");
      l.sigma = num("sigma");
      l.max_sensitivity = num("max_sensitivity");
      l.rho = c.rho;
      return make_local_max_sv(l);
    }
    throw UsageError("unknown model \"" + c.model + "\"");
  }();
  if (c.psi1) m.psi1 = *c.psi1;
  if (c.psi2) m.psi2 = *c.psi2;
  return m;
}

inline ControlProcess build_control(const ExperimentConfig& c) {
  return ControlProcess(c.control.breakpoints, c.control.values, c.control.lambda1,
                        c.control.lambda2);
}

inline PerturbationSpec build_perturbation(const ExperimentConfig& c) {
  PerturbationSpec s;
  s.mode = c.perturbation.mode;
  s.epsilons = c.perturbation.epsilons;
  s.shift = c.perturbation.shift;
  return s;
}

// Canonical JSON form; parse(serialize(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = {{"name", c.model}, {"params", c.model_params}};
  json pots = json::object();
  if (c.psi1) pots["psi1"] = potential_to_json(*c.psi1);
  if (c.psi2) pots["psi2"] = potential_to_json(*c.psi2);
  j["potentials"] = pots;
  j["correlation"] = {{"rho", c.rho}};
  j["control"] = {{"lambda1", c.control.lambda1},
                  {"lambda2", c.control.lambda2},
                  {"breakpoints", c.control.breakpoints},
                  {"values", c.control.values}};
  json solver = {{"scheme", c.scheme.name()}, {"horizon", c.horizon}, {"steps", c.steps}};
  if (c.scheme.kind == SchemeChoice::Kind::yosida) solver["yosida_n"] = c.scheme.n;
  j["solver"] = solver;
  json exp = {{"kind", to_string(c.kind)},
              {"assert_decreasing", c.assert_decreasing}};
  switch (c.kind) {
    case ExperimentKind::simulate: break;
    case ExperimentKind::cauchy: exp["levels"] = c.levels; break;
    case ExperimentKind::yosida_sweep: exp["n_values"] = c.n_values; break;
    case ExperimentKind::perturbation_sweep:
      exp["perturbation"] = {{"mode", to_string(c.perturbation.mode)},
                             {"epsilons", c.perturbation.epsilons},
                             {"shift", c.perturbation.shift}};
      exp["eta"] = c.eta;
      break;
  }
  j["experiment"] = exp;
  j["seed"] = c.seed;
  j["n_paths"] = c.n_paths;
  j["output"] = c.output;
  j["dump_limit"] = c.dump_limit;
  return j;
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

inline ConfigResult validate_json(const json& root) {
  ConfigReader r;
  ExperimentConfig c;
  if (!r.object(root, "")) return {std::nullopt, r.errors};
  r.keys(root, "", {"model", "potentials", "correlation", "control", "solver", "experiment", "seed",
                    "n_paths", "output", "dump_limit"});

  // model
  if (!root.contains("model")) {
    r.error("model", "missing required section");
  } else if (r.object(root.at("model"), "model")) {
    const json& m = root.at("model");
    r.keys(m, "model", {"name", "params"});
    c.model = r.string_or(m, "name", "model", "");
    const auto* specs = model_param_specs(c.model);
    if (!specs) {
      r.error("model.name", "unknown model \"" + c.model +
                                "\" (expected heston_pd, reflected_slv, local_max_sv, "
                                "toy_monotone, reflected_bm)");
    } else {
      json given = m.contains("params") ? m.at("params") : json::object();
      if (r.object(given, "model.params")) {
        for (auto it = given.begin(); it != given.end(); ++it) {
          bool known = false;
          for (const auto& s : *specs) known = known || it.key() == s.key;
          if (!known) r.error("model.params." + it.key(), "unknown key");
        }
        c.model_params = json::object();
        for (const auto& s : *specs) {
          const std::string key(s.key);
          const std::string path = "model.params." + key;
          if (!given.contains(key)) {
            c.model_params[key] = s.def;
            continue;
          }
          const json& v = given.at(key);
          if (s.def.is_number_integer()) {
            auto u = r.unsigned_int(v, path);
            c.model_params[key] = u.value_or(s.def.get<std::uint64_t>());
          } else {
            auto d = r.number(v, path);
            if (d && !std::isfinite(*d)) r.error(path, "expected a finite number");
            c.model_params[key] = d && std::isfinite(*d) ? *d : s.def.get<double>();
          }
        }
      }
    }
  }

  // potentials
  if (root.contains("potentials") && r.object(root.at("potentials"), "potentials")) {
    const json& p = root.at("potentials");
    r.keys(p, "potentials", {"psi1", "psi2"});
    if (p.contains("psi1")) c.psi1 = r.potential(p.at("psi1"), "potentials.psi1");
    if (p.contains("psi2")) c.psi2 = r.potential(p.at("psi2"), "potentials.psi2");
  }

  // correlation
  if (root.contains("correlation") && r.object(root.at("correlation"), "correlation")) {
    const json& k = root.at("correlation");
    r.keys(k, "correlation", {"rho"});
    c.rho = r.number_or(k, "rho", "correlation", 0.0);
    if (!(std::abs(c.rho) <= 1.0)) {
      r.error("correlation.rho", "rho must lie in [-1, 1] (got " + std::to_string(c.rho) + ")");
      c.rho = 0.0;
    }
  }

  // control
  if (root.contains("control") && r.object(root.at("control"), "control")) {
    const json& q = root.at("control");
    r.keys(q, "control", {"lambda1", "lambda2", "breakpoints", "values"});
    c.control.lambda1 = r.number_or(q, "lambda1", "control", 1.0);
    c.control.lambda2 = r.number_or(q, "lambda2", "control", 1.0);
    if (q.contains("breakpoints"))
      c.control.breakpoints =
          r.numbers(q.at("breakpoints"), "control.breakpoints").value_or(std::vector<double>{});
    if (q.contains("values"))
      c.control.values = r.numbers(q.at("values"), "control.values").value_or(c.control.values);
    else
      c.control.values = {c.control.lambda1};
  }

  // solver
  if (root.contains("solver") && r.object(root.at("solver"), "solver")) {
    const json& s = root.at("solver");
    r.keys(s, "solver", {"scheme", "yosida_n", "horizon", "steps"});
    const std::string scheme = r.string_or(s, "scheme", "solver", "prox_step");
    const auto n = r.unsigned_or(s, "yosida_n", "solver", 0);
    if (scheme == "prox_step") {
      c.scheme = SchemeChoice::prox_step();
    } else if (scheme == "projection") {
      c.scheme = SchemeChoice::projection();
    } else if (scheme == "yosida") {
      if (n < 1)
        r.error("solver.yosida_n", "yosida scheme requires yosida_n >= 1");
      else
        c.scheme = SchemeChoice::yosida(static_cast<int>(n));
    } else {
      r.error("solver.scheme",
              "unknown scheme \"" + scheme + "\" (expected prox_step, projection, yosida)");
    }
    if (scheme != "yosida" && s.contains("yosida_n"))
      r.error("solver.yosida_n", "only valid with scheme \"yosida\"");
    c.horizon = r.number_or(s, "horizon", "solver", 1.0);
    if (!(c.horizon > 0.0)) r.error("solver.horizon", "horizon must be positive");
    c.steps = r.unsigned_or(s, "steps", "solver", 1024);
    if (c.steps < 1) r.error("solver.steps", "steps must be >= 1");
  }

  // experiment
  if (root.contains("experiment") && r.object(root.at("experiment"), "experiment")) {
    const json& e = root.at("experiment");
    r.keys(e, "experiment",
           {"kind", "levels", "n_values", "perturbation", "eta", "assert_decreasing"});
    const std::string kind = r.string_or(e, "kind", "experiment", "simulate");
    if (kind == "simulate")
      c.kind = ExperimentKind::simulate;
    else if (kind == "cauchy")
      c.kind = ExperimentKind::cauchy;
    else if (kind == "yosida_sweep")
      c.kind = ExperimentKind::yosida_sweep;
    else if (kind == "perturbation_sweep")
      c.kind = ExperimentKind::perturbation_sweep;
    else
      r.error("experiment.kind", "unknown experiment \"" + kind +
                                     "\" (expected simulate, cauchy, yosida_sweep, "
                                     "perturbation_sweep)");
    c.assert_decreasing = r.bool_or(e, "assert_decreasing", "experiment", false);

    auto only_for = [&](const char* key, ExperimentKind k) {
      if (e.contains(key) && c.kind != k)
        r.error(std::string("experiment.") + key,
                std::string("only valid for experiment kind ") + to_string(k));
    };
    only_for("levels", ExperimentKind::cauchy);
    only_for("n_values", ExperimentKind::yosida_sweep);
    only_for("perturbation", ExperimentKind::perturbation_sweep);
    only_for("eta", ExperimentKind::perturbation_sweep);

    if (e.contains("levels")) {
      auto v = r.numbers(e.at("levels"), "experiment.levels");
      if (v) {
        c.levels.clear();
        for (double x : *v) c.levels.push_back(static_cast<std::size_t>(x));
        bool ok = !v->empty();
        for (std::size_t i = 0; i < v->size(); ++i) {
          const double x = (*v)[i];
          ok = ok && x >= 1.0 && x == std::floor(x) &&
               std::has_single_bit(static_cast<std::size_t>(x)) &&
               (i == 0 || c.levels[i] == 2 * c.levels[i - 1]);
        }
        if (!ok)
          r.error("experiment.levels",
                  "levels must be powers of two, each twice the previous (dyadic)");
      }
    }
    if (e.contains("n_values")) {
      auto v = r.numbers(e.at("n_values"), "experiment.n_values");
      if (v) {
        c.n_values.clear();
        bool ok = !v->empty();
        for (std::size_t i = 0; i < v->size(); ++i) {
          const double x = (*v)[i];
          ok = ok && x >= 1.0 && x == std::floor(x) && x < 2147483647.0;
          c.n_values.push_back(ok ? static_cast<int>(x) : 1);
          if (i > 0) ok = ok && c.n_values[i] > c.n_values[i - 1];
        }
        if (!ok) r.error("experiment.n_values", "n values must be increasing integers >= 1");
      }
    }
    if (e.contains("perturbation") && r.object(e.at("perturbation"), "experiment.perturbation")) {
      const json& p = e.at("perturbation");
      const std::string path = "experiment.perturbation";
      r.keys(p, path, {"mode", "epsilons", "shift"});
      const std::string mode = r.string_or(p, "mode", path, "drift_shift");
      if (mode == "drift_shift")
        c.perturbation.mode = PerturbationSpec::Mode::drift_shift;
      else if (mode == "diffusion_scale")
        c.perturbation.mode = PerturbationSpec::Mode::diffusion_scale;
      else
        r.error(path + ".mode", "unknown mode \"" + mode +
                                    "\" (expected drift_shift, diffusion_scale; custom "
                                    "perturbations are library-only)");
      c.perturbation.shift = r.number_or(p, "shift", path, 1.0);
      if (p.contains("epsilons")) {
        auto v = r.numbers(p.at("epsilons"), path + ".epsilons");
        if (v) {
          c.perturbation.epsilons = *v;
          bool ok = !v->empty();
          for (std::size_t i = 0; i < v->size(); ++i)
            ok = ok && (*v)[i] >= 0.0 && std::isfinite((*v)[i]) && (i == 0 || (*v)[i] < (*v)[i - 1]);
          if (!ok) r.error(path + ".epsilons", "epsilons must be nonnegative and strictly decreasing");
        }
      }
    }
    c.eta = r.number_or(e, "eta", "experiment", kDefaultEta);
    if (!(c.eta > 0.0)) r.error("experiment.eta", "eta must be positive");
  }

  c.seed = r.unsigned_or(root, "seed", "", 1);
  c.n_paths = r.unsigned_or(root, "n_paths", "", 100);
  if (c.n_paths < 1) r.error("n_paths", "n_paths must be >= 1");
  if (c.kind != ExperimentKind::simulate && c.n_paths < 2)
    r.error("n_paths", "sweeps need at least two paths");
  c.output = r.string_or(root, "output", "", "out");
  c.dump_limit = r.unsigned_or(root, "dump_limit", "", 100);

  if (!r.errors.empty()) return {std::nullopt, r.errors};

  // Cross-references that need the instantiated model.
  try {
    const SviModel m = build_model(c);
    if (m.psi1.dim() != m.x.dim)
      r.error("potentials.psi1", "dimension " + std::to_string(m.psi1.dim()) +
                                     " does not match the model state dimension " +
                                     std::to_string(m.x.dim));
    else if (!in_domain(m.psi1, m.x0))
      r.error("potentials.psi1", "initial value x0 lies outside the domain of psi1");
    if (m.y) {
      if (!m.psi2 || m.psi2->dim() != m.y->dim)
        r.error("potentials.psi2", "dimension does not match the Y state dimension");
      else if (!in_domain(*m.psi2, m.y0))
        r.error("potentials.psi2", "initial value y0 lies outside the domain of psi2");
    } else if (c.psi2) {
      r.error("potentials.psi2", "model " + c.model + " has no Y system");
    }
    if (c.scheme.kind == SchemeChoice::Kind::projection) {
      if (!m.psi1.is_indicator())
        r.error("solver.scheme", "projection requires an indicator psi1");
      if (m.y && m.psi2 && !m.psi2->is_indicator())
        r.error("solver.scheme", "projection requires an indicator psi2");
    }
    if (c.kind == ExperimentKind::yosida_sweep && m.x.dim != 1)
      r.error("experiment.kind",
              "yosida_sweep requires a one-dimensional model: the Moreau-Yosida "
              "penalization theory is one-dimensional (model dim " +
                  std::to_string(m.x.dim) + ")");
  } catch (const UsageError& e) {
    r.error("model.params", e.what());
  }
  try {
    const ControlProcess q = build_control(c);
    for (double b : q.breakpoints())
      if (!(b > 0.0 && b < c.horizon))
        r.error("control.breakpoints", "breakpoints must lie inside (0, horizon)");
  } catch (const UsageError& e) {
    r.error("control", e.what());
  }

  if (!r.errors.empty()) return {std::nullopt, r.errors};
  return {std::move(c), {}};
}

}  // namespace detail

// Parses and validates a config document. Syntax errors carry line/column.
inline ConfigResult validate_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    return {std::nullopt,
            {{"", "syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what()}}};
  }
  return detail::validate_json(root);
}

inline ExperimentConfig parse_config_or_throw(const std::string& text) {
  ConfigResult r = validate_config(text);
  if (!r.ok()) {
    std::string msg = "invalid config:";
    for (const auto& e : r.errors) msg += "\n  " + (e.path.empty() ? "<root>" : e.path) + ": " + e.message;
    throw UsageError(msg);
  }
  return std::move(*r.config);
}

}  // namespace svi
