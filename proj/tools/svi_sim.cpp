#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "svi/svi.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulate stochastic variational inequality systems from a JSON config"};
  std::string config_path;
  std::string out_dir;
  std::size_t threads = 1;
  bool dump_paths = false;
  app.add_option("--config", config_path, "experiment config (JSON)")->required();
  app.add_option("--out", out_dir, "output directory (overrides config.output)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--dump-paths", dump_paths, "write per-path CSV files under paths/");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : svi::kExitUsage;
  }

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read config " << config_path << '\n';
    return svi::kExitUsage;
  }
  std::stringstream text;
  text << in.rdbuf();

  const svi::ConfigResult parsed = svi::validate_config(text.str());
  if (!parsed.ok()) {
    for (const auto& e : parsed.errors)
      std::cerr << "config error at " << (e.path.empty() ? "<root>" : e.path) << ": " << e.message
                << '\n';
    return svi::kExitUsage;
  }
  svi::RunOptions opt;
  if (!out_dir.empty()) opt.out_dir = out_dir;
  opt.threads = threads;
  opt.dump_paths = dump_paths;
  const svi::RunResult r = svi::run(*parsed.config, opt);
  if (r.exit_code != svi::kExitOk) {
    std::cerr << "error: " << r.message << '\n';
    return r.exit_code;
  }
  for (const auto& f : r.files) std::cout << f << '\n';
  return svi::kExitOk;
}
