// Command-line front end: run, sweep and bounds.

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grouplearn/harness.hpp"

namespace gl = grouplearn;

namespace {

std::filesystem::path output_dir(const std::string& flag, const gl::ExperimentConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.output.empty()) return c.output;
  if (const char* env = std::getenv("GROUPLEARN_OUT_DIR"); env && *env) return env;
  return ".";
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw gl::ConfigError("values", "not a number: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

int report(const std::string& field, const std::string& message, int code) {
  gl::Json err;
  err["error"] = {{"field", field}, {"message", message}};
  std::cerr << err.dump() << '\n';
  return code;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group learning bandit simulator"};
  app.require_subcommand(1);

  std::string config_path, out_flag, param, values;
  bool trace = false;

  auto* run = app.add_subcommand("run", "Run every configured (algorithm, seed) cell");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_flag, "Output directory");
  run->add_flag("--trace", trace, "Also write per-replication event traces");

  auto* sw = app.add_subcommand("sweep", "Repeat a run over values of one parameter");
  sw->add_option("--config", config_path, "Experiment config (JSON)")->required();
  sw->add_option("--param", param, "alpha, omega_cross or L")->required();
  sw->add_option("--values", values, "Comma-separated values")->required();
  sw->add_option("--out", out_flag, "Output directory");

  auto* bounds = app.add_subcommand("bounds", "Emit regret bound curves");
  bounds->add_option("--config", config_path, "Experiment config (JSON)")->required();
  bounds->add_option("--out", out_flag, "Output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = gl::load_config(config_path);
    for (gl::Algorithm a : config.algorithms)
      if (config.policy(a).alpha_warning())
        std::cerr << "warning: alpha " << config.alpha
                  << " is at or above sqrt(2) - sqrt(3/2); the regret bound may not hold\n";

    if (*run) {
      const auto outputs = gl::run_experiment(config, output_dir(out_flag, config), trace);
      std::cout << outputs.csv.string() << '\n' << outputs.manifest.string() << '\n';
    } else if (*sw) {
      const auto p = gl::parse_sweep_param(param);
      if (!p) throw gl::ConfigError("param", "unknown parameter '" + param + "'");
      for (const auto& o : gl::sweep(config, *p, parse_values(values), output_dir(out_flag, config)))
        std::cout << o.csv.string() << '\n';
    } else if (*bounds) {
      const std::string csv = gl::bounds_csv(config);
      if (out_flag.empty()) std::cout << csv;
      else gl::write_file_atomic(out_flag, csv);
    }
  } catch (const gl::ConfigError& e) {
    return report(e.field(), e.what(), 2);
  } catch (const std::exception& e) {
    return report("", e.what(), 1);
  }
  return 0;
}
