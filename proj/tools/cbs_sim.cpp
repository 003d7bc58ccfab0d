// Batch front-end: reads a JSON run configuration, applies CBS_SIM_<KEY>
// environment overrides and command-line flags, runs the requested mode and
// writes plot-ready CSV or JSON records.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime or I/O error.

#include <iostream>

#include <CLI11.hpp>

#include "cbs/run.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherent backscattering of light by an EIT-dressed cold atomic cloud"};
  app.set_version_flag("--version", cbs::kVersion);
  std::string config_path, mode, format, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::vector<std::string> sets;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--mode", mode, "spectrum, pulse or diagnostics")
      ->check(CLI::IsMember({"spectrum", "pulse", "diagnostics"}));
  app.add_option("--seed", seed, "random seed (u64)");
  app.add_option("--workers", workers, "worker threads; never changes results");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--set", sets, "override any configuration key, KEY=VALUE (repeatable)");
  app.add_flag("--print-config", print_config, "print the resolved configuration and exit");
  app.footer("Every configuration key may also be set through the environment as " +
             std::string(cbs::kEnvPrefix) +
             "<KEY> (upper case). Precedence: config file < environment < flags.");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  cbs::RunConfig config;
  try {
    cbs::Json file = cbs::Json::object();
    if (!config_path.empty()) file = cbs::read_json_file(config_path);
    cbs::Json flags = cbs::Json::object();
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) throw cbs::ConfigError("--set expects KEY=VALUE, got '" + s + "'");
      flags[s.substr(0, eq)] = cbs::override_value(s.substr(eq + 1));
    }
    if (!mode.empty()) flags["mode"] = mode;
    if (seed) flags["seed"] = *seed;
    if (workers) flags["workers"] = *workers;
    if (!out_dir.empty()) flags["output_dir"] = out_dir;
    if (!format.empty()) flags["format"] = format;
    config = cbs::parse_config(cbs::merge_layers({file, cbs::environment_overrides(), flags}));
  } catch (const cbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }

  if (print_config) {
    std::cout << cbs::run_metadata(config).dump(2) << "\n";
    return 0;
  }

  try {
    const cbs::RunOutputs outputs = cbs::render_run(config);
    cbs::write_outputs(config.output_dir, outputs);
    for (const auto& [name, _] : outputs)
      std::cerr << "wrote " << (std::filesystem::path(config.output_dir) / name).string() << "\n";
  } catch (const cbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const cbs::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
