// Scenario runner: gme_cli run <config> | gme_cli validate <config>
#include "gme/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Gaussian generalized master equation scenario runner"};
  app.set_version_flag("--version", GME_VERSION);
  app.require_subcommand(1);

  std::string config;
  gme::RunOverrides ov;
  std::string output, format;

  auto* run = app.add_subcommand("run", "run a scenario config and write result tables");
  run->add_option("config", config, "scenario config (JSON)")->required();
  run->add_option("--output", output, "output directory (overrides output.directory)");
  run->add_option("--format", format, "csv or json (overrides output.format)");
  run->add_option("--jobs", ov.jobs, "worker threads for grid points")->default_val(1);

  auto* validate = app.add_subcommand("validate", "check a config without computing");
  validate->add_option("config", config, "scenario config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (*validate) {
    const auto pr = gme::load_config(config);
    for (const auto& d : pr.diagnostics) std::cerr << d << '\n';
    if (!pr.ok()) return 2;
    std::cout << "ok\n";
    return 0;
  }

  if (!output.empty()) ov.output_directory = output;
  if (!format.empty()) ov.format = format;
  const auto out = gme::run_config_file(config, ov);
  for (const auto& m : out.messages) std::cerr << m << '\n';
  if (!out.table_path.empty()) std::cout << out.table_path.string() << '\n';
  return out.exit_code;
}
