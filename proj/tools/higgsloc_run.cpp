// Command-line front end: one subcommand per scenario.
//   higgsloc_run <scenario> [--config file] [--out dir] [--override section.key=value]...

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "higgsloc/higgsloc.hpp"

namespace {

int usage_error(const std::string& msg) {
  std::cerr << "error: " << msg << "\nvalid scenarios: " << higgsloc::scenario_list() << "\n";
  return 2;
}

void print_report(const higgsloc::RunReport& r) {
  std::cout << "scenario " << r.config.scenario << ": " << higgsloc::to_string(r.status) << "\n";
  if (!r.error.empty()) std::cout << "  error: " << r.error << "\n";
  for (const auto& c : r.criteria)
    std::cout << "  [" << (c.passed ? "PASS" : "FAIL") << "] criterion " << c.id << ": " << c.name
              << " = " << higgsloc::format_double(c.value) << " (" << c.relation << " "
              << higgsloc::format_double(c.threshold) << ")"
              << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
  for (const auto& f : r.findings) std::cout << "  finding: " << f << "\n";
  std::cout << "  output: " << r.config.output_dir << "  (" << r.wall_seconds << " s, " << r.steps
            << " steps)\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2) {
    const std::string first = argv[1];
    if (!first.empty() && first[0] != '-' && !higgsloc::is_scenario_name(first))
      return usage_error("unknown scenario '" + first + "'");
  }

  CLI::App app{"Coupled Schrodinger / Klein-Gordon soliton experiments"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  for (auto name : higgsloc::kScenarioNames) {
    auto* sub = app.add_subcommand(std::string(name), "run the " + std::string(name) + " scenario");
    sub->add_option("--config", config_path, "scenario config file (key = value, [sections])");
    sub->add_option("--out", out_dir, "output directory (overrides run.output_dir)");
    sub->add_option("--override", overrides, "section.key=value, repeatable");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string scenario = app.get_subcommands().front()->get_name();

  higgsloc::ScenarioConfig config;
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) return usage_error("cannot read config '" + config_path + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      config = higgsloc::parse_config(buf.str());
      if (config.scenario != scenario)
        return usage_error("config names scenario '" + config.scenario + "' but subcommand is '" +
                           scenario + "'");
    }
    config.scenario = scenario;
    for (const auto& o : overrides) higgsloc::apply_override(config, o);
    if (!out_dir.empty()) config.output_dir = out_dir;
  } catch (const higgsloc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  const auto report = higgsloc::run_scenario(config);
  print_report(report);
  return report.exit_code();
}
