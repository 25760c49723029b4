// Command-line driver. Talks to the library through the C interface only.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dipolium/dipolium.h"

namespace {

int exit_code(dp_status s)
{
  switch (s) {
  case DP_OK: return 0;
  case DP_ERR_CONFIG:
  case DP_ERR_DOMAIN:
  case DP_ERR_INVALID_ARGUMENT: return 2;
  case DP_ERR_CONVERGENCE: return 3;
  default: return 1;
  }
}

int report(dp_status s)
{
  std::cerr << "dipolium: " << dp_last_error() << "\n";
  return exit_code(s);
}

bool read_file(const std::string& path, std::string& out)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

std::string number(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Dipole-dipole coupling and two-atom dynamics near a dielectric microsphere"};
  app.set_version_flag("--version", std::string(dp_version()));

  std::string config_path, preset, from_output, mode, output, style;
  std::optional<double> omega_min, omega_max, tmax, dt;
  std::optional<int> omega_steps;
  std::vector<std::string> sets;
  bool list_presets = false, print_config = false;

  app.add_option("--config", config_path, "Scenario file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "Built-in scenario name");
  app.add_option("--from-output", from_output, "Re-run the scenario echoed in an output file")
      ->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "sweep | evolve | closed-form")
      ->check(CLI::IsMember({"sweep", "evolve", "closed-form"}));
  app.add_option("--output", output, "Output file (default: output.path or stdout)");
  app.add_option("--style", style, "csv | columns | gnuplot")
      ->check(CLI::IsMember({"csv", "columns", "gnuplot"}));
  app.add_option("--omega-min", omega_min, "Sweep start, omega_T");
  app.add_option("--omega-max", omega_max, "Sweep end, omega_T");
  app.add_option("--omega-steps", omega_steps, "Number of sweep frequencies");
  app.add_option("--tmax", tmax, "Evolution time, 1/Gamma0");
  app.add_option("--dt", dt, "Time step, 1/Gamma0");
  app.add_option("--set", sets, "Override any key: section.key=value");
  app.add_flag("--list-presets", list_presets, "List built-in scenarios and exit");
  app.add_flag("--print-config", print_config, "Print the resolved scenario and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list_presets) {
    for (size_t i = 0; i < dp_preset_count(); ++i)
      std::cout << dp_preset_name(i) << "\n";
    return 0;
  }

  const int sources = !config_path.empty() + !preset.empty() + !from_output.empty();
  if (sources != 1) {
    std::cerr << "dipolium: give exactly one of --config, --preset, --from-output\n";
    return 2;
  }

  dp_scenario* sc = nullptr;
  dp_status st = DP_OK;
  if (!preset.empty()) {
    st = dp_scenario_from_preset(preset.c_str(), &sc);
  } else {
    std::string text;
    const std::string& path = config_path.empty() ? from_output : config_path;
    if (!read_file(path, text)) {
      std::cerr << "dipolium: cannot read " << path << "\n";
      return 2;
    }
    st = config_path.empty() ? dp_scenario_from_output(text.c_str(), &sc)
                             : dp_scenario_parse(text.c_str(), &sc);
  }
  if (st != DP_OK)
    return report(st);

  std::vector<std::pair<std::string, std::string>> overrides;
  if (!mode.empty())
    overrides.emplace_back("run.mode", mode);
  if (omega_min)
    overrides.emplace_back("run.omega_min", number(*omega_min));
  if (omega_max)
    overrides.emplace_back("run.omega_max", number(*omega_max));
  if (omega_steps)
    overrides.emplace_back("run.omega_steps", std::to_string(*omega_steps));
  if (tmax)
    overrides.emplace_back("run.t_max", number(*tmax));
  if (dt)
    overrides.emplace_back("run.dt", number(*dt));
  if (!style.empty())
    overrides.emplace_back("output.style", style);
  if (!output.empty())
    overrides.emplace_back("output.path", output);
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::cerr << "dipolium: --set expects key=value, got '" << s << "'\n";
      dp_scenario_free(sc);
      return 2;
    }
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : overrides) {
    st = dp_scenario_set(sc, key.c_str(), value.c_str());
    if (st != DP_OK) {
      dp_scenario_free(sc);
      return report(st);
    }
  }

  if (print_config) {
    std::cout << dp_scenario_text(sc);
    dp_scenario_free(sc);
    return 0;
  }

  dp_result* res = nullptr;
  st = dp_run(sc, &res);
  if (st != DP_OK) {
    dp_scenario_free(sc);
    return report(st);
  }
  const std::string path = dp_scenario_output_path(sc);
  const char* text = dp_result_text(res, dp_scenario_output_style(sc));
  int rc = 0;
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
      std::cerr << "dipolium: cannot write " << path << "\n";
      rc = 1;
    } else {
      std::cerr << "dipolium: wrote " << dp_result_rows(res) << " rows to " << path << "\n";
    }
  }
  dp_result_free(res);
  dp_scenario_free(sc);
  return rc;
}
