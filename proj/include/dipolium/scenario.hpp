#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dipolium/dynamics.hpp"

namespace dipolium {

// Scenario files are line-oriented `section.key = value` documents with
// sections material, sphere, atoms[i], model, run and output. `#` starts a
// comment. All quantities are dimensionless: frequencies / omega_T, lengths
// / lambda_T, rates / Gamma0, times * Gamma0.

enum class RunMode { sweep, evolve, closed_form };
enum class KernelKind { sphere, lorentzian };
enum class DipoleKind { radial, tangential, vector };
enum class OutputStyle { csv, columns, gnuplot };
enum class SweepAxis { omega, delta_r };

struct AtomSpec
{
  double delta_r = 0.02;   // distance from the sphere surface
  double theta_deg = 0.0;
  double phi_deg = 0.0;
  DipoleKind dipole = DipoleKind::radial;
  CVec3 dipole_vector = CVec3(0, 0, 1);
  double omega = 1.0;      // shifted transition frequency w~_A
  double gamma0 = 1e-6;    // Gamma0 / omega_T
};

/// Parameters of the two-atom closed forms and of the Lorentzian kernel.
/// Unset rates are derived from the geometry where possible.
struct ModelSpec
{
  std::optional<double> gamma_aa;
  std::optional<double> gamma_ab;
  std::optional<double> delta_ab;
  std::optional<double> gamma_plus;
  std::optional<double> gamma_minus;
  std::optional<double> half_width;   // Gamma0 units
  std::optional<double> omega_m;      // omega_T; unset = exact resonance
  int branch = +1;
  bool strong = false;
};

struct RunSpec
{
  RunMode mode = RunMode::sweep;
  std::optional<double> omega_min;
  std::optional<double> omega_max;
  int omega_steps = 201;
  // Sweeps over the atom-surface distance (all atoms moved together) run at
  // the atoms' own frequencies.
  SweepAxis axis = SweepAxis::omega;
  double delta_r_min = 1e-3;
  double delta_r_max = 0.05;
  int delta_r_steps = 50;
  KernelKind kernel = KernelKind::sphere;
  double window = 2e-5;        // kernel half window around mean w~ (omega_T)
  int kernel_points = 400;
  ExchangeMode exchange = ExchangeMode::consistent;
  double t_max = 1.0;
  double dt = 1e-3;
  std::vector<cdouble> initial;  // empty: first atom excited
  int n_max = 0;
  double series_tolerance = 1e-10;
  unsigned threads = 0;
};

struct OutputSpec
{
  std::string path;
  std::string label;
  std::vector<std::string> columns; // empty: all
  OutputStyle style = OutputStyle::csv;
  bool superposition = false;
};

struct ScenarioConfig
{
  DrudeLorentz material{};
  double diameter = 20.0;
  std::vector<AtomSpec> atoms;
  ModelSpec model;
  RunSpec run;
  OutputSpec output;

  /// Re-checks every physical and structural invariant. Throws ConfigError.
  void validate() const;
  SphereGeometry geometry() const;
  /// Library atoms (positions, dipoles, frequencies) for this scenario.
  std::vector<Atom> build_atoms() const;
};

ScenarioConfig parse_config(std::string_view text);

/// Applies one `section.key = value` assignment on top of an existing
/// config and re-validates.
void apply_override(ScenarioConfig& config, std::string_view key,
                    std::string_view value);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const ScenarioConfig& config);

struct Preset
{
  const char* name;
  const char* text;
};
const std::vector<Preset>& builtin_presets();
ScenarioConfig load_preset(std::string_view name);

/// Tabular result of a run together with everything needed to reproduce it.
struct RunArtifact
{
  std::string label;
  std::string config_text;                // canonical config echo
  std::vector<std::string> metadata;      // "key: value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

RunArtifact run_sweep(const ScenarioConfig& config);
RunArtifact run_evolution(const ScenarioConfig& config);
/// Dispatches on config.run.mode.
RunArtifact run_scenario(const ScenarioConfig& config);

/// Text block with `#` header lines (tool, label, metadata, config echo,
/// column names) followed by numeric rows in %.8e format.
std::string emit_plot_data(const RunArtifact& artifact, OutputStyle style);

struct PlotData
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
PlotData parse_plot_data(std::string_view text);

/// Recovers the scenario echoed in an emitted block's header.
ScenarioConfig config_from_artifact(std::string_view text);

std::string_view version() noexcept;

} // namespace dipolium
