#include "dipolium/dipolium.h"

#include <memory>
#include <new>
#include <string>

#include "dipolium/error.hpp"
#include "dipolium/scenario.hpp"

struct dp_scenario
{
  dipolium::ScenarioConfig config;
  std::string text;
};

struct dp_result
{
  dipolium::RunArtifact artifact;
  std::string text[3];
};

struct dp_sphere
{
  dipolium::SphereGeometry geometry;
  std::unique_ptr<dipolium::SphereProvider> provider;
};

namespace {

thread_local std::string last_error;

dp_status fail(dp_status code, const char* what)
{
  last_error = what;
  return code;
}

// Runs f and maps library exceptions onto status codes.
template <class F>
dp_status guarded(F&& f)
{
  try {
    f();
    last_error.clear();
    return DP_OK;
  } catch (const dipolium::ConfigError& e) {
    return fail(DP_ERR_CONFIG, e.what());
  } catch (const dipolium::ConvergenceError& e) {
    return fail(DP_ERR_CONVERGENCE, e.what());
  } catch (const dipolium::DomainError& e) {
    return fail(DP_ERR_DOMAIN, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DP_ERR_INTERNAL, "unknown error");
  }
}

dipolium::Vec3 vec(const double v[3])
{
  return {v[0], v[1], v[2]};
}

void split(const dipolium::Tensor3& g, double re[9], double im[9])
{
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      re[3 * i + j] = g(i, j).real();
      im[3 * i + j] = g(i, j).imag();
    }
}

dp_status make_scenario(dipolium::ScenarioConfig config, dp_scenario** out)
{
  *out = new dp_scenario{std::move(config), {}};
  return DP_OK;
}

} // namespace

extern "C" {

const char* dp_version(void)
{
  return DIPOLIUM_VERSION;
}

const char* dp_last_error(void)
{
  return last_error.c_str();
}

dp_status dp_scenario_parse(const char* text, dp_scenario** out)
{
  if (!text || !out)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { make_scenario(dipolium::parse_config(text), out); });
}

dp_status dp_scenario_from_preset(const char* name, dp_scenario** out)
{
  if (!name || !out)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { make_scenario(dipolium::load_preset(name), out); });
}

dp_status dp_scenario_from_output(const char* text, dp_scenario** out)
{
  if (!text || !out)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { make_scenario(dipolium::config_from_artifact(text), out); });
}

dp_status dp_scenario_set(dp_scenario* scenario, const char* key, const char* value)
{
  if (!scenario || !key || !value)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { dipolium::apply_override(scenario->config, key, value); });
}

const char* dp_scenario_text(dp_scenario* scenario)
{
  if (!scenario)
    return nullptr;
  scenario->text = dipolium::to_text(scenario->config);
  return scenario->text.c_str();
}

const char* dp_scenario_output_path(const dp_scenario* scenario)
{
  return scenario ? scenario->config.output.path.c_str() : nullptr;
}

dp_output_style dp_scenario_output_style(const dp_scenario* scenario)
{
  if (!scenario)
    return DP_STYLE_CSV;
  return static_cast<dp_output_style>(scenario->config.output.style);
}

void dp_scenario_free(dp_scenario* scenario)
{
  delete scenario;
}

size_t dp_preset_count(void)
{
  return dipolium::builtin_presets().size();
}

const char* dp_preset_name(size_t index)
{
  const auto& p = dipolium::builtin_presets();
  return index < p.size() ? p[index].name : nullptr;
}

dp_status dp_run(const dp_scenario* scenario, dp_result** out)
{
  if (!scenario || !out)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<dp_result>();
    r->artifact = dipolium::run_scenario(scenario->config);
    *out = r.release();
  });
}

size_t dp_result_rows(const dp_result* result)
{
  return result ? result->artifact.rows.size() : 0;
}

size_t dp_result_columns(const dp_result* result)
{
  return result ? result->artifact.columns.size() : 0;
}

const char* dp_result_column_name(const dp_result* result, size_t col)
{
  if (!result || col >= result->artifact.columns.size())
    return nullptr;
  return result->artifact.columns[col].c_str();
}

double dp_result_value(const dp_result* result, size_t row, size_t col)
{
  if (!result || row >= result->artifact.rows.size() || col >= result->artifact.columns.size())
    return 0.0;
  return result->artifact.rows[row][col];
}

const char* dp_result_text(dp_result* result, dp_output_style style)
{
  if (!result || style < DP_STYLE_CSV || style > DP_STYLE_GNUPLOT)
    return nullptr;
  std::string& slot = result->text[style];
  if (slot.empty())
    slot = dipolium::emit_plot_data(result->artifact, static_cast<dipolium::OutputStyle>(style));
  return slot.c_str();
}

void dp_result_free(dp_result* result)
{
  delete result;
}

dp_status dp_permittivity(double omega_p, double gamma, double omega, double* re, double* im)
{
  if (!re || !im)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    dipolium::DrudeLorentz m;
    m.omega_P = omega_p;
    m.gamma = gamma;
    const auto e = dipolium::permittivity(m, omega);
    *re = e.real();
    *im = e.imag();
  });
}

dp_status dp_free_space_green(const double r[3], const double rp[3], double omega,
                              double re[9], double im[9])
{
  if (!r || !rp || !re || !im)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { split(dipolium::free_space_green(vec(r), vec(rp), omega), re, im); });
}

dp_status dp_sphere_create(double omega_p, double gamma, double diameter, dp_sphere** out)
{
  if (!out)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<dp_sphere>();
    s->geometry.diameter = diameter;
    s->geometry.material.omega_P = omega_p;
    s->geometry.material.gamma = gamma;
    s->geometry.validate();
    s->provider = std::make_unique<dipolium::SphereProvider>(s->geometry);
    *out = s.release();
  });
}

dp_status dp_sphere_green(const dp_sphere* sphere, const double r[3], const double rp[3],
                          double omega, double re[9], double im[9])
{
  if (!sphere || !r || !rp || !re || !im)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const dipolium::Vec3 a = vec(r);
    const dipolium::Vec3 b = vec(rp);
    const auto g = dipolium::free_space_green(a, b, omega) +
                   dipolium::sphere_scattering_green(a, b, omega, sphere->geometry);
    split(g, re, im);
  });
}

dp_status dp_sphere_coupling(const dp_sphere* sphere, const double ra[3], const double da[3],
                             const double rb[3], const double db[3], double omega,
                             double* gamma, double* delta)
{
  if (!sphere || !ra || !da || !rb || !db || !gamma || !delta)
    return fail(DP_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    dipolium::Atom a;
    a.position = vec(ra);
    a.orientation = vec(da).cast<dipolium::cdouble>();
    a.omega_bare = a.omega_shifted = omega;
    dipolium::Atom b = a;
    b.position = vec(rb);
    b.orientation = vec(db).cast<dipolium::cdouble>();
    const bool same = (a.position - b.position).norm() == 0.0;
    const dipolium::cdouble k = same ? dipolium::coupling_K(a, a, *sphere->provider)
                                     : dipolium::coupling_K(a, b, *sphere->provider);
    *gamma = -2.0 * k.real() / a.gamma0;
    *delta = k.imag() / a.gamma0;
  });
}

void dp_sphere_free(dp_sphere* sphere)
{
  delete sphere;
}

} // extern "C"
