/*
 * dipolium C interface.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_free function. Every function returns a dp_status; on failure
 * dp_last_error() describes the problem for the calling thread.
 *
 * Units: frequencies / omega_T, lengths / lambda_T, rates / Gamma0.
 */
#ifndef DIPOLIUM_H
#define DIPOLIUM_H

#include <stddef.h>

#if defined(DIPOLIUM_BUILDING_LIBRARY)
#define DP_API __attribute__((visibility("default")))
#else
#define DP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dp_status {
  DP_OK = 0,
  DP_ERR_INVALID_ARGUMENT = 1,
  DP_ERR_CONFIG = 2,
  DP_ERR_CONVERGENCE = 3,
  DP_ERR_DOMAIN = 4,
  DP_ERR_INTERNAL = 5
} dp_status;

typedef enum dp_output_style {
  DP_STYLE_CSV = 0,
  DP_STYLE_COLUMNS = 1,
  DP_STYLE_GNUPLOT = 2
} dp_output_style;

typedef struct dp_scenario dp_scenario;
typedef struct dp_result dp_result;
typedef struct dp_sphere dp_sphere;

DP_API const char* dp_version(void);
DP_API const char* dp_last_error(void);

/* Scenarios */
DP_API dp_status dp_scenario_parse(const char* text, dp_scenario** out);
DP_API dp_status dp_scenario_from_preset(const char* name, dp_scenario** out);
DP_API dp_status dp_scenario_from_output(const char* text, dp_scenario** out);
DP_API dp_status dp_scenario_set(dp_scenario* scenario, const char* key,
                                 const char* value);
/* Canonical text; the returned string lives until the next call on the
 * same handle or dp_scenario_free. */
DP_API const char* dp_scenario_text(dp_scenario* scenario);
DP_API const char* dp_scenario_output_path(const dp_scenario* scenario);
DP_API dp_output_style dp_scenario_output_style(const dp_scenario* scenario);
DP_API void dp_scenario_free(dp_scenario* scenario);

DP_API size_t dp_preset_count(void);
DP_API const char* dp_preset_name(size_t index);

/* Runs */
DP_API dp_status dp_run(const dp_scenario* scenario, dp_result** out);
DP_API size_t dp_result_rows(const dp_result* result);
DP_API size_t dp_result_columns(const dp_result* result);
DP_API const char* dp_result_column_name(const dp_result* result, size_t col);
DP_API double dp_result_value(const dp_result* result, size_t row, size_t col);
/* Text block; lives until dp_result_free. */
DP_API const char* dp_result_text(dp_result* result, dp_output_style style);
DP_API void dp_result_free(dp_result* result);

/* Direct physics entry points */
DP_API dp_status dp_permittivity(double omega_p, double gamma, double omega,
                                 double* re, double* im);
DP_API dp_status dp_free_space_green(const double r[3], const double rp[3],
                                     double omega, double re[9], double im[9]);
DP_API dp_status dp_sphere_create(double omega_p, double gamma,
                                  double diameter, dp_sphere** out);
/* Total Green tensor (vacuum + scattering) between distinct exterior
 * points, row-major. */
DP_API dp_status dp_sphere_green(const dp_sphere* sphere, const double r[3],
                                 const double rp[3], double omega,
                                 double re[9], double im[9]);
/* Gamma/Gamma0 and delta/Gamma0 between two atoms with real unit dipoles
 * at frequency omega (a == b for the single-atom rate and shift). */
DP_API dp_status dp_sphere_coupling(const dp_sphere* sphere,
                                    const double ra[3], const double da[3],
                                    const double rb[3], const double db[3],
                                    double omega, double* gamma,
                                    double* delta);
DP_API void dp_sphere_free(dp_sphere* sphere);

#ifdef __cplusplus
}
#endif

#endif
