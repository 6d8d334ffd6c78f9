/* C interface to the tapkin library. Every call returns a status code; on
 * failure tapkin_last_error() holds a message for the calling thread. Strings
 * returned through char** are owned by the caller and released with
 * tapkin_string_free. Configuration is passed as JSON text. */
#ifndef TAPKIN_C_H
#define TAPKIN_C_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(TAPKIN_BUILDING)
#define TAPKIN_API __declspec(dllexport)
#else
#define TAPKIN_API __declspec(dllimport)
#endif
#else
#define TAPKIN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tapkin_status {
  TAPKIN_OK = 0,
  TAPKIN_ERR_VALIDATION = 1,
  TAPKIN_ERR_NUMERICAL = 2,
  TAPKIN_ERR_IO = 3,
  TAPKIN_ERR_INTERNAL = 4
} tapkin_status;

typedef struct tapkin_features tapkin_features;
typedef struct tapkin_fit tapkin_fit;
typedef struct tapkin_rcdc tapkin_rcdc;
typedef struct tapkin_grid tapkin_grid;

TAPKIN_API const char* tapkin_version(void);
TAPKIN_API const char* tapkin_last_error(void);
TAPKIN_API void tapkin_string_free(char* s);

/* JSON array of {"name", "description"}. */
TAPKIN_API tapkin_status tapkin_list_presets(char** json_out);

/* Runs the reactor. config_json:
 *   {"preset": "...", "reactor": {...}, "mechanism": {...}, "seed": n}
 * Keys override the preset (default "inert"). */
TAPKIN_API tapkin_status tapkin_simulate(const char* config_json, tapkin_features** out);
TAPKIN_API tapkin_status tapkin_features_load(const char* path, tapkin_features** out);
TAPKIN_API void tapkin_features_free(tapkin_features* f);

TAPKIN_API size_t tapkin_features_gas_count(const tapkin_features* f);
TAPKIN_API size_t tapkin_features_point_count(const tapkin_features* f);
/* Label of gas i; NULL when out of range. Valid while f lives. */
TAPKIN_API const char* tapkin_features_gas(const tapkin_features* f, size_t i);
/* series: "t", "rate", "concentration" or "uptake". Copies up to `capacity`
 * values into `out` and stores the series length in *count. */
TAPKIN_API tapkin_status tapkin_features_series(const tapkin_features* f, const char* gas, const char* series,
                                                double* out, size_t capacity, size_t* count);
/* JSON summary: mass balance, integrator statistics, interpolated samples. */
TAPKIN_API tapkin_status tapkin_features_summary(const tapkin_features* f, char** json_out);
TAPKIN_API tapkin_status tapkin_features_write_csv(const tapkin_features* f, const char* path);
/* Outlet flux (simulated features only). */
TAPKIN_API tapkin_status tapkin_features_write_flux_csv(const tapkin_features* f, const char* path);

/* Baseline correction and calibration of a flux CSV (sidecar path + ".calib").
 * Writes the corrected flux to out_path; report_json receives the applied
 * corrections and warnings. */
TAPKIN_API tapkin_status tapkin_preprocess_flux(const char* in_path, const char* out_path, const char* config_json,
                                                char** report_json);

/* fit_json: {"gas": "A", "terms": "full" | "custom:C,CU,U", "penalty": {...},
 *            "truth": [..], "seed": n} */
TAPKIN_API tapkin_status tapkin_fit_run(const tapkin_features* f, const char* fit_json, tapkin_fit** out);
TAPKIN_API void tapkin_fit_free(tapkin_fit* fit);
TAPKIN_API size_t tapkin_fit_term_count(const tapkin_fit* fit);
TAPKIN_API const char* tapkin_fit_term(const tapkin_fit* fit, size_t i);
TAPKIN_API double tapkin_fit_beta(const tapkin_fit* fit, size_t i);
TAPKIN_API double tapkin_fit_lambda(const tapkin_fit* fit);
/* NaN when no truth was given or nothing was excluded. */
TAPKIN_API double tapkin_fit_npv(const tapkin_fit* fit);
TAPKIN_API tapkin_status tapkin_fit_report(const tapkin_fit* fit, char** json_out);
TAPKIN_API tapkin_status tapkin_fit_write_report(const tapkin_fit* fit, const char* path);

/* rcdc_json: {"reactants": [{"gas": "O2", "sqrt": true}, ...], "product": "CO2",
 *             "trim": t | null, "c_floor_rel": x, "seed": n}
 * Omitted reactants and product default to CO oxidation. With a trim the
 * classification uses the robust correlation. */
TAPKIN_API tapkin_status tapkin_rcdc_run(const tapkin_features* f, const char* rcdc_json, tapkin_rcdc** out);
TAPKIN_API void tapkin_rcdc_free(tapkin_rcdc* m);
/* "EleyRideal", "LangmuirHinshelwood" or "Indeterminate". */
TAPKIN_API const char* tapkin_rcdc_verdict(const tapkin_rcdc* m);
TAPKIN_API double tapkin_rcdc_corr(const tapkin_rcdc* m, const char* a, const char* b);
TAPKIN_API tapkin_status tapkin_rcdc_report(const tapkin_rcdc* m, char** json_out);
TAPKIN_API tapkin_status tapkin_rcdc_write_csv(const tapkin_rcdc* m, const char* path);

/* grid_json: {"sweep": "er-irrev" | "lh-irrev" | "lh-rev", "axis1": [..], "axis2": [..],
 *             "coarse": bool, "reactor": {...}, "n_sites": x, "k_co2": x, "k_o": x,
 *             "threads": n, "seed": n} */
TAPKIN_API tapkin_status tapkin_grid_run(const char* grid_json, tapkin_grid** out);
TAPKIN_API void tapkin_grid_free(tapkin_grid* g);
TAPKIN_API size_t tapkin_grid_axis1_size(const tapkin_grid* g);
TAPKIN_API size_t tapkin_grid_axis2_size(const tapkin_grid* g);
TAPKIN_API size_t tapkin_grid_invalid(const tapkin_grid* g);
/* pair: "corr_O2_CO2", "corr_CO_CO2" or "corr_O2_CO". */
TAPKIN_API double tapkin_grid_cell(const tapkin_grid* g, const char* pair, size_t i, size_t j);
TAPKIN_API tapkin_status tapkin_grid_write_csv(const tapkin_grid* g, const char* path);

#ifdef __cplusplus
}
#endif

#endif
