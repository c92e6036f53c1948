/* C interface to the convection-diffusion recovery laboratory. */

#ifndef CDLAB_H
#define CDLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CDLAB_OK 0

#define CDLAB_ERR_ARGUMENT 1

#define CDLAB_ERR_CONFIG 2

#define CDLAB_ERR_NUMERIC 3

#define CDLAB_ERR_IO 4

#define CDLAB_ERR_PANIC 5

/**
 * Opaque experiment configuration.
 */
typedef struct CdlabConfig CdlabConfig;

/**
 * Opaque run report.
 */
typedef struct CdlabReport CdlabReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cdlab_last_error(void);

/**
 * Static library version string.
 */
const char *cdlab_version(void);

/**
 * JSON array of {name, description} scenario entries; free with
 * `cdlab_string_free`.
 */
char *cdlab_scenarios_json(void);

void cdlab_string_free(char *s);

/**
 * Default configuration for a named scenario; null on error.
 */
struct CdlabConfig *cdlab_config_default(const char *scenario);

/**
 * Parse a JSON configuration; null on error (see `cdlab_last_error`).
 */
struct CdlabConfig *cdlab_config_from_json(const char *json);

void cdlab_config_free(struct CdlabConfig *cfg);

/**
 * Canonical JSON of the configuration; free with `cdlab_string_free`.
 */
char *cdlab_config_to_json(const struct CdlabConfig *cfg);

/**
 * Number of validation diagnostics (0 means the config is runnable);
 * negative on argument errors. The diagnostics themselves are exposed as a
 * JSON array via `cdlab_config_diagnostics_json`.
 */
int32_t cdlab_config_validate(const struct CdlabConfig *cfg);

/**
 * JSON array of validation diagnostics; free with `cdlab_string_free`.
 */
char *cdlab_config_diagnostics_json(const struct CdlabConfig *cfg);

/**
 * Run the configured scenario; null on error (code retrievable by running
 * `cdlab_run_code`, message via `cdlab_last_error`).
 */
struct CdlabReport *cdlab_run(const struct CdlabConfig *cfg);

/**
 * Run and report only the status code: CDLAB_OK when every check passed,
 * otherwise the error class of the failure (checks that ran but failed
 * still return CDLAB_OK; inspect the report for their status).
 */
int32_t cdlab_run_code(const struct CdlabConfig *cfg);

void cdlab_report_free(struct CdlabReport *report);

/**
 * 1 when every check passed, 0 otherwise, negative on argument errors.
 */
int32_t cdlab_report_passed(const struct CdlabReport *report);

/**
 * Number of checks in the report; negative on argument errors.
 */
int32_t cdlab_report_check_count(const struct CdlabReport *report);

/**
 * Full report as JSON; free with `cdlab_string_free`.
 */
char *cdlab_report_to_json(const struct CdlabReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDLAB_H */
