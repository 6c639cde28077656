/* C interface for the translab transmission-problem laboratory. */

#ifndef TRANSLAB_H
#define TRANSLAB_H

/* This file is generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum TranslabStatus {
  TRANSLAB_STATUS_OK = 0,
  TRANSLAB_STATUS_NULL_ARGUMENT = 1,
  TRANSLAB_STATUS_INVALID_ARGUMENT = 2,
  TRANSLAB_STATUS_RUNTIME_ERROR = 3,
  /**
   * The experiment ran but at least one asserted inequality failed.
   */
  TRANSLAB_STATUS_ASSERTION_FAILED = 4,
} TranslabStatus;

/**
 * Opaque solved-field handle (the space-time field plus its solve report).
 */
typedef struct TranslabField TranslabField;

/**
 * Opaque problem handle.
 */
typedef struct TranslabProblem TranslabProblem;

/**
 * Grid metadata of a solved field.
 */
typedef struct TranslabGridInfo {
  size_t n;
  double r;
  double h;
  double dt;
  /**
   * Nodes per spatial axis; nx1 is 1 when n = 1.
   */
  size_t nx0;
  size_t nx1;
  /**
   * Stored time levels including the bottom slice.
   */
  size_t nt;
} TranslabGridInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; never freed.
 */
const char *translab_version(void);

/**
 * Copies the last error message for this thread into `buf` (truncating) and
 * returns the full message length in bytes, excluding the terminator.
 */
size_t translab_last_error_message(char *buf, size_t len);

/**
 * Builds a problem from the JSON problem description used by the CLI
 * (grid, F_plus/F_minus, f, g, psi, phi).
 */
enum TranslabStatus translab_problem_from_json(const char *json, struct TranslabProblem **out);

void translab_problem_free(struct TranslabProblem *p);

/**
 * Marches the problem from the bottom slice to the top slice.
 */
enum TranslabStatus translab_solve(const struct TranslabProblem *p, struct TranslabField **out);

void translab_field_free(struct TranslabField *f);

enum TranslabStatus translab_field_grid(const struct TranslabField *f,
                                        struct TranslabGridInfo *out);

/**
 * Value at spatial index (i0, i1) and time level k; i1 is ignored for
 * n = 1. Fails on masked nodes and out-of-range indices.
 */
enum TranslabStatus translab_field_value(const struct TranslabField *f,
                                         size_t i0,
                                         size_t i1,
                                         size_t k,
                                         double *out);

/**
 * Max over stored levels of the local jump-equation residual.
 */
enum TranslabStatus translab_field_interface_residual(const struct TranslabField *f, double *out);

/**
 * Serializes the field in the flat CSV schema `x1[,x2],t,side,value`.
 * The returned string is owned by the caller.
 */
enum TranslabStatus translab_field_to_csv(const struct TranslabField *f, char **out);

/**
 * Runs a full experiment config (same schema as the CLI) and hands back the
 * deterministic report JSON. `AssertionFailed` still produces the report.
 */
enum TranslabStatus translab_experiment_run(const char *config_json, char **out_report_json);

/**
 * The built-in expression and family catalog as text.
 */
enum TranslabStatus translab_catalog(char **out);

/**
 * Releases a string returned by this library.
 */
void translab_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSLAB_H */
