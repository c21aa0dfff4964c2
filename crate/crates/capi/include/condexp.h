#ifndef CONDEXP_H
#define CONDEXP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

#define CONDEXP_OK 0

#define CONDEXP_INTERNAL 1

#define CONDEXP_BUDGET_EXHAUSTED 2

#define CONDEXP_INVALID 3

#define CONDEXP_PARSE_ERROR 4

#define CONDEXP_NULL_ARGUMENT 5

/**
 * Opaque handle for a parsed and validated problem.
 */
typedef struct CondexpProblem CondexpProblem;

/**
 * Run options; negative numeric fields mean "not set" (fall back to the
 * problem file, the `CONDEXP_BUDGET` environment variable, then the
 * built-in default).
 */
typedef struct CondexpRunOptions {
  int64_t precision;
  int64_t budget;
  bool audit;
  bool exact;
  bool parallel;
} CondexpRunOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default-initialized options (all fields unset).
 */
struct CondexpRunOptions condexp_run_options_default(void);

/**
 * Parse and validate a problem file. Returns a handle, or NULL with an
 * error message in `error_out` (free it with `condexp_string_free`). The
 * status code distinguishing parse from validation failures is written to
 * `status_out` when non-NULL.
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated UTF-8 string; the out
 * pointers must be valid or NULL.
 */
struct CondexpProblem *condexp_problem_parse(const char *toml_text,
                                             int32_t *status_out,
                                             char **error_out);

/**
 * Free a problem handle. NULL is ignored.
 *
 * # Safety
 * `p` must come from `condexp_problem_parse` and not be freed twice.
 */
void condexp_problem_free(struct CondexpProblem *p);

/**
 * Free a string returned by any entry point. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void condexp_string_free(char *s);

/**
 * Validate a problem file; the per-invariant report is written to
 * `result_out`.
 *
 * # Safety
 * See `condexp_problem_parse`.
 */
int32_t condexp_check(const char *toml_text, char **result_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONDEXP_H */
