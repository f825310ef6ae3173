#ifndef INDUCTOR_H
#define INDUCTOR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum InductorStatus {
  INDUCTOR_STATUS_OK = 0,
  INDUCTOR_STATUS_NULL_POINTER = 1,
  INDUCTOR_STATUS_INVALID_UTF8 = 2,
  INDUCTOR_STATUS_INVALID_ARGUMENT = 3,
  INDUCTOR_STATUS_SYNTAX_ERROR = 4,
  INDUCTOR_STATUS_EVAL_ERROR = 5,
  INDUCTOR_STATUS_GRAMMAR_ERROR = 6,
  INDUCTOR_STATUS_DERIVE_ERROR = 7,
  INDUCTOR_STATUS_RULE_ERROR = 8,
  INDUCTOR_STATUS_PANIC = 9,
} InductorStatus;

/**
 * A parsed, validated grammar.
 */
typedef struct InductorGrammar InductorGrammar;

/**
 * A parsed sandbox program.
 */
typedef struct InductorProgram InductorProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *inductor_last_error(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void inductor_string_free(char *s);

/**
 * Parse sandbox source into a program handle.
 *
 * # Safety
 * `source` must be a NUL-terminated string; `out` must be writable.
 */
enum InductorStatus inductor_program_parse(const char *source, struct InductorProgram **out);

/**
 * Run a program on a JSON input: an integer array, or an array of integer
 * rows for a grid. `max_steps` of 0 keeps the default budget. On success
 * `*out_json` receives the result as JSON.
 *
 * # Safety
 * `program` must be a live handle; `input_json` NUL-terminated; `out_json` writable.
 */
enum InductorStatus inductor_program_eval(const struct InductorProgram *program,
                                          const char *input_json,
                                          uint64_t max_steps,
                                          char **out_json);

/**
 * # Safety
 * `program` must be NULL or a handle from [`inductor_program_parse`] not yet freed.
 */
void inductor_program_free(struct InductorProgram *program);

/**
 * Parse a `Rule k:` / `Priority k:` grammar.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` writable.
 */
enum InductorStatus inductor_grammar_parse(const char *text, struct InductorGrammar **out);

/**
 * Translate a space-separated input; `*out` receives the space-separated output.
 *
 * # Safety
 * `grammar` must be a live handle; `input` NUL-terminated; `out` writable.
 */
enum InductorStatus inductor_grammar_derive(const struct InductorGrammar *grammar,
                                            const char *input,
                                            char **out);

/**
 * # Safety
 * `grammar` must be NULL or a handle from [`inductor_grammar_parse`] not yet freed.
 */
void inductor_grammar_free(struct InductorGrammar *grammar);

/**
 * Apply a blicket rule (a JSON object of object labels, possibly inside
 * prose) to a JSON array of object descriptions. `*out_label` receives
 * "on", "off" or "undetermined".
 *
 * # Safety
 * Both strings must be NUL-terminated; `out_label` writable.
 */
enum InductorStatus inductor_blicket_apply(const char *rule,
                                           const char *objects_json,
                                           char **out_label);

/**
 * Raw accuracy (mean) and task accuracy (fraction equal to 1) over `len`
 * per-task accuracies.
 *
 * # Safety
 * `a_tau` must point to `len` doubles; outputs must be writable.
 */
enum InductorStatus inductor_aggregate(const double *a_tau,
                                       size_t len,
                                       double *out_raw,
                                       double *out_task);

/**
 * Library version, static.
 */
const char *inductor_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INDUCTOR_H */
