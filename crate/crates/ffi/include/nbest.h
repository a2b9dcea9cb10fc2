#ifndef NBEST_H
#define NBEST_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of an FFI call.
typedef enum NbStatus {
  NB_STATUS_OK = 0,
  NB_STATUS_NULL_ARGUMENT = 1,
  NB_STATUS_INVALID_UTF8 = 2,
  NB_STATUS_IO = 3,
  NB_STATUS_INVALID_DATA = 4,
  NB_STATUS_INVARIANT = 5,
  NB_STATUS_PANIC = 6,
} NbStatus;

// Lexicon, general grammar, specialised grammar and LR table.
typedef struct NbBundle NbBundle;

// A trained preference model.
typedef struct NbModel NbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Load `lexicon.tsv`, `grammar.txt`, `specialized.txt` and `lr_table.txt`
// from `data_dir`, with default configuration.
//
// # Safety
// `data_dir` must be a NUL-terminated string; `out` must be writable.
enum NbStatus nb_bundle_load(const char *data_dir, struct NbBundle **out);

// Override one configuration setting, e.g. `("repair", "no")`.
//
// # Safety
// `bundle` must come from [`nb_bundle_load`]; strings NUL-terminated.
enum NbStatus nb_bundle_set(struct NbBundle *bundle, const char *key, const char *value);

// # Safety
// `bundle` must come from [`nb_bundle_load`] or be null.
void nb_bundle_free(struct NbBundle *bundle);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum NbStatus nb_model_load(const char *path, struct NbModel **out);

// A model that ranks by acoustic score alone.
//
// # Safety
// `out` must be writable.
enum NbStatus nb_model_speech_only(struct NbModel **out);

// # Safety
// `model` must come from a model constructor or be null.
void nb_model_free(struct NbModel *model);

// Repair candidates for one sentence:
// `{"candidates": [...], "corrected": "..."}`.
//
// # Safety
// Pointers must be valid as described in the module documentation.
enum NbStatus nb_detect_repairs(const struct NbBundle *bundle,
                                const char *sentence,
                                char **out_json);

// Derivation signatures of one sentence as a JSON array. `specialized`
// non-zero parses with the specialised grammar, falling back to the
// general one as configured.
//
// # Safety
// Pointers must be valid as described in the module documentation.
enum NbStatus nb_parse(const struct NbBundle *bundle,
                       const char *sentence,
                       int32_t specialized,
                       char **out_json);

// Select one analysis per utterance of an N-best list given in the
// tab-separated file format. Writes a JSON array of selection results.
//
// # Safety
// Pointers must be valid as described in the module documentation.
enum NbStatus nb_select(const struct NbBundle *bundle,
                        const struct NbModel *model,
                        const char *nbest_text,
                        char **out_json);

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call on this thread.
const char *nb_last_error_message(void);

// # Safety
// `s` must come from this library or be null.
void nb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NBEST_H */
