#ifndef SUBPRIV_H
#define SUBPRIV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SubprivStatus {
  SubprivStatus_Ok = 0,
  SubprivStatus_NullPointer = 1,
  SubprivStatus_InvalidUtf8 = 2,
  SubprivStatus_InvalidArgument = 3,
  SubprivStatus_Io = 4,
  /**
   * The metric is undefined for this input (e.g. a constant series).
   */
  SubprivStatus_Undefined = 5,
  SubprivStatus_Panic = 6,
} SubprivStatus;

/**
 * A loaded dataset. Create with [`subpriv_dataset_load`], release with
 * [`subpriv_dataset_free`].
 */
typedef struct SubprivDataset SubprivDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next failing call on the same thread; do not free.
 */
const char *subpriv_last_error(void);

/**
 * Library version, static storage.
 */
const char *subpriv_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void subpriv_string_free(char *s);

/**
 * Loads a dataset file (JSONL, or a JSON array when the extension is
 * `.json`). Invalid records are skipped and counted.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SubprivStatus subpriv_dataset_load(const char *path, struct SubprivDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`subpriv_dataset_load`] not yet freed.
 */
void subpriv_dataset_free(struct SubprivDataset *ds);

/**
 * Number of valid documents; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
uintptr_t subpriv_dataset_len(const struct SubprivDataset *ds);

/**
 * Number of rejected records; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
uintptr_t subpriv_dataset_rejected(const struct SubprivDataset *ds);

/**
 * SHA-256 of the file, hex. Borrowed from the handle; do not free.
 *
 * # Safety
 * `ds` must be null or a live handle.
 */
const char *subpriv_dataset_digest(const struct SubprivDataset *ds);

/**
 * Corpus statistics as a JSON object, written to `*out`.
 *
 * # Safety
 * `ds` must be a live handle; `out` must be writable.
 */
enum SubprivStatus subpriv_dataset_stats_json(const struct SubprivDataset *ds, char **out);

/**
 * Collective protection rate over `n` subjects with `o[i]` evaluable PIIs
 * and inferred mass `a[i]`.
 *
 * # Safety
 * `o` and `a` must point to `n` readable elements; `out` must be writable.
 */
enum SubprivStatus subpriv_cpr(const uintptr_t *o, const double *a, uintptr_t n, double *out);

/**
 * Individual protection rate; every `o[i]` must be positive.
 *
 * # Safety
 * As [`subpriv_cpr`].
 */
enum SubprivStatus subpriv_ipr(const uintptr_t *o, const double *a, uintptr_t n, double *out);

/**
 * # Safety
 * `a` and `b` must be NUL-terminated; `out` must be writable.
 */
enum SubprivStatus subpriv_jaro_winkler(const char *a, const char *b, double *out);

/**
 * ROUGE-L F1 on lowercased whitespace tokens.
 *
 * # Safety
 * `reference` and `candidate` must be NUL-terminated; `out` must be writable.
 */
enum SubprivStatus subpriv_rouge_l(const char *reference, const char *candidate, double *out);

/**
 * Spearman rank correlation with average ranks for ties. A constant
 * series returns [`SubprivStatus::Undefined`].
 *
 * # Safety
 * `a` and `b` must point to `n` readable elements; `out` must be writable.
 */
enum SubprivStatus subpriv_spearman(const double *a, const double *b, uintptr_t n, double *out);

/**
 * Rule-based comparison of two PII values. `*out_score` receives 0.0,
 * 0.5 or 1.0; `*out_decided` is false when the rules defer to a judge.
 *
 * # Safety
 * String arguments must be NUL-terminated; outputs must be writable.
 */
enum SubprivStatus subpriv_score_rule(const char *category,
                                      const char *gt,
                                      const char *pred,
                                      double *out_score,
                                      bool *out_decided);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBPRIV_H */
