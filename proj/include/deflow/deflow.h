/* deflow: flow-prior policy learning with a constrained refinement residual.
 *
 * Plain C interface over the C++ core. Every function returns a
 * deflow_status; on failure deflow_last_error() describes what went wrong
 * (the message is thread-local and valid until the next call on the same
 * thread). Strings returned through char** out-parameters are owned by the
 * caller and must be released with deflow_string_free. Handles are opaque
 * and released with their matching *_free function; passing NULL to a free
 * function is a no-op.
 */
#ifndef DEFLOW_DEFLOW_H
#define DEFLOW_DEFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DEFLOW_API __declspec(dllexport)
#else
#define DEFLOW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum deflow_status {
  DEFLOW_OK = 0,
  DEFLOW_ERR_INVALID_ARGUMENT = 1,
  DEFLOW_ERR_SHAPE_MISMATCH = 2,
  DEFLOW_ERR_IO = 3,
  DEFLOW_ERR_PARSE = 4,
  DEFLOW_ERR_NUMERIC = 5,
  DEFLOW_ERR_INTERNAL = 6
} deflow_status;

typedef struct deflow_dataset deflow_dataset;
typedef struct deflow_checkpoint deflow_checkpoint;

DEFLOW_API const char* deflow_version(void);
DEFLOW_API const char* deflow_last_error(void);
DEFLOW_API void deflow_string_free(char* s);

/* Environment descriptions are JSON objects {"kind": "bandit" | "maze",
 * "bandit": {...}, "maze": {...}}; NULL selects the default bandit. */

/* Draws n transitions from the environment's scripted behavior policy. */
DEFLOW_API deflow_status deflow_dataset_generate(const char* env_json, uint64_t n, uint64_t seed,
                                                 deflow_dataset** out);
DEFLOW_API deflow_status deflow_dataset_read(const char* path, deflow_dataset** out);
DEFLOW_API deflow_status deflow_dataset_write(const deflow_dataset* dataset, const char* path);
DEFLOW_API size_t deflow_dataset_size(const deflow_dataset* dataset);
/* Counts, mean reward and, for the bandit, the share of actions nearest each mode. */
DEFLOW_API deflow_status deflow_dataset_summary(const deflow_dataset* dataset, const char* env_json, char** out_json);
DEFLOW_API void deflow_dataset_free(deflow_dataset* dataset);

/* {"k": k, "iav": ..., "delta_fine": ..., "delta_nav": ...} */
DEFLOW_API deflow_status deflow_iav(const deflow_dataset* dataset, int k, char** out_json);

/* Runs training described by the JSON config. With `from` == NULL this is
 * offline training; otherwise it fine-tunes `from` online. Writes
 * config.json (resolved echo), components.json, metrics.csv (rows are
 * flushed as they are produced) and checkpoint.json into out_dir, which must
 * exist. `out` may be NULL. */
DEFLOW_API deflow_status deflow_train(const char* config_json, const deflow_dataset* dataset, const char* out_dir,
                                      const deflow_checkpoint* from, deflow_checkpoint** out);

DEFLOW_API deflow_status deflow_checkpoint_read(const char* path, deflow_checkpoint** out);
DEFLOW_API deflow_status deflow_checkpoint_write(const deflow_checkpoint* checkpoint, const char* path);
DEFLOW_API deflow_status deflow_checkpoint_to_json(const deflow_checkpoint* checkpoint, char** out_json);
DEFLOW_API void deflow_checkpoint_free(deflow_checkpoint* checkpoint);

/* {"mean", "std", "episodes", "per_episode": [...]}. env_json == NULL uses
 * the environment stored in the checkpoint's config. */
DEFLOW_API deflow_status deflow_evaluate(const deflow_checkpoint* checkpoint, const char* env_json, int episodes,
                                         uint64_t seed, char** out_json);

/* Q-grid and sampled proposal/residual/action triples; see the README for
 * the layout. `baseline` may be NULL. */
DEFLOW_API deflow_status deflow_dump_landscape(const deflow_checkpoint* checkpoint, const deflow_checkpoint* baseline,
                                               int grid, int samples, uint64_t seed, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* DEFLOW_DEFLOW_H */
