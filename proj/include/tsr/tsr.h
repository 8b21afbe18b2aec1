#ifndef TSR_TSR_H
#define TSR_TSR_H

/* C interface to the two-stage visual-reasoning harness.
 *
 * All functions return a status code:
 *   0  success
 *   2  configuration error
 *   3  data error
 *   4  numerical abort
 *   1  any other failure
 *
 * When `errptr` is non-NULL and a call fails, *errptr receives a
 * malloc()-ed, NUL-terminated message the caller frees with tsr_free().
 * Handles are opaque; destroy functions accept NULL.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tsr_config_t tsr_config_t;

/* Library version, static storage. */
const char* tsr_version(void);

/* Parses and validates a JSON config file. On success *out owns the parsed
 * configuration. */
int tsr_config_open(const char* path, tsr_config_t** out, char** errptr);

/* Command-line overrides applied after parsing. */
int tsr_config_set_seed(tsr_config_t* cfg, uint64_t seed);
int tsr_config_set_out_dir(tsr_config_t* cfg, const char* dir);
int tsr_config_set_threads(tsr_config_t* cfg, int threads);

void tsr_config_destroy(tsr_config_t* cfg);

/* Runs one subcommand: "generate", "train", "ablate-sharing", "probe-depth",
 * "transfer", "consistency", or "report". On failure the exit-code-style
 * status is returned and a machine-readable failure record is written to
 * <out_dir>/failure.json. */
int tsr_run(const tsr_config_t* cfg, const char* command, char** errptr);

/* Generates one episode batch file in the TSRE format without a config:
 * `family` is one of grid_puzzle | odd_one_out | same_different |
 * concept_contrast | ball_motion. */
int tsr_generate_batch(const char* family, uint64_t seed, int count, const char* split,
                       const char* out_path, char** errptr);

/* Frees buffers returned through errptr. */
void tsr_free(void* p);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* TSR_TSR_H */
