#ifndef KGPATH_H
#define KGPATH_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KgpStatus {
  KGP_STATUS_OK = 0,
  KGP_STATUS_NULL_ARGUMENT = 1,
  KGP_STATUS_INVALID_UTF8 = 2,
  KGP_STATUS_IO = 3,
  KGP_STATUS_CONFIG = 4,
  KGP_STATUS_NO_TOPIC = 5,
  KGP_STATUS_BACKEND = 6,
  KGP_STATUS_AGENT = 7,
  KGP_STATUS_PANIC = 8,
} KgpStatus;

/**
 * Agent replaying a JSONL script.
 */
typedef struct KgpAgent KgpAgent;

/**
 * Result of answering one question.
 */
typedef struct KgpOutcome KgpOutcome;

/**
 * In-memory knowledge graph.
 */
typedef struct KgpStore KgpStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *kgp_last_error(void);

/**
 * Loads a tab-separated triple file and an optional label file.
 *
 * # Safety
 * Paths must be null or NUL-terminated strings; `out` must be writable.
 */
enum KgpStatus kgp_store_load(const char *triples_path,
                              const char *labels_path,
                              struct KgpStore **out);

/**
 * # Safety
 * `store` must come from [`kgp_store_load`] and not be freed twice.
 */
void kgp_store_free(struct KgpStore *store);

/**
 * Loads a JSONL agent script.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum KgpStatus kgp_agent_load(const char *path, struct KgpAgent **out);

/**
 * Number of script records consumed so far.
 *
 * # Safety
 * `agent` must be null or a live handle.
 */
size_t kgp_agent_consumed(const struct KgpAgent *agent);

/**
 * # Safety
 * `agent` must come from [`kgp_agent_load`] and not be freed twice.
 */
void kgp_agent_free(struct KgpAgent *agent);

/**
 * Answers `question`. `topics_json` is an optional JSON object mapping
 * labels to entity ids; `config_toml` is an optional configuration layer.
 *
 * # Safety
 * Handles must be live; strings must be null or NUL-terminated; `out` must
 * be writable.
 */
enum KgpStatus kgp_answer(const struct KgpAgent *agent,
                          const struct KgpStore *store,
                          const char *question,
                          const char *topics_json,
                          const char *config_toml,
                          struct KgpOutcome **out);

/**
 * Answer text, borrowed from the outcome.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
const char *kgp_outcome_answer(const struct KgpOutcome *outcome);

/**
 * `"Subgraph"` or `"InternalFallback"`, borrowed from the outcome.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
const char *kgp_outcome_source(const struct KgpOutcome *outcome);

/**
 * Round whose evaluation found the subgraphs sufficient, or -1.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
int64_t kgp_outcome_round(const struct KgpOutcome *outcome);

/**
 * Number of agent calls made for the question.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
size_t kgp_outcome_call_count(const struct KgpOutcome *outcome);

/**
 * Total tokens metered for the question.
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
uint64_t kgp_outcome_total_tokens(const struct KgpOutcome *outcome);

/**
 * Full outcome as JSON. Free with [`kgp_string_free`].
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
char *kgp_outcome_json(const struct KgpOutcome *outcome);

/**
 * Final subgraphs in Graphviz DOT. Free with [`kgp_string_free`].
 *
 * # Safety
 * `outcome` must be null or a live handle.
 */
char *kgp_outcome_dot(const struct KgpOutcome *outcome);

/**
 * # Safety
 * `outcome` must come from [`kgp_answer`] and not be freed twice.
 */
void kgp_outcome_free(struct KgpOutcome *outcome);

/**
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void kgp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGPATH_H */
