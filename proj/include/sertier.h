/* sertier — middle-tier transaction coordinator with adaptive isolation.
 *
 * C interface of the shared library. Handles are opaque; every call returns a
 * status code and the last error message is kept per thread. Strings returned
 * through out-parameters are heap-allocated and must be released with
 * sertier_string_free.
 */
#ifndef SERTIER_H
#define SERTIER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sertier_status {
  SERTIER_OK = 0,
  SERTIER_ABORTED = 1,        /* transaction finished with an abort */
  SERTIER_REJECTED = 2,       /* transition request not accepted */
  SERTIER_NOT_SERIALIZABLE = 3,
  SERTIER_ERR_CONFIG = 10,
  SERTIER_ERR_STATE = 11,
  SERTIER_ERR_IO = 12,
  SERTIER_ERR_INTERNAL = 13
} sertier_status;

typedef struct sertier_coord sertier_coord;
typedef struct sertier_txn sertier_txn;

/* Thread-local message for the most recent failing call. */
const char* sertier_last_error(void);
void sertier_string_free(char* s);

/* ---- coordinator lifecycle -------------------------------------------- */

/* config_json keys (all optional): initial_level ("rc"|"si"|"ser"),
 * cc_enabled, civ_enabled, civ_recheck, vlt_buckets, lease_ticks,
 * gc_period_ticks, retry_budget, background_gc. */
sertier_status sertier_coord_create(const char* config_json, sertier_coord** out);
void sertier_coord_destroy(sertier_coord* coord);

/* template_json: {name, arity, steps:[{mode:"Read"|"Write", relation, key_param}]} */
sertier_status sertier_register(sertier_coord* coord, const char* template_json, int32_t* out_id);
sertier_status sertier_analysis(sertier_coord* coord);
sertier_status sertier_load_key(sertier_coord* coord, const char* relation, uint64_t id,
                                int64_t value);

/* ---- transaction execution -------------------------------------------- */

sertier_status sertier_begin(sertier_coord* coord, const char* template_name, sertier_txn** out);
/* Executes one template step. Read steps write the value read into out_value;
 * write steps install write_value. Returns SERTIER_ABORTED when the engine
 * aborted the transaction (see sertier_txn_abort_reason). */
sertier_status sertier_execute(sertier_txn* txn, size_t step_index, const uint64_t* args,
                               size_t nargs, const int64_t* write_value, int64_t* out_value);
sertier_status sertier_commit(sertier_txn* txn);
sertier_status sertier_rollback(sertier_txn* txn);
const char* sertier_txn_abort_reason(sertier_txn* txn); /* NULL when committed/active */
uint64_t sertier_txn_id(sertier_txn* txn);
void sertier_txn_close(sertier_txn* txn);

sertier_status sertier_request_transition(sertier_coord* coord, const char* level);
sertier_status sertier_history_json(sertier_coord* coord, char** out_jsonl);
sertier_status sertier_dump_engine(sertier_coord* coord, char** out_text);

/* ---- batch entry points backing the CLI ------------------------------- */

/* Analyzer over a registry file: report JSON plus optional GraphViz text. */
sertier_status sertier_analyze_templates(const char* templates_json, const char* level,
                                         char** out_report_json, char** out_dot);

/* Runs a workload (key=value config text), writes JSONL history to
 * history_path when non-NULL, returns metrics JSON. */
sertier_status sertier_run_workload(const char* config_text, const char* history_path,
                                    char** out_metrics_json);

/* History oracle. Returns SERTIER_OK when serializable,
 * SERTIER_NOT_SERIALIZABLE when a cycle exists (verdict JSON either way). */
sertier_status sertier_check_history(const char* history_path, const char* level_or_null,
                                     int want_witness, char** out_verdict_json);

/* Isolation-level prediction over a history file. */
sertier_status sertier_predict(const char* history_path, uint32_t batch_size, uint64_t seed,
                               const char* weights_path_or_null, char** out_json);

/* Deterministic cross-isolation switch scenario; out reports the per-txn
 * outcomes and the oracle verdict. Returns SERTIER_NOT_SERIALIZABLE when the
 * replay produced a cycle. */
sertier_status sertier_transition_demo(int civ_enabled, int fire_transition, char** out_json);

/* Version chains reconstructed from a history file, keys as "relation:id"
 * comma-separated (NULL for every key). */
sertier_status sertier_dump_history_chains(const char* history_path, const char* keys_csv,
                                           char** out_text);

#ifdef __cplusplus
}
#endif

#endif /* SERTIER_H */
