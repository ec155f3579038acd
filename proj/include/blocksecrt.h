/* C interface to the blocksecrt simulator.
 *
 * All functions return bsrt_status; every non-trivial result travels through
 * out-parameters.  Handles are opaque and must be released with the matching
 * _destroy/_free call.  On failure bsrt_last_error() describes the most
 * recent error on the calling thread.
 */
#ifndef BLOCKSECRT_H
#define BLOCKSECRT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bsrt_status {
  BSRT_OK = 0,
  BSRT_ERR_INVALID_ARGUMENT = 1,
  BSRT_ERR_CONFIG = 2,          /* bad scenario configuration */
  BSRT_ERR_INVARIANT = 3,       /* internal invariant violated during a run */
  BSRT_ERR_IO = 4,
  BSRT_ERR_PARSE = 5,
  BSRT_ERR_NO_CREDENTIAL = 6,
  BSRT_ERR_SCENARIO = 7,        /* unsatisfiable data partition */
  BSRT_ERR_LEDGER = 8,          /* block append rejected */
  BSRT_ERR_INTERNAL = 9
} bsrt_status;

typedef struct bsrt_config bsrt_config;
typedef struct bsrt_report bsrt_report;

const char* bsrt_version(void);

/* Last error message for the calling thread; empty string if none. */
const char* bsrt_last_error(void);

/* ---- scenario configuration ------------------------------------------- */

bsrt_status bsrt_config_create(bsrt_config** out);
bsrt_status bsrt_config_load(const char* path, bsrt_config** out);
/* Same keys as the config file, e.g. ("rounds", "15"), ("seed", "7"),
 * ("client_attack.2", "duplicate:3"). */
bsrt_status bsrt_config_set(bsrt_config* cfg, const char* key, const char* value);
void bsrt_config_destroy(bsrt_config* cfg);

/* ---- federation run ---------------------------------------------------- */

/* Runs the scenario.  out_dir (optional) receives metrics.csv, report.json,
 * ledger.bin, final.params, keys.json.  out_report (optional) receives a
 * report handle. */
bsrt_status bsrt_run(const bsrt_config* cfg, const char* out_dir, bsrt_report** out_report);

uint32_t bsrt_report_round_count(const bsrt_report* r);
double bsrt_report_round_accuracy(const bsrt_report* r, uint32_t round);
uint32_t bsrt_report_round_accepted(const bsrt_report* r, uint32_t round);
double bsrt_report_final_accuracy(const bsrt_report* r);
uint32_t bsrt_report_client_count(const bsrt_report* r);
/* Mean recall over the client's missing classes; NaN when not applicable. */
double bsrt_report_fed_missing_recall(const bsrt_report* r, uint32_t client);
double bsrt_report_local_missing_recall(const bsrt_report* r, uint32_t client);
int bsrt_report_chain_verified(const bsrt_report* r);
uint64_t bsrt_report_ledger_bytes(const bsrt_report* r);
void bsrt_report_destroy(bsrt_report* r);

/* ---- ledger ------------------------------------------------------------- */

/* Verifies a serialized chain.  keys_path may be NULL for a structural
 * check (framing, checksums, back-links, vote arithmetic) without signature
 * verification.  BSRT_OK means the check ran: *first_bad_index is -1 when
 * the chain verifies, else the first failing block index, with the reason
 * copied to reason_buf (if given). */
bsrt_status bsrt_ledger_verify(const char* ledger_path, const char* keys_path,
                               int64_t* first_bad_index, char* reason_buf,
                               size_t reason_buf_len);

bsrt_status bsrt_ledger_size_kb(uint32_t num_clients, uint32_t num_rsus, uint32_t rounds,
                                double acceptance_rate, double* out_kb);

/* ---- timing model ------------------------------------------------------- */

bsrt_status bsrt_block_time_ms(uint32_t num_clients, uint32_t num_rsus, double* out_ms);

/* CSV sweep over the given client and RSU counts (default timing constants).
 * *out_csv is heap-allocated; release with bsrt_string_free. */
bsrt_status bsrt_timing_sweep_csv(const uint32_t* client_counts, size_t client_count_len,
                                  const uint32_t* rsu_counts, size_t rsu_count_len,
                                  char** out_csv);

void bsrt_string_free(char* s);

/* ---- diagnostics -------------------------------------------------------- */

/* Max relative error between analytic and finite-difference gradients over
 * `trials` randomized instances. */
bsrt_status bsrt_gradcheck(uint32_t trials, uint64_t seed, double* out_max_rel_err);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BLOCKSECRT_H */
