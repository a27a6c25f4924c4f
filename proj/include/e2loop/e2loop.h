#ifndef E2LOOP_E2LOOP_H
#define E2LOOP_E2LOOP_H

/*
 * C interface to libe2loop.
 *
 * Objects are opaque handles. Every fallible call returns an e2l_status and
 * leaves a message for e2l_last_error() on the calling thread.
 *
 * Text getters copy into a caller buffer. *len always receives the full
 * length without the terminating NUL. A NULL or short buffer yields
 * E2L_ERR_BUFFER and nothing is written.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum e2l_status {
  E2L_OK = 0,
  E2L_ERR_INTERNAL = 1,
  E2L_ERR_CONFIG = 2,
  E2L_ERR_CONNECT = 3, /* connect refused, setup timeout or setup rejected */
  E2L_ERR_ARGUMENT = 4,
  E2L_ERR_IO = 5,
  E2L_ERR_DECODE = 6,
  E2L_ERR_BUFFER = 7
} e2l_status;

typedef struct e2l_config e2l_config;
typedef struct e2l_report e2l_report;
typedef struct e2l_ric e2l_ric;

typedef void (*e2l_log_fn)(const char* line, void* user);

const char* e2l_version(void);
const char* e2l_status_name(e2l_status status);
const char* e2l_last_error(void);

/* Log lines from every module. Pass NULL to silence. */
void e2l_set_log_callback(e2l_log_fn fn, void* user);

e2l_config* e2l_config_new(void);
void e2l_config_free(e2l_config* cfg);

/* Keys are the long CLI flag names without the leading dashes, e.g. "sim-time-ms". */
e2l_status e2l_config_set(e2l_config* cfg, const char* key, const char* value);

/* key = value lines; '#' starts a comment. */
e2l_status e2l_config_load_file(e2l_config* cfg, const char* path);

/* Runs Scenario Zero. On success *out owns a report to release with e2l_report_free. */
e2l_status e2l_run(const e2l_config* cfg, e2l_report** out);

e2l_status e2l_report_table(const e2l_report* report, char* buf, size_t cap, size_t* len);
e2l_status e2l_report_json(const e2l_report* report, char* buf, size_t cap, size_t* len);
int e2l_report_exit_status(const e2l_report* report);
uint64_t e2l_report_node_count(const e2l_report* report);
uint64_t e2l_report_handovers(const e2l_report* report);
void e2l_report_free(e2l_report* report);

/* Standalone RIC with the xApp selected by "xapp" and the "listen-addr" endpoint. */
e2l_status e2l_ric_start(const e2l_config* cfg, e2l_ric** out);
uint16_t e2l_ric_port(const e2l_ric* ric);
uint64_t e2l_ric_indications(const e2l_ric* ric);
uint64_t e2l_ric_controls(const e2l_ric* ric);
void e2l_ric_stop(e2l_ric* ric);

/* Decodes one frame and renders it as JSON. */
e2l_status e2l_frame_describe(const uint8_t* data, size_t size, char* buf, size_t cap, size_t* len);

#ifdef __cplusplus
}
#endif

#endif
