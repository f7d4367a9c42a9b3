/* C interface to the emsift analysis library.
 *
 * All functions are thread-safe as long as a handle is not used from two
 * threads at once. Functions returning emsift_status set a thread-local
 * error message retrievable with emsift_last_error(). Strings returned
 * through char** outputs are heap-allocated; release them with
 * emsift_string_free(). Handles are released with their matching _free().
 */

#ifndef EMSIFT_H_
#define EMSIFT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EMSIFT_API __declspec(dllexport)
#else
#define EMSIFT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum emsift_status {
  EMSIFT_OK = 0,
  EMSIFT_IO_ERROR = 1,       /* file missing / unreadable / unwritable */
  EMSIFT_PARSE_ERROR = 2,    /* malformed CSV or JSON */
  EMSIFT_CONFIG_ERROR = 3,   /* structurally valid but inconsistent input */
  EMSIFT_ANALYSIS_ERROR = 4, /* numerically degenerate data */
  EMSIFT_INVALID_ARGUMENT = 5 /* NULL handle or out parameter */
} emsift_status;

/* Classification tiers as returned by emsift_report_classification(). */
typedef enum emsift_classification {
  EMSIFT_NOT_SUSPICIOUS = 0,
  EMSIFT_MODERATE_CONFIDENCE = 1,
  EMSIFT_HIGH_CONFIDENCE = 2
} emsift_classification;

typedef struct emsift_trace_set emsift_trace_set;
typedef struct emsift_report emsift_report;
typedef struct emsift_sweep emsift_sweep;

/* Overrides applied on top of a pipeline configuration document. A NULL
 * options pointer (or a zeroed struct) keeps the document values. */
typedef struct emsift_analyze_options {
  int jobs;                    /* > 0: cap the per-trace parallelism */
  int use_seed;                /* nonzero: apply `seed` below */
  uint64_t seed;               /* mixture-fit RNG and extractor weight seed */
  const char* scalograms_dir;  /* non-NULL: emit per-trace scalogram CSVs */
  const char* descriptors_csv; /* non-NULL: emit the descriptor table */
  const char* dataset_name;    /* non-NULL: label used in reports */
} emsift_analyze_options;

/* Library semantic version, e.g. "0.1.0". Static storage; do not free. */
EMSIFT_API const char* emsift_version(void);

/* Message of the last failed call on this thread; "" after a success.
 * Static thread-local storage; do not free. */
EMSIFT_API const char* emsift_last_error(void);

EMSIFT_API void emsift_string_free(char* s);

/* ---- trace sets ---------------------------------------------------- */

/* Loads a trace set from a manifest JSON (see README for the layout). */
EMSIFT_API emsift_status emsift_trace_set_load(const char* manifest_path,
                                               emsift_trace_set** out);

/* Synthesizes a labeled trace set from a simulation config JSON document.
 * use_seed/seed override the document's rng_seed; jobs > 0 caps parallelism
 * (the output is identical for any jobs value). */
EMSIFT_API emsift_status emsift_trace_set_simulate(const char* config_json,
                                                   int use_seed, uint64_t seed,
                                                   int jobs,
                                                   emsift_trace_set** out);

/* Writes per-trace CSVs plus manifest.json (and labels.json for simulated
 * sets) into dir, creating it if needed. When manifest_path_out is non-NULL
 * it receives the manifest path. */
EMSIFT_API emsift_status emsift_trace_set_save(const emsift_trace_set* ts,
                                               const char* dir,
                                               char** manifest_path_out);

/* Number of traces, or 0 for a NULL handle. */
EMSIFT_API size_t emsift_trace_set_size(const emsift_trace_set* ts);

EMSIFT_API void emsift_trace_set_free(emsift_trace_set* ts);

/* ---- analysis ------------------------------------------------------ */

/* Runs the full detection pipeline described by a pipeline config JSON
 * document over the trace set. opts may be NULL. */
EMSIFT_API emsift_status emsift_analyze(const emsift_trace_set* ts,
                                        const char* config_json,
                                        const emsift_analyze_options* opts,
                                        emsift_report** out);

/* Repeats the clustering stage at each variance threshold (>= 2 values) over
 * shared features and cross-checks the reports for consistency. */
EMSIFT_API emsift_status emsift_sweep_run(const emsift_trace_set* ts,
                                          const char* config_json,
                                          const double* thresholds,
                                          size_t n_thresholds,
                                          const emsift_analyze_options* opts,
                                          emsift_sweep** out);

/* Mean peak-to-peak amplitude per grid cell, written as a rows x cols CSV
 * ("nan" for cells without traces). Traces need grid positions. */
EMSIFT_API emsift_status emsift_heatmap_write(const emsift_trace_set* ts,
                                              int rows, int cols,
                                              const char* out_csv);

/* ---- reports ------------------------------------------------------- */

EMSIFT_API emsift_status emsift_report_to_json(const emsift_report* r,
                                               char** out_json);

/* Writes the report JSON document to a file. */
EMSIFT_API emsift_status emsift_report_save(const emsift_report* r,
                                            const char* path);

/* Reads a report JSON document produced by emsift_report_save(). */
EMSIFT_API emsift_status emsift_report_load(const char* path,
                                            emsift_report** out);

/* One-line summary: classification followed by the posterior beta, the
 * delta-BIC evidence and the cluster separation D (UTF-8 text). */
EMSIFT_API emsift_status emsift_report_summary(const emsift_report* r,
                                               char** out_line);

/* emsift_classification value, or -1 for a NULL handle. */
EMSIFT_API int emsift_report_classification(const emsift_report* r);

EMSIFT_API void emsift_report_free(emsift_report* r);

/* Fixed-width table over one or more reports. */
EMSIFT_API emsift_status emsift_render_table(const emsift_report* const* reports,
                                             size_t n_reports, char** out_text);

/* ---- sweeps -------------------------------------------------------- */

EMSIFT_API size_t emsift_sweep_size(const emsift_sweep* s);

/* Borrowed reference owned by the sweep; do not free. NULL if out of range. */
EMSIFT_API const emsift_report* emsift_sweep_report(const emsift_sweep* s,
                                                    size_t index);

/* 1 if the sweep reports agree (all credible, betas within 0.10), else 0;
 * -1 for a NULL handle. */
EMSIFT_API int emsift_sweep_consistent(const emsift_sweep* s);

EMSIFT_API void emsift_sweep_free(emsift_sweep* s);

#ifdef __cplusplus
}
#endif

#endif /* EMSIFT_H_ */
