// Copyright 2026-present the mevi project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/* C interface to the mevi retrieval library. Every function that can fail
 * returns a mevi_status; the message of the most recent failure on the
 * calling thread is available from mevi_last_error(). Handles are opaque
 * and owned by the caller, released with the matching *_free function. */

#ifndef MEVI_MEVI_H
#define MEVI_MEVI_H

#include <stddef.h>
#include <stdint.h>

#if defined(MEVI_BUILDING)
#define MEVI_API __attribute__((visibility("default")))
#else
#define MEVI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mevi_status {
    MEVI_OK = 0,
    MEVI_INVALID_ARGUMENT = 1,
    MEVI_IO = 2,
    MEVI_BAD_MAGIC = 3,
    MEVI_UNSUPPORTED_VERSION = 4,
    MEVI_CHECKSUM_MISMATCH = 5,
    MEVI_TRUNCATED = 6,
    MEVI_FORMAT = 7,
    MEVI_NOT_FOUND = 8,
    MEVI_DUPLICATE = 9,
    MEVI_LOCKED = 10,
    MEVI_RUNTIME = 11
} mevi_status;

MEVI_API const char* mevi_version(void);
MEVI_API const char* mevi_status_name(mevi_status status);
/* Message of the last failure on this thread; empty after success. */
MEVI_API const char* mevi_last_error(void);

/* 0 selects the hardware concurrency. */
MEVI_API void mevi_set_threads(size_t threads);
/* 0 warnings only, 1 info, 2 debug. */
MEVI_API void mevi_set_verbose(int level);
typedef void (*mevi_log_fn)(int level, const char* message, void* user);
/* NULL restores the default stderr sink. */
MEVI_API void mevi_set_log_callback(mevi_log_fn fn, void* user);

/* Strings returned through char** are released with mevi_string_free. */
MEVI_API void mevi_string_free(char* s);

/* ---- embeddings ---- */

typedef struct mevi_embeddings mevi_embeddings;

MEVI_API mevi_status mevi_embeddings_load(const char* vectors_path, const char* ids_path, mevi_embeddings** out);
MEVI_API mevi_status mevi_embeddings_save(const mevi_embeddings* e, const char* vectors_path, const char* ids_path);
/* Copies count*dim floats and count ids. */
MEVI_API mevi_status mevi_embeddings_create(const float* data,
                                            size_t count,
                                            size_t dim,
                                            const char* const* ids,
                                            mevi_embeddings** out);
MEVI_API size_t mevi_embeddings_count(const mevi_embeddings* e);
MEVI_API size_t mevi_embeddings_dim(const mevi_embeddings* e);
MEVI_API void mevi_embeddings_free(mevi_embeddings* e);

/* ---- bundles ---- */

typedef struct mevi_build_params {
    const char* builder; /* "rq" or "hkmeans" */
    size_t m;
    size_t b;
    size_t max_iters;
    double tol;
    uint64_t seed;
    const char* metric; /* "ip", "cosine" or "l2" */
} mevi_build_params;

MEVI_API void mevi_build_params_default(mevi_build_params* p);

typedef struct mevi_bundle mevi_bundle;

MEVI_API mevi_status mevi_bundle_build(const mevi_embeddings* docs, const mevi_build_params* p, mevi_bundle** out);
MEVI_API mevi_status mevi_bundle_load(const char* dir, mevi_bundle** out);
/* Writes a new directory and swaps it into place. */
MEVI_API mevi_status mevi_bundle_save(const mevi_bundle* bundle, const char* dir);
MEVI_API mevi_status mevi_bundle_add(mevi_bundle* bundle, const mevi_embeddings* docs);
MEVI_API mevi_status mevi_bundle_remove(mevi_bundle* bundle, const char* const* ids, size_t count);
/* Reads ids one per line (or the ordinal<TAB>id listing) and removes them. */
MEVI_API mevi_status mevi_bundle_remove_file(mevi_bundle* bundle, const char* ids_path);
MEVI_API mevi_status mevi_bundle_compact(mevi_bundle* bundle);
/* Manifest as key=value lines. */
MEVI_API mevi_status mevi_bundle_info(const mevi_bundle* bundle, char** out);
MEVI_API size_t mevi_bundle_live_count(const mevi_bundle* bundle);
MEVI_API void mevi_bundle_free(mevi_bundle* bundle);

/* ---- search ---- */

typedef struct mevi_search_params {
    const char* mode; /* "exact", "hnsw", "clusters" or "ensemble" */
    size_t k;         /* clusters */
    size_t topk;      /* documents per query */
    double alpha;
    double beta;
    const char* missing; /* "zero" or "below-min" */
    size_t beam;         /* 0 selects max(k, 100) */
    int unconstrained;
    const char* dense; /* ensemble dense stage: "exact" or "hnsw" */
    size_t ef;         /* 0 selects max(64, topk) */
    size_t dense_depth;
    size_t hnsw_m;
    size_t hnsw_ef_construction;
    const char* rankings_path; /* external cluster rankings replace beam search */
} mevi_search_params;

MEVI_API void mevi_search_params_default(mevi_search_params* p);

typedef struct mevi_run mevi_run;

MEVI_API mevi_status mevi_search(mevi_bundle* bundle,
                                 const mevi_embeddings* queries,
                                 const mevi_search_params* p,
                                 mevi_run** out);
MEVI_API mevi_status mevi_run_write_trec(const mevi_run* run, const char* path, const char* tag);
MEVI_API mevi_status mevi_run_load_trec(const char* path, mevi_run** out);
MEVI_API size_t mevi_run_query_count(const mevi_run* run);
/* Document id at 0-based rank for a query; NULL when absent. */
MEVI_API const char* mevi_run_doc(const mevi_run* run, const char* qid, size_t rank);
MEVI_API void mevi_run_free(mevi_run* run);

/* ---- evaluation ---- */

typedef struct mevi_qrels mevi_qrels;

MEVI_API mevi_status mevi_qrels_load(const char* path, mevi_qrels** out);
MEVI_API void mevi_qrels_free(mevi_qrels* q);

/* One metric such as "mrr@10". */
MEVI_API mevi_status mevi_evaluate(const mevi_run* run,
                                   const mevi_qrels* qrels,
                                   const char* metric,
                                   double* value,
                                   size_t* evaluated,
                                   size_t* skipped);
/* Comma-separated metrics; one "name<TAB>value" line each plus query counts. */
MEVI_API mevi_status mevi_evaluate_report(const mevi_run* run,
                                          const mevi_qrels* qrels,
                                          const char* metrics,
                                          char** out);

typedef struct mevi_grid_result mevi_grid_result;

MEVI_API mevi_status mevi_grid(mevi_bundle* bundle,
                               const mevi_embeddings* queries,
                               const mevi_qrels* qrels,
                               const double* alphas,
                               size_t n_alphas,
                               const double* betas,
                               size_t n_betas,
                               const mevi_search_params* p,
                               const char* target,
                               mevi_grid_result** out);
MEVI_API void mevi_grid_best(const mevi_grid_result* g, double* alpha, double* beta, double* value);
MEVI_API size_t mevi_grid_cell_count(const mevi_grid_result* g);
MEVI_API void mevi_grid_cell(const mevi_grid_result* g, size_t i, double* alpha, double* beta, double* value);
MEVI_API void mevi_grid_free(mevi_grid_result* g);

/* ---- benchmarking ---- */

typedef struct mevi_latency {
    size_t samples;
    double mean_ms;
    double p50_ms;
    double p95_ms;
    double p99_ms;
    double cluster_ms;
    double dense_ms;
    double fusion_ms;
} mevi_latency;

MEVI_API mevi_status mevi_bench(mevi_bundle* bundle,
                                const mevi_embeddings* queries,
                                const mevi_search_params* p,
                                size_t warmup,
                                size_t iters,
                                mevi_latency* out);

/* ---- synthetic data and experiments ---- */

typedef struct mevi_synth_params {
    size_t n_docs;
    size_t dim;
    size_t clusters;
    double sigma;
    size_t queries;
    double spread;
    uint64_t seed;
} mevi_synth_params;

MEVI_API void mevi_synth_params_default(mevi_synth_params* p);
/* Writes docs.bin, docs.ids.tsv, queries.bin, queries.ids.tsv and qrels.txt. */
MEVI_API mevi_status mevi_synth_write(const mevi_synth_params* p, const char* out_dir);

typedef struct mevi_report mevi_report;

/* config_text may be NULL; seed, when non-NULL, replaces the configured seeds. */
MEVI_API mevi_status mevi_experiment_run(const char* scenario,
                                         const char* config_text,
                                         const uint64_t* seed,
                                         mevi_report** out);
MEVI_API const char* mevi_report_text(const mevi_report* r);
MEVI_API const char* mevi_report_jsonl(const mevi_report* r);
MEVI_API void mevi_report_free(mevi_report* r);

#ifdef __cplusplus
}
#endif

#endif /* MEVI_MEVI_H */
