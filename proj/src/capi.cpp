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

#include "mevi/mevi.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <new>
#include <sstream>

#include "mevi/experiment.hpp"
#include "mevi/store.hpp"

struct mevi_embeddings {
    mevi::EmbeddingSet set;
};

struct mevi_bundle {
    mevi::Engine engine;
    mevi::Manifest manifest;
};

struct mevi_run {
    mevi::Run run;
};

struct mevi_qrels {
    mevi::Qrels qrels;
};

struct mevi_grid_result {
    mevi::GridResult grid;
};

struct mevi_report {
    std::string text;
    std::string jsonl;
};

namespace {

thread_local std::string g_last_error;

std::mutex g_log_mu;
mevi_log_fn g_log_fn = nullptr;
void* g_log_user = nullptr;

template <typename F>
mevi_status
guard(F&& f) {
    try {
        f();
        g_last_error.clear();
        return MEVI_OK;
    } catch (const mevi::Error& e) {
        g_last_error = e.what();
        return static_cast<mevi_status>(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return MEVI_RUNTIME;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return MEVI_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MEVI_RUNTIME;
    }
}

void
need(const void* p, const char* what) {
    mevi::require(p != nullptr, std::string(what) + " must not be NULL");
}

char*
dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string
str_or(const char* s, const char* fallback) {
    return s != nullptr ? std::string(s) : std::string(fallback);
}

struct PreparedSearch {
    mevi::SearchOptions opts;
    std::map<std::string, mevi::RankedClusters> external;
};

// Translates C search parameters and builds the HNSW graph on demand.
void
prepare(mevi_bundle* bundle, const mevi_search_params* p, PreparedSearch& out) {
    need(p, "search params");
    mevi::SearchOptions& o = out.opts;
    o.mode = mevi::parse_search_mode(str_or(p->mode, "ensemble"));
    o.ensemble.k = p->k;
    o.ensemble.K = p->topk;
    o.ensemble.alpha = p->alpha;
    o.ensemble.beta = p->beta;
    o.ensemble.missing = mevi::parse_missing_policy(str_or(p->missing, "zero"));
    o.ensemble.dense_depth = p->dense_depth;
    o.beam_width = p->beam;
    o.constrained = p->unconstrained == 0;
    std::string dense = str_or(p->dense, "exact");
    if (dense == "exact") {
        o.dense.backend = mevi::DenseBackend::kExact;
    } else if (dense == "hnsw") {
        o.dense.backend = mevi::DenseBackend::kHnsw;
    } else {
        mevi::fail(mevi::ErrorCode::kInvalidArgument, "unknown dense backend '" + dense + "'");
    }
    o.dense.ef_search = p->ef != 0 ? p->ef : std::max<size_t>(64, p->topk);
    o.ensemble.validate();
    bool wants_hnsw = o.mode == mevi::SearchMode::kHnsw ||
                      (o.mode == mevi::SearchMode::kEnsemble && o.dense.backend == mevi::DenseBackend::kHnsw);
    if (o.mode == mevi::SearchMode::kHnsw) {
        mevi::require(o.dense.ef_search >= o.ensemble.K, "ef must be >= topk for hnsw search");
    }
    if (wants_hnsw && !bundle->engine.has_hnsw()) {
        mevi::HnswParams hp;
        hp.M = p->hnsw_m;
        hp.ef_construction = p->hnsw_ef_construction;
        bundle->engine.enable_hnsw(hp);
    }
    if (p->rankings_path != nullptr) {
        const auto& cb = bundle->engine.codebook();
        out.external = mevi::load_external_rankings(p->rankings_path, cb.layers(), cb.codewords());
        o.external = &out.external;
    }
}

}  // namespace

extern "C" {

const char*
mevi_version(void) {
    return "0.1.0";
}

const char*
mevi_status_name(mevi_status status) {
    switch (status) {
        case MEVI_OK:
            return "ok";
        case MEVI_INVALID_ARGUMENT:
            return "invalid argument";
        case MEVI_IO:
            return "i/o error";
        case MEVI_BAD_MAGIC:
            return "bad magic";
        case MEVI_UNSUPPORTED_VERSION:
            return "version unsupported";
        case MEVI_CHECKSUM_MISMATCH:
            return "checksum mismatch";
        case MEVI_TRUNCATED:
            return "truncated file";
        case MEVI_FORMAT:
            return "format error";
        case MEVI_NOT_FOUND:
            return "not found";
        case MEVI_DUPLICATE:
            return "duplicate";
        case MEVI_LOCKED:
            return "locked";
        case MEVI_RUNTIME:
            return "runtime error";
    }
    return "unknown status";
}

const char*
mevi_last_error(void) {
    return g_last_error.c_str();
}

void
mevi_set_threads(size_t threads) {
    mevi::set_num_threads(threads);
}

void
mevi_set_verbose(int level) {
    mevi::set_log_level(level >= 2   ? mevi::LogLevel::kDebug
                        : level == 1 ? mevi::LogLevel::kInfo
                                     : mevi::LogLevel::kWarn);
}

void
mevi_set_log_callback(mevi_log_fn fn, void* user) {
    std::lock_guard lock(g_log_mu);
    g_log_fn = fn;
    g_log_user = user;
    if (fn == nullptr) {
        mevi::set_log_sink(nullptr);
        return;
    }
    mevi::set_log_sink([](mevi::LogLevel level, std::string_view msg) {
        std::lock_guard inner(g_log_mu);
        if (g_log_fn != nullptr) {
            std::string text(msg);
            g_log_fn(static_cast<int>(level), text.c_str(), g_log_user);
        }
    });
}

void
mevi_string_free(char* s) {
    std::free(s);
}

// ---- embeddings ----

mevi_status
mevi_embeddings_load(const char* vectors_path, const char* ids_path, mevi_embeddings** out) {
    return guard([&] {
        need(vectors_path, "vectors path");
        need(ids_path, "ids path");
        need(out, "out");
        *out = new mevi_embeddings{mevi::load_embedding_set(vectors_path, ids_path)};
    });
}

mevi_status
mevi_embeddings_save(const mevi_embeddings* e, const char* vectors_path, const char* ids_path) {
    return guard([&] {
        need(e, "embeddings");
        need(vectors_path, "vectors path");
        need(ids_path, "ids path");
        mevi::save_embedding_set(e->set, vectors_path, ids_path);
    });
}

mevi_status
mevi_embeddings_create(const float* data, size_t count, size_t dim, const char* const* ids, mevi_embeddings** out) {
    return guard([&] {
        need(out, "out");
        mevi::require(count == 0 || (data != nullptr && ids != nullptr), "data and ids must not be NULL");
        mevi::EmbeddingSet set;
        set.vectors = mevi::Matrix(count, dim, std::vector<float>(data, data + count * dim));
        for (size_t i = 0; i < count; ++i) {
            need(ids[i], "id");
            set.ids.emplace_back(ids[i]);
        }
        set.validate();
        *out = new mevi_embeddings{std::move(set)};
    });
}

size_t
mevi_embeddings_count(const mevi_embeddings* e) {
    return e != nullptr ? e->set.size() : 0;
}

size_t
mevi_embeddings_dim(const mevi_embeddings* e) {
    return e != nullptr ? e->set.dim() : 0;
}

void
mevi_embeddings_free(mevi_embeddings* e) {
    delete e;
}

// ---- bundles ----

void
mevi_build_params_default(mevi_build_params* p) {
    if (p == nullptr) {
        return;
    }
    mevi::BuildParams d;
    p->builder = "rq";
    p->m = d.m;
    p->b = d.b;
    p->max_iters = d.kmeans.max_iters;
    p->tol = d.kmeans.tol;
    p->seed = d.kmeans.seed;
    p->metric = "ip";
}

mevi_status
mevi_bundle_build(const mevi_embeddings* docs, const mevi_build_params* p, mevi_bundle** out) {
    return guard([&] {
        need(docs, "embeddings");
        need(p, "build params");
        need(out, "out");
        mevi::BuildParams bp;
        bp.builder = mevi::parse_builder(str_or(p->builder, "rq"));
        bp.m = p->m;
        bp.b = p->b;
        bp.kmeans.max_iters = p->max_iters;
        bp.kmeans.tol = static_cast<float>(p->tol);
        bp.kmeans.seed = p->seed;
        bp.metric = mevi::parse_metric(str_or(p->metric, "ip"));
        mevi::Manifest man;
        man.set("seed", std::to_string(p->seed));
        *out = new mevi_bundle{mevi::Engine::build(docs->set, bp), std::move(man)};
    });
}

mevi_status
mevi_bundle_load(const char* dir, mevi_bundle** out) {
    return guard([&] {
        need(dir, "directory");
        need(out, "out");
        mevi::LoadedBundle b = mevi::load_bundle(dir);
        *out = new mevi_bundle{std::move(b.engine), std::move(b.manifest)};
    });
}

mevi_status
mevi_bundle_save(const mevi_bundle* bundle, const char* dir) {
    return guard([&] {
        need(bundle, "bundle");
        need(dir, "directory");
        mevi::Manifest extra;
        if (bundle->manifest.has("seed")) {
            extra.set("seed", bundle->manifest.get("seed"));
        }
        mevi::save_bundle(dir, bundle->engine, extra);
    });
}

mevi_status
mevi_bundle_add(mevi_bundle* bundle, const mevi_embeddings* docs) {
    return guard([&] {
        need(bundle, "bundle");
        need(docs, "embeddings");
        mevi::require(docs->set.dim() == bundle->engine.codebook().dim(),
                      "dimension " + std::to_string(docs->set.dim()) + " does not match bundle dimension " +
                          std::to_string(bundle->engine.codebook().dim()),
                      mevi::ErrorCode::kFormat);
        for (size_t i = 0; i < docs->set.size(); ++i) {
            bundle->engine.add_document(docs->set.ids[i], docs->set.vectors.row(i));
        }
    });
}

mevi_status
mevi_bundle_remove(mevi_bundle* bundle, const char* const* ids, size_t count) {
    return guard([&] {
        need(bundle, "bundle");
        mevi::require(count == 0 || ids != nullptr, "ids must not be NULL");
        for (size_t i = 0; i < count; ++i) {
            need(ids[i], "id");
            bundle->engine.remove_document(ids[i]);
        }
    });
}

mevi_status
mevi_bundle_remove_file(mevi_bundle* bundle, const char* ids_path) {
    return guard([&] {
        need(bundle, "bundle");
        need(ids_path, "ids path");
        for (const auto& id : mevi::decode_id_list(mevi::read_file(ids_path), ids_path)) {
            bundle->engine.remove_document(id);
        }
    });
}

mevi_status
mevi_bundle_compact(mevi_bundle* bundle) {
    return guard([&] {
        need(bundle, "bundle");
        bundle->engine.compact();
    });
}

mevi_status
mevi_bundle_info(const mevi_bundle* bundle, char** out) {
    return guard([&] {
        need(bundle, "bundle");
        need(out, "out");
        const auto& e = bundle->engine;
        mevi::Manifest m = bundle->manifest;
        m.set("builder", std::string(mevi::to_string(e.codebook().kind())));
        m.set("m", std::to_string(e.codebook().layers()));
        m.set("b", std::to_string(e.codebook().codewords()));
        m.set("dim", std::to_string(e.codebook().dim()));
        m.set("metric", std::string(mevi::to_string(e.metric())));
        m.set("possible_clusters", mevi::possible_clusters(e.codebook().layers(), e.codebook().codewords()));
        m.set("nonempty_clusters", std::to_string(e.clusters().cluster_count()));
        m.set("documents", std::to_string(e.store().size()));
        m.set("live_documents", std::to_string(e.store().live_count()));
        *out = dup_string(m.serialize());
    });
}

size_t
mevi_bundle_live_count(const mevi_bundle* bundle) {
    return bundle != nullptr ? bundle->engine.store().live_count() : 0;
}

void
mevi_bundle_free(mevi_bundle* bundle) {
    delete bundle;
}

// ---- search ----

void
mevi_search_params_default(mevi_search_params* p) {
    if (p == nullptr) {
        return;
    }
    mevi::EnsembleParams e;
    mevi::HnswParams h;
    p->mode = "ensemble";
    p->k = e.k;
    p->topk = e.K;
    p->alpha = e.alpha;
    p->beta = e.beta;
    p->missing = "zero";
    p->beam = 0;
    p->unconstrained = 0;
    p->dense = "exact";
    p->ef = 0;
    p->dense_depth = 0;
    p->hnsw_m = h.M;
    p->hnsw_ef_construction = h.ef_construction;
    p->rankings_path = nullptr;
}

mevi_status
mevi_search(mevi_bundle* bundle, const mevi_embeddings* queries, const mevi_search_params* p, mevi_run** out) {
    return guard([&] {
        need(bundle, "bundle");
        need(queries, "queries");
        need(out, "out");
        PreparedSearch ps;
        prepare(bundle, p, ps);
        *out = new mevi_run{bundle->engine.search_batch(queries->set, ps.opts)};
    });
}

mevi_status
mevi_run_write_trec(const mevi_run* run, const char* path, const char* tag) {
    return guard([&] {
        need(run, "run");
        need(path, "path");
        std::ostringstream os;
        mevi::write_run(os, run->run, str_or(tag, "mevi"));
        mevi::write_file_atomic(path, os.str());
    });
}

mevi_status
mevi_run_load_trec(const char* path, mevi_run** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new mevi_run{mevi::read_run(path)};
    });
}

size_t
mevi_run_query_count(const mevi_run* run) {
    return run != nullptr ? run->run.size() : 0;
}

const char*
mevi_run_doc(const mevi_run* run, const char* qid, size_t rank) {
    if (run == nullptr || qid == nullptr) {
        return nullptr;
    }
    auto it = run->run.find(qid);
    if (it == run->run.end() || rank >= it->second.size()) {
        return nullptr;
    }
    return it->second[rank].doc_id.c_str();
}

void
mevi_run_free(mevi_run* run) {
    delete run;
}

// ---- evaluation ----

mevi_status
mevi_qrels_load(const char* path, mevi_qrels** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new mevi_qrels{mevi::read_qrels(path)};
    });
}

void
mevi_qrels_free(mevi_qrels* q) {
    delete q;
}

mevi_status
mevi_evaluate(const mevi_run* run,
              const mevi_qrels* qrels,
              const char* metric,
              double* value,
              size_t* evaluated,
              size_t* skipped) {
    return guard([&] {
        need(run, "run");
        need(qrels, "qrels");
        need(metric, "metric");
        mevi::MetricValue v = mevi::evaluate(run->run, qrels->qrels, mevi::parse_metric_spec(metric));
        if (value != nullptr) {
            *value = v.value;
        }
        if (evaluated != nullptr) {
            *evaluated = v.evaluated;
        }
        if (skipped != nullptr) {
            *skipped = v.skipped;
        }
    });
}

mevi_status
mevi_evaluate_report(const mevi_run* run, const mevi_qrels* qrels, const char* metrics, char** out) {
    return guard([&] {
        need(run, "run");
        need(qrels, "qrels");
        need(metrics, "metrics");
        need(out, "out");
        auto specs = mevi::parse_metric_list(metrics);
        std::string text;
        size_t evaluated = 0;
        size_t skipped = 0;
        for (const auto& spec : specs) {
            mevi::MetricValue v = mevi::evaluate(run->run, qrels->qrels, spec);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", v.value);
            text += spec.name() + "\t" + buf + "\n";
            evaluated = v.evaluated;
            skipped = v.skipped;
        }
        text += "queries_evaluated\t" + std::to_string(evaluated) + "\n";
        text += "queries_skipped\t" + std::to_string(skipped) + "\n";
        *out = dup_string(text);
    });
}

mevi_status
mevi_grid(mevi_bundle* bundle,
          const mevi_embeddings* queries,
          const mevi_qrels* qrels,
          const double* alphas,
          size_t n_alphas,
          const double* betas,
          size_t n_betas,
          const mevi_search_params* p,
          const char* target,
          mevi_grid_result** out) {
    return guard([&] {
        need(bundle, "bundle");
        need(queries, "queries");
        need(qrels, "qrels");
        need(target, "target");
        need(out, "out");
        mevi::require((n_alphas == 0 || alphas != nullptr) && (n_betas == 0 || betas != nullptr),
                      "grid values must not be NULL");
        std::vector<double> a = n_alphas > 0 ? std::vector<double>(alphas, alphas + n_alphas)
                                             : mevi::default_alpha_grid();
        std::vector<double> b = n_betas > 0 ? std::vector<double>(betas, betas + n_betas)
                                            : mevi::default_beta_grid();
        PreparedSearch ps;
        prepare(bundle, p, ps);
        *out = new mevi_grid_result{
            bundle->engine.grid(queries->set, qrels->qrels, a, b, ps.opts, mevi::parse_metric_spec(target))};
    });
}

void
mevi_grid_best(const mevi_grid_result* g, double* alpha, double* beta, double* value) {
    if (g == nullptr) {
        return;
    }
    if (alpha != nullptr) {
        *alpha = g->grid.best.alpha;
    }
    if (beta != nullptr) {
        *beta = g->grid.best.beta;
    }
    if (value != nullptr) {
        *value = g->grid.best.value;
    }
}

size_t
mevi_grid_cell_count(const mevi_grid_result* g) {
    return g != nullptr ? g->grid.table.size() : 0;
}

void
mevi_grid_cell(const mevi_grid_result* g, size_t i, double* alpha, double* beta, double* value) {
    if (g == nullptr || i >= g->grid.table.size()) {
        return;
    }
    const auto& c = g->grid.table[i];
    if (alpha != nullptr) {
        *alpha = c.alpha;
    }
    if (beta != nullptr) {
        *beta = c.beta;
    }
    if (value != nullptr) {
        *value = c.value;
    }
}

void
mevi_grid_free(mevi_grid_result* g) {
    delete g;
}

// ---- benchmarking ----

mevi_status
mevi_bench(mevi_bundle* bundle,
           const mevi_embeddings* queries,
           const mevi_search_params* p,
           size_t warmup,
           size_t iters,
           mevi_latency* out) {
    return guard([&] {
        need(bundle, "bundle");
        need(queries, "queries");
        need(out, "out");
        PreparedSearch ps;
        prepare(bundle, p, ps);
        const auto& set = queries->set;
        mevi::require(set.dim() == bundle->engine.codebook().dim(), "query dimension does not match bundle",
                      mevi::ErrorCode::kFormat);
        const mevi::Engine& engine = bundle->engine;
        mevi::LatencyStats s = mevi::bench_latency(
            [&](size_t i) {
                mevi::SearchTiming t;
                engine.search(set.ids[i], set.vectors.row(i), ps.opts, &t);
                return t;
            },
            set.size(), warmup, iters);
        *out = mevi_latency{s.samples, s.mean_ms, s.p50_ms, s.p95_ms, s.p99_ms, s.cluster_ms, s.dense_ms,
                            s.fusion_ms};
    });
}

// ---- synthetic data and experiments ----

void
mevi_synth_params_default(mevi_synth_params* p) {
    if (p == nullptr) {
        return;
    }
    mevi::SyntheticSpec s;
    p->n_docs = s.n_docs;
    p->dim = s.dim;
    p->clusters = s.n_clusters_true;
    p->sigma = s.noise_sigma;
    p->queries = s.n_queries;
    p->spread = s.cluster_spread;
    p->seed = s.seed;
}

mevi_status
mevi_synth_write(const mevi_synth_params* p, const char* out_dir) {
    return guard([&] {
        namespace fs = std::filesystem;
        need(p, "synth params");
        need(out_dir, "output directory");
        mevi::SyntheticSpec s;
        s.n_docs = p->n_docs;
        s.dim = p->dim;
        s.n_clusters_true = p->clusters;
        s.noise_sigma = p->sigma;
        s.n_queries = p->queries;
        s.cluster_spread = p->spread;
        s.seed = p->seed;
        mevi::SyntheticData data = mevi::gen_synthetic(s);

        fs::path target(out_dir);
        if (!target.has_filename()) {
            target = target.parent_path();
        }
        fs::path tmp = target;
        tmp += ".tmp." + std::to_string(::getpid());
        fs::remove_all(tmp);
        fs::create_directories(tmp);
        try {
            mevi::save_embedding_set(data.docs, (tmp / "docs.bin").string(), (tmp / "docs.ids.tsv").string());
            mevi::save_embedding_set(data.queries, (tmp / "queries.bin").string(),
                                     (tmp / "queries.ids.tsv").string());
            std::ostringstream q;
            mevi::write_qrels(q, data.qrels);
            mevi::write_file_atomic((tmp / "qrels.txt").string(), q.str());
            if (fs::exists(target)) {
                for (const char* f : {"docs.bin", "docs.ids.tsv", "queries.bin", "queries.ids.tsv", "qrels.txt"}) {
                    fs::rename(tmp / f, target / f);
                }
                fs::remove_all(tmp);
            } else {
                fs::rename(tmp, target);
            }
        } catch (...) {
            fs::remove_all(tmp);
            throw;
        }
    });
}

mevi_status
mevi_experiment_run(const char* scenario, const char* config_text, const uint64_t* seed, mevi_report** out) {
    return guard([&] {
        need(scenario, "scenario");
        need(out, "out");
        mevi::ExperimentConfig cfg = mevi::ExperimentConfig::parse(config_text != nullptr ? config_text : "", scenario);
        if (seed != nullptr) {
            cfg.seeds = {*seed};
        }
        mevi::Report r = mevi::run_experiment(cfg);
        *out = new mevi_report{r.text(), r.jsonl()};
    });
}

const char*
mevi_report_text(const mevi_report* r) {
    return r != nullptr ? r->text.c_str() : "";
}

const char*
mevi_report_jsonl(const mevi_report* r) {
    return r != nullptr ? r->jsonl.c_str() : "";
}

void
mevi_report_free(mevi_report* r) {
    delete r;
}

}  // extern "C"
