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

// mevi command-line front end. Links only the C interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mevi/mevi.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

struct Failure {
    int exit_code;
    std::string message;
};

int
exit_code_for(mevi_status s) {
    switch (s) {
        case MEVI_OK:
            return kExitOk;
        case MEVI_INVALID_ARGUMENT:
            return kExitUsage;
        case MEVI_LOCKED:
        case MEVI_RUNTIME:
            return kExitRuntime;
        default:
            return kExitData;
    }
}

void
check(mevi_status s) {
    if (s != MEVI_OK) {
        throw Failure{exit_code_for(s), std::string(mevi_status_name(s)) + ": " + mevi_last_error()};
    }
}

[[noreturn]] void
usage(const std::string& msg) {
    throw Failure{kExitUsage, msg};
}

template <typename T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle&
    operator=(const Handle&) = delete;
    ~Handle() {
        Free(p);
    }
    T**
    out() {
        return &p;
    }
    T*
    get() const {
        return p;
    }
};

using Embeddings = Handle<mevi_embeddings, mevi_embeddings_free>;
using Bundle = Handle<mevi_bundle, mevi_bundle_free>;
using RunH = Handle<mevi_run, mevi_run_free>;
using QrelsH = Handle<mevi_qrels, mevi_qrels_free>;
using GridH = Handle<mevi_grid_result, mevi_grid_free>;
using ReportH = Handle<mevi_report, mevi_report_free>;

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() {
        mevi_string_free(p);
    }
};

std::vector<double>
parse_doubles(const std::string& list, const std::string& flag) {
    std::vector<double> out;
    if (list.empty()) {
        return out;
    }
    std::stringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) {
                throw std::invalid_argument(tok);
            }
            out.push_back(v);
        } catch (const std::exception&) {
            usage(flag + ": not a number: '" + tok + "'");
        }
    }
    return out;
}

std::string
slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Failure{kExitData, "cannot read " + path};
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void
write_atomic(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        out.flush();
        if (!out) {
            std::remove(tmp.c_str());
            throw Failure{kExitData, "cannot write " + path};
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw Failure{kExitData, "cannot write " + path};
    }
}

// Search flags shared by search, grid and bench.
struct SearchFlags {
    std::string mode = "ensemble";
    size_t k = 100;
    size_t topk = 1000;
    double alpha = 0.5;
    double beta = 0.02;
    std::string missing = "zero";
    size_t beam = 0;
    bool unconstrained = false;
    std::string dense = "exact";
    size_t ef = 0;
    size_t dense_depth = 0;
    size_t hnsw_m = 16;
    size_t hnsw_efc = 200;
    std::string rankings;

    void
    add(CLI::App* app, bool with_mode, bool with_fusion) {
        if (with_mode) {
            app->add_option("--mode", mode, "Retrieval mode")
                ->check(CLI::IsMember({"exact", "hnsw", "clusters", "ensemble"}));
        }
        app->add_option("--k", k, "Clusters retrieved per query")->check(CLI::PositiveNumber);
        app->add_option("--topk", topk, "Documents returned per query")->check(CLI::PositiveNumber);
        if (with_fusion) {
            app->add_option("--alpha", alpha, "Cluster score weight")->check(CLI::NonNegativeNumber);
            app->add_option("--beta", beta, "Cluster rank decay")->check(CLI::NonNegativeNumber);
        }
        app->add_option("--missing", missing, "Cluster score for documents outside the ranked clusters")
            ->check(CLI::IsMember({"zero", "below-min"}));
        app->add_option("--beam", beam, "Beam width; 0 means max(k, 100)");
        app->add_flag("--unconstrained", unconstrained, "Beam search without the code trie")->default_str("false");
        app->add_option("--dense", dense, "Dense stage of ensemble mode")->check(CLI::IsMember({"exact", "hnsw"}));
        app->add_option("--ef", ef, "HNSW search breadth; 0 means max(64, topk)");
        app->add_option("--dense-depth", dense_depth, "Dense candidates fused; 0 means topk");
        app->add_option("--hnsw-m", hnsw_m, "HNSW links per node")->check(CLI::PositiveNumber);
        app->add_option("--hnsw-efc", hnsw_efc, "HNSW construction breadth")->check(CLI::PositiveNumber);
        app->add_option("--rankings", rankings, "External cluster rankings, lines of qid<TAB>code<TAB>rank<TAB>score; "
                        "none means beam search")
            ->check(CLI::ExistingFile)
            ->default_str("none");
    }

    mevi_search_params
    params() const {
        mevi_search_params p;
        mevi_search_params_default(&p);
        p.mode = mode.c_str();
        p.k = k;
        p.topk = topk;
        p.alpha = alpha;
        p.beta = beta;
        p.missing = missing.c_str();
        p.beam = beam;
        p.unconstrained = unconstrained ? 1 : 0;
        p.dense = dense.c_str();
        p.ef = ef;
        p.dense_depth = dense_depth;
        p.hnsw_m = hnsw_m;
        p.hnsw_ef_construction = hnsw_efc;
        p.rankings_path = rankings.empty() ? nullptr : rankings.c_str();
        return p;
    }

    void
    validate() const {
        if (mode == "hnsw" && ef != 0 && ef < topk) {
            usage("--ef must be >= --topk in hnsw mode");
        }
        if (beam != 0 && beam < k) {
            usage("--beam must be >= --k");
        }
    }
};

void
print_latency(const mevi_latency& l, const std::string& mode) {
    std::printf("mode\t%s\n", mode.c_str());
    std::printf("samples\t%zu\n", l.samples);
    std::printf("mean_ms\t%.4f\n", l.mean_ms);
    std::printf("p50_ms\t%.4f\n", l.p50_ms);
    std::printf("p95_ms\t%.4f\n", l.p95_ms);
    std::printf("p99_ms\t%.4f\n", l.p99_ms);
    std::printf("cluster_ms\t%.4f\n", l.cluster_ms);
    std::printf("dense_ms\t%.4f\n", l.dense_ms);
    std::printf("fusion_ms\t%.4f\n", l.fusion_ms);
}

}  // namespace

int
main(int argc, char** argv) {
    CLI::App app{"mevi: cluster-code and dense retrieval over document embeddings"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    uint64_t seed = 42;
    size_t threads = 0;
    int verbose = 0;
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--threads", threads, "Worker threads; 0 uses all cores");
    app.add_flag("-v,--verbose", verbose, "More log output (repeatable)");

    // build
    auto* build = app.add_subcommand("build", "Quantize a corpus into a bundle");
    std::string b_emb, b_ids, b_out, b_builder = "rq", b_metric = "ip";
    size_t b_m = 4, b_b = 32, b_iters = 50;
    double b_tol = 1e-4;
    build->add_option("--embeddings", b_emb, "Document embeddings")->required()->check(CLI::ExistingFile);
    build->add_option("--ids", b_ids, "Document ids, one per line")->required()->check(CLI::ExistingFile);
    build->add_option("--m", b_m, "Code layers")->check(CLI::Range(1, 64));
    build->add_option("--b", b_b, "Codewords per layer")->check(CLI::Range(1, 65536));
    build->add_option("--builder", b_builder, "Codebook builder")->check(CLI::IsMember({"rq", "hkmeans"}));
    build->add_option("--metric", b_metric, "Retrieval metric")->check(CLI::IsMember({"ip", "cosine", "l2"}));
    build->add_option("--max-iters", b_iters, "k-means iterations per layer")->check(CLI::PositiveNumber);
    build->add_option("--tol", b_tol, "k-means centroid shift tolerance")->check(CLI::NonNegativeNumber);
    build->add_option("--out", b_out, "Bundle directory")->required();

    // search
    auto* search = app.add_subcommand("search", "Retrieve documents for a query set");
    std::string s_bundle, s_queries, s_qids, s_run, s_tag = "mevi";
    SearchFlags s_flags;
    search->add_option("--bundle", s_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
    search->add_option("--queries", s_queries, "Query embeddings")->required()->check(CLI::ExistingFile);
    search->add_option("--qids", s_qids, "Query ids, one per line")->required()->check(CLI::ExistingFile);
    s_flags.add(search, true, true);
    search->add_option("--run", s_run, "Output TREC run file")->required();
    search->add_option("--tag", s_tag, "Run tag column");

    // eval
    auto* eval = app.add_subcommand("eval", "Score a run against qrels");
    std::string e_run, e_qrels, e_metrics = "mrr@10,recall@50,recall@1000";
    eval->add_option("--run", e_run, "TREC run file")->required()->check(CLI::ExistingFile);
    eval->add_option("--qrels", e_qrels, "TREC qrels file")->required()->check(CLI::ExistingFile);
    eval->add_option("--metrics", e_metrics, "Comma-separated name@K list (mrr, recall)");

    // update
    auto* update = app.add_subcommand("update", "Add or remove documents in a bundle");
    std::string u_bundle;
    update->add_option("--bundle", u_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
    update->require_subcommand(1);
    auto* u_add = update->add_subcommand("add", "Add documents");
    std::string ua_emb, ua_ids;
    u_add->add_option("--embeddings", ua_emb, "Document embeddings")->required()->check(CLI::ExistingFile);
    u_add->add_option("--ids", ua_ids, "Document ids, one per line")->required()->check(CLI::ExistingFile);
    auto* u_remove = update->add_subcommand("remove", "Remove documents");
    std::string ur_ids;
    bool ur_compact = false;
    u_remove->add_option("--ids", ur_ids, "Ids to remove, one per line")->required()->check(CLI::ExistingFile);
    u_remove->add_flag("--compact", ur_compact, "Drop removed documents from storage")->default_str("false");

    // grid
    auto* grid = app.add_subcommand("grid", "Search the alpha/beta fusion grid");
    std::string g_bundle, g_queries, g_qids, g_qrels, g_target = "mrr@10";
    std::string g_alphas = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string g_betas = "0.005,0.01,0.015,0.02,0.025,0.03,0.035,0.04,0.045,0.05";
    SearchFlags g_flags;
    grid->add_option("--bundle", g_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
    grid->add_option("--queries", g_queries, "Query embeddings")->required()->check(CLI::ExistingFile);
    grid->add_option("--qids", g_qids, "Query ids, one per line")->required()->check(CLI::ExistingFile);
    grid->add_option("--qrels", g_qrels, "TREC qrels file")->required()->check(CLI::ExistingFile);
    grid->add_option("--alphas", g_alphas, "Comma-separated alphas");
    grid->add_option("--betas", g_betas, "Comma-separated betas");
    grid->add_option("--target", g_target, "Metric to maximise");
    g_flags.add(grid, false, false);

    // bench
    auto* bench = app.add_subcommand("bench", "Measure per-query latency");
    std::string x_bundle, x_queries, x_qids;
    size_t x_iters = 1, x_warmup = 1;
    SearchFlags x_flags;
    bench->add_option("--bundle", x_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
    bench->add_option("--queries", x_queries, "Query embeddings")->required()->check(CLI::ExistingFile);
    bench->add_option("--qids", x_qids, "Query ids, one per line")->required()->check(CLI::ExistingFile);
    bench->add_option("--iters", x_iters, "Timed passes over the queries")->check(CLI::PositiveNumber);
    bench->add_option("--warmup", x_warmup, "Untimed passes before timing");
    x_flags.add(bench, true, true);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    mevi_synth_params sp;
    mevi_synth_params_default(&sp);
    std::string y_out;
    synth->add_option("--n", sp.n_docs, "Documents")->check(CLI::PositiveNumber);
    synth->add_option("--dim", sp.dim, "Dimension")->check(CLI::PositiveNumber);
    synth->add_option("--clusters", sp.clusters, "True clusters")->check(CLI::PositiveNumber);
    synth->add_option("--sigma", sp.sigma, "Query noise around the target document")->check(CLI::NonNegativeNumber);
    synth->add_option("--queries", sp.queries, "Queries")->check(CLI::PositiveNumber);
    synth->add_option("--spread", sp.spread, "Document spread around cluster centers")
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--out", y_out, "Output directory")->required();

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run a synthetic experiment scenario");
    std::string z_scenario, z_config, z_jsonl;
    experiment
        ->add_option("--scenario", z_scenario, "cluster-only, ensemble, dynamic-10pct, rq-vs-kmeans or rq-config-sweep")
        ->required()
        ->check(CLI::IsMember({"cluster-only", "ensemble", "dynamic-10pct", "rq-vs-kmeans", "rq-config-sweep"}));
    experiment->add_option("--config", z_config, "key=value overrides")
        ->check(CLI::ExistingFile)
        ->default_str("none");
    experiment->add_option("--jsonl", z_jsonl, "Also write line-delimited records here")->default_str("none");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        mevi_set_threads(threads);
        mevi_set_verbose(verbose);
        bool seed_given = app.count("--seed") > 0;

        if (*build) {
            mevi_build_params bp;
            mevi_build_params_default(&bp);
            bp.builder = b_builder.c_str();
            bp.metric = b_metric.c_str();
            bp.m = b_m;
            bp.b = b_b;
            bp.max_iters = b_iters;
            bp.tol = b_tol;
            bp.seed = seed;
            Embeddings docs;
            check(mevi_embeddings_load(b_emb.c_str(), b_ids.c_str(), docs.out()));
            Bundle bundle;
            check(mevi_bundle_build(docs.get(), &bp, bundle.out()));
            check(mevi_bundle_save(bundle.get(), b_out.c_str()));
            OwnedString info;
            check(mevi_bundle_info(bundle.get(), &info.p));
            std::fputs(info.p, stdout);
        } else if (*search) {
            s_flags.validate();
            Bundle bundle;
            check(mevi_bundle_load(s_bundle.c_str(), bundle.out()));
            Embeddings queries;
            check(mevi_embeddings_load(s_queries.c_str(), s_qids.c_str(), queries.out()));
            mevi_search_params p = s_flags.params();
            RunH run;
            check(mevi_search(bundle.get(), queries.get(), &p, run.out()));
            check(mevi_run_write_trec(run.get(), s_run.c_str(), s_tag.c_str()));
        } else if (*eval) {
            RunH run;
            check(mevi_run_load_trec(e_run.c_str(), run.out()));
            QrelsH qrels;
            check(mevi_qrels_load(e_qrels.c_str(), qrels.out()));
            OwnedString report;
            check(mevi_evaluate_report(run.get(), qrels.get(), e_metrics.c_str(), &report.p));
            std::fputs(report.p, stdout);
        } else if (*update) {
            Bundle bundle;
            check(mevi_bundle_load(u_bundle.c_str(), bundle.out()));
            if (*u_add) {
                Embeddings docs;
                check(mevi_embeddings_load(ua_emb.c_str(), ua_ids.c_str(), docs.out()));
                check(mevi_bundle_add(bundle.get(), docs.get()));
            } else {
                check(mevi_bundle_remove_file(bundle.get(), ur_ids.c_str()));
                if (ur_compact) {
                    check(mevi_bundle_compact(bundle.get()));
                }
            }
            check(mevi_bundle_save(bundle.get(), u_bundle.c_str()));
            std::printf("live_documents\t%zu\n", mevi_bundle_live_count(bundle.get()));
        } else if (*grid) {
            g_flags.validate();
            std::vector<double> alphas = parse_doubles(g_alphas, "--alphas");
            std::vector<double> betas = parse_doubles(g_betas, "--betas");
            Bundle bundle;
            check(mevi_bundle_load(g_bundle.c_str(), bundle.out()));
            Embeddings queries;
            check(mevi_embeddings_load(g_queries.c_str(), g_qids.c_str(), queries.out()));
            QrelsH qrels;
            check(mevi_qrels_load(g_qrels.c_str(), qrels.out()));
            mevi_search_params p = g_flags.params();
            p.mode = "ensemble";
            GridH result;
            check(mevi_grid(bundle.get(), queries.get(), qrels.get(), alphas.data(), alphas.size(), betas.data(),
                            betas.size(), &p, g_target.c_str(), result.out()));
            double a = 0, b = 0, v = 0;
            mevi_grid_best(result.get(), &a, &b, &v);
            std::printf("best\talpha=%g\tbeta=%g\t%s=%.6f\n", a, b, g_target.c_str(), v);
            std::printf("alpha\tbeta\t%s\n", g_target.c_str());
            for (size_t i = 0; i < mevi_grid_cell_count(result.get()); ++i) {
                mevi_grid_cell(result.get(), i, &a, &b, &v);
                std::printf("%g\t%g\t%.6f\n", a, b, v);
            }
        } else if (*bench) {
            x_flags.validate();
            Bundle bundle;
            check(mevi_bundle_load(x_bundle.c_str(), bundle.out()));
            Embeddings queries;
            check(mevi_embeddings_load(x_queries.c_str(), x_qids.c_str(), queries.out()));
            mevi_search_params p = x_flags.params();
            mevi_latency lat;
            check(mevi_bench(bundle.get(), queries.get(), &p, x_warmup, x_iters, &lat));
            print_latency(lat, x_flags.mode);
        } else if (*synth) {
            sp.seed = seed;
            check(mevi_synth_write(&sp, y_out.c_str()));
        } else if (*experiment) {
            std::string config = z_config.empty() ? std::string() : slurp(z_config);
            ReportH report;
            check(mevi_experiment_run(z_scenario.c_str(), config.c_str(), seed_given ? &seed : nullptr,
                                      report.out()));
            if (!z_jsonl.empty()) {
                write_atomic(z_jsonl, mevi_report_jsonl(report.get()));
            }
            std::fputs(mevi_report_text(report.get()), stdout);
        }
    } catch (const Failure& f) {
        std::cerr << "mevi: error: " << f.message << '\n';
        return f.exit_code;
    } catch (const std::exception& e) {
        std::cerr << "mevi: error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}
