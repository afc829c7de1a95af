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

#include "mevi/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mevi/store.hpp"

namespace mevi {

void
SyntheticSpec::validate() const {
    require(n_docs > 0 && dim > 0 && n_clusters_true > 0 && n_queries > 0, "synthetic sizes must be positive");
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be >= 0");
    require(cluster_spread >= 0.0 && std::isfinite(cluster_spread), "cluster_spread must be >= 0");
}

namespace {

void
normalize(std::span<float> v) {
    double n = std::sqrt(dot(v, v));
    if (n > 0.0) {
        for (auto& x : v) {
            x = static_cast<float>(x / n);
        }
    }
}

}  // namespace

SyntheticData
gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Matrix centers(spec.n_clusters_true, spec.dim);
    for (size_t c = 0; c < centers.rows(); ++c) {
        auto row = centers.row(c);
        for (auto& x : row) {
            x = static_cast<float>(normal(rng));
        }
        normalize(row);
    }

    SyntheticData out;
    out.docs.vectors = Matrix(spec.n_docs, spec.dim);
    out.docs.ids.reserve(spec.n_docs);
    for (size_t i = 0; i < spec.n_docs; ++i) {
        size_t c = rng() % spec.n_clusters_true;
        auto row = out.docs.vectors.row(i);
        auto center = centers.row(c);
        for (size_t j = 0; j < spec.dim; ++j) {
            row[j] = static_cast<float>(center[j] + spec.cluster_spread * normal(rng));
        }
        normalize(row);
        out.docs.ids.push_back("d" + std::to_string(i));
    }

    out.queries.vectors = Matrix(spec.n_queries, spec.dim);
    out.queries.ids.reserve(spec.n_queries);
    for (size_t q = 0; q < spec.n_queries; ++q) {
        size_t doc = rng() % spec.n_docs;
        auto src = out.docs.vectors.row(doc);
        auto row = out.queries.vectors.row(q);
        for (size_t j = 0; j < spec.dim; ++j) {
            row[j] = static_cast<float>(src[j] + spec.noise_sigma * normal(rng));
        }
        out.queries.ids.push_back("q" + std::to_string(q));
        out.qrels[out.queries.ids.back()].insert(out.docs.ids[doc]);
        out.target.push_back(doc);
    }
    return out;
}

double
percentile(const std::vector<double>& sorted, double p) {
    require(!sorted.empty(), "no samples");
    auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    rank = std::clamp<size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

LatencyStats
bench_latency(const Pipeline& pipeline, size_t n_queries, size_t warmup, size_t iters) {
    require(n_queries > 0, "empty query set");
    require(iters >= 1, "iters must be >= 1");
    for (size_t w = 0; w < warmup; ++w) {
        for (size_t q = 0; q < n_queries; ++q) {
            pipeline(q);
        }
    }
    std::vector<double> samples;
    samples.reserve(n_queries * iters);
    LatencyStats stats;
    for (size_t it = 0; it < iters; ++it) {
        for (size_t q = 0; q < n_queries; ++q) {
            auto start = std::chrono::steady_clock::now();
            SearchTiming t = pipeline(q);
            auto end = std::chrono::steady_clock::now();
            samples.push_back(std::chrono::duration<double, std::milli>(end - start).count());
            stats.cluster_ms += t.cluster_ms;
            stats.dense_ms += t.dense_ms;
            stats.fusion_ms += t.fusion_ms;
        }
    }
    stats.samples = samples.size();
    auto n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double s : samples) {
        sum += s;
    }
    stats.mean_ms = sum / n;
    stats.cluster_ms /= n;
    stats.dense_ms /= n;
    stats.fusion_ms /= n;
    std::sort(samples.begin(), samples.end());
    stats.p50_ms = percentile(samples, 50);
    stats.p95_ms = percentile(samples, 95);
    stats.p99_ms = percentile(samples, 99);
    return stats;
}

// ---- config ----

namespace {

template <typename T>
T
parse_num(std::string_view v, const std::string& key) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size(), "config key '" + key + "': bad number '" +
                                                               std::string(v) + "'");
    return out;
}

std::vector<std::string_view>
split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    size_t pos = 0;
    while (true) {
        size_t at = s.find(sep, pos);
        out.push_back(s.substr(pos, at == s.npos ? s.npos : at - pos));
        if (at == s.npos) {
            break;
        }
        pos = at + 1;
    }
    return out;
}

}  // namespace

std::vector<std::string>
experiment_scenarios() {
    return {"cluster-only", "ensemble", "dynamic-10pct", "rq-vs-kmeans", "rq-config-sweep"};
}

ExperimentConfig
ExperimentConfig::parse(std::string_view text, const std::string& scenario) {
    auto names = experiment_scenarios();
    require(std::find(names.begin(), names.end(), scenario) != names.end(), "unknown scenario '" + scenario + "'");
    ExperimentConfig c;
    c.scenario = scenario;
    Manifest kv = Manifest::parse(text);
    for (const auto& [key, v] : kv.entries) {
        if (key == "n_docs") {
            c.synth.n_docs = parse_num<size_t>(v, key);
        } else if (key == "dim") {
            c.synth.dim = parse_num<size_t>(v, key);
        } else if (key == "clusters") {
            c.synth.n_clusters_true = parse_num<size_t>(v, key);
        } else if (key == "sigma") {
            c.synth.noise_sigma = parse_num<double>(v, key);
        } else if (key == "spread") {
            c.synth.cluster_spread = parse_num<double>(v, key);
        } else if (key == "queries") {
            c.synth.n_queries = parse_num<size_t>(v, key);
        } else if (key == "seeds") {
            c.seeds.clear();
            for (auto t : split(v, ',')) {
                c.seeds.push_back(parse_num<uint64_t>(t, key));
            }
        } else if (key == "m") {
            c.build.m = parse_num<size_t>(v, key);
        } else if (key == "b") {
            c.build.b = parse_num<size_t>(v, key);
        } else if (key == "builder") {
            c.build.builder = parse_builder(v);
        } else if (key == "metric") {
            c.build.metric = parse_metric(v);
        } else if (key == "max_iters") {
            c.build.kmeans.max_iters = parse_num<size_t>(v, key);
        } else if (key == "tol") {
            c.build.kmeans.tol = parse_num<float>(v, key);
        } else if (key == "ks") {
            c.ks.clear();
            for (auto t : split(v, ',')) {
                c.ks.push_back(parse_num<size_t>(t, key));
            }
        } else if (key == "topk") {
            c.K = parse_num<size_t>(v, key);
        } else if (key == "alpha") {
            c.alpha = parse_num<double>(v, key);
        } else if (key == "beta") {
            c.beta = parse_num<double>(v, key);
        } else if (key == "missing") {
            c.missing = parse_missing_policy(v);
        } else if (key == "metrics") {
            c.metrics = parse_metric_list(v);
        } else if (key == "holdout") {
            c.holdout = parse_num<double>(v, key);
        } else if (key == "sweep") {
            // 3x4:3,4x5:100  (layers x bits : clusters)
            c.sweep.clear();
            for (auto t : split(v, ',')) {
                auto colon = split(t, ':');
                require(colon.size() == 2, "config key 'sweep': expected LxB:k, got '" + std::string(t) + "'");
                auto lb = split(colon[0], 'x');
                require(lb.size() == 2, "config key 'sweep': expected LxB:k, got '" + std::string(t) + "'");
                c.sweep.push_back({parse_num<size_t>(lb[0], key), parse_num<size_t>(lb[1], key),
                                   parse_num<size_t>(colon[1], key)});
            }
        } else {
            fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
        }
    }
    c.synth.validate();
    require(!c.seeds.empty() && !c.ks.empty(), "seeds and ks must be non-empty");
    require(c.holdout > 0.0 && c.holdout < 1.0, "holdout must be in (0, 1)");
    return c;
}

// ---- report ----

double
ReportRow::value(const std::string& name) const {
    for (const auto& [n, v] : values) {
        if (n == name) {
            return v;
        }
    }
    fail(ErrorCode::kNotFound, "row '" + configuration + "' has no value '" + name + "'");
}

const ReportRow*
Report::find(const std::string& configuration) const {
    for (const auto& r : rows) {
        if (r.configuration == configuration) {
            return &r;
        }
    }
    return nullptr;
}

std::string
Report::text() const {
    std::ostringstream out;
    std::string current;
    std::vector<std::string> cols;
    for (const auto& r : rows) {
        if (r.scenario != current) {
            current = r.scenario;
            out << "== " << current << " ==\n";
        }
        out << r.configuration;
        for (const auto& [n, v] : r.values) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.4f", v);
            out << "  " << n << '=' << buf;
        }
        out << '\n';
    }
    for (const auto& n : notes) {
        out << "note: " << n << '\n';
    }
    return out.str();
}

std::string
Report::jsonl() const {
    std::string out;
    for (const auto& r : rows) {
        for (const auto& [n, v] : r.values) {
            nlohmann::ordered_json j;
            j["scenario"] = r.scenario;
            j["configuration"] = r.configuration;
            j["name"] = n;
            j["value"] = v;
            j["params"] = r.params;
            out += j.dump();
            out.push_back('\n');
        }
    }
    return out;
}

// ---- scenarios ----

namespace {

std::string
fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

struct Ctx {
    const ExperimentConfig& cfg;
    Report& report;
};

SearchOptions
make_options(const ExperimentConfig& cfg, SearchMode mode, size_t k) {
    SearchOptions o;
    o.mode = mode;
    o.ensemble.k = k;
    o.ensemble.K = cfg.K;
    o.ensemble.alpha = cfg.alpha;
    o.ensemble.beta = cfg.beta;
    o.ensemble.missing = cfg.missing;
    return o;
}

// Candidate-set statistics for the cluster stage: average candidates per
// query and the fraction of relevant documents inside the candidates.
std::pair<double, double>
cluster_stage_stats(const Engine& engine, const SyntheticData& data, size_t k) {
    double docs = 0.0;
    double hit = 0.0;
    SearchContext ctx = engine.context();
    for (size_t i = 0; i < data.queries.size(); ++i) {
        RankedClusters ranked = engine.rank_clusters(data.queries.vectors.row(i), k);
        auto cands = cluster_candidates(ctx, ranked);
        docs += static_cast<double>(cands.size());
        const auto& rel = data.qrels.at(data.queries.ids[i]);
        size_t found = 0;
        for (const auto& id : rel) {
            auto o = engine.store().find(id);
            if (o && std::binary_search(cands.begin(), cands.end(), *o)) {
                ++found;
            }
        }
        hit += rel.empty() ? 0.0 : static_cast<double>(found) / static_cast<double>(rel.size());
    }
    auto n = static_cast<double>(data.queries.size());
    return {docs / n, hit / n};
}

ReportRow
measure(const Engine& engine,
        const SyntheticData& data,
        const ExperimentConfig& cfg,
        const SearchOptions& opts,
        const std::string& scenario,
        const std::string& configuration,
        std::map<std::string, std::string> params) {
    ReportRow row{scenario, configuration, {}, std::move(params)};
    Run run = engine.search_batch(data.queries, opts);
    for (const auto& spec : cfg.metrics) {
        row.values.emplace_back(spec.name(), evaluate(run, data.qrels, spec).value);
    }
    if (opts.mode == SearchMode::kClusters || opts.mode == SearchMode::kEnsemble) {
        auto [docs, recall] = cluster_stage_stats(engine, data, opts.ensemble.k);
        row.values.emplace_back("recall@clusters", recall);
        row.values.emplace_back("docs_per_query", docs);
    }
    row.params["mode"] = std::string(to_string(opts.mode));
    row.params["K"] = std::to_string(opts.ensemble.K);
    if (opts.mode == SearchMode::kClusters || opts.mode == SearchMode::kEnsemble) {
        row.params["k"] = std::to_string(opts.ensemble.k);
    }
    if (opts.mode == SearchMode::kEnsemble) {
        row.params["alpha"] = fmt_double(opts.ensemble.alpha);
        row.params["beta"] = fmt_double(opts.ensemble.beta);
        row.params["missing"] = std::string(to_string(opts.ensemble.missing));
    }
    return row;
}

std::map<std::string, std::string>
base_params(const ExperimentConfig& cfg, const BuildParams& bp, uint64_t seed) {
    return {{"seed", std::to_string(seed)},
            {"builder", std::string(to_string(bp.builder))},
            {"m", std::to_string(bp.m)},
            {"b", std::to_string(bp.b)},
            {"n_docs", std::to_string(cfg.synth.n_docs)},
            {"dim", std::to_string(cfg.synth.dim)},
            {"sigma", fmt_double(cfg.synth.noise_sigma)}};
}

SyntheticData
data_for(const ExperimentConfig& cfg, uint64_t seed) {
    SyntheticSpec spec = cfg.synth;
    spec.seed = seed;
    return gen_synthetic(spec);
}

Engine
engine_for(const BuildParams& bp, const EmbeddingSet& docs, uint64_t seed) {
    BuildParams p = bp;
    p.kmeans.seed = seed;
    return Engine::build(docs, p);
}

void
scenario_cluster_only(Ctx& c, bool with_ensemble) {
    const auto& cfg = c.cfg;
    std::string name = with_ensemble ? "ensemble" : "cluster-only";
    for (uint64_t seed : cfg.seeds) {
        auto data = data_for(cfg, seed);
        Engine engine = engine_for(cfg.build, data.docs, seed);
        auto params = base_params(cfg, cfg.build, seed);
        std::string tag = "seed=" + std::to_string(seed);
        c.report.rows.push_back(measure(engine, data, cfg, make_options(cfg, SearchMode::kExact, 1), name,
                                        tag + " dense-exact", params));
        for (size_t k : cfg.ks) {
            c.report.rows.push_back(measure(engine, data, cfg, make_options(cfg, SearchMode::kClusters, k), name,
                                            tag + " top-" + std::to_string(k) + "-clus", params));
            if (with_ensemble) {
                c.report.rows.push_back(measure(engine, data, cfg, make_options(cfg, SearchMode::kEnsemble, k),
                                                name, tag + " top-" + std::to_string(k) + "-clus+dense", params));
            }
        }
    }
}

void
scenario_dynamic(Ctx& c) {
    const auto& cfg = c.cfg;
    const std::string name = "dynamic-10pct";
    for (uint64_t seed : cfg.seeds) {
        auto data = data_for(cfg, seed);
        size_t n = data.docs.size();
        std::vector<size_t> perm(n);
        for (size_t i = 0; i < n; ++i) {
            perm[i] = i;
        }
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        std::shuffle(perm.begin(), perm.end(), rng);
        auto held_count = static_cast<size_t>(std::floor(cfg.holdout * static_cast<double>(n)));
        std::vector<bool> held(n, false);
        for (size_t i = 0; i < held_count; ++i) {
            held[perm[i]] = true;
        }
        EmbeddingSet base;
        base.vectors = Matrix(0, data.docs.dim());
        for (size_t i = 0; i < n; ++i) {
            if (!held[i]) {
                base.vectors.append_row(data.docs.vectors.row(i));
                base.ids.push_back(data.docs.ids[i]);
            }
        }

        Engine full = engine_for(cfg.build, data.docs, seed);
        Engine dyn = engine_for(cfg.build, base, seed);
        for (size_t i = 0; i < n; ++i) {
            if (held[i]) {
                dyn.add_document(data.docs.ids[i], data.docs.vectors.row(i));
            }
        }

        auto params = base_params(cfg, cfg.build, seed);
        params["holdout"] = fmt_double(cfg.holdout);
        std::string tag = "seed=" + std::to_string(seed);
        auto compare = [&](const SearchOptions& opts, const std::string& label) {
            ReportRow f = measure(full, data, cfg, opts, name, "", params);
            ReportRow d = measure(dyn, data, cfg, opts, name, tag + " " + label, params);
            std::vector<std::pair<std::string, double>> drops;
            for (const auto& [metric, v] : d.values) {
                if (metric == "docs_per_query") {
                    continue;
                }
                drops.emplace_back(metric + "_drop", f.value(metric) - v);
            }
            d.values.insert(d.values.end(), drops.begin(), drops.end());
            c.report.rows.push_back(std::move(d));
        };
        compare(make_options(cfg, SearchMode::kExact, 1), "dense-exact");
        for (size_t k : cfg.ks) {
            compare(make_options(cfg, SearchMode::kClusters, k), "top-" + std::to_string(k) + "-clus");
            compare(make_options(cfg, SearchMode::kEnsemble, k), "top-" + std::to_string(k) + "-clus+dense");
        }

        // Re-added documents: self-retrieval and recall of queries aimed at them.
        ReportRow re{name, tag + " re-added", {}, params};
        size_t rank1 = 0;
        for (size_t i = 0; i < n; ++i) {
            if (held[i]) {
                auto top = exact_search(dyn.store(), data.docs.vectors.row(i), 1, dyn.metric());
                rank1 += dyn.store().id(top.front().ordinal) == data.docs.ids[i] ? 1 : 0;
            }
        }
        re.values.emplace_back("documents", static_cast<double>(held_count));
        re.values.emplace_back("self_rank1", held_count == 0 ? 1.0 : static_cast<double>(rank1) / held_count);
        EmbeddingSet targeted;
        targeted.vectors = Matrix(0, data.queries.dim());
        for (size_t q = 0; q < data.queries.size(); ++q) {
            if (held[data.target[q]]) {
                targeted.vectors.append_row(data.queries.vectors.row(q));
                targeted.ids.push_back(data.queries.ids[q]);
            }
        }
        re.values.emplace_back("targeted_queries", static_cast<double>(targeted.size()));
        if (targeted.size() > 0) {
            for (size_t k : cfg.ks) {
                auto opts = make_options(cfg, SearchMode::kClusters, k);
                Run run = dyn.search_batch(targeted, opts);
                re.values.emplace_back("recall@100_k=" + std::to_string(k), recall_at_k(run, data.qrels, 100));
            }
        }
        c.report.rows.push_back(std::move(re));
    }
}

void
scenario_rq_vs_kmeans(Ctx& c) {
    const auto& cfg = c.cfg;
    const std::string name = "rq-vs-kmeans";
    for (uint64_t seed : cfg.seeds) {
        auto data = data_for(cfg, seed);
        for (BuilderKind kind : {BuilderKind::kHierarchicalKmeans, BuilderKind::kResidual}) {
            BuildParams bp = cfg.build;
            bp.builder = kind;
            QuantizationReport qr;
            BuildParams p = bp;
            p.kmeans.seed = seed;
            Engine engine = Engine::build(data.docs, p, &qr);
            auto params = base_params(cfg, bp, seed);
            for (size_t k : cfg.ks) {
                std::string label = std::string(kind == BuilderKind::kResidual ? "MEVI-RQ" : "MEVI-KMeans") +
                                    " seed=" + std::to_string(seed) + " top-" + std::to_string(k) + "-clus";
                ReportRow row =
                    measure(engine, data, cfg, make_options(cfg, SearchMode::kClusters, k), name, label, params);
                row.values.emplace_back("clusters", static_cast<double>(k));
                row.values.emplace_back("nonempty_clusters", static_cast<double>(engine.clusters().cluster_count()));
                row.values.emplace_back("quantization_sse", qr.total_sse);
                c.report.rows.push_back(std::move(row));
            }
        }
    }
}

void
scenario_sweep(Ctx& c) {
    const auto& cfg = c.cfg;
    const std::string name = "rq-config-sweep";
    ExperimentConfig local = cfg;
    local.metrics = {{MetricKind::kMrr, 10}, {MetricKind::kRecall, 100}};
    for (uint64_t seed : cfg.seeds) {
        auto data = data_for(cfg, seed);
        for (const auto& pt : cfg.sweep) {
            require(pt.bits >= 1 && pt.bits <= 16, "sweep bits must be in [1, 16]");
            BuildParams bp = cfg.build;
            bp.builder = BuilderKind::kResidual;
            bp.m = pt.m;
            bp.b = size_t{1} << pt.bits;
            Engine engine = engine_for(bp, data.docs, seed);
            auto params = base_params(cfg, bp, seed);
            std::string label = "RQ(" + std::to_string(pt.m) + "x" + std::to_string(pt.bits) +
                                ") seed=" + std::to_string(seed);
            ReportRow row = measure(engine, data, local, make_options(local, SearchMode::kClusters, pt.k), name,
                                    label, params);
            row.values.insert(row.values.begin(), {"clusters", static_cast<double>(pt.k)});
            row.values.emplace_back("nonempty_clusters", static_cast<double>(engine.clusters().cluster_count()));
            c.report.rows.push_back(std::move(row));
        }
    }
}

}  // namespace

Report
run_experiment(const ExperimentConfig& config) {
    Report report;
    Ctx c{config, report};
    if (config.scenario == "cluster-only") {
        scenario_cluster_only(c, false);
    } else if (config.scenario == "ensemble") {
        scenario_cluster_only(c, true);
    } else if (config.scenario == "dynamic-10pct") {
        scenario_dynamic(c);
    } else if (config.scenario == "rq-vs-kmeans") {
        scenario_rq_vs_kmeans(c);
    } else if (config.scenario == "rq-config-sweep") {
        scenario_sweep(c);
    } else {
        fail(ErrorCode::kInvalidArgument, "unknown scenario '" + config.scenario + "'");
    }
    report.notes.push_back("synthetic corpus: " + std::to_string(config.synth.n_docs) + " docs, d=" +
                           std::to_string(config.synth.dim) + ", " + std::to_string(config.synth.n_queries) +
                           " queries");
    return report;
}

}  // namespace mevi
