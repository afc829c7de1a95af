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

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mevi/engine.hpp"
#include "mevi/metrics.hpp"

namespace mevi {

// Gaussian-mixture corpus on the unit sphere with noisy copies of documents
// as queries; each query's source document is its single relevant doc.
struct SyntheticSpec {
    size_t n_docs = 10000;
    size_t dim = 32;
    size_t n_clusters_true = 64;
    double noise_sigma = 0.1;
    size_t n_queries = 500;
    uint64_t seed = 42;
    double cluster_spread = 0.25;  // per-dimension std of docs around their center

    void
    validate() const;
};

struct SyntheticData {
    EmbeddingSet docs;
    EmbeddingSet queries;
    Qrels qrels;
    std::vector<size_t> target;  // query index -> source doc index
};

SyntheticData
gen_synthetic(const SyntheticSpec& spec);

struct LatencyStats {
    size_t samples = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    // Mean per-query component times.
    double cluster_ms = 0.0;
    double dense_ms = 0.0;
    double fusion_ms = 0.0;
};

// Runs query i and reports its component breakdown.
using Pipeline = std::function<SearchTiming(size_t query_index)>;

// `warmup` untimed passes, then `iters` timed passes over all queries; one
// wall-clock sample per query per pass.
LatencyStats
bench_latency(const Pipeline& pipeline, size_t n_queries, size_t warmup, size_t iters);

// Nearest-rank percentile of an ascending sample.
double
percentile(const std::vector<double>& sorted, double p);

struct ExperimentConfig {
    std::string scenario = "cluster-only";
    SyntheticSpec synth;
    std::vector<uint64_t> seeds{1};
    BuildParams build;
    std::vector<size_t> ks{10, 100, 1000};
    size_t K = 1000;
    double alpha = 0.5;
    double beta = 0.02;
    MissingPolicy missing = MissingPolicy::kZero;
    std::vector<MetricSpec> metrics{{MetricKind::kMrr, 10}, {MetricKind::kRecall, 50}, {MetricKind::kRecall, 1000}};
    double holdout = 0.1;  // dynamic-10pct
    // rq-config-sweep: (layers, bits per layer, clusters retrieved)
    struct SweepPoint {
        size_t m;
        size_t bits;
        size_t k;
    };
    std::vector<SweepPoint> sweep{{3, 4, 3}, {4, 4, 10}, {4, 5, 100}, {5, 4, 100}, {5, 5, 1000}};

    // key=value overrides; unknown keys are rejected.
    static ExperimentConfig
    parse(std::string_view text, const std::string& scenario);
};

struct ReportRow {
    std::string scenario;
    std::string configuration;
    std::vector<std::pair<std::string, double>> values;
    std::map<std::string, std::string> params;

    double
    value(const std::string& name) const;
};

struct Report {
    std::vector<ReportRow> rows;
    std::vector<std::string> notes;

    std::string
    text() const;
    // One JSON record per (row, value): scenario, configuration, name, value, params.
    std::string
    jsonl() const;

    const ReportRow*
    find(const std::string& configuration) const;
};

std::vector<std::string>
experiment_scenarios();

Report
run_experiment(const ExperimentConfig& config);

}  // namespace mevi
