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

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/cluster_search.hpp"
#include "mevi/dense.hpp"
#include "mevi/ensemble.hpp"
#include "mevi/metrics.hpp"
#include "mevi/quantizer.hpp"

namespace mevi {

struct BuildParams {
    BuilderKind builder = BuilderKind::kResidual;
    size_t m = 4;
    size_t b = 32;
    KmeansParams kmeans;
    Metric metric = Metric::kInnerProduct;
};

enum class SearchMode { kExact, kHnsw, kClusters, kEnsemble };

std::string_view
to_string(SearchMode m);
SearchMode
parse_search_mode(std::string_view name);

struct SearchOptions {
    SearchMode mode = SearchMode::kEnsemble;
    EnsembleParams ensemble;  // k, K, alpha, beta, missing, dense depth
    size_t beam_width = 0;    // 0 selects max(k, 100)
    bool constrained = true;
    DenseParams dense;        // backend used by kEnsemble; ef_search for HNSW
    // Replaces beam search when set: query id -> ranked clusters.
    const std::map<std::string, RankedClusters>* external = nullptr;
};

struct SearchTiming {
    double cluster_ms = 0.0;
    double dense_ms = 0.0;
    double fusion_ms = 0.0;
    double total_ms = 0.0;
};

// Codebook, cluster index, embedding store and optional HNSW graph behind one
// reader/writer lock. Searches take the lock shared and may run
// concurrently; add_document, remove_document, enable_hnsw and compact take
// it exclusively. The unlocked accessors (codebook(), store(), ...) are for
// single-threaded use such as persistence.
class Engine {
public:
    Engine(std::shared_ptr<const Codebook> codebook, VectorStore store, ClusterIndex clusters, Metric metric);

    static Engine
    build(const EmbeddingSet& docs, const BuildParams& params, QuantizationReport* report = nullptr);

    Engine(Engine&&) noexcept = default;
    Engine&
    operator=(Engine&&) noexcept = default;

    // Encodes against the frozen codebook and registers the document with
    // every structure. Throws on a live duplicate id or dimension mismatch.
    Ordinal
    add_document(const std::string& id, std::span<const float> v);
    void
    remove_document(const std::string& id);

    void
    enable_hnsw(const HnswParams& params);
    bool
    has_hnsw() const {
        return hnsw_ != nullptr;
    }

    // Drops tombstones and renumbers ordinals densely; rebuilds the HNSW
    // graph if one was enabled.
    void
    compact();

    RankedClusters
    rank_clusters(std::span<const float> q, size_t k, size_t beam_width = 0, bool constrained = true) const;

    ScoredDocs
    search(const std::string& qid, std::span<const float> q, const SearchOptions& opts, SearchTiming* timing = nullptr)
        const;

    // One TREC run over all queries (ids become query ids).
    Run
    search_batch(const EmbeddingSet& queries, const SearchOptions& opts, std::vector<SearchTiming>* timings = nullptr)
        const;

    GridResult
    grid(const EmbeddingSet& queries,
         const Qrels& qrels,
         const std::vector<double>& alphas,
         const std::vector<double>& betas,
         const SearchOptions& opts,
         const MetricSpec& target) const;

    const Codebook&
    codebook() const {
        return *codebook_;
    }
    std::shared_ptr<const Codebook>
    codebook_ptr() const {
        return codebook_;
    }
    const ClusterIndex&
    clusters() const {
        return clusters_;
    }
    const VectorStore&
    store() const {
        return *store_;
    }
    const HnswIndex*
    hnsw() const {
        return hnsw_.get();
    }
    Metric
    metric() const {
        return metric_;
    }

    SearchContext
    context() const {
        return {codebook_.get(), &clusters_, store_.get(), hnsw_.get(), metric_};
    }

private:
    RankedClusters
    clusters_for(const std::string& qid, std::span<const float> q, const SearchOptions& opts) const;
    ScoredDocs
    search_unlocked(const std::string& qid, std::span<const float> q, const SearchOptions& opts, SearchTiming* timing)
        const;
    size_t
    clamp_k(size_t k, bool announce) const;

    std::shared_ptr<const Codebook> codebook_;
    std::unique_ptr<VectorStore> store_;  // stable address for the HNSW graph
    ClusterIndex clusters_;
    std::unique_ptr<HnswIndex> hnsw_;
    Metric metric_;
    // Readers hold `gate` only while acquiring `rw`; writers hold both.
    struct Locks {
        std::mutex gate;
        std::shared_mutex rw;
    };
    std::shared_lock<std::shared_mutex>
    read_lock() const;
    std::pair<std::unique_lock<std::mutex>, std::unique_lock<std::shared_mutex>>
    write_lock();

    std::unique_ptr<Locks> mu_;
};

}  // namespace mevi
