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

#include "mevi/engine.hpp"

#include <chrono>
#include <mutex>

namespace mevi {

std::string_view
to_string(SearchMode m) {
    switch (m) {
        case SearchMode::kExact:
            return "exact";
        case SearchMode::kHnsw:
            return "hnsw";
        case SearchMode::kClusters:
            return "clusters";
        case SearchMode::kEnsemble:
            return "ensemble";
    }
    return "exact";
}

SearchMode
parse_search_mode(std::string_view name) {
    for (auto m : {SearchMode::kExact, SearchMode::kHnsw, SearchMode::kClusters, SearchMode::kEnsemble}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    fail(ErrorCode::kInvalidArgument, "unknown search mode '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double
ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

Engine::Engine(std::shared_ptr<const Codebook> codebook, VectorStore store, ClusterIndex clusters, Metric metric)
    : codebook_(std::move(codebook)),
      store_(std::make_unique<VectorStore>(std::move(store))),
      clusters_(std::move(clusters)),
      metric_(metric),
      mu_(std::make_unique<Locks>()) {
    require(codebook_ != nullptr, "null codebook");
    require(store_->dim() == codebook_->dim(), "embedding and codebook dimensions differ", ErrorCode::kFormat);
    require(clusters_.layers() == codebook_->layers(), "index and codebook layer counts differ", ErrorCode::kFormat);
    require(store_->size() == clusters_.ordinal_count(), "embedding and index ordinal counts differ",
            ErrorCode::kFormat);
    for (Ordinal o = 0; o < store_->size(); ++o) {
        require(store_->is_live(o) == clusters_.is_live(o), "embedding and index liveness differ",
                ErrorCode::kFormat);
    }
}

std::shared_lock<std::shared_mutex>
Engine::read_lock() const {
    std::lock_guard gate(mu_->gate);
    return std::shared_lock(mu_->rw);
}

std::pair<std::unique_lock<std::mutex>, std::unique_lock<std::shared_mutex>>
Engine::write_lock() {
    std::unique_lock gate(mu_->gate);
    std::unique_lock rw(mu_->rw);
    return {std::move(gate), std::move(rw)};
}

Engine
Engine::build(const EmbeddingSet& docs, const BuildParams& params, QuantizationReport* report) {
    docs.validate();
    require(docs.size() > 0, "empty input");
    QuantizerBuild q = build_quantizer(params.builder, docs.vectors, params.m, params.b, params.kmeans);
    if (report != nullptr) {
        *report = q.report;
    }
    return {q.codebook, VectorStore::from(docs), ClusterIndex::build(q.codes, params.m), params.metric};
}

Ordinal
Engine::add_document(const std::string& id, std::span<const float> v) {
    auto lock = write_lock();
    require(!store_->find(id).has_value(), "duplicate id: " + id, ErrorCode::kDuplicate);
    Code code = codebook_->encode(v);
    Ordinal o = store_->add(id, v);
    clusters_.add_at(o, code);
    if (hnsw_) {
        hnsw_->insert(o);
    }
    return o;
}

void
Engine::remove_document(const std::string& id) {
    auto lock = write_lock();
    auto o = store_->find(id);
    require(o.has_value(), "unknown id: " + id, ErrorCode::kNotFound);
    store_->remove(*o);
    clusters_.remove(*o);
}

void
Engine::enable_hnsw(const HnswParams& params) {
    auto lock = write_lock();
    hnsw_ = std::make_unique<HnswIndex>(HnswIndex::build(store_.get(), metric_, params));
}

void
Engine::compact() {
    auto lock = write_lock();
    auto store = std::make_unique<VectorStore>(store_->dim());
    ClusterIndex clusters(clusters_.layers());
    for (Ordinal o = 0; o < store_->size(); ++o) {
        if (store_->is_live(o)) {
            Ordinal n = store->add(store_->id(o), store_->row(o));
            clusters.add_at(n, clusters_.code_of(o));
        }
    }
    std::optional<HnswParams> hp;
    if (hnsw_) {
        hp = hnsw_->params();
    }
    hnsw_.reset();
    store_ = std::move(store);
    clusters_ = std::move(clusters);
    if (hp) {
        hnsw_ = std::make_unique<HnswIndex>(HnswIndex::build(store_.get(), metric_, *hp));
    }
}

size_t
Engine::clamp_k(size_t k, bool announce) const {
    size_t available = clusters_.cluster_count();
    if (k > available && available > 0) {
        if (announce) {
            warn("k=" + std::to_string(k) + " exceeds the " + std::to_string(available) +
                 " non-empty clusters; clamped");
        }
        return available;
    }
    return k;
}

RankedClusters
Engine::rank_clusters(std::span<const float> q, size_t k, size_t beam_width, bool constrained) const {
    auto lock = read_lock();
    BeamSearchParams bp{beam_width, constrained ? clamp_k(k, false) : k, constrained};
    return beam_search_clusters(q, *codebook_, clusters_, bp);
}

RankedClusters
Engine::clusters_for(const std::string& qid, std::span<const float> q, const SearchOptions& opts) const {
    size_t k = opts.ensemble.k;
    if (opts.external != nullptr) {
        auto it = opts.external->find(qid);
        require(it != opts.external->end(), "no external cluster ranking for query " + qid, ErrorCode::kNotFound);
        RankedClusters out(it->second.begin(), it->second.begin() + static_cast<std::ptrdiff_t>(
                                                                        std::min(k, it->second.size())));
        return out;
    }
    size_t width = opts.beam_width == 0 ? std::max<size_t>(k, 100) : opts.beam_width;
    BeamSearchParams bp{width, opts.constrained ? clamp_k(k, false) : k, opts.constrained};
    return beam_search_clusters(q, *codebook_, clusters_, bp);
}

ScoredDocs
Engine::search_unlocked(const std::string& qid,
                        std::span<const float> q,
                        const SearchOptions& opts,
                        SearchTiming* timing) const {
    SearchTiming t;
    auto start = Clock::now();
    size_t K = opts.ensemble.K;
    require(K >= 1, "K must be >= 1");
    ScoredDocs out;
    SearchContext ctx = context();
    switch (opts.mode) {
        case SearchMode::kExact:
            out = exact_search(*store_, q, K, metric_);
            t.dense_ms = ms_between(start, Clock::now());
            break;
        case SearchMode::kHnsw:
            require(hnsw_ != nullptr, "HNSW graph not built", ErrorCode::kRuntime);
            out = hnsw_->search(q, K, opts.dense.ef_search);
            t.dense_ms = ms_between(start, Clock::now());
            break;
        case SearchMode::kClusters: {
            RankedClusters ranked = clusters_for(qid, q, opts);
            auto mid = Clock::now();
            t.cluster_ms = ms_between(start, mid);
            out = search_clusters_only(ctx, q, ranked, K);
            t.dense_ms = ms_between(mid, Clock::now());
            break;
        }
        case SearchMode::kEnsemble: {
            opts.ensemble.validate();
            RankedClusters ranked = clusters_for(qid, q, opts);
            auto mid = Clock::now();
            t.cluster_ms = ms_between(start, mid);
            auto cands = fusion_candidates(ctx, q, ranked, opts.ensemble, opts.dense, &t.dense_ms);
            out = to_scored(fuse(cands, ranked.size(), opts.ensemble));
            t.fusion_ms = ms_between(mid, Clock::now()) - t.dense_ms;
            break;
        }
    }
    t.total_ms = ms_between(start, Clock::now());
    if (timing != nullptr) {
        *timing = t;
    }
    return out;
}

ScoredDocs
Engine::search(const std::string& qid, std::span<const float> q, const SearchOptions& opts, SearchTiming* timing)
    const {
    auto lock = read_lock();
    return search_unlocked(qid, q, opts, timing);
}

Run
Engine::search_batch(const EmbeddingSet& queries, const SearchOptions& opts, std::vector<SearchTiming>* timings)
    const {
    auto lock = read_lock();
    require(queries.size() > 0, "empty query set");
    require(queries.dim() == store_->dim(), "query dimension does not match the corpus");
    if ((opts.mode == SearchMode::kClusters || opts.mode == SearchMode::kEnsemble) && opts.external == nullptr &&
        opts.constrained) {
        clamp_k(opts.ensemble.k, true);
    }
    std::vector<ScoredDocs> results(queries.size());
    std::vector<SearchTiming> t(queries.size());
    parallel_for(queries.size(), [&](size_t i) {
        results[i] = search_unlocked(queries.ids[i], queries.vectors.row(i), opts, &t[i]);
    });
    Run run;
    for (size_t i = 0; i < queries.size(); ++i) {
        auto& list = run[queries.ids[i]];
        list.reserve(results[i].size());
        for (const auto& d : results[i]) {
            list.push_back({store_->id(d.ordinal), d.score});
        }
    }
    if (timings != nullptr) {
        *timings = std::move(t);
    }
    return run;
}

GridResult
Engine::grid(const EmbeddingSet& queries,
             const Qrels& qrels,
             const std::vector<double>& alphas,
             const std::vector<double>& betas,
             const SearchOptions& opts,
             const MetricSpec& target) const {
    auto lock = read_lock();
    require(queries.size() > 0, "empty query set");
    auto ranker = [&](size_t i) { return clusters_for(queries.ids[i], queries.vectors.row(i), opts); };
    return grid_search(context(), queries, qrels, alphas, betas, opts.ensemble, opts.dense, ranker, target);
}

}  // namespace mevi
