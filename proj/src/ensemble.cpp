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

#include "mevi/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

namespace mevi {

std::string_view
to_string(MissingPolicy p) {
    return p == MissingPolicy::kZero ? "zero" : "below-min";
}

MissingPolicy
parse_missing_policy(std::string_view name) {
    if (name == "zero") {
        return MissingPolicy::kZero;
    }
    if (name == "below-min") {
        return MissingPolicy::kBelowMin;
    }
    fail(ErrorCode::kInvalidArgument, "unknown missing policy '" + std::string(name) + "'");
}

void
EnsembleParams::validate() const {
    require(std::isfinite(alpha) && alpha >= 0.0, "alpha must be >= 0");
    require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
    require(k >= 1, "k must be >= 1");
    require(K >= 1, "K must be >= 1");
}

double
rank_decay_score(size_t rank, double beta) {
    return 1.0 / (beta * static_cast<double>(rank) + 1.0);
}

ClusterRanks::ClusterRanks(const RankedClusters& ranked) : count_(ranked.size()) {
    for (size_t r = 0; r < ranked.size(); ++r) {
        ranks_.emplace(ranked[r].code, r);  // keeps the first (best) rank
    }
}

std::optional<size_t>
ClusterRanks::rank_of(const Code& code) const {
    auto it = ranks_.find(code);
    if (it == ranks_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

double
score_for_rank(std::optional<size_t> rank, size_t ranked_count, const EnsembleParams& params) {
    if (rank) {
        return rank_decay_score(*rank, params.beta);
    }
    if (params.missing == MissingPolicy::kZero || ranked_count == 0) {
        return 0.0;
    }
    return rank_decay_score(ranked_count - 1, params.beta) - kBelowMinMargin;
}

double
elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

double
ClusterRanks::score(const Code& doc_code, const EnsembleParams& params) const {
    return score_for_rank(rank_of(doc_code), count_, params);
}

double
cluster_score(const Code& doc_code, const RankedClusters& ranked, const EnsembleParams& params) {
    require(!ranked.empty(), "cluster ranking is empty");
    return ClusterRanks(ranked).score(doc_code, params);
}

ScoredDocs
dense_search(const SearchContext& ctx, std::span<const float> q, size_t k, const DenseParams& dense) {
    if (dense.backend == DenseBackend::kHnsw) {
        require(ctx.hnsw != nullptr, "HNSW backend requested but no graph is built", ErrorCode::kRuntime);
        return ctx.hnsw->search(q, k, std::max(dense.ef_search, k));
    }
    return exact_search(*ctx.store, q, k, ctx.metric);
}

std::vector<Ordinal>
cluster_candidates(const SearchContext& ctx, const RankedClusters& ranked) {
    std::vector<Ordinal> out;
    for (const auto& rc : ranked) {
        if (const auto* p = ctx.clusters->posting(rc.code)) {
            out.insert(out.end(), p->begin(), p->end());
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ScoredDocs
search_clusters_only(const SearchContext& ctx, std::span<const float> q, const RankedClusters& ranked, size_t K) {
    require(K >= 1, "K must be >= 1");
    require(ctx.clusters->live_count() > 0, "empty index");
    auto cands = cluster_candidates(ctx, ranked);
    ScoredDocs scored = score_candidates(*ctx.store, q, cands, ctx.metric);
    if (scored.size() > K) {
        scored.resize(K);
    }
    return scored;
}

std::vector<FusionCandidate>
fusion_candidates(const SearchContext& ctx,
                  std::span<const float> q,
                  const RankedClusters& ranked,
                  const EnsembleParams& params,
                  const DenseParams& dense,
                  double* dense_ms) {
    auto t0 = std::chrono::steady_clock::now();
    size_t depth = params.dense_depth == 0 ? params.K : params.dense_depth;
    ScoredDocs dense_hits = dense_search(ctx, q, depth, dense);
    if (dense_ms != nullptr) {
        *dense_ms = elapsed_ms(t0);
    }

    std::vector<Ordinal> ords = cluster_candidates(ctx, ranked);
    for (const auto& d : dense_hits) {
        ords.push_back(d.ordinal);
    }
    std::sort(ords.begin(), ords.end());
    ords.erase(std::unique(ords.begin(), ords.end()), ords.end());

    // Every candidate gets its exact s0, including approximate dense hits.
    ScoredDocs exact = score_candidates(*ctx.store, q, ords, ctx.metric);
    ClusterRanks ranks(ranked);
    std::vector<FusionCandidate> out;
    out.reserve(exact.size());
    for (const auto& e : exact) {
        out.push_back({e.ordinal, e.score, ranks.rank_of(ctx.clusters->code_of(e.ordinal))});
    }
    return out;
}

std::vector<FusedDoc>
fuse(const std::vector<FusionCandidate>& candidates, size_t ranked_clusters, const EnsembleParams& params) {
    std::vector<FusedDoc> fused;
    fused.reserve(candidates.size());
    for (const auto& c : candidates) {
        double sc = score_for_rank(c.cluster_rank, ranked_clusters, params);
        fused.push_back({c.ordinal, c.base + params.alpha * sc, c.base, sc});
    }
    auto better = [](const FusedDoc& a, const FusedDoc& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        if (a.base != b.base) {
            return a.base > b.base;
        }
        return a.ordinal < b.ordinal;
    };
    size_t keep = std::min(params.K, fused.size());
    std::partial_sort(fused.begin(), fused.begin() + static_cast<std::ptrdiff_t>(keep), fused.end(), better);
    fused.resize(keep);
    return fused;
}

std::vector<FusedDoc>
ensemble_search(const SearchContext& ctx,
                std::span<const float> q,
                const RankedClusters& ranked,
                const EnsembleParams& params,
                const DenseParams& dense) {
    params.validate();
    return fuse(fusion_candidates(ctx, q, ranked, params, dense), ranked.size(), params);
}

ScoredDocs
to_scored(const std::vector<FusedDoc>& fused) {
    ScoredDocs out;
    out.reserve(fused.size());
    for (const auto& f : fused) {
        out.push_back({f.ordinal, f.score});
    }
    return out;
}

GridResult
grid_search(const SearchContext& ctx,
            const EmbeddingSet& queries,
            const Qrels& qrels,
            const std::vector<double>& alphas,
            const std::vector<double>& betas,
            const EnsembleParams& base,
            const DenseParams& dense,
            const ClusterRanker& ranker,
            const MetricSpec& target) {
    require(!alphas.empty() && !betas.empty(), "grid must be non-empty");
    require(queries.size() > 0, "empty query set");
    base.validate();

    struct Prepared {
        std::vector<FusionCandidate> candidates;
        size_t ranked = 0;
    };
    std::vector<Prepared> prepared(queries.size());
    parallel_for(queries.size(), [&](size_t i) {
        RankedClusters ranked = ranker(i);
        prepared[i].ranked = ranked.size();
        prepared[i].candidates = fusion_candidates(ctx, queries.vectors.row(i), ranked, base, dense);
    });

    GridResult result;
    result.target = target;
    result.table.resize(alphas.size() * betas.size());
    parallel_for(result.table.size(), [&](size_t cell) {
        EnsembleParams p = base;
        p.alpha = alphas[cell / betas.size()];
        p.beta = betas[cell % betas.size()];
        p.validate();
        Run run;
        for (size_t i = 0; i < queries.size(); ++i) {
            auto& list = run[queries.ids[i]];
            for (const auto& f : fuse(prepared[i].candidates, prepared[i].ranked, p)) {
                list.push_back({ctx.store->id(f.ordinal), f.score});
            }
        }
        result.table[cell] = {p.alpha, p.beta, evaluate(run, qrels, target).value};
    });

    result.best = result.table.front();
    for (const auto& c : result.table) {
        bool better = c.value > result.best.value ||
                      (c.value == result.best.value &&
                       (c.alpha < result.best.alpha || (c.alpha == result.best.alpha && c.beta < result.best.beta)));
        if (better) {
            result.best = c;
        }
    }
    return result;
}

std::vector<double>
default_alpha_grid() {
    std::vector<double> out;
    for (int i = 1; i <= 10; ++i) {
        out.push_back(i / 10.0);
    }
    return out;
}

std::vector<double>
default_beta_grid() {
    std::vector<double> out;
    for (int i = 1; i <= 10; ++i) {
        out.push_back(i * 0.005);
    }
    return out;
}

}  // namespace mevi
