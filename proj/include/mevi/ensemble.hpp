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
#include <optional>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/cluster_search.hpp"
#include "mevi/dense.hpp"
#include "mevi/metrics.hpp"

namespace mevi {

enum class MissingPolicy { kZero, kBelowMin };

std::string_view
to_string(MissingPolicy p);
MissingPolicy
parse_missing_policy(std::string_view name);

// Margin below the lowest in-list cluster score used by kBelowMin.
inline constexpr double kBelowMinMargin = 1e-6;

struct EnsembleParams {
    double alpha = 0.5;  // weight of the cluster score
    double beta = 0.02;  // rank decay
    size_t k = 100;      // clusters
    size_t K = 1000;     // documents returned
    size_t dense_depth = 0;  // dense candidates K'; 0 means K
    MissingPolicy missing = MissingPolicy::kZero;

    void
    validate() const;
};

// s_c = 1 / (beta * r + 1) for a 0-based cluster rank r.
double
rank_decay_score(size_t rank, double beta);

// 0-based rank of each ranked cluster code. When a code repeats, the best
// rank wins.
class ClusterRanks {
public:
    explicit ClusterRanks(const RankedClusters& ranked);

    std::optional<size_t>
    rank_of(const Code& code) const;
    size_t
    size() const {
        return count_;
    }

    double
    score(const Code& doc_code, const EnsembleParams& params) const;

private:
    std::map<Code, size_t> ranks_;
    size_t count_;
};

// Cluster score of a document whose full code is `doc_code`. Documents
// outside the ranked clusters get 0 (kZero) or the lowest in-list score
// minus kBelowMinMargin (kBelowMin).
double
cluster_score(const Code& doc_code, const RankedClusters& ranked, const EnsembleParams& params);

enum class DenseBackend { kExact, kHnsw };

struct DenseParams {
    DenseBackend backend = DenseBackend::kExact;
    size_t ef_search = 64;
};

// Read-only view over one index generation.
struct SearchContext {
    const Codebook* codebook = nullptr;
    const ClusterIndex* clusters = nullptr;
    const VectorStore* store = nullptr;
    const HnswIndex* hnsw = nullptr;
    Metric metric = Metric::kInnerProduct;
};

ScoredDocs
dense_search(const SearchContext& ctx, std::span<const float> q, size_t k, const DenseParams& dense);

// Union of live members of the ranked clusters, ascending ordinals.
std::vector<Ordinal>
cluster_candidates(const SearchContext& ctx, const RankedClusters& ranked);

// Brute-force metric scoring restricted to the ranked clusters' members.
// May return fewer than K documents.
ScoredDocs
search_clusters_only(const SearchContext& ctx, std::span<const float> q, const RankedClusters& ranked, size_t K);

struct FusedDoc {
    Ordinal ordinal = 0;
    double score = 0.0;    // s0 + alpha * s_c
    double base = 0.0;     // s0, the exact metric score
    double cluster = 0.0;  // s_c
};

// Candidate before fusion: exact s0 plus the rank of its cluster, if ranked.
struct FusionCandidate {
    Ordinal ordinal = 0;
    double base = 0.0;
    std::optional<size_t> cluster_rank;
};

// Dense top-K' united with every member of the ranked clusters.
std::vector<FusionCandidate>
fusion_candidates(const SearchContext& ctx,
                  std::span<const float> q,
                  const RankedClusters& ranked,
                  const EnsembleParams& params,
                  const DenseParams& dense,
                  double* dense_ms = nullptr);

// Scores candidates with s0 + alpha * s_c and keeps the top K; ties go to
// the higher s0, then the lower ordinal.
std::vector<FusedDoc>
fuse(const std::vector<FusionCandidate>& candidates, size_t ranked_clusters, const EnsembleParams& params);

std::vector<FusedDoc>
ensemble_search(const SearchContext& ctx,
                std::span<const float> q,
                const RankedClusters& ranked,
                const EnsembleParams& params,
                const DenseParams& dense);

ScoredDocs
to_scored(const std::vector<FusedDoc>& fused);

struct GridCell {
    double alpha = 0.0;
    double beta = 0.0;
    double value = 0.0;
};

struct GridResult {
    MetricSpec target;
    GridCell best;
    std::vector<GridCell> table;  // alpha-major in input order
};

// Supplies the ranked clusters for query i.
using ClusterRanker = std::function<RankedClusters(size_t query_index)>;

// Evaluates every (alpha, beta) pair; the argmax breaks ties toward the
// smaller alpha, then the smaller beta.
GridResult
grid_search(const SearchContext& ctx,
            const EmbeddingSet& queries,
            const Qrels& qrels,
            const std::vector<double>& alphas,
            const std::vector<double>& betas,
            const EnsembleParams& base,
            const DenseParams& dense,
            const ClusterRanker& ranker,
            const MetricSpec& target);

std::vector<double>
default_alpha_grid();
std::vector<double>
default_beta_grid();

}  // namespace mevi
