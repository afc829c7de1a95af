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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/common.hpp"

namespace mevi {

enum class Metric { kInnerProduct, kCosine, kL2 };

std::string_view
to_string(Metric m);
Metric
parse_metric(std::string_view name);

// Higher is better for every metric; L2 is reported as the negated
// Euclidean distance.
double
similarity(Metric metric, std::span<const float> q, std::span<const float> x);

struct ScoredDoc {
    Ordinal ordinal = 0;
    double score = 0.0;

    bool
    operator==(const ScoredDoc&) const = default;
};
using ScoredDocs = std::vector<ScoredDoc>;

// Descending score, then ascending ordinal.
inline bool
ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    return a.score != b.score ? a.score > b.score : a.ordinal < b.ordinal;
}

// Embedding rows addressed by ordinal with external ids and tombstones.
class VectorStore {
public:
    explicit VectorStore(size_t dim = 0) : vectors_(0, dim) {}
    static VectorStore
    from(const EmbeddingSet& set);

    Ordinal
    add(const std::string& id, std::span<const float> v);
    // Restores a tombstoned row (used when loading bundles).
    Ordinal
    add_dead(const std::string& id, std::span<const float> v);
    void
    remove(Ordinal ordinal);

    std::optional<Ordinal>
    find(const std::string& id) const;

    size_t
    dim() const {
        return vectors_.cols();
    }
    size_t
    size() const {
        return ids_.size();
    }
    size_t
    live_count() const {
        return live_count_;
    }
    bool
    is_live(Ordinal o) const {
        return o < live_.size() && live_[o];
    }
    std::span<const float>
    row(Ordinal o) const {
        return vectors_.row(o);
    }
    const std::string&
    id(Ordinal o) const {
        return ids_[o];
    }
    double
    norm(Ordinal o) const {
        return norms_[o];
    }
    const Matrix&
    vectors() const {
        return vectors_;
    }
    const std::vector<std::string>&
    ids() const {
        return ids_;
    }

    double
    score(Metric metric, std::span<const float> q, double q_norm, Ordinal o) const;

private:
    Ordinal
    push(const std::string& id, std::span<const float> v, bool live);

    Matrix vectors_;
    std::vector<std::string> ids_;
    std::vector<double> norms_;
    std::vector<bool> live_;
    std::unordered_map<std::string, Ordinal> by_id_;
    size_t live_count_ = 0;
};

// True top-K over live documents.
ScoredDocs
exact_search(const VectorStore& store, std::span<const float> q, size_t k, Metric metric);

// Exact scores over exactly `ordinals`, sorted.
ScoredDocs
score_candidates(const VectorStore& store, std::span<const float> q, std::span<const Ordinal> ordinals, Metric metric);

struct HnswParams {
    size_t M = 16;
    size_t ef_construction = 200;
    uint64_t seed = 100;
};

// Layered proximity graph. Reads vectors from a VectorStore it does not own;
// the store must outlive the index. Tombstoned rows stay linked and are
// dropped from results.
class HnswIndex {
public:
    HnswIndex(const VectorStore* store, Metric metric, HnswParams params);

    static HnswIndex
    build(const VectorStore* store, Metric metric, HnswParams params);

    void
    insert(Ordinal ordinal);

    ScoredDocs
    search(std::span<const float> q, size_t k, size_t ef_search) const;

    size_t
    size() const {
        return count_;
    }
    int
    max_level() const {
        return max_level_;
    }
    const HnswParams&
    params() const {
        return params_;
    }

    // Neighbor list of a node at a level (for structural checks).
    std::span<const uint32_t>
    neighbors(uint32_t node, int level) const;

private:
    using DistPair = std::pair<float, uint32_t>;

    float
    distance(std::span<const float> q, float q_norm, uint32_t node) const;
    float
    node_distance(uint32_t a, uint32_t b) const;
    std::vector<DistPair>
    search_layer(std::span<const float> q, float q_norm, const std::vector<uint32_t>& entry, size_t ef, int level) const;
    std::vector<uint32_t>
    select_neighbors(std::vector<DistPair> candidates, size_t m) const;
    std::vector<uint32_t>&
    links(uint32_t node, int level);
    const std::vector<uint32_t>&
    links(uint32_t node, int level) const;
    size_t
    max_degree(int level) const {
        return level == 0 ? 2 * params_.M : params_.M;
    }

    const VectorStore* store_;
    Metric metric_;
    HnswParams params_;
    double level_mult_;
    uint64_t rng_state_;
    std::vector<int> levels_;
    std::vector<std::vector<std::vector<uint32_t>>> graph_;  // node -> level -> neighbors
    int max_level_ = -1;
    size_t count_ = 0;
    uint32_t entry_ = 0;
};

}  // namespace mevi
