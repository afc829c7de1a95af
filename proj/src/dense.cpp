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

#include "mevi/dense.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace mevi {

std::string_view
to_string(Metric m) {
    switch (m) {
        case Metric::kInnerProduct:
            return "ip";
        case Metric::kCosine:
            return "cosine";
        case Metric::kL2:
            return "l2";
    }
    return "ip";
}

Metric
parse_metric(std::string_view name) {
    if (name == "ip" || name == "inner-product") {
        return Metric::kInnerProduct;
    }
    if (name == "cosine") {
        return Metric::kCosine;
    }
    if (name == "l2") {
        return Metric::kL2;
    }
    fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

namespace {

double
l2_norm(std::span<const float> v) {
    return std::sqrt(dot(v, v));
}

double
neg_distance(std::span<const float> q, std::span<const float> x) {
    double s = 0.0;
    for (size_t i = 0; i < q.size(); ++i) {
        double d = static_cast<double>(q[i]) - static_cast<double>(x[i]);
        s += d * d;
    }
    return -std::sqrt(s);
}

}  // namespace

double
similarity(Metric metric, std::span<const float> q, std::span<const float> x) {
    switch (metric) {
        case Metric::kInnerProduct:
            return dot(q, x);
        case Metric::kCosine: {
            double denom = l2_norm(q) * l2_norm(x);
            return denom > 0.0 ? dot(q, x) / denom : 0.0;
        }
        case Metric::kL2:
            return neg_distance(q, x);
    }
    return 0.0;
}

// ---- VectorStore ----

VectorStore
VectorStore::from(const EmbeddingSet& set) {
    set.validate();
    VectorStore store(set.dim());
    for (size_t i = 0; i < set.size(); ++i) {
        store.add(set.ids[i], set.vectors.row(i));
    }
    return store;
}

Ordinal
VectorStore::push(const std::string& id, std::span<const float> v, bool live) {
    require(v.size() == dim(), "dimension mismatch: expected " + std::to_string(dim()) + ", got " +
                                   std::to_string(v.size()));
    for (float x : v) {
        require(std::isfinite(x), "non-finite value");
    }
    Ordinal o = ids_.size();
    vectors_.append_row(v);
    ids_.push_back(id);
    norms_.push_back(l2_norm(v));
    live_.push_back(live);
    if (live) {
        by_id_[id] = o;
        ++live_count_;
    }
    return o;
}

Ordinal
VectorStore::add(const std::string& id, std::span<const float> v) {
    require(!by_id_.contains(id), "duplicate id: " + id, ErrorCode::kDuplicate);
    return push(id, v, true);
}

Ordinal
VectorStore::add_dead(const std::string& id, std::span<const float> v) {
    return push(id, v, false);
}

void
VectorStore::remove(Ordinal ordinal) {
    require(is_live(ordinal), "unknown ordinal " + std::to_string(ordinal), ErrorCode::kNotFound);
    by_id_.erase(ids_[ordinal]);
    live_[ordinal] = false;
    --live_count_;
}

std::optional<Ordinal>
VectorStore::find(const std::string& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

double
VectorStore::score(Metric metric, std::span<const float> q, double q_norm, Ordinal o) const {
    auto x = row(o);
    switch (metric) {
        case Metric::kInnerProduct:
            return dot(q, x);
        case Metric::kCosine: {
            double denom = q_norm * norms_[o];
            return denom > 0.0 ? dot(q, x) / denom : 0.0;
        }
        case Metric::kL2:
            return neg_distance(q, x);
    }
    return 0.0;
}

// ---- exact ----

ScoredDocs
exact_search(const VectorStore& store, std::span<const float> q, size_t k, Metric metric) {
    require(k >= 1, "K must be >= 1");
    require(store.live_count() > 0, "empty corpus");
    require(q.size() == store.dim(), "dimension mismatch");
    double qn = l2_norm(q);
    // Max-heap under ranks_before: top() is the worst kept entry.
    std::priority_queue<ScoredDoc, std::vector<ScoredDoc>, decltype(&ranks_before)> heap(&ranks_before);
    for (Ordinal o = 0; o < store.size(); ++o) {
        if (!store.is_live(o)) {
            continue;
        }
        ScoredDoc d{o, store.score(metric, q, qn, o)};
        if (heap.size() < k) {
            heap.push(d);
        } else if (ranks_before(d, heap.top())) {
            heap.pop();
            heap.push(d);
        }
    }
    ScoredDocs out(heap.size());
    for (size_t i = out.size(); i-- > 0;) {
        out[i] = heap.top();
        heap.pop();
    }
    return out;
}

ScoredDocs
score_candidates(const VectorStore& store, std::span<const float> q, std::span<const Ordinal> ordinals, Metric metric) {
    require(q.size() == store.dim(), "dimension mismatch");
    double qn = l2_norm(q);
    ScoredDocs out;
    out.reserve(ordinals.size());
    for (Ordinal o : ordinals) {
        require(store.is_live(o), "dead ordinal " + std::to_string(o), ErrorCode::kNotFound);
        out.push_back({o, store.score(metric, q, qn, o)});
    }
    std::sort(out.begin(), out.end(), ranks_before);
    return out;
}

// ---- HNSW ----

namespace {

float
fdot(std::span<const float> a, std::span<const float> b) {
    float lane[8] = {};
    size_t n = a.size();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (size_t j = 0; j < 8; ++j) {
            lane[j] += a[i + j] * b[i + j];
        }
    }
    for (; i < n; ++i) {
        lane[0] += a[i] * b[i];
    }
    return ((lane[0] + lane[4]) + (lane[1] + lane[5])) + ((lane[2] + lane[6]) + (lane[3] + lane[7]));
}

uint64_t
splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct VisitedList {
    std::vector<uint32_t> marks;
    uint32_t epoch = 0;

    void
    reset(size_t n) {
        if (marks.size() < n) {
            marks.resize(std::max(n, 2 * marks.size()), 0);
        }
        if (++epoch == 0) {
            std::fill(marks.begin(), marks.end(), 0);
            epoch = 1;
        }
    }
    bool
    visit(uint32_t i) {
        if (marks[i] == epoch) {
            return false;
        }
        marks[i] = epoch;
        return true;
    }
};

thread_local VisitedList t_visited;

}  // namespace

HnswIndex::HnswIndex(const VectorStore* store, Metric metric, HnswParams params)
    : store_(store), metric_(metric), params_(params), rng_state_(params.seed) {
    require(store_ != nullptr, "null vector store");
    require(params_.M >= 2, "HNSW M must be >= 2");
    require(params_.ef_construction >= 1, "ef_construction must be >= 1");
    level_mult_ = 1.0 / std::log(static_cast<double>(params_.M));
}

HnswIndex
HnswIndex::build(const VectorStore* store, Metric metric, HnswParams params) {
    HnswIndex index(store, metric, params);
    for (Ordinal o = 0; o < store->size(); ++o) {
        if (store->is_live(o)) {
            index.insert(o);
        }
    }
    return index;
}

float
HnswIndex::distance(std::span<const float> q, float q_norm, uint32_t node) const {
    auto x = store_->row(node);
    switch (metric_) {
        case Metric::kInnerProduct:
            return -fdot(q, x);
        case Metric::kCosine: {
            float denom = q_norm * static_cast<float>(store_->norm(node));
            return denom > 0.0F ? -fdot(q, x) / denom : 0.0F;
        }
        case Metric::kL2:
            return squared_l2(q, x);
    }
    return 0.0F;
}

float
HnswIndex::node_distance(uint32_t a, uint32_t b) const {
    return distance(store_->row(a), static_cast<float>(store_->norm(a)), b);
}

std::vector<uint32_t>&
HnswIndex::links(uint32_t node, int level) {
    return graph_[node][static_cast<size_t>(level)];
}

const std::vector<uint32_t>&
HnswIndex::links(uint32_t node, int level) const {
    return graph_[node][static_cast<size_t>(level)];
}

std::span<const uint32_t>
HnswIndex::neighbors(uint32_t node, int level) const {
    if (node >= graph_.size() || level < 0 || static_cast<size_t>(level) >= graph_[node].size()) {
        return {};
    }
    return links(node, level);
}

std::vector<HnswIndex::DistPair>
HnswIndex::search_layer(std::span<const float> q,
                        float q_norm,
                        const std::vector<uint32_t>& entry,
                        size_t ef,
                        int level) const {
    VisitedList& visited = t_visited;
    visited.reset(graph_.size());
    std::priority_queue<DistPair, std::vector<DistPair>, std::greater<>> frontier;  // nearest first
    std::priority_queue<DistPair> best;                                             // farthest on top
    for (uint32_t e : entry) {
        if (visited.visit(e)) {
            float d = distance(q, q_norm, e);
            frontier.emplace(d, e);
            best.emplace(d, e);
        }
    }
    while (best.size() > ef) {
        best.pop();
    }
    while (!frontier.empty()) {
        auto [d, node] = frontier.top();
        if (best.size() >= ef && d > best.top().first) {
            break;
        }
        frontier.pop();
        for (uint32_t nb : links(node, level)) {
            if (!visited.visit(nb)) {
                continue;
            }
            float dn = distance(q, q_norm, nb);
            if (best.size() < ef || dn < best.top().first) {
                frontier.emplace(dn, nb);
                best.emplace(dn, nb);
                if (best.size() > ef) {
                    best.pop();
                }
            }
        }
    }
    std::vector<DistPair> out(best.size());
    for (size_t i = out.size(); i-- > 0;) {
        out[i] = best.top();
        best.pop();
    }
    return out;
}

std::vector<uint32_t>
HnswIndex::select_neighbors(std::vector<DistPair> candidates, size_t m) const {
    std::sort(candidates.begin(), candidates.end());
    std::vector<uint32_t> chosen;
    std::vector<uint32_t> pruned;
    for (const auto& [d, c] : candidates) {
        if (chosen.size() >= m) {
            break;
        }
        bool diverse = true;
        for (uint32_t r : chosen) {
            if (node_distance(c, r) < d) {
                diverse = false;
                break;
            }
        }
        (diverse ? chosen : pruned).push_back(c);
    }
    // Top up with pruned candidates to keep the graph well connected.
    for (size_t i = 0; i < pruned.size() && chosen.size() < m; ++i) {
        chosen.push_back(pruned[i]);
    }
    return chosen;
}

void
HnswIndex::insert(Ordinal ordinal) {
    require(ordinal < store_->size(), "ordinal out of range");
    require(ordinal <= UINT32_MAX, "ordinal exceeds HNSW capacity");
    auto node = static_cast<uint32_t>(ordinal);
    if (graph_.size() <= node) {
        graph_.resize(node + 1);
        levels_.resize(node + 1, -1);
    }
    require(levels_[node] < 0, "ordinal already in HNSW graph", ErrorCode::kDuplicate);

    double u = (static_cast<double>(splitmix64(rng_state_) >> 11) + 1.0) * 0x1.0p-53;
    int level = static_cast<int>(std::floor(-std::log(u) * level_mult_));
    levels_[node] = level;
    ++count_;
    graph_[node].assign(static_cast<size_t>(level) + 1, {});

    if (max_level_ < 0) {
        entry_ = node;
        max_level_ = level;
        return;
    }

    auto q = store_->row(node);
    auto qn = static_cast<float>(store_->norm(node));
    std::vector<uint32_t> ep{entry_};
    for (int lc = max_level_; lc > level; --lc) {
        auto w = search_layer(q, qn, ep, 1, lc);
        ep = {w.front().second};
    }
    for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
        auto w = search_layer(q, qn, ep, params_.ef_construction, lc);
        auto chosen = select_neighbors(w, params_.M);
        links(node, lc) = chosen;
        for (uint32_t nb : chosen) {
            auto& nl = links(nb, lc);
            nl.push_back(node);
            if (nl.size() > max_degree(lc)) {
                std::vector<DistPair> cands;
                cands.reserve(nl.size());
                for (uint32_t x : nl) {
                    cands.emplace_back(node_distance(nb, x), x);
                }
                nl = select_neighbors(std::move(cands), max_degree(lc));
            }
        }
        ep.clear();
        for (const auto& p : w) {
            ep.push_back(p.second);
        }
    }
    if (level > max_level_) {
        max_level_ = level;
        entry_ = node;
    }
}

ScoredDocs
HnswIndex::search(std::span<const float> q, size_t k, size_t ef_search) const {
    require(k >= 1, "K must be >= 1");
    require(ef_search >= k, "ef_search (" + std::to_string(ef_search) + ") must be >= K (" + std::to_string(k) + ")");
    require(max_level_ >= 0, "empty index");
    require(q.size() == store_->dim(), "dimension mismatch");
    double qn = std::sqrt(dot(q, q));
    auto qnf = static_cast<float>(qn);
    std::vector<uint32_t> ep{entry_};
    for (int lc = max_level_; lc > 0; --lc) {
        auto w = search_layer(q, qnf, ep, 1, lc);
        ep = {w.front().second};
    }
    auto w = search_layer(q, qnf, ep, ef_search, 0);
    ScoredDocs out;
    out.reserve(w.size());
    for (const auto& [d, node] : w) {
        if (store_->is_live(node)) {
            out.push_back({node, store_->score(metric_, q, qn, node)});
        }
    }
    std::sort(out.begin(), out.end(), ranks_before);
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

}  // namespace mevi
