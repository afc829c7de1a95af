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

// Helpers shared by the unit tests: random data and independent oracles.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/common.hpp"
#include "mevi/dense.hpp"
#include "mevi/quantizer.hpp"

namespace mevi::testing {

inline Matrix
random_matrix(size_t n, size_t d, uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(n, d);
    for (size_t i = 0; i < n; ++i) {
        for (auto& x : m.row(i)) {
            x = static_cast<float>(g(rng));
        }
    }
    return m;
}

inline EmbeddingSet
as_set(Matrix m, const std::string& prefix = "d") {
    EmbeddingSet s;
    for (size_t i = 0; i < m.rows(); ++i) {
        s.ids.push_back(prefix + std::to_string(i));
    }
    s.vectors = std::move(m);
    return s;
}

inline std::vector<float>
to_vec(std::span<const float> s) {
    return {s.begin(), s.end()};
}

// Plain double loops, no shared code with the library.
inline double
naive_dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        s += static_cast<double>(a[j]) * static_cast<double>(b[j]);
    }
    return s;
}

inline double
naive_sq(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
        s += d * d;
    }
    return s;
}

inline double
naive_score(Metric metric, std::span<const float> q, std::span<const float> x) {
    switch (metric) {
        case Metric::kInnerProduct:
            return naive_dot(q, x);
        case Metric::kCosine: {
            double nq = std::sqrt(naive_dot(q, q));
            double nx = std::sqrt(naive_dot(x, x));
            return (nq == 0.0 || nx == 0.0) ? 0.0 : naive_dot(q, x) / (nq * nx);
        }
        case Metric::kL2:
            return -std::sqrt(naive_sq(q, x));
    }
    return 0.0;
}

struct NaiveHit {
    size_t row;
    double score;
};

// Double loop over every row, full sort, lower row first on ties.
inline std::vector<NaiveHit>
naive_top(const Matrix& docs, std::span<const float> q, size_t k, Metric metric,
          const std::vector<bool>* live = nullptr) {
    std::vector<NaiveHit> all;
    for (size_t i = 0; i < docs.rows(); ++i) {
        if (live == nullptr || (*live)[i]) {
            all.push_back({i, naive_score(metric, q, docs.row(i))});
        }
    }
    std::sort(all.begin(), all.end(), [](const NaiveHit& a, const NaiveHit& b) {
        return a.score != b.score ? a.score > b.score : a.row < b.row;
    });
    if (all.size() > k) {
        all.resize(k);
    }
    return all;
}

// Reconstruction of an RQ code by summing codewords in layer order.
inline std::vector<float>
naive_rq_reconstruct(const RqCodebook& cb, const Code& c) {
    std::vector<float> out(cb.dim(), 0.0F);
    for (size_t t = 0; t < c.size(); ++t) {
        auto row = cb.layer(t).row(c.digits[t]);
        for (size_t j = 0; j < out.size(); ++j) {
            out[j] += row[j];
        }
    }
    return out;
}

struct NaiveCluster {
    Code code;
    double score;
};

// Every non-empty code scored by -||q - reconstruct(code)||^2, best first,
// lexicographic on ties.
inline std::vector<NaiveCluster>
exhaustive_clusters(std::span<const float> q, const Codebook& cb, const ClusterIndex& idx) {
    std::vector<NaiveCluster> out;
    for (const auto& [code, members] : idx.postings()) {
        std::vector<float> r = cb.reconstruct(code);
        out.push_back({code, -naive_sq(q, r)});
    }
    std::sort(out.begin(), out.end(), [](const NaiveCluster& a, const NaiveCluster& b) {
        return a.score != b.score ? a.score > b.score : a.code < b.code;
    });
    return out;
}

}  // namespace mevi::testing
