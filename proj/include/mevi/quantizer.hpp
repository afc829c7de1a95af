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

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mevi/common.hpp"

namespace mevi {

// Cluster identifier: one layer-local centroid index per layer.
struct Code {
    std::vector<uint16_t> digits;

    size_t
    size() const noexcept {
        return digits.size();
    }

    auto
    operator<=>(const Code&) const = default;
    bool
    operator==(const Code&) const = default;

    // "3-17-0-22"
    std::string
    to_string() const;
    static Code
    parse(std::string_view text);
};

struct KmeansParams {
    size_t max_iters = 50;
    float tol = 1e-4F;
    uint64_t seed = 0;
};

struct KmeansResult {
    Matrix centroids;
    std::vector<uint32_t> assignments;
    double sse = 0.0;
};

// Lloyd's algorithm with k-means++ seeding. Assignments are recomputed after
// the final centroid update, so every point sits at its nearest centroid.
KmeansResult
kmeans(const Matrix& points, size_t b, const KmeansParams& params);

struct QuantizationReport {
    std::vector<double> per_layer_sse;  // residual energy after each layer
    double total_sse = 0.0;
};

enum class BuilderKind { kResidual, kHierarchicalKmeans };

std::string_view
to_string(BuilderKind kind);
BuilderKind
parse_builder(std::string_view name);

// A code space of m layers with b digits each, regardless of how it was
// trained. Cluster search walks prefixes through child_point().
class Codebook {
public:
    virtual ~Codebook() = default;

    virtual BuilderKind
    kind() const = 0;
    virtual size_t
    layers() const = 0;
    virtual size_t
    codewords() const = 0;
    virtual size_t
    dim() const = 0;

    virtual Code
    encode(std::span<const float> v) const = 0;
    virtual std::vector<float>
    reconstruct(const Code& code) const = 0;

    // Point represented by prefix+digit, given the point of `prefix`
    // (the zero vector for the empty prefix). Returns false when the digit
    // is not a valid child of the prefix.
    virtual bool
    child_point(const Code& prefix,
                uint16_t digit,
                std::span<const float> parent_point,
                std::span<float> out) const = 0;

    void
    check_code(const Code& code) const;
};

// m layers of b codewords each, applied to successive residuals.
class RqCodebook final : public Codebook {
public:
    RqCodebook(size_t m, size_t b, size_t dim);
    explicit RqCodebook(std::vector<Matrix> layers);

    BuilderKind
    kind() const override {
        return BuilderKind::kResidual;
    }
    size_t
    layers() const override {
        return layers_.size();
    }
    size_t
    codewords() const override {
        return b_;
    }
    size_t
    dim() const override {
        return dim_;
    }

    const Matrix&
    layer(size_t t) const {
        return layers_[t];
    }
    Matrix&
    layer(size_t t) {
        return layers_[t];
    }

    Code
    encode(std::span<const float> v) const override;
    std::vector<float>
    reconstruct(const Code& code) const override;
    bool
    child_point(const Code& prefix,
                uint16_t digit,
                std::span<const float> parent_point,
                std::span<float> out) const override;

    bool
    operator==(const RqCodebook& o) const {
        return b_ == o.b_ && dim_ == o.dim_ && layers_ == o.layers_;
    }

private:
    size_t b_;
    size_t dim_;
    std::vector<Matrix> layers_;
};

// Tree of absolute centroids: every node at depth t < m owns up to b
// children. Nodes are stored breadth-first; node 0 is the root.
class HkmeansTree final : public Codebook {
public:
    struct Node {
        uint32_t first_child = 0;
        uint32_t child_count = 0;
    };

    HkmeansTree(size_t m, size_t b, size_t dim);

    BuilderKind
    kind() const override {
        return BuilderKind::kHierarchicalKmeans;
    }
    size_t
    layers() const override {
        return m_;
    }
    size_t
    codewords() const override {
        return b_;
    }
    size_t
    dim() const override {
        return dim_;
    }

    Code
    encode(std::span<const float> v) const override;
    std::vector<float>
    reconstruct(const Code& code) const override;
    bool
    child_point(const Code& prefix,
                uint16_t digit,
                std::span<const float> parent_point,
                std::span<float> out) const override;

    size_t
    node_count() const {
        return nodes_.size();
    }
    const Node&
    node(size_t i) const {
        return nodes_[i];
    }
    std::span<const float>
    centroid(size_t i) const {
        return centroids_.row(i);
    }

    // Builder interface: children must be appended breadth-first.
    void
    set_children(size_t parent, const Matrix& child_centroids);

    // Node reached by following `prefix` from the root; -1 if absent.
    int64_t
    find(const Code& prefix) const;

    bool
    operator==(const HkmeansTree& o) const {
        return m_ == o.m_ && b_ == o.b_ && dim_ == o.dim_ && centroids_ == o.centroids_ &&
               node_layout() == o.node_layout();
    }

private:
    std::vector<uint32_t>
    node_layout() const;

    size_t m_;
    size_t b_;
    size_t dim_;
    std::vector<Node> nodes_;
    Matrix centroids_;  // one row per node; root row is zero
};

struct QuantizerBuild {
    std::shared_ptr<const Codebook> codebook;
    std::vector<Code> codes;
    QuantizationReport report;
};

// Layer t runs kmeans with seed params.seed + t.
QuantizerBuild
build_rq(const Matrix& x, size_t m, size_t b, const KmeansParams& params);

QuantizerBuild
build_hierarchical_kmeans(const Matrix& x, size_t m, size_t b, const KmeansParams& params);

QuantizerBuild
build_quantizer(BuilderKind kind, const Matrix& x, size_t m, size_t b, const KmeansParams& params);

// Sum over rows of ||x_i - reconstruct(codes_i)||^2.
double
quantization_error(const Matrix& x, const std::vector<Code>& codes, const Codebook& cb);

}  // namespace mevi
