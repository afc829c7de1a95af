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

#include "mevi/quantizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>

namespace mevi {

std::string
Code::to_string() const {
    std::string out;
    for (size_t i = 0; i < digits.size(); ++i) {
        if (i > 0) {
            out.push_back('-');
        }
        out += std::to_string(digits[i]);
    }
    return out;
}

Code
Code::parse(std::string_view text) {
    Code code;
    size_t pos = 0;
    while (true) {
        size_t dash = text.find('-', pos);
        std::string_view tok = text.substr(pos, dash == std::string_view::npos ? text.npos : dash - pos);
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        require(!tok.empty() && ec == std::errc() && ptr == tok.data() + tok.size() && value <= 0xFFFF,
                "malformed code '" + std::string(text) + "'",
                ErrorCode::kFormat);
        code.digits.push_back(static_cast<uint16_t>(value));
        if (dash == std::string_view::npos) {
            break;
        }
        pos = dash + 1;
    }
    return code;
}

std::string_view
to_string(BuilderKind kind) {
    return kind == BuilderKind::kResidual ? "rq" : "hkmeans";
}

BuilderKind
parse_builder(std::string_view name) {
    if (name == "rq") {
        return BuilderKind::kResidual;
    }
    if (name == "hkmeans") {
        return BuilderKind::kHierarchicalKmeans;
    }
    fail(ErrorCode::kInvalidArgument, "unknown builder '" + std::string(name) + "'");
}

namespace {

constexpr size_t kAssignChunk = 512;

// Uniform double in [0, 1) from the top 53 bits.
double
uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void
assign_all(const Matrix& points, const Matrix& centroids, std::vector<uint32_t>& assign, std::vector<float>& dist) {
    size_t n = points.rows();
    size_t chunks = (n + kAssignChunk - 1) / kAssignChunk;
    parallel_for(chunks, [&](size_t c) {
        size_t end = std::min(n, (c + 1) * kAssignChunk);
        for (size_t i = c * kAssignChunk; i < end; ++i) {
            float d = 0.0F;
            assign[i] = static_cast<uint32_t>(nearest_row(points.row(i), centroids, &d));
            dist[i] = d;
        }
    });
}

Matrix
seed_plus_plus(const Matrix& points, size_t b, std::mt19937_64& rng) {
    size_t n = points.rows();
    size_t dim = points.cols();
    Matrix centroids(b, dim);
    size_t first = static_cast<size_t>(rng() % n);
    std::copy_n(points.row(first).begin(), dim, centroids.row(0).begin());

    std::vector<double> d2(n);
    for (size_t i = 0; i < n; ++i) {
        d2[i] = squared_l2(points.row(i), centroids.row(0));
    }
    for (size_t c = 1; c < b; ++c) {
        double total = 0.0;
        for (double v : d2) {
            total += v;
        }
        size_t pick = 0;
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc > target) {
                    pick = i;
                    break;
                }
            }
            // Guard against rounding landing on a zero-weight tail point.
            while (d2[pick] == 0.0 && pick > 0) {
                --pick;
            }
        }
        std::copy_n(points.row(pick).begin(), dim, centroids.row(c).begin());
        for (size_t i = 0; i < n; ++i) {
            d2[i] = std::min<double>(d2[i], squared_l2(points.row(i), centroids.row(c)));
        }
    }
    return centroids;
}

}  // namespace

KmeansResult
kmeans(const Matrix& points, size_t b, const KmeansParams& params) {
    require(!points.empty(), "empty input");
    require(b >= 1, "kmeans: b must be >= 1");
    require(params.max_iters >= 1, "kmeans: max_iters must be >= 1");
    require(params.tol >= 0.0F, "kmeans: tol must be >= 0");
    for (float v : points.data()) {
        require(std::isfinite(v), "non-finite value");
    }

    size_t n = points.rows();
    size_t dim = points.cols();
    std::mt19937_64 rng(params.seed);
    KmeansResult res;
    res.centroids = seed_plus_plus(points, b, rng);
    res.assignments.assign(n, 0);
    std::vector<float> dist(n, 0.0F);

    std::vector<double> sums(b * dim);
    std::vector<size_t> counts(b);
    for (size_t iter = 0; iter < params.max_iters; ++iter) {
        assign_all(points, res.centroids, res.assignments, dist);

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (size_t i = 0; i < n; ++i) {
            uint32_t a = res.assignments[i];
            ++counts[a];
            auto p = points.row(i);
            double* s = sums.data() + a * dim;
            for (size_t j = 0; j < dim; ++j) {
                s[j] += p[j];
            }
        }
        Matrix next(b, dim);
        for (size_t c = 0; c < b; ++c) {
            auto row = next.row(c);
            if (counts[c] == 0) {
                std::copy_n(res.centroids.row(c).begin(), dim, row.begin());
                continue;
            }
            double inv = 1.0 / static_cast<double>(counts[c]);
            for (size_t j = 0; j < dim; ++j) {
                row[j] = static_cast<float>(sums[c * dim + j] * inv);
            }
        }

        // Empty clusters respawn at the point farthest from its own centroid.
        bool any_empty = std::find(counts.begin(), counts.end(), 0) != counts.end();
        if (any_empty) {
            for (size_t i = 0; i < n; ++i) {
                dist[i] = squared_l2(points.row(i), next.row(res.assignments[i]));
            }
            for (size_t c = 0; c < b; ++c) {
                if (counts[c] != 0) {
                    continue;
                }
                size_t far = 0;
                for (size_t i = 1; i < n; ++i) {
                    if (dist[i] > dist[far]) {
                        far = i;
                    }
                }
                if (dist[far] <= 0.0F) {
                    break;
                }
                std::copy_n(points.row(far).begin(), dim, next.row(c).begin());
                dist[far] = 0.0F;
            }
        }

        float shift = 0.0F;
        for (size_t c = 0; c < b; ++c) {
            shift = std::max(shift, squared_l2(res.centroids.row(c), next.row(c)));
        }
        res.centroids = std::move(next);
        if (std::sqrt(shift) < params.tol) {
            break;
        }
    }

    assign_all(points, res.centroids, res.assignments, dist);
    res.sse = 0.0;
    for (float d : dist) {
        res.sse += d;
    }
    return res;
}

void
Codebook::check_code(const Code& code) const {
    require(code.size() == layers(),
            "code length " + std::to_string(code.size()) + " does not match codebook layers " +
                std::to_string(layers()));
    for (uint16_t d : code.digits) {
        require(d < codewords(), "code digit " + std::to_string(d) + " out of range");
    }
}

// ---- RqCodebook ----

RqCodebook::RqCodebook(size_t m, size_t b, size_t dim) : b_(b), dim_(dim) {
    require(m >= 1 && b >= 1 && dim >= 1, "codebook shape must be positive");
    layers_.assign(m, Matrix(b, dim));
}

RqCodebook::RqCodebook(std::vector<Matrix> layers) : layers_(std::move(layers)) {
    require(!layers_.empty(), "codebook needs at least one layer");
    b_ = layers_[0].rows();
    dim_ = layers_[0].cols();
    require(b_ >= 1 && dim_ >= 1, "codebook shape must be positive");
    for (const auto& l : layers_) {
        require(l.rows() == b_ && l.cols() == dim_, "codebook layers differ in shape");
        for (float v : l.data()) {
            require(std::isfinite(v), "non-finite codeword");
        }
    }
}

Code
RqCodebook::encode(std::span<const float> v) const {
    require(v.size() == dim_, "dimension mismatch");
    Code code;
    code.digits.resize(layers_.size());
    std::vector<float> residual(v.begin(), v.end());
    for (size_t t = 0; t < layers_.size(); ++t) {
        size_t j = nearest_row(residual, layers_[t]);
        code.digits[t] = static_cast<uint16_t>(j);
        auto c = layers_[t].row(j);
        for (size_t k = 0; k < dim_; ++k) {
            residual[k] -= c[k];
        }
    }
    return code;
}

std::vector<float>
RqCodebook::reconstruct(const Code& code) const {
    check_code(code);
    std::vector<float> out(dim_, 0.0F);
    for (size_t t = 0; t < layers_.size(); ++t) {
        auto c = layers_[t].row(code.digits[t]);
        for (size_t k = 0; k < dim_; ++k) {
            out[k] += c[k];
        }
    }
    return out;
}

bool
RqCodebook::child_point(const Code& prefix,
                        uint16_t digit,
                        std::span<const float> parent_point,
                        std::span<float> out) const {
    size_t t = prefix.size();
    if (t >= layers_.size() || digit >= b_) {
        return false;
    }
    auto c = layers_[t].row(digit);
    for (size_t k = 0; k < dim_; ++k) {
        out[k] = parent_point[k] + c[k];
    }
    return true;
}

// ---- HkmeansTree ----

HkmeansTree::HkmeansTree(size_t m, size_t b, size_t dim) : m_(m), b_(b), dim_(dim), centroids_(1, dim) {
    require(m >= 1 && b >= 1 && dim >= 1, "codebook shape must be positive");
    nodes_.push_back({});
}

void
HkmeansTree::set_children(size_t parent, const Matrix& child_centroids) {
    require(parent < nodes_.size() && nodes_[parent].child_count == 0, "node already has children");
    require(child_centroids.rows() >= 1 && child_centroids.rows() <= b_, "child count out of range");
    require(child_centroids.cols() == dim_, "dimension mismatch");
    nodes_[parent].first_child = static_cast<uint32_t>(nodes_.size());
    nodes_[parent].child_count = static_cast<uint32_t>(child_centroids.rows());
    for (size_t r = 0; r < child_centroids.rows(); ++r) {
        nodes_.push_back({});
        centroids_.append_row(child_centroids.row(r));
    }
}

int64_t
HkmeansTree::find(const Code& prefix) const {
    size_t node = 0;
    for (uint16_t d : prefix.digits) {
        if (d >= nodes_[node].child_count) {
            return -1;
        }
        node = nodes_[node].first_child + d;
    }
    return static_cast<int64_t>(node);
}

Code
HkmeansTree::encode(std::span<const float> v) const {
    require(v.size() == dim_, "dimension mismatch");
    Code code;
    size_t node = 0;
    for (size_t t = 0; t < m_; ++t) {
        const Node& nd = nodes_[node];
        require(nd.child_count > 0, "incomplete hierarchical kmeans tree", ErrorCode::kFormat);
        size_t best = 0;
        float bd = std::numeric_limits<float>::infinity();
        for (size_t c = 0; c < nd.child_count; ++c) {
            float d = squared_l2(v, centroids_.row(nd.first_child + c));
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        code.digits.push_back(static_cast<uint16_t>(best));
        node = nd.first_child + best;
    }
    return code;
}

std::vector<float>
HkmeansTree::reconstruct(const Code& code) const {
    check_code(code);
    int64_t node = find(code);
    require(node >= 0, "code " + code.to_string() + " not present in tree");
    auto c = centroids_.row(static_cast<size_t>(node));
    return {c.begin(), c.end()};
}

bool
HkmeansTree::child_point(const Code& prefix,
                         uint16_t digit,
                         std::span<const float> /*parent_point*/,
                         std::span<float> out) const {
    if (prefix.size() >= m_) {
        return false;
    }
    int64_t node = find(prefix);
    if (node < 0 || digit >= nodes_[node].child_count) {
        return false;
    }
    auto c = centroids_.row(nodes_[node].first_child + digit);
    std::copy(c.begin(), c.end(), out.begin());
    return true;
}

std::vector<uint32_t>
HkmeansTree::node_layout() const {
    std::vector<uint32_t> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) {
        out.push_back(n.child_count);
    }
    return out;
}

// ---- builders ----

QuantizerBuild
build_rq(const Matrix& x, size_t m, size_t b, const KmeansParams& params) {
    require(m >= 1, "m must be >= 1");
    require(b >= 1 && b <= 65536, "b must be in [1, 65536]");
    require(!x.empty(), "empty input");
    size_t n = x.rows();
    size_t dim = x.cols();

    Matrix residual = x;
    std::vector<Matrix> layers;
    QuantizerBuild out;
    out.codes.assign(n, Code{std::vector<uint16_t>(m, 0)});
    std::vector<float> zeros(dim, 0.0F);
    for (size_t t = 0; t < m; ++t) {
        KmeansParams p = params;
        p.seed = params.seed + t;
        KmeansResult km = kmeans(residual, b, p);
        double sse = 0.0;
        for (size_t i = 0; i < n; ++i) {
            uint32_t a = km.assignments[i];
            out.codes[i].digits[t] = static_cast<uint16_t>(a);
            auto r = residual.row(i);
            auto c = km.centroids.row(a);
            for (size_t k = 0; k < dim; ++k) {
                r[k] -= c[k];
            }
            sse += squared_l2(r, zeros);
        }
        out.report.per_layer_sse.push_back(sse);
        layers.push_back(std::move(km.centroids));
    }
    out.report.total_sse = out.report.per_layer_sse.back();
    out.codebook = std::make_shared<RqCodebook>(std::move(layers));
    return out;
}

QuantizerBuild
build_hierarchical_kmeans(const Matrix& x, size_t m, size_t b, const KmeansParams& params) {
    require(m >= 1, "m must be >= 1");
    require(b >= 1 && b <= 65536, "b must be in [1, 65536]");
    require(!x.empty(), "empty input");
    size_t n = x.rows();
    size_t dim = x.cols();

    auto tree = std::make_shared<HkmeansTree>(m, b, dim);
    QuantizerBuild out;
    out.codes.assign(n, Code{std::vector<uint16_t>(m, 0)});

    struct Group {
        size_t node;
        std::vector<uint32_t> members;
    };
    std::vector<Group> groups;
    groups.push_back({0, {}});
    groups[0].members.resize(n);
    for (size_t i = 0; i < n; ++i) {
        groups[0].members[i] = static_cast<uint32_t>(i);
    }

    for (size_t t = 0; t < m; ++t) {
        KmeansParams p = params;
        p.seed = params.seed + t;
        std::vector<Group> next;
        for (auto& g : groups) {
            Matrix children;
            std::vector<uint32_t> local;
            if (g.members.empty()) {
                // Keep every path m digits long: an empty branch gets one
                // child sitting on its own centroid.
                children = Matrix(1, dim);
                auto c = tree->centroid(g.node);
                std::copy(c.begin(), c.end(), children.row(0).begin());
            } else if (t == 0 || g.members.size() > b) {
                Matrix sub(g.members.size(), dim);
                for (size_t i = 0; i < g.members.size(); ++i) {
                    auto src = x.row(g.members[i]);
                    std::copy(src.begin(), src.end(), sub.row(i).begin());
                }
                KmeansResult km = kmeans(sub, b, p);
                children = std::move(km.centroids);
                local = std::move(km.assignments);
            } else {
                children = Matrix(g.members.size(), dim);
                for (size_t i = 0; i < g.members.size(); ++i) {
                    auto src = x.row(g.members[i]);
                    std::copy(src.begin(), src.end(), children.row(i).begin());
                }
                local.resize(g.members.size());
                for (size_t i = 0; i < g.members.size(); ++i) {
                    local[i] = static_cast<uint32_t>(nearest_row(x.row(g.members[i]), children));
                }
            }
            tree->set_children(g.node, children);
            size_t first = tree->node(g.node).first_child;
            std::vector<Group> kids(children.rows());
            for (size_t c = 0; c < kids.size(); ++c) {
                kids[c].node = first + c;
            }
            for (size_t i = 0; i < g.members.size(); ++i) {
                uint32_t doc = g.members[i];
                out.codes[doc].digits[t] = static_cast<uint16_t>(local[i]);
                kids[local[i]].members.push_back(doc);
            }
            for (auto& k : kids) {
                next.push_back(std::move(k));
            }
        }
        double sse = 0.0;
        for (const auto& g : next) {
            auto c = tree->centroid(g.node);
            for (uint32_t doc : g.members) {
                sse += squared_l2(x.row(doc), c);
            }
        }
        out.report.per_layer_sse.push_back(sse);
        groups = std::move(next);
    }
    out.report.total_sse = out.report.per_layer_sse.back();
    out.codebook = std::move(tree);
    return out;
}

QuantizerBuild
build_quantizer(BuilderKind kind, const Matrix& x, size_t m, size_t b, const KmeansParams& params) {
    return kind == BuilderKind::kResidual ? build_rq(x, m, b, params) : build_hierarchical_kmeans(x, m, b, params);
}

double
quantization_error(const Matrix& x, const std::vector<Code>& codes, const Codebook& cb) {
    require(codes.size() == x.rows(), "code count does not match vector count");
    require(x.cols() == cb.dim(), "dimension mismatch");
    double total = 0.0;
    for (size_t i = 0; i < x.rows(); ++i) {
        auto rec = cb.reconstruct(codes[i]);
        total += squared_l2(x.row(i), rec);
    }
    return total;
}

}  // namespace mevi
