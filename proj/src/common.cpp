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

#include "mevi/common.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>
#include <limits>
#include <unordered_set>

namespace mevi {

Matrix::Matrix(size_t rows, size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data size does not match shape");
}

void
Matrix::append_row(std::span<const float> v) {
    if (rows_ == 0 && cols_ == 0) {
        cols_ = v.size();
    }
    require(v.size() == cols_, "dimension mismatch");
    data_.insert(data_.end(), v.begin(), v.end());
    ++rows_;
}

void
EmbeddingSet::validate() const {
    require(vectors.rows() == ids.size(), "vector count does not match id count", ErrorCode::kFormat);
    require(ids.empty() || vectors.cols() > 0, "dimension must be positive", ErrorCode::kFormat);
    for (float x : vectors.data()) {
        require(std::isfinite(x), "non-finite value", ErrorCode::kFormat);
    }
    std::unordered_set<std::string_view> seen;
    seen.reserve(ids.size());
    for (const auto& id : ids) {
        require(seen.insert(id).second, "duplicate id: " + id, ErrorCode::kDuplicate);
    }
}

float
squared_l2(std::span<const float> a, std::span<const float> b) {
    // Eight lanes, combined in a fixed order.
    float lane[8] = {};
    size_t n = a.size();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (size_t j = 0; j < 8; ++j) {
            float d = a[i + j] - b[i + j];
            lane[j] += d * d;
        }
    }
    for (; i < n; ++i) {
        float d = a[i] - b[i];
        lane[0] += d * d;
    }
    return ((lane[0] + lane[4]) + (lane[1] + lane[5])) + ((lane[2] + lane[6]) + (lane[3] + lane[7]));
}

double
dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

size_t
nearest_row(std::span<const float> x, const Matrix& centroids, float* best_dist) {
    size_t best = 0;
    float bd = std::numeric_limits<float>::infinity();
    for (size_t c = 0; c < centroids.rows(); ++c) {
        float d = squared_l2(x, centroids.row(c));
        if (d < bd) {
            bd = d;
            best = c;
        }
    }
    if (best_dist != nullptr) {
        *best_dist = bd;
    }
    return best;
}

namespace {

std::mutex g_log_mu;
LogSink g_sink;
std::atomic<int> g_level{static_cast<int>(LogLevel::kWarn)};
std::atomic<size_t> g_threads{1};

}  // namespace

void
set_log_sink(LogSink sink) {
    std::lock_guard lock(g_log_mu);
    g_sink = std::move(sink);
}

void
set_log_level(LogLevel level) {
    g_level = static_cast<int>(level);
}

void
log(LogLevel level, std::string_view msg) {
    if (static_cast<int>(level) < g_level.load()) {
        return;
    }
    std::lock_guard lock(g_log_mu);
    if (g_sink) {
        g_sink(level, msg);
        return;
    }
    const char* tag = level == LogLevel::kWarn ? "warning" : (level == LogLevel::kInfo ? "info" : "debug");
    std::cerr << "mevi: " << tag << ": " << msg << '\n';
}

void
set_num_threads(size_t n) {
    g_threads = n == 0 ? std::max<size_t>(1, std::thread::hardware_concurrency()) : n;
}

size_t
num_threads() {
    return g_threads.load();
}

void
parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    size_t workers = std::min(num_threads(), n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto body = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next = n;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (size_t w = 1; w < workers; ++w) {
        pool.emplace_back(body);
    }
    body();
    for (auto& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

uint64_t
fnv1a64(std::span<const std::byte> bytes, uint64_t seed) {
    uint64_t h = seed;
    for (std::byte b : bytes) {
        h ^= static_cast<uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace mevi
