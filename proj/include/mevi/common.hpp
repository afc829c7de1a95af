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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mevi {

// Numeric values are part of the C ABI (see mevi.h); keep them in sync.
enum class ErrorCode : int {
    kOk = 0,
    kInvalidArgument = 1,
    kIo = 2,
    kBadMagic = 3,
    kUnsupportedVersion = 4,
    kChecksumMismatch = 5,
    kTruncated = 6,
    kFormat = 7,
    kNotFound = 8,
    kDuplicate = 9,
    kLocked = 10,
    kRuntime = 11,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode
    code() const noexcept {
        return code_;
    }

private:
    ErrorCode code_;
};

[[noreturn]] inline void
fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void
require(bool cond, const std::string& what, ErrorCode code = ErrorCode::kInvalidArgument) {
    if (!cond) {
        throw Error(code, what);
    }
}

// Dense row-major float matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0F) {}
    Matrix(size_t rows, size_t cols, std::vector<float> data);

    size_t
    rows() const noexcept {
        return rows_;
    }
    size_t
    cols() const noexcept {
        return cols_;
    }
    bool
    empty() const noexcept {
        return rows_ == 0;
    }

    std::span<const float>
    row(size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<float>
    row(size_t i) {
        return {data_.data() + i * cols_, cols_};
    }

    const std::vector<float>&
    data() const noexcept {
        return data_;
    }
    std::vector<float>&
    data() noexcept {
        return data_;
    }

    void
    append_row(std::span<const float> v);

    bool
    operator==(const Matrix&) const = default;

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<float> data_;
};

// Document or query vectors with their external ids (row i <-> ids[i]).
struct EmbeddingSet {
    Matrix vectors;
    std::vector<std::string> ids;

    size_t
    size() const noexcept {
        return ids.size();
    }
    size_t
    dim() const noexcept {
        return vectors.cols();
    }

    // Throws on duplicate ids, non-finite components or shape mismatch.
    void
    validate() const;
};

// Squared Euclidean distance; every clustering and encoding path goes through
// this one routine so build-time and query-time assignments agree bit for bit.
float
squared_l2(std::span<const float> a, std::span<const float> b);

double
dot(std::span<const float> a, std::span<const float> b);

// Index of the nearest row of `centroids` (lowest index on ties).
size_t
nearest_row(std::span<const float> x, const Matrix& centroids, float* best_dist = nullptr);

// Logging sink; by default warnings go to stderr.
enum class LogLevel { kDebug, kInfo, kWarn };
using LogSink = std::function<void(LogLevel, std::string_view)>;
void
set_log_sink(LogSink sink);
void
set_log_level(LogLevel level);
void
log(LogLevel level, std::string_view msg);
inline void
warn(std::string_view msg) {
    log(LogLevel::kWarn, msg);
}

// Worker count used by parallel_for; 0 means hardware concurrency.
void
set_num_threads(size_t n);
size_t
num_threads();

// Runs fn(i) for i in [0, n) over the configured worker count. fn must not
// throw across threads; the first exception is rethrown on the caller.
void
parallel_for(size_t n, const std::function<void(size_t)>& fn);

// 64-bit FNV-1a.
uint64_t
fnv1a64(std::span<const std::byte> bytes, uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace mevi
