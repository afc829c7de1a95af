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
#include <map>
#include <optional>
#include <vector>

#include "mevi/quantizer.hpp"

namespace mevi {

using Ordinal = uint64_t;

// Prefix tree over code digits. A node exists iff at least one live
// document's code passes through it.
class CodeTrie {
public:
    static constexpr uint32_t kRoot = 0;

    CodeTrie() : nodes_(1) {}

    void
    insert(const Code& code);
    // Decrements counts along the path and prunes nodes that reach zero.
    void
    erase(const Code& code);

    // Node for `prefix`, or nullopt when no live document extends it.
    std::optional<uint32_t>
    find(const Code& prefix) const;
    bool
    contains(const Code& prefix) const {
        return find(prefix).has_value();
    }

    const std::map<uint16_t, uint32_t>&
    children(uint32_t node) const {
        return nodes_[node].children;
    }
    uint64_t
    count(uint32_t node) const {
        return nodes_[node].count;
    }

    // Number of root-to-leaf paths, i.e. non-empty clusters.
    size_t
    leaf_count() const {
        return leaves_;
    }

private:
    struct Node {
        std::map<uint16_t, uint32_t> children;
        uint64_t count = 0;
    };

    uint32_t
    alloc();

    std::vector<Node> nodes_;
    std::vector<uint32_t> free_;
    size_t leaves_ = 0;
};

// Full-code posting lists over internal ordinals. Documents are in the same
// cluster only when their codes are identical. Removal tombstones the
// ordinal; ordinals are never reused.
class ClusterIndex {
public:
    explicit ClusterIndex(size_t m = 0) : m_(m) {}

    // Ordinal i gets codes[i].
    static ClusterIndex
    build(const std::vector<Code>& codes, size_t m);

    // Appends a new ordinal; returns it.
    Ordinal
    add(const Code& code);
    // Registers `code` at an explicit ordinal (used when loading with gaps).
    void
    add_at(Ordinal ordinal, const Code& code);
    void
    remove(Ordinal ordinal);
    // Records a tombstoned ordinal with its former code (used when loading).
    void
    add_dead(Ordinal ordinal, const Code& code);

    // Live ordinals with exactly this code, ascending.
    std::vector<Ordinal>
    members(const Code& code) const;
    const std::vector<Ordinal>*
    posting(const Code& code) const;

    bool
    is_live(Ordinal ordinal) const {
        return ordinal < live_.size() && live_[ordinal];
    }
    const Code&
    code_of(Ordinal ordinal) const;
    // Code recorded for an ordinal, including tombstoned ones.
    const Code&
    recorded_code(Ordinal ordinal) const {
        return doc_code_.at(ordinal);
    }

    size_t
    layers() const {
        return m_;
    }
    // Ordinal space, including tombstones.
    size_t
    ordinal_count() const {
        return live_.size();
    }
    size_t
    live_count() const {
        return live_count_;
    }
    size_t
    cluster_count() const {
        return postings_.size();
    }

    const CodeTrie&
    trie() const {
        return trie_;
    }
    const std::map<Code, std::vector<Ordinal>>&
    postings() const {
        return postings_;
    }

    // Live (ordinal, code) pairs in ordinal order.
    std::vector<std::pair<Ordinal, Code>>
    live_codes() const;

private:
    void
    check_length(const Code& code) const;

    size_t m_;
    std::map<Code, std::vector<Ordinal>> postings_;
    CodeTrie trie_;
    std::vector<Code> doc_code_;
    std::vector<bool> live_;
    size_t live_count_ = 0;
};

}  // namespace mevi
