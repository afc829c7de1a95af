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

#include "mevi/cluster_index.hpp"

#include <algorithm>

namespace mevi {

uint32_t
CodeTrie::alloc() {
    if (!free_.empty()) {
        uint32_t id = free_.back();
        free_.pop_back();
        nodes_[id] = Node{};
        return id;
    }
    nodes_.emplace_back();
    return static_cast<uint32_t>(nodes_.size() - 1);
}

void
CodeTrie::insert(const Code& code) {
    uint32_t node = kRoot;
    ++nodes_[node].count;
    bool fresh = false;
    for (uint16_t d : code.digits) {
        auto it = nodes_[node].children.find(d);
        uint32_t child;
        if (it == nodes_[node].children.end()) {
            child = alloc();
            nodes_[node].children.emplace(d, child);
            fresh = true;
        } else {
            child = it->second;
        }
        node = child;
        ++nodes_[node].count;
    }
    if (fresh) {
        ++leaves_;
    }
}

void
CodeTrie::erase(const Code& code) {
    std::vector<uint32_t> path{kRoot};
    for (uint16_t d : code.digits) {
        auto it = nodes_[path.back()].children.find(d);
        require(it != nodes_[path.back()].children.end(), "trie path missing for " + code.to_string(),
                ErrorCode::kRuntime);
        path.push_back(it->second);
    }
    for (uint32_t n : path) {
        --nodes_[n].count;
    }
    if (nodes_[path.back()].count == 0 && path.size() > 1) {
        --leaves_;
    }
    for (size_t i = path.size() - 1; i > 0; --i) {
        if (nodes_[path[i]].count != 0) {
            break;
        }
        nodes_[path[i - 1]].children.erase(code.digits[i - 1]);
        free_.push_back(path[i]);
    }
}

std::optional<uint32_t>
CodeTrie::find(const Code& prefix) const {
    uint32_t node = kRoot;
    if (nodes_[node].count == 0) {
        return std::nullopt;
    }
    for (uint16_t d : prefix.digits) {
        auto it = nodes_[node].children.find(d);
        if (it == nodes_[node].children.end()) {
            return std::nullopt;
        }
        node = it->second;
    }
    return node;
}

ClusterIndex
ClusterIndex::build(const std::vector<Code>& codes, size_t m) {
    ClusterIndex idx(m);
    for (const auto& c : codes) {
        idx.add(c);
    }
    return idx;
}

void
ClusterIndex::check_length(const Code& code) const {
    require(code.size() == m_, "inconsistent code length: expected " + std::to_string(m_) + ", got " +
                                   std::to_string(code.size()));
}

Ordinal
ClusterIndex::add(const Code& code) {
    Ordinal ord = live_.size();
    add_at(ord, code);
    return ord;
}

void
ClusterIndex::add_at(Ordinal ordinal, const Code& code) {
    check_length(code);
    require(ordinal >= live_.size() || !live_[ordinal], "ordinal already live", ErrorCode::kDuplicate);
    if (ordinal >= live_.size()) {
        live_.resize(ordinal + 1, false);
        doc_code_.resize(ordinal + 1);
    }
    live_[ordinal] = true;
    doc_code_[ordinal] = code;
    ++live_count_;
    auto& list = postings_[code];
    list.insert(std::upper_bound(list.begin(), list.end(), ordinal), ordinal);
    trie_.insert(code);
}

void
ClusterIndex::remove(Ordinal ordinal) {
    require(is_live(ordinal), "unknown ordinal " + std::to_string(ordinal), ErrorCode::kNotFound);
    const Code& code = doc_code_[ordinal];
    auto it = postings_.find(code);
    auto& list = it->second;
    list.erase(std::lower_bound(list.begin(), list.end(), ordinal));
    if (list.empty()) {
        postings_.erase(it);
    }
    trie_.erase(code);
    live_[ordinal] = false;
    --live_count_;
}

void
ClusterIndex::add_dead(Ordinal ordinal, const Code& code) {
    check_length(code);
    require(ordinal >= live_.size() || !live_[ordinal], "ordinal already live", ErrorCode::kDuplicate);
    if (ordinal >= live_.size()) {
        live_.resize(ordinal + 1, false);
        doc_code_.resize(ordinal + 1);
    }
    doc_code_[ordinal] = code;
}

std::vector<Ordinal>
ClusterIndex::members(const Code& code) const {
    check_length(code);
    const auto* p = posting(code);
    return p == nullptr ? std::vector<Ordinal>{} : *p;
}

const std::vector<Ordinal>*
ClusterIndex::posting(const Code& code) const {
    auto it = postings_.find(code);
    return it == postings_.end() ? nullptr : &it->second;
}

const Code&
ClusterIndex::code_of(Ordinal ordinal) const {
    require(is_live(ordinal), "unknown ordinal " + std::to_string(ordinal), ErrorCode::kNotFound);
    return doc_code_[ordinal];
}

std::vector<std::pair<Ordinal, Code>>
ClusterIndex::live_codes() const {
    std::vector<std::pair<Ordinal, Code>> out;
    out.reserve(live_count_);
    for (Ordinal o = 0; o < live_.size(); ++o) {
        if (live_[o]) {
            out.emplace_back(o, doc_code_[o]);
        }
    }
    return out;
}

}  // namespace mevi
