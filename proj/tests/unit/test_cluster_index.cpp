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

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "mevi/cluster_index.hpp"
#include "mevi/quantizer.hpp"
#include "support.hpp"

using namespace mevi;

namespace {

Code
C(std::string_view s) {
    return Code::parse(s);
}

// Every prefix of every live code, computed directly.
std::set<Code>
expected_prefixes(const ClusterIndex& idx) {
    std::set<Code> out;
    for (Ordinal o = 0; o < idx.ordinal_count(); ++o) {
        if (!idx.is_live(o)) {
            continue;
        }
        const Code& c = idx.recorded_code(o);
        for (size_t len = 1; len <= c.size(); ++len) {
            out.insert(Code{{c.digits.begin(), c.digits.begin() + static_cast<ptrdiff_t>(len)}});
        }
    }
    return out;
}

std::set<Code>
trie_prefixes(const CodeTrie& trie) {
    std::set<Code> out;
    std::vector<std::pair<uint32_t, Code>> stack{{CodeTrie::kRoot, Code{}}};
    while (!stack.empty()) {
        auto [node, prefix] = stack.back();
        stack.pop_back();
        for (auto [digit, child] : trie.children(node)) {
            Code next = prefix;
            next.digits.push_back(digit);
            out.insert(next);
            stack.emplace_back(child, next);
        }
    }
    return out;
}

void
check_invariants(const ClusterIndex& idx) {
    size_t total = 0;
    std::set<Ordinal> seen;
    for (const auto& [code, members] : idx.postings()) {
        REQUIRE(!members.empty());
        REQUIRE(std::is_sorted(members.begin(), members.end()));
        for (Ordinal o : members) {
            REQUIRE(idx.is_live(o));
            REQUIRE(idx.code_of(o) == code);
            REQUIRE(seen.insert(o).second);
        }
        total += members.size();
    }
    REQUIRE(total == idx.live_count());
    REQUIRE(trie_prefixes(idx.trie()) == expected_prefixes(idx));
    REQUIRE(idx.trie().leaf_count() == idx.cluster_count());
}

}  // namespace

TEST_CASE("build groups identical codes", "[cluster_index]") {
    ClusterIndex same = ClusterIndex::build({C("1-2"), C("1-2")}, 2);
    REQUIRE(same.cluster_count() == 1);
    REQUIRE(same.members(C("1-2")) == std::vector<Ordinal>{0, 1});
    check_invariants(same);

    ClusterIndex distinct = ClusterIndex::build({C("0-0"), C("0-1"), C("1-0")}, 2);
    REQUIRE(distinct.cluster_count() == 3);
    REQUIRE(distinct.members(C("0-1")) == std::vector<Ordinal>{1});
    REQUIRE(distinct.members(C("1-1")).empty());
    REQUIRE_THROWS_AS(distinct.members(C("1")), Error);
    check_invariants(distinct);

    REQUIRE_THROWS_AS(ClusterIndex::build({C("0-0"), C("0")}, 2), Error);
}

TEST_CASE("toy rq build partitions like the quantizer", "[cluster_index]") {
    Matrix x(4, 2, {0, 0, 0, 1, 10, 10, 10, 11});
    QuantizerBuild q = build_rq(x, 2, 2, {});
    ClusterIndex idx = ClusterIndex::build(q.codes, 2);
    REQUIRE(idx.cluster_count() == 4);
    QuantizerBuild one = build_rq(x, 1, 2, {});
    REQUIRE(ClusterIndex::build(one.codes, 1).cluster_count() == 2);
}

TEST_CASE("add to an empty index creates one path", "[cluster_index]") {
    ClusterIndex idx(3);
    Ordinal o = idx.add(C("4-0-2"));
    REQUIRE(o == 0);
    REQUIRE(trie_prefixes(idx.trie()) == std::set<Code>{C("4"), C("4-0"), C("4-0-2")});
    check_invariants(idx);
}

TEST_CASE("removing the last member prunes the trie path", "[cluster_index]") {
    ClusterIndex idx = ClusterIndex::build({C("0-1"), C("0-2"), C("0-2")}, 2);
    idx.remove(0);
    REQUIRE_FALSE(idx.trie().contains(C("0-1")));
    REQUIRE(idx.trie().contains(C("0")));
    REQUIRE(idx.members(C("0-1")).empty());
    check_invariants(idx);
    idx.remove(1);
    REQUIRE(idx.trie().contains(C("0-2")));
    idx.remove(2);
    REQUIRE_FALSE(idx.trie().contains(C("0")));
    REQUIRE(idx.cluster_count() == 0);
    REQUIRE_THROWS_AS(idx.remove(2), Error);
    REQUIRE_THROWS_AS(idx.remove(9), Error);
    check_invariants(idx);
}

TEST_CASE("ordinals are not reused", "[cluster_index]") {
    ClusterIndex idx = ClusterIndex::build({C("1-1")}, 2);
    idx.remove(0);
    Ordinal o = idx.add(C("1-1"));
    REQUIRE(o == 1);
    REQUIRE(idx.members(C("1-1")) == std::vector<Ordinal>{1});
    REQUIRE(idx.ordinal_count() == 2);
    REQUIRE(idx.live_count() == 1);
}

TEST_CASE("random add and remove keep every invariant", "[cluster_index]") {
    std::mt19937_64 rng(21);
    ClusterIndex idx(3);
    std::vector<Ordinal> live;
    for (int step = 0; step < 3000; ++step) {
        if (live.empty() || rng() % 3 != 0) {
            Code c{{static_cast<uint16_t>(rng() % 4), static_cast<uint16_t>(rng() % 4),
                    static_cast<uint16_t>(rng() % 4)}};
            live.push_back(idx.add(c));
        } else {
            size_t pick = rng() % live.size();
            idx.remove(live[pick]);
            live.erase(live.begin() + static_cast<ptrdiff_t>(pick));
        }
        if (step % 250 == 0) {
            check_invariants(idx);
        }
    }
    check_invariants(idx);
    REQUIRE(idx.live_count() == live.size());
}

TEST_CASE("trie counts track live documents", "[cluster_index]") {
    ClusterIndex idx = ClusterIndex::build({C("0-0"), C("0-1"), C("0-1"), C("2-0")}, 2);
    auto zero = idx.trie().find(C("0"));
    REQUIRE(zero.has_value());
    REQUIRE(idx.trie().count(*zero) == 3);
    REQUIRE(idx.trie().count(CodeTrie::kRoot) == 4);
    idx.remove(1);
    REQUIRE(idx.trie().count(*idx.trie().find(C("0"))) == 2);
}
