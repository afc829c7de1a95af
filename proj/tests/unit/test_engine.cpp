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

#include <atomic>
#include <catch2/catch_amalgamated.hpp>
#include <thread>

#include "mevi/engine.hpp"
#include "mevi/experiment.hpp"
#include "support.hpp"

using namespace mevi;
using namespace mevi::testing;

namespace {

SyntheticData
corpus(uint64_t seed, size_t n = 1500) {
    SyntheticSpec s;
    s.n_docs = n;
    s.dim = 16;
    s.n_clusters_true = 16;
    s.n_queries = 30;
    s.seed = seed;
    return gen_synthetic(s);
}

BuildParams
params(uint64_t seed) {
    BuildParams p;
    p.m = 3;
    p.b = 8;
    p.kmeans.seed = seed;
    return p;
}

SearchOptions
mode(SearchMode m, size_t k = 10, size_t K = 50) {
    SearchOptions o;
    o.mode = m;
    o.ensemble.k = k;
    o.ensemble.K = K;
    return o;
}

}  // namespace

TEST_CASE("build registers every document", "[engine]") {
    SyntheticData d = corpus(1);
    QuantizationReport report;
    Engine e = Engine::build(d.docs, params(1), &report);
    REQUIRE(e.store().live_count() == d.docs.size());
    REQUIRE(e.clusters().live_count() == d.docs.size());
    REQUIRE(report.per_layer_sse.size() == 3);
    for (Ordinal o = 0; o < d.docs.size(); ++o) {
        REQUIRE(e.codebook().encode(d.docs.vectors.row(o)) == e.clusters().code_of(o));
    }
    EmbeddingSet empty;
    empty.vectors = Matrix(0, 16);
    REQUIRE_THROWS_AS(Engine::build(empty, params(1)), Error);
}

TEST_CASE("an added document is retrievable through its own cluster", "[engine]") {
    SyntheticData d = corpus(2);
    Engine e = Engine::build(d.docs, params(2));
    Matrix v = random_matrix(1, 16, 5);
    Ordinal o = e.add_document("fresh", v.row(0));
    const Code& c = e.clusters().code_of(o);
    REQUIRE(c == e.codebook().encode(v.row(0)));
    RankedClusters own{{c, 0.0}};
    auto got = search_clusters_only(e.context(), v.row(0), own, 1000);
    REQUIRE(std::any_of(got.begin(), got.end(), [&](const ScoredDoc& s) { return s.ordinal == o; }));
    REQUIRE_THROWS_AS(e.add_document("fresh", v.row(0)), Error);
    std::vector<float> wrong(3, 0.0F);
    REQUIRE_THROWS_AS(e.add_document("other", wrong), Error);
}

TEST_CASE("a strict reconstruction joins its cluster", "[engine]") {
    SyntheticData d = corpus(3);
    Engine e = Engine::build(d.docs, params(3));
    // Use a populated code whose reconstruction encodes back to itself.
    size_t checked = 0;
    for (const auto& [code, members] : e.clusters().postings()) {
        std::vector<float> r = e.codebook().reconstruct(code);
        if (e.codebook().encode(r) != code) {
            continue;
        }
        Ordinal o = e.add_document("r" + code.to_string(), r);
        REQUIRE(e.clusters().code_of(o) == code);
        if (++checked == 10) {
            break;
        }
    }
    REQUIRE(checked > 0);
}

TEST_CASE("remove then add of the same id gives a new ordinal", "[engine]") {
    SyntheticData d = corpus(4);
    Engine e = Engine::build(d.docs, params(4));
    e.remove_document("d5");
    REQUIRE_THROWS_AS(e.remove_document("d5"), Error);
    REQUIRE_THROWS_AS(e.remove_document("nope"), Error);
    Ordinal o = e.add_document("d5", d.docs.vectors.row(5));
    REQUIRE(o == d.docs.size());
    REQUIRE(e.store().find("d5") == std::optional<Ordinal>{o});
}

TEST_CASE("add then remove leaves every result unchanged", "[engine]") {
    SyntheticData d = corpus(5, 800);
    Engine e = Engine::build(d.docs, params(5));
    e.enable_hnsw({8, 60, 1});
    std::vector<SearchMode> modes{SearchMode::kExact, SearchMode::kClusters, SearchMode::kEnsemble, SearchMode::kHnsw};
    std::vector<Run> before;
    for (SearchMode m : modes) {
        SearchOptions o = mode(m);
        o.dense.ef_search = 800;
        before.push_back(e.search_batch(d.queries, o));
    }
    Matrix extra = random_matrix(20, 16, 8);
    for (size_t i = 0; i < extra.rows(); ++i) {
        e.add_document("x" + std::to_string(i), d.queries.vectors.row(i));
    }
    for (size_t i = 0; i < extra.rows(); ++i) {
        e.remove_document("x" + std::to_string(i));
    }
    for (size_t i = 0; i < modes.size(); ++i) {
        SearchOptions o = mode(modes[i]);
        o.dense.ef_search = 800;
        Run after = e.search_batch(d.queries, o);
        REQUIRE(after.size() == before[i].size());
        for (const auto& [qid, entries] : after) {
            const auto& prev = before[i].at(qid);
            REQUIRE(entries.size() == prev.size());
            for (size_t r = 0; r < entries.size(); ++r) {
                REQUIRE(entries[r].doc_id == prev[r].doc_id);
                REQUIRE(entries[r].score == prev[r].score);
            }
        }
    }
}

TEST_CASE("removed documents never surface in any mode", "[engine]") {
    SyntheticData d = corpus(6, 2000);
    Engine e = Engine::build(d.docs, params(6));
    e.enable_hnsw({8, 60, 2});
    std::set<std::string> removed;
    for (size_t i = 0; i < d.docs.size(); i += 10) {
        e.remove_document(d.docs.ids[i]);
        removed.insert(d.docs.ids[i]);
    }
    for (SearchMode m : {SearchMode::kExact, SearchMode::kClusters, SearchMode::kEnsemble, SearchMode::kHnsw}) {
        SearchOptions o = mode(m, 100, 1000);
        o.dense.ef_search = 1000;
        Run run = e.search_batch(d.queries, o);
        for (const auto& [qid, entries] : run) {
            for (const auto& en : entries) {
                REQUIRE_FALSE(removed.contains(en.doc_id));
            }
        }
    }
}

TEST_CASE("compact drops tombstones and keeps results", "[engine]") {
    SyntheticData d = corpus(7, 1000);
    Engine e = Engine::build(d.docs, params(7));
    for (size_t i = 0; i < d.docs.size(); i += 3) {
        e.remove_document(d.docs.ids[i]);
    }
    Run before = e.search_batch(d.queries, mode(SearchMode::kEnsemble));
    e.compact();
    REQUIRE(e.store().size() == e.store().live_count());
    REQUIRE(e.clusters().ordinal_count() == e.store().size());
    Run after = e.search_batch(d.queries, mode(SearchMode::kEnsemble));
    for (const auto& [qid, entries] : after) {
        const auto& prev = before.at(qid);
        REQUIRE(entries.size() == prev.size());
        for (size_t r = 0; r < entries.size(); ++r) {
            REQUIRE(entries[r].doc_id == prev[r].doc_id);
        }
    }
}

TEST_CASE("k beyond the populated clusters is clamped with a warning", "[engine]") {
    SyntheticData d = corpus(8, 300);
    Engine e = Engine::build(d.docs, params(8));
    std::vector<std::string> warnings;
    set_log_sink([&](LogLevel l, std::string_view m) {
        if (l == LogLevel::kWarn) {
            warnings.emplace_back(m);
        }
    });
    SearchOptions o = mode(SearchMode::kClusters, 100000, 300);
    Run run = e.search_batch(d.queries, o);
    set_log_sink(nullptr);
    REQUIRE(warnings.size() == 1);
    REQUIRE(run.begin()->second.size() == 300);
}

TEST_CASE("hnsw mode needs a graph", "[engine]") {
    SyntheticData d = corpus(9, 300);
    Engine e = Engine::build(d.docs, params(9));
    REQUIRE_THROWS_AS(e.search_batch(d.queries, mode(SearchMode::kHnsw)), Error);
    e.enable_hnsw({});
    REQUIRE_NOTHROW(e.search_batch(d.queries, mode(SearchMode::kHnsw)));
}

TEST_CASE("external rankings replace beam search", "[engine]") {
    SyntheticData d = corpus(10, 500);
    Engine e = Engine::build(d.docs, params(10));
    std::map<std::string, RankedClusters> ext;
    const Code& first = e.clusters().postings().begin()->first;
    for (const auto& qid : d.queries.ids) {
        ext[qid] = {{first, 1.0}};
    }
    SearchOptions o = mode(SearchMode::kClusters, 1, 1000);
    o.external = &ext;
    Run run = e.search_batch(d.queries, o);
    for (const auto& [qid, entries] : run) {
        REQUIRE(entries.size() == e.clusters().members(first).size());
    }
    ext.erase(d.queries.ids[0]);
    REQUIRE_THROWS_AS(e.search_batch(d.queries, o), Error);
}

TEST_CASE("concurrent readers with a writer", "[engine]") {
    SyntheticData d = corpus(11, 1000);
    Engine e = Engine::build(d.docs, params(11));
    std::atomic<bool> stop{false};
    std::atomic<size_t> searches{0};
    std::atomic<bool> bad{false};
    std::vector<std::thread> readers;
    for (int t = 0; t < 3; ++t) {
        readers.emplace_back([&, t] {
            size_t i = static_cast<size_t>(t);
            while (!stop.load()) {
                auto q = d.queries.vectors.row(i % d.queries.size());
                auto res = e.search(d.queries.ids[i % d.queries.size()], q, mode(SearchMode::kEnsemble));
                if (res.empty()) {
                    bad = true;
                }
                ++searches;
                ++i;
            }
        });
    }
    while (searches.load() < 3) {
        std::this_thread::yield();
    }
    Matrix extra = random_matrix(200, 16, 3);
    for (size_t i = 0; i < extra.rows(); ++i) {
        std::this_thread::yield();
        e.add_document("w" + std::to_string(i), extra.row(i));
        if (i % 2 == 0) {
            e.remove_document("d" + std::to_string(i));
        }
    }
    stop = true;
    for (auto& th : readers) {
        th.join();
    }
    REQUIRE_FALSE(bad.load());
    REQUIRE(searches.load() > 0);
    REQUIRE(e.store().live_count() == 1000 + 200 - 100);
}

TEST_CASE("search modes by name", "[engine]") {
    REQUIRE(parse_search_mode("exact") == SearchMode::kExact);
    REQUIRE(parse_search_mode("hnsw") == SearchMode::kHnsw);
    REQUIRE(parse_search_mode("clusters") == SearchMode::kClusters);
    REQUIRE(parse_search_mode("ensemble") == SearchMode::kEnsemble);
    REQUIRE_THROWS_AS(parse_search_mode("bm25"), Error);
}
