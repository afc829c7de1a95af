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

#include "mevi/cluster_search.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace mevi {

size_t
effective_beam_width(const BeamSearchParams& params) {
    return params.beam_width == 0 ? std::max<size_t>(params.k, 100) : params.beam_width;
}

namespace {

struct Beam {
    Code prefix;
    std::vector<float> point;
    double score = 0.0;
    uint32_t trie_node = CodeTrie::kRoot;
};

struct Candidate {
    uint32_t beam;
    uint16_t digit;
    double score;
};

}  // namespace

namespace {

double
squared_distance(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
        s += d * d;
    }
    return s;
}

}  // namespace

RankedClusters
beam_search_clusters(std::span<const float> query,
                     const Codebook& codebook,
                     const ClusterIndex& index,
                     const BeamSearchParams& params) {
    size_t width = effective_beam_width(params);
    require(query.size() == codebook.dim(), "dimension mismatch");
    require(params.k >= 1, "k must be >= 1");
    require(params.k <= width, "k (" + std::to_string(params.k) + ") exceeds beam width (" + std::to_string(width) + ")");
    if (params.constrained) {
        require(index.live_count() > 0, "empty index");
        require(index.layers() == codebook.layers(), "index and codebook disagree on layer count");
    }

    size_t dim = codebook.dim();
    const CodeTrie& trie = index.trie();
    std::vector<Beam> beams(1);
    beams[0].point.assign(dim, 0.0F);

    std::vector<float> scratch(dim);
    std::vector<Candidate> cands;
    for (size_t t = 0; t < codebook.layers(); ++t) {
        cands.clear();
        for (uint32_t bi = 0; bi < beams.size(); ++bi) {
            const Beam& beam = beams[bi];
            auto consider = [&](uint16_t digit) {
                if (codebook.child_point(beam.prefix, digit, beam.point, scratch)) {
                    cands.push_back({bi, digit, -squared_distance(query, scratch)});
                }
            };
            if (params.constrained) {
                for (const auto& [digit, _] : trie.children(beam.trie_node)) {
                    consider(digit);
                }
            } else {
                for (size_t d = 0; d < codebook.codewords(); ++d) {
                    consider(static_cast<uint16_t>(d));
                }
            }
        }
        // Ties: lexicographic on the extended code.
        auto better = [&](const Candidate& a, const Candidate& b) {
            if (a.score != b.score) {
                return a.score > b.score;
            }
            const auto& pa = beams[a.beam].prefix.digits;
            const auto& pb = beams[b.beam].prefix.digits;
            if (pa != pb) {
                return pa < pb;
            }
            return a.digit < b.digit;
        };
        size_t keep = std::min(width, cands.size());
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), better);

        std::vector<Beam> next;
        next.reserve(keep);
        for (size_t i = 0; i < keep; ++i) {
            const Candidate& c = cands[i];
            const Beam& parent = beams[c.beam];
            Beam nb;
            nb.prefix = parent.prefix;
            nb.prefix.digits.push_back(c.digit);
            nb.point.resize(dim);
            codebook.child_point(parent.prefix, c.digit, parent.point, nb.point);
            nb.score = c.score;
            if (params.constrained) {
                nb.trie_node = trie.children(parent.trie_node).at(c.digit);
            }
            next.push_back(std::move(nb));
        }
        beams = std::move(next);
        if (beams.empty()) {
            break;
        }
    }

    RankedClusters out;
    size_t k = std::min(params.k, beams.size());
    out.reserve(k);
    for (size_t i = 0; i < k; ++i) {
        out.push_back({std::move(beams[i].prefix), beams[i].score});
    }
    return out;
}

namespace {

std::string_view
trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

std::map<std::string, RankedClusters>
parse_external_rankings(std::istream& in, size_t m, size_t b) {
    struct Row {
        size_t rank;
        RankedCluster entry;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::map<std::string, std::set<Code>> seen;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = trim(line);
        if (sv.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        size_t pos = 0;
        while (true) {
            size_t tab = sv.find('\t', pos);
            fields.push_back(trim(sv.substr(pos, tab == sv.npos ? sv.npos : tab - pos)));
            if (tab == sv.npos) {
                break;
            }
            pos = tab + 1;
        }
        std::string where = "line " + std::to_string(lineno);
        require(fields.size() == 4 && !fields[0].empty(), "malformed ranking at " + where, ErrorCode::kFormat);
        Code code;
        try {
            code = Code::parse(fields[1]);
        } catch (const Error&) {
            fail(ErrorCode::kFormat, "malformed code at " + where);
        }
        require(code.size() == m, "code length mismatch at " + where, ErrorCode::kFormat);
        for (uint16_t d : code.digits) {
            require(d < b, "digit out of range at " + where, ErrorCode::kFormat);
        }
        size_t rank = 0;
        auto [rp, rec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), rank);
        require(rec == std::errc() && rp == fields[2].data() + fields[2].size(), "malformed rank at " + where,
                ErrorCode::kFormat);
        double score = 0.0;
        auto [sp, sec] = std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), score);
        require(sec == std::errc() && sp == fields[3].data() + fields[3].size(), "malformed score at " + where,
                ErrorCode::kFormat);
        std::string qid(fields[0]);
        require(seen[qid].insert(code).second,
                "duplicate (query, code) pair (" + qid + ", " + code.to_string() + ") at " + where,
                ErrorCode::kDuplicate);
        rows[qid].push_back({rank, {std::move(code), score}});
    }

    std::map<std::string, RankedClusters> out;
    for (auto& [qid, list] : rows) {
        std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
        RankedClusters rc;
        for (size_t i = 0; i < list.size(); ++i) {
            require(list[i].rank == i, "non-contiguous ranks for query " + qid, ErrorCode::kFormat);
            rc.push_back(std::move(list[i].entry));
        }
        out.emplace(qid, std::move(rc));
    }
    return out;
}

std::map<std::string, RankedClusters>
load_external_rankings(const std::string& path, size_t m, size_t b) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path, ErrorCode::kIo);
    try {
        return parse_external_rankings(in, m, b);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void
write_external_rankings(std::ostream& out, const std::map<std::string, RankedClusters>& rankings) {
    char buf[64];
    for (const auto& [qid, list] : rankings) {
        for (size_t r = 0; r < list.size(); ++r) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), list[r].score);
            out << qid << '\t' << list[r].code.to_string() << '\t' << r << '\t' << std::string_view(buf, end - buf)
                << '\n';
        }
    }
}

}  // namespace mevi
