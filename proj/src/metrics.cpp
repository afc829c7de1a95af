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

#include "mevi/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mevi/common.hpp"

namespace mevi {

std::string
MetricSpec::name() const {
    return (kind == MetricKind::kMrr ? "mrr@" : "recall@") + std::to_string(k);
}

MetricSpec
parse_metric_spec(std::string_view token) {
    size_t at = token.find('@');
    require(at != token.npos, "metric '" + std::string(token) + "' must look like name@K");
    std::string_view name = token.substr(0, at);
    std::string_view num = token.substr(at + 1);
    MetricSpec spec;
    if (name == "mrr") {
        spec.kind = MetricKind::kMrr;
    } else if (name == "recall") {
        spec.kind = MetricKind::kRecall;
    } else {
        fail(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
    }
    auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), spec.k);
    require(ec == std::errc() && p == num.data() + num.size() && spec.k >= 1,
            "bad cutoff in metric '" + std::string(token) + "'");
    return spec;
}

std::vector<MetricSpec>
parse_metric_list(std::string_view csv) {
    std::vector<MetricSpec> out;
    size_t pos = 0;
    while (pos <= csv.size()) {
        size_t comma = csv.find(',', pos);
        std::string_view tok = csv.substr(pos, comma == csv.npos ? csv.npos : comma - pos);
        require(!tok.empty(), "empty entry in metric list '" + std::string(csv) + "'");
        out.push_back(parse_metric_spec(tok));
        if (comma == csv.npos) {
            break;
        }
        pos = comma + 1;
    }
    require(!out.empty(), "empty metric list");
    return out;
}

double
query_recall(const std::vector<RunEntry>& ranked, const std::set<std::string>& relevant, size_t k) {
    if (relevant.empty()) {
        return 0.0;
    }
    size_t hits = 0;
    size_t n = std::min(k, ranked.size());
    for (size_t i = 0; i < n; ++i) {
        hits += relevant.count(ranked[i].doc_id);
    }
    return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double
query_reciprocal_rank(const std::vector<RunEntry>& ranked, const std::set<std::string>& relevant, size_t k) {
    size_t n = std::min(k, ranked.size());
    for (size_t i = 0; i < n; ++i) {
        if (relevant.contains(ranked[i].doc_id)) {
            return 1.0 / static_cast<double>(i + 1);
        }
    }
    return 0.0;
}

MetricValue
evaluate(const Run& run, const Qrels& qrels, const MetricSpec& spec) {
    require(spec.k >= 1, "K must be >= 1");
    MetricValue mv;
    double sum = 0.0;
    // std::map iteration fixes the summation order by query id.
    for (const auto& [qid, ranked] : run) {
        auto it = qrels.find(qid);
        if (it == qrels.end() || it->second.empty()) {
            ++mv.skipped;
            continue;
        }
        sum += spec.kind == MetricKind::kRecall ? query_recall(ranked, it->second, spec.k)
                                                : query_reciprocal_rank(ranked, it->second, spec.k);
        ++mv.evaluated;
    }
    require(mv.evaluated > 0, "run and qrels share no judged queries");
    if (mv.skipped > 0) {
        warn(std::to_string(mv.skipped) + " run queries have no relevance judgments; skipped");
    }
    mv.value = sum / static_cast<double>(mv.evaluated);
    return mv;
}

double
recall_at_k(const Run& run, const Qrels& qrels, size_t k) {
    return evaluate(run, qrels, {MetricKind::kRecall, k}).value;
}

double
mrr_at_k(const Run& run, const Qrels& qrels, size_t k) {
    return evaluate(run, qrels, {MetricKind::kMrr, k}).value;
}

namespace {

std::vector<std::string>
split_ws(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok) {
        out.push_back(tok);
    }
    return out;
}

template <typename T>
T
parse_number(const std::string& s, const std::string& where) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    require(ec == std::errc() && p == s.data() + s.size(), "bad number '" + s + "' at " + where, ErrorCode::kFormat);
    return v;
}

std::ifstream
open_in(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path, ErrorCode::kIo);
    return in;
}

}  // namespace

Qrels
parse_qrels(std::istream& in) {
    Qrels q;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto f = split_ws(line);
        if (f.empty()) {
            continue;
        }
        std::string where = "line " + std::to_string(lineno);
        require(f.size() == 4, "malformed qrels " + where, ErrorCode::kFormat);
        auto rel = parse_number<long>(f[3], where);
        auto& set = q[f[0]];
        if (rel > 0) {
            set.insert(f[2]);
        }
    }
    return q;
}

Qrels
read_qrels(const std::string& path) {
    auto in = open_in(path);
    try {
        return parse_qrels(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void
write_qrels(std::ostream& out, const Qrels& qrels) {
    for (const auto& [qid, docs] : qrels) {
        for (const auto& d : docs) {
            out << qid << " 0 " << d << " 1\n";
        }
    }
}

Run
parse_run(std::istream& in) {
    struct Row {
        long rank;
        RunEntry entry;
    };
    std::map<std::string, std::vector<Row>> rows;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto f = split_ws(line);
        if (f.empty()) {
            continue;
        }
        std::string where = "line " + std::to_string(lineno);
        require(f.size() == 6, "malformed run " + where, ErrorCode::kFormat);
        rows[f[0]].push_back({parse_number<long>(f[3], where), {f[2], parse_number<double>(f[4], where)}});
    }
    Run run;
    for (auto& [qid, list] : rows) {
        std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
        auto& out = run[qid];
        for (auto& r : list) {
            out.push_back(std::move(r.entry));
        }
    }
    return run;
}

Run
read_run(const std::string& path) {
    auto in = open_in(path);
    try {
        return parse_run(in);
    } catch (const Error& e) {
        throw Error(e.code(), path + ": " + e.what());
    }
}

void
write_run(std::ostream& out, const Run& run, const std::string& tag) {
    char score[64];
    for (const auto& [qid, list] : run) {
        for (size_t r = 0; r < list.size(); ++r) {
            std::snprintf(score, sizeof(score), "%.6f", list[r].score);
            out << qid << " Q0 " << list[r].doc_id << ' ' << (r + 1) << ' ' << score << ' ' << tag << '\n';
        }
    }
}

}  // namespace mevi
