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

#include <map>
#include <set>
#include <string>
#include <vector>

namespace mevi {

struct RunEntry {
    std::string doc_id;
    double score = 0.0;

    bool
    operator==(const RunEntry&) const = default;
};

// query id -> ranked documents, best first.
using Run = std::map<std::string, std::vector<RunEntry>>;

// Binary relevance: query id -> relevant doc ids. Queries whose judgments
// are all zero are kept with an empty set and excluded from averages.
using Qrels = std::map<std::string, std::set<std::string>>;

enum class MetricKind { kRecall, kMrr };

struct MetricSpec {
    MetricKind kind = MetricKind::kMrr;
    size_t k = 10;

    std::string
    name() const;
};

// "mrr@10", "recall@1000"
MetricSpec
parse_metric_spec(std::string_view token);
std::vector<MetricSpec>
parse_metric_list(std::string_view csv);

struct MetricValue {
    double value = 0.0;
    size_t evaluated = 0;  // queries contributing to the mean
    size_t skipped = 0;    // run queries without judgments
};

MetricValue
evaluate(const Run& run, const Qrels& qrels, const MetricSpec& spec);

double
recall_at_k(const Run& run, const Qrels& qrels, size_t k);
double
mrr_at_k(const Run& run, const Qrels& qrels, size_t k);

// Per-query contributions used by the averages above.
double
query_recall(const std::vector<RunEntry>& ranked, const std::set<std::string>& relevant, size_t k);
double
query_reciprocal_rank(const std::vector<RunEntry>& ranked, const std::set<std::string>& relevant, size_t k);

// TREC formats.
Qrels
read_qrels(const std::string& path);
Qrels
parse_qrels(std::istream& in);
void
write_qrels(std::ostream& out, const Qrels& qrels);

Run
read_run(const std::string& path);
Run
parse_run(std::istream& in);
// `<qid> Q0 <doc> <rank> <score> <tag>`, rank 1-based, score "%.6f".
void
write_run(std::ostream& out, const Run& run, const std::string& tag);

}  // namespace mevi
