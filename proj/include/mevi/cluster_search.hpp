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
#include <string>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/quantizer.hpp"

namespace mevi {

struct RankedCluster {
    Code code;
    double score = 0.0;

    bool
    operator==(const RankedCluster&) const = default;
};

// Best first; codes are distinct.
using RankedClusters = std::vector<RankedCluster>;

struct BeamSearchParams {
    size_t beam_width = 0;  // 0 selects max(k, 100)
    size_t k = 100;
    bool constrained = true;
};

size_t
effective_beam_width(const BeamSearchParams& params);

// Stand-in for a learned decoder: prefixes are scored by the negative squared
// distance between the query and the prefix's partial reconstruction. Each
// of the m steps extends every beam by every digit (trie children only, when
// constrained) and keeps the best beam_width. Ties go to the
// lexicographically smaller code.
RankedClusters
beam_search_clusters(std::span<const float> query,
                     const Codebook& codebook,
                     const ClusterIndex& index,
                     const BeamSearchParams& params);

// Tab-separated `<query_id>\t<d>-<d>-...-<d>\t<rank>\t<score>`; ranks are
// 0-based and contiguous per query.
std::map<std::string, RankedClusters>
load_external_rankings(const std::string& path, size_t m, size_t b);

std::map<std::string, RankedClusters>
parse_external_rankings(std::istream& in, size_t m, size_t b);

void
write_external_rankings(std::ostream& out, const std::map<std::string, RankedClusters>& rankings);

}  // namespace mevi
