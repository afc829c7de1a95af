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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mevi/cluster_index.hpp"
#include "mevi/engine.hpp"
#include "mevi/quantizer.hpp"

namespace mevi {

// Binary layouts (all integers and floats little-endian):
//   MEVIEMB1 u32 version, u32 dim, u64 count, count*dim f32 (row-major)
//   MEVICBK1 u32 version, u32 m, u32 b, u32 dim, m*b*dim f32
//   MEVIHKM1 u32 version, u32 m, u32 b, u32 dim, u64 nodes,
//            nodes*u32 child counts, nodes*dim f32 centroids (breadth-first)
//   MEVICOD1 u32 version, u32 m, u64 count, count*m u16
//   MEVIIDX1 u32 version, u32 m, u64 live, live*(u64 ordinal, m*u16)
inline constexpr uint32_t kFormatVersion = 1;
inline constexpr std::string_view kEmbeddingMagic = "MEVIEMB1";
inline constexpr std::string_view kCodebookMagic = "MEVICBK1";
inline constexpr std::string_view kTreeMagic = "MEVIHKM1";
inline constexpr std::string_view kCodesMagic = "MEVICOD1";
inline constexpr std::string_view kIndexMagic = "MEVIIDX1";

using Bytes = std::string;

Bytes
encode_embeddings(const Matrix& m);
// `name` labels errors.
Matrix
decode_embeddings(std::string_view bytes, const std::string& name = "embeddings");
// FNV-1a over the float payload of an encoded embedding file.
uint64_t
embedding_payload_checksum(std::string_view bytes);

Bytes
encode_codebook(const Codebook& cb);
std::shared_ptr<const Codebook>
decode_codebook(std::string_view bytes, const std::string& name = "codebook");

Bytes
encode_codes(const std::vector<Code>& codes, size_t m);
std::vector<Code>
decode_codes(std::string_view bytes, const std::string& name = "codes");

Bytes
encode_index(const ClusterIndex& index);
// Live (ordinal, code) records; the trie is rebuilt by the caller.
std::vector<std::pair<Ordinal, Code>>
decode_index(std::string_view bytes, size_t* m_out = nullptr, const std::string& name = "index");

// `<ordinal>\t<id>` per line.
Bytes
encode_ids(const std::vector<std::string>& ids);
std::vector<std::string>
decode_ids(std::string_view text, const std::string& name = "ids");
// Plain id list (one per line) or the ordinal form above.
std::vector<std::string>
decode_id_list(std::string_view text, const std::string& name = "ids");

Bytes
read_file(const std::string& path);
// Writes to a sibling temp file and renames into place.
void
write_file_atomic(const std::string& path, std::string_view bytes);

EmbeddingSet
load_embedding_set(const std::string& vectors_path, const std::string& ids_path);
void
save_embedding_set(const EmbeddingSet& set, const std::string& vectors_path, const std::string& ids_path);

// UTF-8 key=value lines.
struct Manifest {
    std::map<std::string, std::string> entries;

    const std::string&
    get(const std::string& key) const;
    uint64_t
    get_u64(const std::string& key) const;
    void
    set(const std::string& key, const std::string& value) {
        entries[key] = value;
    }
    bool
    has(const std::string& key) const {
        return entries.contains(key);
    }

    std::string
    serialize() const;
    static Manifest
    parse(std::string_view text);
};

// b^m as decimal text.
std::string
possible_clusters(size_t m, size_t b);

// Exclusive lock on `<dir>.lock`; released on destruction.
class DirLock {
public:
    explicit DirLock(const std::string& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock&
    operator=(const DirLock&) = delete;

private:
    std::string path_;
};

// Writes the bundle into a temp directory and swaps it into `dir`.
// `extra` entries are merged into the generated manifest.
void
save_bundle(const std::string& dir, const Engine& engine, const Manifest& extra = {});

struct LoadedBundle {
    Engine engine;
    Manifest manifest;
};

// Validates magics, versions, shapes against the manifest and checksums.
LoadedBundle
load_bundle(const std::string& dir);

}  // namespace mevi
