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

#include "mevi/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mevi {

namespace fs = std::filesystem;

namespace {

void
put_u16(Bytes& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void
put_u32(Bytes& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void
put_u64(Bytes& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

void
put_f32(Bytes& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

void
put_matrix(Bytes& out, const Matrix& m) {
    for (float v : m.data()) {
        put_f32(out, v);
    }
}

class Reader {
public:
    Reader(std::string_view data, std::string name) : data_(data), name_(std::move(name)) {}

    void
    expect_magic(std::string_view magic) {
        need(magic.size());
        if (data_.substr(0, magic.size()) != magic) {
            fail(ErrorCode::kBadMagic, name_ + ": bad magic (expected " + std::string(magic) + ")");
        }
        pos_ += magic.size();
    }

    void
    expect_version() {
        uint32_t v = u32();
        if (v != kFormatVersion) {
            fail(ErrorCode::kUnsupportedVersion, name_ + ": version unsupported (" + std::to_string(v) + ")");
        }
    }

    uint16_t
    u16() {
        need(2);
        uint16_t v = static_cast<uint16_t>(byte(0) | (byte(1) << 8));
        pos_ += 2;
        return v;
    }

    uint32_t
    u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(byte(i)) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    uint64_t
    u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(byte(i)) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float
    f32() {
        return std::bit_cast<float>(u32());
    }

    size_t
    pos() const {
        return pos_;
    }

    // Total size implied by the header must match the buffer exactly.
    void
    expect_total(uint64_t header_bytes, uint64_t elems, uint64_t elem_size) const {
        uint64_t remaining = data_.size() - header_bytes;
        if (elem_size != 0 && elems > remaining / elem_size) {
            fail(ErrorCode::kTruncated, name_ + ": truncated file");
        }
        if (elems * elem_size != remaining) {
            fail(ErrorCode::kFormat, name_ + ": trailing bytes after payload");
        }
    }

    const std::string&
    name() const {
        return name_;
    }

private:
    uint32_t
    byte(size_t i) const {
        return static_cast<unsigned char>(data_[pos_ + i]);
    }
    void
    need(size_t n) const {
        if (data_.size() - pos_ < n) {
            fail(ErrorCode::kTruncated, name_ + ": truncated file");
        }
    }

    std::string_view data_;
    std::string name_;
    size_t pos_ = 0;
};

constexpr size_t kEmbeddingHeader = 8 + 4 + 4 + 8;

struct EmbeddingLayout {
    uint32_t dim;
    uint64_t count;
};

EmbeddingLayout
embedding_layout(std::string_view bytes, const std::string& name) {
    Reader r(bytes, name);
    r.expect_magic(kEmbeddingMagic);
    r.expect_version();
    EmbeddingLayout l{r.u32(), r.u64()};
    require(l.dim >= 1 || l.count == 0, name + ": dimension must be positive", ErrorCode::kFormat);
    r.expect_total(kEmbeddingHeader, l.count, 4ULL * l.dim);
    return l;
}

struct CodebookLayout {
    bool tree;
    uint32_t m, b, dim;
    uint64_t nodes;
};

CodebookLayout
codebook_layout(std::string_view bytes, const std::string& name) {
    Reader r(bytes, name);
    CodebookLayout l{};
    if (bytes.substr(0, kTreeMagic.size()) == kTreeMagic) {
        l.tree = true;
        r.expect_magic(kTreeMagic);
    } else {
        r.expect_magic(kCodebookMagic);
    }
    r.expect_version();
    l.m = r.u32();
    l.b = r.u32();
    l.dim = r.u32();
    require(l.m >= 1 && l.b >= 1 && l.b <= 65536 && l.dim >= 1, name + ": invalid codebook shape",
            ErrorCode::kFormat);
    if (l.tree) {
        l.nodes = r.u64();
        require(l.nodes >= 1, name + ": empty tree", ErrorCode::kFormat);
        r.expect_total(r.pos(), l.nodes, 4 + 4ULL * l.dim);
    } else {
        uint64_t elems = static_cast<uint64_t>(l.m) * l.b;
        r.expect_total(r.pos(), elems, 4ULL * l.dim);
    }
    return l;
}

struct CodesLayout {
    uint32_t m;
    uint64_t count;
};

CodesLayout
codes_layout(std::string_view bytes, const std::string& name) {
    Reader r(bytes, name);
    r.expect_magic(kCodesMagic);
    r.expect_version();
    CodesLayout l{r.u32(), r.u64()};
    require(l.m >= 1, name + ": code length must be positive", ErrorCode::kFormat);
    r.expect_total(r.pos(), l.count, 2ULL * l.m);
    return l;
}

CodesLayout
index_layout(std::string_view bytes, const std::string& name) {
    Reader r(bytes, name);
    r.expect_magic(kIndexMagic);
    r.expect_version();
    CodesLayout l{r.u32(), r.u64()};
    require(l.m >= 1, name + ": code length must be positive", ErrorCode::kFormat);
    r.expect_total(r.pos(), l.count, 8 + 2ULL * l.m);
    return l;
}

std::string
hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

uint64_t
file_checksum(std::string_view bytes) {
    return fnv1a64(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

}  // namespace

// ---- embeddings ----

Bytes
encode_embeddings(const Matrix& m) {
    Bytes out;
    out.reserve(kEmbeddingHeader + m.data().size() * 4);
    out.append(kEmbeddingMagic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(m.cols()));
    put_u64(out, m.rows());
    put_matrix(out, m);
    return out;
}

Matrix
decode_embeddings(std::string_view bytes, const std::string& name) {
    EmbeddingLayout l = embedding_layout(bytes, name);
    Reader r(bytes.substr(kEmbeddingHeader), name);
    std::vector<float> data(l.count * l.dim);
    for (auto& v : data) {
        v = r.f32();
    }
    return {l.count, l.dim, std::move(data)};
}

uint64_t
embedding_payload_checksum(std::string_view bytes) {
    require(bytes.size() >= kEmbeddingHeader, "embedding buffer too short", ErrorCode::kTruncated);
    return file_checksum(bytes.substr(kEmbeddingHeader));
}

// ---- codebook ----

Bytes
encode_codebook(const Codebook& cb) {
    Bytes out;
    if (const auto* rq = dynamic_cast<const RqCodebook*>(&cb)) {
        out.append(kCodebookMagic);
        put_u32(out, kFormatVersion);
        put_u32(out, static_cast<uint32_t>(rq->layers()));
        put_u32(out, static_cast<uint32_t>(rq->codewords()));
        put_u32(out, static_cast<uint32_t>(rq->dim()));
        for (size_t t = 0; t < rq->layers(); ++t) {
            put_matrix(out, rq->layer(t));
        }
        return out;
    }
    const auto& tree = dynamic_cast<const HkmeansTree&>(cb);
    out.append(kTreeMagic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(tree.layers()));
    put_u32(out, static_cast<uint32_t>(tree.codewords()));
    put_u32(out, static_cast<uint32_t>(tree.dim()));
    put_u64(out, tree.node_count());
    for (size_t i = 0; i < tree.node_count(); ++i) {
        put_u32(out, tree.node(i).child_count);
    }
    for (size_t i = 0; i < tree.node_count(); ++i) {
        for (float v : tree.centroid(i)) {
            put_f32(out, v);
        }
    }
    return out;
}

std::shared_ptr<const Codebook>
decode_codebook(std::string_view bytes, const std::string& name) {
    CodebookLayout l = codebook_layout(bytes, name);
    Reader r(bytes, name);
    r.expect_magic(l.tree ? kTreeMagic : kCodebookMagic);
    r.expect_version();
    r.u32();
    r.u32();
    r.u32();
    auto read_finite = [&](Matrix& m) {
        for (auto& v : m.data()) {
            v = r.f32();
            require(std::isfinite(v), name + ": non-finite codeword", ErrorCode::kFormat);
        }
    };
    if (!l.tree) {
        std::vector<Matrix> layers;
        for (uint32_t t = 0; t < l.m; ++t) {
            Matrix m(l.b, l.dim);
            read_finite(m);
            layers.push_back(std::move(m));
        }
        return std::make_shared<RqCodebook>(std::move(layers));
    }

    r.u64();
    std::vector<uint32_t> child_counts(l.nodes);
    for (auto& c : child_counts) {
        c = r.u32();
        require(c <= l.b, name + ": child count exceeds b", ErrorCode::kFormat);
    }
    Matrix centroids(l.nodes, l.dim);
    read_finite(centroids);

    auto tree = std::make_shared<HkmeansTree>(l.m, l.b, l.dim);
    // Breadth-first: children of node i are the next child_counts[i] nodes.
    std::vector<uint32_t> depth(l.nodes, 0);
    size_t next = 1;
    for (size_t i = 0; i < l.nodes; ++i) {
        uint32_t c = child_counts[i];
        if (depth[i] == l.m) {
            require(c == 0, name + ": leaf node has children", ErrorCode::kFormat);
            continue;
        }
        require(c >= 1, name + ": interior node without children", ErrorCode::kFormat);
        require(next + c <= l.nodes, name + ": tree layout inconsistent", ErrorCode::kFormat);
        Matrix kids(c, l.dim);
        for (uint32_t k = 0; k < c; ++k) {
            depth[next + k] = depth[i] + 1;
            auto src = centroids.row(next + k);
            std::copy(src.begin(), src.end(), kids.row(k).begin());
        }
        tree->set_children(i, kids);
        next += c;
    }
    require(next == l.nodes, name + ": tree layout inconsistent", ErrorCode::kFormat);
    return tree;
}

// ---- codes ----

Bytes
encode_codes(const std::vector<Code>& codes, size_t m) {
    Bytes out;
    out.append(kCodesMagic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(m));
    put_u64(out, codes.size());
    for (const auto& c : codes) {
        require(c.size() == m, "inconsistent code length");
        for (uint16_t d : c.digits) {
            put_u16(out, d);
        }
    }
    return out;
}

std::vector<Code>
decode_codes(std::string_view bytes, const std::string& name) {
    CodesLayout l = codes_layout(bytes, name);
    Reader r(bytes.substr(8 + 4 + 4 + 8), name);
    std::vector<Code> out(l.count);
    for (auto& c : out) {
        c.digits.resize(l.m);
        for (auto& d : c.digits) {
            d = r.u16();
        }
    }
    return out;
}

// ---- index ----

Bytes
encode_index(const ClusterIndex& index) {
    Bytes out;
    out.append(kIndexMagic);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<uint32_t>(index.layers()));
    auto live = index.live_codes();
    put_u64(out, live.size());
    for (const auto& [o, code] : live) {
        put_u64(out, o);
        for (uint16_t d : code.digits) {
            put_u16(out, d);
        }
    }
    return out;
}

std::vector<std::pair<Ordinal, Code>>
decode_index(std::string_view bytes, size_t* m_out, const std::string& name) {
    CodesLayout l = index_layout(bytes, name);
    Reader r(bytes.substr(8 + 4 + 4 + 8), name);
    std::vector<std::pair<Ordinal, Code>> out(l.count);
    Ordinal prev = 0;
    for (size_t i = 0; i < out.size(); ++i) {
        out[i].first = r.u64();
        require(i == 0 || out[i].first > prev, name + ": ordinals not strictly increasing", ErrorCode::kFormat);
        prev = out[i].first;
        out[i].second.digits.resize(l.m);
        for (auto& d : out[i].second.digits) {
            d = r.u16();
        }
    }
    if (m_out != nullptr) {
        *m_out = l.m;
    }
    return out;
}

// ---- ids ----

Bytes
encode_ids(const std::vector<std::string>& ids) {
    Bytes out;
    for (size_t i = 0; i < ids.size(); ++i) {
        require(ids[i].find_first_of("\t\n\r") == std::string::npos, "id contains tab or newline: " + ids[i]);
        out += std::to_string(i);
        out.push_back('\t');
        out += ids[i];
        out.push_back('\n');
    }
    return out;
}

namespace {

std::vector<std::string_view>
split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == text.npos ? text.npos : nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.push_back(line);
        if (nl == text.npos) {
            break;
        }
        pos = nl + 1;
    }
    while (!lines.empty() && lines.back().empty()) {
        lines.pop_back();
    }
    return lines;
}

}  // namespace

std::vector<std::string>
decode_ids(std::string_view text, const std::string& name) {
    std::vector<std::string> out;
    auto lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        size_t tab = line.find('\t');
        std::string where = name + ": line " + std::to_string(i + 1);
        require(tab != line.npos && tab + 1 < line.size(), where + ": expected <ordinal>\\t<id>", ErrorCode::kFormat);
        uint64_t ord = 0;
        auto [p, ec] = std::from_chars(line.data(), line.data() + tab, ord);
        require(ec == std::errc() && p == line.data() + tab && ord == i, where + ": ordinal out of sequence",
                ErrorCode::kFormat);
        out.emplace_back(line.substr(tab + 1));
    }
    return out;
}

std::vector<std::string>
decode_id_list(std::string_view text, const std::string& name) {
    auto lines = split_lines(text);
    if (!lines.empty() && lines.front().find('\t') != std::string_view::npos) {
        return decode_ids(text, name);
    }
    std::vector<std::string> out;
    for (size_t i = 0; i < lines.size(); ++i) {
        require(!lines[i].empty(), name + ": empty id at line " + std::to_string(i + 1), ErrorCode::kFormat);
        out.emplace_back(lines[i]);
    }
    return out;
}

// ---- files ----

Bytes
read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path, ErrorCode::kIo);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void
write_file_atomic(const std::string& path, std::string_view bytes) {
    std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), "cannot write " + tmp, ErrorCode::kIo);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        require(out.good(), "write failed: " + tmp, ErrorCode::kIo);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        fail(ErrorCode::kIo, "cannot rename " + tmp + " to " + path + ": " + ec.message());
    }
}

EmbeddingSet
load_embedding_set(const std::string& vectors_path, const std::string& ids_path) {
    EmbeddingSet set;
    set.vectors = decode_embeddings(read_file(vectors_path), vectors_path);
    set.ids = decode_id_list(read_file(ids_path), ids_path);
    require(set.ids.size() == set.vectors.rows(),
            ids_path + ": " + std::to_string(set.ids.size()) + " ids for " + std::to_string(set.vectors.rows()) +
                " vectors",
            ErrorCode::kFormat);
    set.validate();
    return set;
}

void
save_embedding_set(const EmbeddingSet& set, const std::string& vectors_path, const std::string& ids_path) {
    write_file_atomic(vectors_path, encode_embeddings(set.vectors));
    write_file_atomic(ids_path, encode_ids(set.ids));
}

// ---- manifest ----

const std::string&
Manifest::get(const std::string& key) const {
    auto it = entries.find(key);
    require(it != entries.end(), "manifest missing key '" + key + "'", ErrorCode::kFormat);
    return it->second;
}

uint64_t
Manifest::get_u64(const std::string& key) const {
    const std::string& v = get(key);
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc() && p == v.data() + v.size(), "manifest key '" + key + "' is not an integer",
            ErrorCode::kFormat);
    return out;
}

std::string
Manifest::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries) {
        out += k;
        out.push_back('=');
        out += v;
        out.push_back('\n');
    }
    return out;
}

Manifest
Manifest::parse(std::string_view text) {
    Manifest m;
    auto lines = split_lines(text);
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (line.empty() || line.front() == '#') {
            continue;
        }
        size_t eq = line.find('=');
        require(eq != line.npos && eq > 0, "manifest line " + std::to_string(i + 1) + " is not key=value",
                ErrorCode::kFormat);
        m.entries[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    return m;
}

std::string
possible_clusters(size_t m, size_t b) {
    unsigned __int128 total = 1;
    const unsigned __int128 cap = ~static_cast<unsigned __int128>(0) / 65536;
    for (size_t i = 0; i < m; ++i) {
        if (total > cap) {
            return "overflow";
        }
        total *= b;
    }
    std::string digits;
    do {
        digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(total % 10)));
        total /= 10;
    } while (total != 0);
    return digits;
}

// ---- locking ----

namespace {

std::string
normalized_dir(const std::string& dir) {
    fs::path p = fs::path(dir).lexically_normal();
    std::string s = p.string();
    while (s.size() > 1 && s.back() == '/') {
        s.pop_back();
    }
    return s;
}

}  // namespace

DirLock::DirLock(const std::string& dir) : path_(normalized_dir(dir) + ".lock") {
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            fail(ErrorCode::kLocked, "bundle is locked by another writer (" + path_ + ")");
        }
        fail(ErrorCode::kIo, "cannot create lock " + path_ + ": " + std::strerror(errno));
    }
    std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirLock::~DirLock() {
    ::unlink(path_.c_str());
}

// ---- bundle ----

namespace {

constexpr const char* kManifestFile = "manifest.txt";
constexpr const char* kEmbeddingsFile = "embeddings.bin";
constexpr const char* kIdsFile = "ids.tsv";
constexpr const char* kCodebookFile = "codebook.bin";
constexpr const char* kCodesFile = "codes.bin";
constexpr const char* kIndexFile = "index.bin";

std::string
timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void
check_checksum(const Manifest& m, const std::string& key, uint64_t actual, const std::string& file) {
    if (m.get(key) != hex64(actual)) {
        fail(ErrorCode::kChecksumMismatch, file + ": checksum mismatch");
    }
}

}  // namespace

void
save_bundle(const std::string& dir_in, const Engine& engine, const Manifest& extra) {
    std::string dir = normalized_dir(dir_in);
    DirLock lock(dir);

    const Codebook& cb = engine.codebook();
    const VectorStore& store = engine.store();
    const ClusterIndex& idx = engine.clusters();

    std::vector<Code> codes;
    codes.reserve(idx.ordinal_count());
    for (Ordinal o = 0; o < idx.ordinal_count(); ++o) {
        codes.push_back(idx.recorded_code(o));
    }

    Bytes emb = encode_embeddings(store.vectors());
    Bytes ids = encode_ids(store.ids());
    Bytes cbk = encode_codebook(cb);
    Bytes cod = encode_codes(codes, cb.layers());
    Bytes ind = encode_index(idx);

    Manifest m = extra;
    m.set("format", "mevi-bundle");
    m.set("builder", std::string(to_string(cb.kind())));
    m.set("m", std::to_string(cb.layers()));
    m.set("b", std::to_string(cb.codewords()));
    m.set("dim", std::to_string(cb.dim()));
    m.set("metric", std::string(to_string(engine.metric())));
    m.set("possible_clusters", possible_clusters(cb.layers(), cb.codewords()));
    m.set("nonempty_clusters", std::to_string(idx.cluster_count()));
    m.set("documents", std::to_string(store.size()));
    m.set("live_documents", std::to_string(store.live_count()));
    m.set("corpus_checksum", hex64(embedding_payload_checksum(emb)));
    m.set("checksum.ids", hex64(file_checksum(ids)));
    m.set("checksum.codebook", hex64(file_checksum(cbk)));
    m.set("checksum.codes", hex64(file_checksum(cod)));
    m.set("checksum.index", hex64(file_checksum(ind)));
    for (const char* f : {"embeddings", "codebook", "codes", "index"}) {
        m.set(std::string("version.") + f, std::to_string(kFormatVersion));
    }
    if (!m.has("created")) {
        m.set("created", timestamp());
    }

    fs::path target(dir);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    fs::remove_all(tmp);
    std::error_code ec;
    fs::create_directories(tmp, ec);
    require(!ec, "cannot create " + tmp.string() + ": " + ec.message(), ErrorCode::kIo);
    try {
        auto put = [&](const char* name, std::string_view bytes) {
            std::ofstream out(tmp / name, std::ios::binary | std::ios::trunc);
            require(out.good(), "cannot write " + (tmp / name).string(), ErrorCode::kIo);
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            out.flush();
            require(out.good(), "write failed: " + (tmp / name).string(), ErrorCode::kIo);
        };
        put(kEmbeddingsFile, emb);
        put(kIdsFile, ids);
        put(kCodebookFile, cbk);
        put(kCodesFile, cod);
        put(kIndexFile, ind);
        put(kManifestFile, m.serialize());
    } catch (...) {
        fs::remove_all(tmp);
        throw;
    }

    fs::path old = target;
    old += ".old." + std::to_string(::getpid());
    bool had_old = fs::exists(target);
    if (had_old) {
        fs::rename(target, old, ec);
        if (ec) {
            fs::remove_all(tmp);
            fail(ErrorCode::kIo, "cannot move aside " + target.string() + ": " + ec.message());
        }
    }
    fs::rename(tmp, target, ec);
    if (ec) {
        if (had_old) {
            fs::rename(old, target);
        }
        fs::remove_all(tmp);
        fail(ErrorCode::kIo, "cannot install bundle at " + target.string() + ": " + ec.message());
    }
    if (had_old) {
        fs::remove_all(old);
    }
}

LoadedBundle
load_bundle(const std::string& dir_in) {
    fs::path dir(normalized_dir(dir_in));
    require(fs::is_directory(dir), "bundle directory not found: " + dir.string(), ErrorCode::kIo);
    auto path = [&](const char* f) { return (dir / f).string(); };

    Manifest m = Manifest::parse(read_file(path(kManifestFile)));
    size_t man_m = m.get_u64("m");
    size_t man_b = m.get_u64("b");
    size_t man_dim = m.get_u64("dim");
    Metric metric = parse_metric(m.get("metric"));

    // Per file: magic, version, length, then checksum.
    Bytes emb = read_file(path(kEmbeddingsFile));
    EmbeddingLayout el = embedding_layout(emb, path(kEmbeddingsFile));
    require(el.dim == man_dim, path(kEmbeddingsFile) + ": dimension disagrees with manifest", ErrorCode::kFormat);
    check_checksum(m, "corpus_checksum", embedding_payload_checksum(emb), path(kEmbeddingsFile));

    Bytes cbk = read_file(path(kCodebookFile));
    CodebookLayout cl = codebook_layout(cbk, path(kCodebookFile));
    require(cl.m == man_m && cl.b == man_b && cl.dim == man_dim,
            path(kCodebookFile) + ": shape disagrees with manifest", ErrorCode::kFormat);
    check_checksum(m, "checksum.codebook", file_checksum(cbk), path(kCodebookFile));

    Bytes cod = read_file(path(kCodesFile));
    CodesLayout col = codes_layout(cod, path(kCodesFile));
    require(col.m == man_m && col.count == el.count, path(kCodesFile) + ": shape disagrees with manifest",
            ErrorCode::kFormat);
    check_checksum(m, "checksum.codes", file_checksum(cod), path(kCodesFile));

    Bytes ind = read_file(path(kIndexFile));
    CodesLayout il = index_layout(ind, path(kIndexFile));
    require(il.m == man_m && il.count <= el.count, path(kIndexFile) + ": shape disagrees with manifest",
            ErrorCode::kFormat);
    check_checksum(m, "checksum.index", file_checksum(ind), path(kIndexFile));

    Bytes ids_text = read_file(path(kIdsFile));
    check_checksum(m, "checksum.ids", file_checksum(ids_text), path(kIdsFile));

    Matrix vectors = decode_embeddings(emb, path(kEmbeddingsFile));
    auto codebook = decode_codebook(cbk, path(kCodebookFile));
    auto codes = decode_codes(cod, path(kCodesFile));
    auto live = decode_index(ind, nullptr, path(kIndexFile));
    auto ids = decode_ids(ids_text, path(kIdsFile));
    require(ids.size() == el.count, path(kIdsFile) + ": id count disagrees with embeddings", ErrorCode::kFormat);

    std::vector<bool> is_live(el.count, false);
    for (const auto& [o, code] : live) {
        require(o < el.count, path(kIndexFile) + ": ordinal out of range", ErrorCode::kFormat);
        require(code == codes[o], path(kIndexFile) + ": code disagrees with codes file", ErrorCode::kFormat);
        is_live[o] = true;
    }
    for (const auto& c : codes) {
        for (uint16_t d : c.digits) {
            require(d < man_b, path(kCodesFile) + ": digit out of range", ErrorCode::kFormat);
        }
    }

    VectorStore store(man_dim);
    ClusterIndex index(man_m);
    for (Ordinal o = 0; o < el.count; ++o) {
        if (is_live[o]) {
            store.add(ids[o], vectors.row(o));
            index.add_at(o, codes[o]);
        } else {
            store.add_dead(ids[o], vectors.row(o));
            index.add_dead(o, codes[o]);
        }
    }
    require(std::to_string(store.live_count()) == m.get("live_documents"),
            path(kManifestFile) + ": live document count disagrees with index", ErrorCode::kFormat);
    return {Engine(std::move(codebook), std::move(store), std::move(index), metric), std::move(m)};
}

}  // namespace mevi
