#include "kgcot/embed_index.hpp"

#include "kgcot/errors.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace kgcot {

namespace {

constexpr char kIndexMagic[8] = {'K', 'G', 'C', 'I', 'D', 'X', '0', '1'};
constexpr std::uint32_t kIndexVersion = 1;

bool is_zero(const EmbeddingVector& v) {
    for (float x : v.values) {
        if (x != 0.0f) return false;
    }
    return true;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in, const std::string& where) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw BuildError(where + ": truncated index file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& where) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw BuildError(where + ": truncated index file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

EmbedIndex EmbedIndex::build(const KnowledgeGraph& graph, Gateway& gateway) {
    EmbedIndex index;
    index.embedder_id_ = gateway.embed_identity();
    if (graph.node_count() == 0) {
        return index;
    }
    index.ids_.reserve(graph.node_count());
    index.names_.reserve(graph.node_count());
    std::vector<std::string> texts;
    texts.reserve(graph.node_count());
    for (const Node& n : graph.nodes()) {
        index.ids_.push_back(n.id);
        index.names_.push_back(n.name);
        texts.push_back(n.name);
    }
    try {
        index.vectors_ = gateway.embed(texts);
    } catch (const ProviderError& e) {
        throw BuildError(std::string("index build failed: ") + e.what());
    }
    index.dimension_ = index.vectors_.front().dimension();
    for (std::size_t i = 0; i < index.vectors_.size(); ++i) {
        if (index.vectors_[i].dimension() != index.dimension_) {
            throw BuildError("index build: dimension mismatch at node " +
                             std::to_string(index.ids_[i]));
        }
        if (is_zero(index.vectors_[i])) {
            throw BuildError("index build: zero vector for node name '" + index.names_[i] + "'");
        }
    }
    return index;
}

CandidateSet EmbedIndex::top_k(const std::string& text, std::size_t k, Gateway& gateway) const {
    if (k == 0) {
        throw Error("top_k: k must be >= 1");
    }
    if (ids_.empty()) {
        throw Error("top_k: index is empty");
    }
    const EmbeddingVector query = gateway.embed({text}).front();

    std::vector<std::size_t> order(ids_.size());
    std::vector<double> scores(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        order[i] = i;
        scores[i] = cosine(query, vectors_[i]);
    }
    const std::size_t take = std::min(k, order.size());
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids_[a] < ids_[b];
    };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      better);

    CandidateSet set;
    set.query = text;
    set.entries.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t row = order[i];
        set.entries.push_back(Candidate{ids_[row], names_[row], scores[row]});
    }
    return set;
}

const EmbeddingVector* EmbedIndex::vector_for(NodeId id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return nullptr;
    return &vectors_[static_cast<std::size_t>(it - ids_.begin())];
}

void EmbedIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw BuildError("cannot open index file for writing: " + path.string());
    }
    out.write(kIndexMagic, 8);
    write_u32(out, kIndexVersion);
    write_u32(out, static_cast<std::uint32_t>(dimension_));
    write_u64(out, ids_.size());
    write_u32(out, static_cast<std::uint32_t>(embedder_id_.size()));
    out.write(embedder_id_.data(), static_cast<std::streamsize>(embedder_id_.size()));
    for (const EmbeddingVector& vec : vectors_) {
        static_assert(sizeof(float) == 4);
        out.write(reinterpret_cast<const char*>(vec.values.data()),
                  static_cast<std::streamsize>(vec.values.size() * sizeof(float)));
    }
    if (!out) {
        throw BuildError("failed writing index file: " + path.string());
    }
}

EmbedIndex EmbedIndex::load(const std::filesystem::path& path, const KnowledgeGraph& graph) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw BuildError("cannot open index file: " + path.string());
    }
    const std::string where = path.string();
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kIndexMagic, 8) != 0) {
        throw BuildError(where + ": not an embedding index file (bad magic)");
    }
    const std::uint32_t version = read_u32(in, where);
    if (version != kIndexVersion) {
        throw BuildError(where + ": unsupported index version " + std::to_string(version));
    }
    EmbedIndex index;
    index.dimension_ = read_u32(in, where);
    const std::uint64_t count = read_u64(in, where);
    const std::uint32_t id_len = read_u32(in, where);
    index.embedder_id_.resize(id_len);
    if (id_len > 0 && !in.read(index.embedder_id_.data(), id_len)) {
        throw BuildError(where + ": truncated index file");
    }
    if (count != graph.node_count()) {
        throw BuildError(where + ": index holds " + std::to_string(count) + " rows but graph has " +
                         std::to_string(graph.node_count()) + " nodes");
    }
    index.ids_.reserve(count);
    index.names_.reserve(count);
    for (const Node& n : graph.nodes()) {
        index.ids_.push_back(n.id);
        index.names_.push_back(n.name);
    }
    index.vectors_.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        index.vectors_[i].values.resize(index.dimension_);
        if (!in.read(reinterpret_cast<char*>(index.vectors_[i].values.data()),
                     static_cast<std::streamsize>(index.dimension_ * sizeof(float)))) {
            throw BuildError(where + ": truncated index file");
        }
    }
    return index;
}

} // namespace kgcot
