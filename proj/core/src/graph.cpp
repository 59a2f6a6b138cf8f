#include "kgcot/graph.hpp"

#include "kgcot/csv.hpp"
#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace kgcot {

namespace {

constexpr char kSnapshotMagic[8] = {'K', 'G', 'S', 'N', 'A', 'P', '0', '1'};
constexpr std::uint32_t kSnapshotVersion = 1;

[[noreturn]] void ingest_fail(const std::string& source, std::size_t line, const std::string& what) {
    std::ostringstream msg;
    msg << source << " line " << line << ": " << what;
    throw IngestError(msg.str());
}

NodeId parse_node_id(const std::string& raw, const std::string& source, std::size_t line,
                     const std::string& column) {
    const std::string t = trim(raw);
    NodeId value = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
        ingest_fail(source, line, "column '" + column + "' is not an integer node id: '" + raw + "'");
    }
    return value;
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

void write_i64(std::ostream& out, std::int64_t v) {
    write_u64(out, static_cast<std::uint64_t>(v));
}

void write_string(std::ostream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::istream& in, const std::string& source) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw IngestError(source + ": truncated snapshot");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& source) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IngestError(source + ": truncated snapshot");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

std::int64_t read_i64(std::istream& in, const std::string& source) {
    return static_cast<std::int64_t>(read_u64(in, source));
}

std::string read_string(std::istream& in, const std::string& source) {
    std::uint32_t len = read_u32(in, source);
    std::string s(len, '\0');
    if (len > 0 && !in.read(s.data(), len)) throw IngestError(source + ": truncated snapshot");
    return s;
}

struct EdgeKey {
    NodeId lo;
    NodeId hi;
    std::string relation;
    bool operator<(const EdgeKey& o) const {
        return std::tie(lo, hi, relation) < std::tie(o.lo, o.hi, o.relation);
    }
};

} // namespace

struct KnowledgeGraph::LoadedRows {
    std::map<NodeId, Node> nodes;
    std::map<EdgeKey, std::string> edges; // key -> display_relation (lexicographic min)
};

KnowledgeGraph KnowledgeGraph::load(const std::filesystem::path& path, const ColumnMap& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open graph file: " + path.string());
    }
    char magic[8] = {};
    in.read(magic, 8);
    const bool is_snapshot =
        in.gcount() == 8 && std::memcmp(magic, kSnapshotMagic, 8) == 0;
    in.clear();
    in.seekg(0);
    if (is_snapshot) {
        return read_snapshot(in, path.string());
    }
    return from_csv(in, columns, path.string());
}

KnowledgeGraph KnowledgeGraph::from_csv(std::istream& in, const ColumnMap& columns,
                                        const std::string& source_name) {
    CsvReader reader(in, source_name);
    auto header = reader.next();
    if (!header) {
        return {}; // empty file -> empty graph
    }

    std::unordered_map<std::string, std::size_t> header_pos;
    for (std::size_t i = 0; i < header->size(); ++i) {
        header_pos.emplace(trim((*header)[i]), i);
    }
    auto required = [&](const std::string& col) -> std::size_t {
        auto it = header_pos.find(col);
        if (it == header_pos.end()) {
            throw IngestError(source_name + ": missing required column '" + col + "' in header");
        }
        return it->second;
    };
    auto optional_col = [&](const std::string& col) -> std::optional<std::size_t> {
        auto it = header_pos.find(col);
        if (it == header_pos.end()) return std::nullopt;
        return it->second;
    };

    const std::size_t cx_id = required(columns.x_id);
    const std::size_t cx_name = required(columns.x_name);
    const std::size_t cx_type = required(columns.x_type);
    const std::size_t cy_id = required(columns.y_id);
    const std::size_t cy_name = required(columns.y_name);
    const std::size_t cy_type = required(columns.y_type);
    const std::size_t crel = required(columns.relation);
    const std::size_t cdisp = required(columns.display_relation);
    const auto cx_source = optional_col(columns.x_source);
    const auto cy_source = optional_col(columns.y_source);
    const std::size_t arity = header->size();

    LoadedRows rows;
    auto upsert_node = [&](Node node, std::size_t line) {
        auto [it, inserted] = rows.nodes.emplace(node.id, node);
        if (!inserted) {
            const Node& prev = it->second;
            if (prev.name != node.name || prev.category != node.category ||
                prev.source != node.source) {
                ingest_fail(source_name, line,
                            "conflicting definition for node id " + std::to_string(node.id) +
                                " ('" + prev.name + "' vs '" + node.name + "')");
            }
        }
    };

    while (auto record = reader.next()) {
        const std::size_t line = reader.line_number();
        if (record->size() != arity) {
            ingest_fail(source_name, line,
                        "wrong arity: expected " + std::to_string(arity) + " fields, got " +
                            std::to_string(record->size()));
        }
        Node x;
        x.id = parse_node_id((*record)[cx_id], source_name, line, columns.x_id);
        x.name = trim((*record)[cx_name]);
        x.category = trim((*record)[cx_type]);
        if (cx_source) x.source = trim((*record)[*cx_source]);
        Node y;
        y.id = parse_node_id((*record)[cy_id], source_name, line, columns.y_id);
        y.name = trim((*record)[cy_name]);
        y.category = trim((*record)[cy_type]);
        if (cy_source) y.source = trim((*record)[*cy_source]);

        if (x.name.empty()) ingest_fail(source_name, line, "empty node name in column '" + columns.x_name + "'");
        if (y.name.empty()) ingest_fail(source_name, line, "empty node name in column '" + columns.y_name + "'");

        upsert_node(x, line);
        upsert_node(y, line);

        if (x.id == y.id) {
            continue; // self-loop row: node registered, edge dropped
        }
        EdgeKey key{std::min(x.id, y.id), std::max(x.id, y.id), trim((*record)[crel])};
        std::string display = trim((*record)[cdisp]);
        auto [it, inserted] = rows.edges.emplace(std::move(key), display);
        if (!inserted && display < it->second) {
            it->second = std::move(display); // keep row order out of the result
        }
    }

    return build(std::move(rows));
}

KnowledgeGraph KnowledgeGraph::build(LoadedRows rows) {
    KnowledgeGraph g;
    g.nodes_.reserve(rows.nodes.size());
    for (auto& [id, node] : rows.nodes) {
        g.nodes_.push_back(std::move(node));
    }
    g.edges_.reserve(rows.edges.size());
    for (auto& [key, display] : rows.edges) {
        g.edges_.push_back(Edge{key.lo, key.hi, key.relation, std::move(display)});
    }
    g.rebuild_lookups();
    return g;
}

void KnowledgeGraph::rebuild_lookups() {
    position_of_.clear();
    position_of_.reserve(nodes_.size());
    name_index_.clear();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        position_of_.emplace(nodes_[i].id, i);
        name_index_[fold_name(nodes_[i].name)].push_back(nodes_[i].id);
    }
    for (auto& [name, ids] : name_index_) {
        std::sort(ids.begin(), ids.end());
    }
    adjacency_.assign(nodes_.size(), {});
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const Edge& edge = edges_[e];
        const std::size_t sp = position_of_.at(edge.src);
        const std::size_t dp = position_of_.at(edge.dst);
        adjacency_[sp].emplace_back(dp, e);
        adjacency_[dp].emplace_back(sp, e);
    }
    for (auto& adj : adjacency_) {
        std::sort(adj.begin(), adj.end(), [this](const auto& a, const auto& b) {
            const Node& an = nodes_[a.first];
            const Node& bn = nodes_[b.first];
            if (an.id != bn.id) return an.id < bn.id;
            const Edge& ae = edges_[a.second];
            const Edge& be = edges_[b.second];
            if (ae.relation != be.relation) return ae.relation < be.relation;
            return ae.display_relation < be.display_relation;
        });
    }
}

bool KnowledgeGraph::has_node(NodeId id) const {
    return position_of_.contains(id);
}

const Node* KnowledgeGraph::find_node(NodeId id) const {
    auto it = position_of_.find(id);
    if (it == position_of_.end()) return nullptr;
    return &nodes_[it->second];
}

const Node& KnowledgeGraph::node_at(NodeId id) const {
    const Node* n = find_node(id);
    if (!n) {
        throw LookupError("unknown node id " + std::to_string(id));
    }
    return *n;
}

std::optional<Node> KnowledgeGraph::node_by_name(std::string_view name) const {
    auto it = name_index_.find(fold_name(name));
    if (it == name_index_.end() || it->second.empty()) return std::nullopt;
    return node_at(it->second.front());
}

std::vector<NodeId> KnowledgeGraph::ids_by_name(std::string_view name) const {
    auto it = name_index_.find(fold_name(name));
    if (it == name_index_.end()) return {};
    return it->second;
}

std::vector<Neighbor> KnowledgeGraph::neighbors(NodeId id) const {
    auto it = position_of_.find(id);
    if (it == position_of_.end()) {
        throw LookupError("unknown node id " + std::to_string(id));
    }
    std::vector<Neighbor> out;
    out.reserve(adjacency_[it->second].size());
    for (const auto& [npos, epos] : adjacency_[it->second]) {
        out.push_back(Neighbor{&nodes_[npos], &edges_[epos]});
    }
    return out;
}

void KnowledgeGraph::save_snapshot(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IngestError("cannot open snapshot file for writing: " + path.string());
    }
    write_snapshot(out);
    if (!out) {
        throw IngestError("failed writing snapshot: " + path.string());
    }
}

void KnowledgeGraph::write_snapshot(std::ostream& out) const {
    out.write(kSnapshotMagic, 8);
    write_u32(out, kSnapshotVersion);
    write_u64(out, nodes_.size());
    write_u64(out, edges_.size());
    for (const Node& n : nodes_) {
        write_i64(out, n.id);
        write_string(out, n.name);
        write_string(out, n.category);
        write_string(out, n.source);
    }
    for (const Edge& e : edges_) {
        write_i64(out, e.src);
        write_i64(out, e.dst);
        write_string(out, e.relation);
        write_string(out, e.display_relation);
    }
}

KnowledgeGraph KnowledgeGraph::load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open snapshot file: " + path.string());
    }
    return read_snapshot(in, path.string());
}

KnowledgeGraph KnowledgeGraph::read_snapshot(std::istream& in, const std::string& source_name) {
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
        throw IngestError(source_name + ": not a graph snapshot (bad magic)");
    }
    const std::uint32_t version = read_u32(in, source_name);
    if (version != kSnapshotVersion) {
        throw IngestError(source_name + ": unsupported snapshot version " + std::to_string(version));
    }
    const std::uint64_t node_count = read_u64(in, source_name);
    const std::uint64_t edge_count = read_u64(in, source_name);

    KnowledgeGraph g;
    g.nodes_.reserve(node_count);
    for (std::uint64_t i = 0; i < node_count; ++i) {
        Node n;
        n.id = read_i64(in, source_name);
        n.name = read_string(in, source_name);
        n.category = read_string(in, source_name);
        n.source = read_string(in, source_name);
        if (n.name.empty()) {
            throw IngestError(source_name + ": snapshot node " + std::to_string(n.id) + " has empty name");
        }
        g.nodes_.push_back(std::move(n));
    }
    g.edges_.reserve(edge_count);
    for (std::uint64_t i = 0; i < edge_count; ++i) {
        Edge e;
        e.src = read_i64(in, source_name);
        e.dst = read_i64(in, source_name);
        e.relation = read_string(in, source_name);
        e.display_relation = read_string(in, source_name);
        g.edges_.push_back(std::move(e));
    }
    g.rebuild_lookups();
    for (const Edge& e : g.edges_) {
        if (!g.has_node(e.src) || !g.has_node(e.dst) || e.src == e.dst) {
            throw IngestError(source_name + ": snapshot edge references invalid node ids");
        }
    }
    return g;
}

} // namespace kgcot
