#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgcot {

using NodeId = std::int64_t;

struct Node {
    NodeId id = 0;
    std::string name;     // human-readable label, never empty
    std::string category; // node type, e.g. "disease", "effect/phenotype"
    std::string source;   // vocabulary of origin, may be empty
};

struct Edge {
    NodeId src = 0; // canonical: src < dst
    NodeId dst = 0;
    std::string relation;
    std::string display_relation;
};

/// Maps the logical triple columns onto header names of the input CSV.
/// Defaults follow the public PrimeKG kg.csv layout. The source columns are
/// optional: when the named header is absent, node provenance stays empty.
struct ColumnMap {
    std::string x_id = "x_index";
    std::string x_name = "x_name";
    std::string x_type = "x_type";
    std::string x_source = "x_source";
    std::string y_id = "y_index";
    std::string y_name = "y_name";
    std::string y_type = "y_type";
    std::string y_source = "y_source";
    std::string relation = "relation";
    std::string display_relation = "display_relation";
};

struct Neighbor {
    const Node* node;
    const Edge* edge;
};

/// Immutable undirected knowledge graph with id, name and adjacency lookups.
///
/// Loading collapses duplicate and reverse-duplicate rows into one undirected
/// edge per (endpoint pair, relation). Self-loop rows register their node but
/// store no edge. After construction the graph never changes, so concurrent
/// readers need no coordination.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    /// Loads from a triple CSV or from a binary snapshot (sniffed by magic).
    static KnowledgeGraph load(const std::filesystem::path& path, const ColumnMap& columns = {});

    /// Parses a triple CSV stream. `source_name` appears in error messages.
    static KnowledgeGraph from_csv(std::istream& in, const ColumnMap& columns = {},
                                   const std::string& source_name = "<stream>");

    static KnowledgeGraph load_snapshot(const std::filesystem::path& path);
    static KnowledgeGraph read_snapshot(std::istream& in, const std::string& source_name);

    /// Versioned binary snapshot for fast reload; `load` accepts it back.
    void save_snapshot(const std::filesystem::path& path) const;
    void write_snapshot(std::ostream& out) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_.size(); }

    /// Nodes in ascending id order.
    const std::vector<Node>& nodes() const { return nodes_; }
    /// Edges in ascending (src, dst, relation) order with src < dst.
    const std::vector<Edge>& edges() const { return edges_; }

    bool has_node(NodeId id) const;
    const Node* find_node(NodeId id) const; // nullptr when absent
    const Node& node_at(NodeId id) const;   // throws LookupError

    /// Case-folded, whitespace-normalized exact name lookup. When several
    /// nodes share a folded name the smallest id wins. Absence is empty.
    std::optional<Node> node_by_name(std::string_view name) const;

    /// All ids sharing a folded name, ascending. Empty when absent.
    std::vector<NodeId> ids_by_name(std::string_view name) const;

    /// Incident (neighbor, edge) pairs ordered by (neighbor id, relation).
    /// Throws LookupError for an unknown id.
    std::vector<Neighbor> neighbors(NodeId id) const;

private:
    struct LoadedRows;
    static KnowledgeGraph build(LoadedRows rows);
    void rebuild_lookups();

    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    // node position -> (neighbor position, edge position), sorted
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency_;
    std::unordered_map<NodeId, std::size_t> position_of_;
    std::map<std::string, std::vector<NodeId>> name_index_; // folded name -> ids asc
};

} // namespace kgcot
