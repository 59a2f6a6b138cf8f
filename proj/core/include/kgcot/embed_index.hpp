#pragma once
#include "kgcot/embedding.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace kgcot {

struct Candidate {
    NodeId id = 0;
    std::string name;
    double score = 0.0; // cosine in [-1, 1]
};

/// Top-K embedding-similar nodes for one query string, sorted by score
/// descending with ties broken by ascending node id.
struct CandidateSet {
    std::string query;
    std::vector<Candidate> entries;
};

/// Dense-vector index over node names: one vector per graph node, ascending
/// node id order, exact (non-approximate) scan at query time. Immutable after
/// build; concurrent queries are safe.
class EmbedIndex {
public:
    EmbedIndex() = default;

    /// Embeds every node name through the gateway (which caches per name, so
    /// rebuilds over unchanged names make no embedder calls).
    /// Throws BuildError on dimension mismatch or a zero vector.
    static EmbedIndex build(const KnowledgeGraph& graph, Gateway& gateway);

    /// Exact scan over all rows. Returns min(k, size()) candidates.
    CandidateSet top_k(const std::string& text, std::size_t k, Gateway& gateway) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::string& embedder_id() const { return embedder_id_; }
    const std::vector<NodeId>& node_ids() const { return ids_; }
    const EmbeddingVector* vector_for(NodeId id) const;

    /// Versioned binary file: header (embedder id, dimension, node count)
    /// followed by packed little-endian f32 rows, one per node id ascending.
    void save(const std::filesystem::path& path) const;

    /// Rows are paired with `graph` nodes in ascending id order; the stored
    /// node count must match the graph.
    static EmbedIndex load(const std::filesystem::path& path, const KnowledgeGraph& graph);

private:
    std::string embedder_id_;
    std::size_t dimension_ = 0;
    std::vector<NodeId> ids_;          // ascending
    std::vector<std::string> names_;   // parallel to ids_
    std::vector<EmbeddingVector> vectors_;
};

} // namespace kgcot
