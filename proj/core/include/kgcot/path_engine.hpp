#pragma once
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/prompts.hpp"

#include <span>
#include <string>
#include <vector>

namespace kgcot {

/// One alternating node/relation sequence from a question entity to an
/// answer entity. Shortest paths are simple: no repeated node.
struct ReasoningPath {
    std::vector<NodeId> nodes;
    std::vector<std::string> node_names;  // parallel to nodes
    std::vector<std::string> relations;   // display relations, |nodes| - 1
    NodeId question_node = 0;
    NodeId answer_node = 0;
};

enum class PairStatus { connected, disconnected, identical_endpoints };

std::string_view pair_status_name(PairStatus status);

struct PathSearchResult {
    std::vector<ReasoningPath> paths;
    bool truncated = false; // enumeration stopped at the cap
    PairStatus status = PairStatus::connected;
};

/// Enumerates all distinct shortest paths from src to dst.
///
/// A breadth-first layering from src builds the shortest-path DAG; forward
/// traversal through nodes that reach dst emits paths in lexicographic
/// node-id order (parallel edges ordered by relation). Enumeration stops at
/// `cap` paths and flags truncation. src == dst yields one zero-length path
/// flagged identical_endpoints; an unreachable dst yields an empty result
/// with status disconnected. Throws LookupError for unknown ids.
PathSearchResult all_shortest_paths(const KnowledgeGraph& graph, NodeId src, NodeId dst,
                                    std::size_t cap);

/// "node —relation→ node" rendering used in prompts and traces.
std::string render_path(const ReasoningPath& path);

/// Numbered, newline-separated rendering (1-based) for the pruning prompt.
std::string render_paths_numbered(std::span<const ReasoningPath> paths);

struct PruneResult {
    std::vector<ReasoningPath> paths; // subset of the input, original order
    bool fallback = false;            // no valid selection after one re-prompt
    bool llm_called = false;
};

/// Keeps at most k paths. With |paths| <= k the input passes through with no
/// LLM call. Otherwise the LLM picks up to k 1-based indices; invalid indices
/// are ignored, and when no valid index survives after one re-prompt the
/// first k paths are kept and flagged as fallback.
PruneResult prune_paths(std::span<const ReasoningPath> paths, const std::string& question,
                        Gateway& gateway, const PromptLibrary& prompts, std::size_t k);

struct PathConfig {
    std::size_t k_paths = 3;       // kept per pair after pruning
    std::size_t max_raw_paths = 64; // enumeration cap per pair

    void validate() const; // throws ConfigError
};

struct PairPaths {
    NodeId question_node = 0;
    NodeId answer_node = 0;
    PairStatus status = PairStatus::connected;
    std::size_t raw_count = 0; // shortest paths found before pruning
    bool truncated = false;
    bool prune_fallback = false;
    std::vector<ReasoningPath> paths; // empty unless status == connected
};

/// Pruned paths for every (question node, answer node) pair, plus per-pair
/// bookkeeping for pairs that contributed nothing.
struct PathBundle {
    std::vector<PairPaths> pairs;

    std::size_t connected_pairs() const;
    std::size_t total_paths() const;
    std::vector<const ReasoningPath*> all_paths() const; // pair order
};

/// Runs search + prune over every pair in (ascending question id, ascending
/// answer id) order. Identical-endpoint pairs are recorded but contribute no
/// paths.
PathBundle collect_paths(std::span<const NodeId> question_nodes,
                         std::span<const NodeId> answer_nodes, const KnowledgeGraph& graph,
                         Gateway& gateway, const PromptLibrary& prompts, const PathConfig& config,
                         const std::string& question);

} // namespace kgcot
