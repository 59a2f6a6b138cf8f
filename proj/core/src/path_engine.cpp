#include "kgcot/path_engine.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <unordered_map>
#include <unordered_set>

namespace kgcot {

namespace {

constexpr const char* kPruneRetrySuffix =
    "\n\nYour previous reply did not contain any valid path number. Respond with the selected "
    "path numbers separated by commas (for example: 1, 3), and nothing else.";

struct DagLevels {
    std::unordered_map<NodeId, int> distance;
    bool found_dst = false;
};

DagLevels bfs_levels(const KnowledgeGraph& graph, NodeId src, NodeId dst) {
    DagLevels levels;
    levels.distance.emplace(src, 0);
    std::deque<NodeId> frontier{src};
    int dst_distance = -1;
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop_front();
        const int du = levels.distance.at(u);
        if (dst_distance >= 0 && du >= dst_distance) {
            continue; // deeper layers cannot lie on a shortest path to dst
        }
        for (const Neighbor& nb : graph.neighbors(u)) {
            const NodeId v = nb.node->id;
            if (levels.distance.emplace(v, du + 1).second) {
                if (v == dst) {
                    dst_distance = du + 1;
                    levels.found_dst = true;
                }
                frontier.push_back(v);
            }
        }
    }
    return levels;
}

// Nodes lying on at least one shortest src->dst path: walk backwards from dst
// over edges that descend exactly one BFS layer.
std::unordered_set<NodeId> nodes_on_shortest_paths(const KnowledgeGraph& graph,
                                                   const DagLevels& levels, NodeId dst) {
    std::unordered_set<NodeId> on_path{dst};
    std::deque<NodeId> frontier{dst};
    while (!frontier.empty()) {
        const NodeId v = frontier.front();
        frontier.pop_front();
        const int dv = levels.distance.at(v);
        for (const Neighbor& nb : graph.neighbors(v)) {
            const NodeId u = nb.node->id;
            auto it = levels.distance.find(u);
            if (it == levels.distance.end() || it->second != dv - 1) continue;
            if (on_path.insert(u).second) {
                frontier.push_back(u);
            }
        }
    }
    return on_path;
}

} // namespace

std::string_view pair_status_name(PairStatus status) {
    switch (status) {
        case PairStatus::connected: return "connected";
        case PairStatus::disconnected: return "disconnected";
        case PairStatus::identical_endpoints: return "identical-endpoints";
    }
    return "unknown";
}

PathSearchResult all_shortest_paths(const KnowledgeGraph& graph, NodeId src, NodeId dst,
                                    std::size_t cap) {
    if (cap < 1) {
        throw Error("all_shortest_paths: cap must be >= 1");
    }
    const Node& src_node = graph.node_at(src);
    graph.node_at(dst); // validates dst

    PathSearchResult result;
    if (src == dst) {
        ReasoningPath path;
        path.nodes = {src};
        path.node_names = {src_node.name};
        path.question_node = src;
        path.answer_node = dst;
        result.paths.push_back(std::move(path));
        result.status = PairStatus::identical_endpoints;
        return result;
    }

    const DagLevels levels = bfs_levels(graph, src, dst);
    if (!levels.found_dst) {
        result.status = PairStatus::disconnected;
        return result;
    }
    const auto on_path = nodes_on_shortest_paths(graph, levels, dst);

    // Iterative DFS over the shortest-path DAG. Neighbors come back sorted by
    // (id, relation), so paths emit in lexicographic node-id order. Enumerate
    // up to cap + 1 to learn whether truncation actually dropped anything.
    struct Frame {
        NodeId node;
        std::vector<Neighbor> next;
        std::size_t cursor = 0;
    };
    std::vector<Frame> stack;
    std::vector<NodeId> node_trail{src};
    std::vector<std::string> name_trail{src_node.name};
    std::vector<std::string> relation_trail;
    std::unordered_set<NodeId> visiting{src};

    stack.push_back(Frame{src, graph.neighbors(src)});
    const std::size_t limit = cap + 1;
    bool overflowed = false;

    while (!stack.empty() && !overflowed) {
        Frame& frame = stack.back();
        const int depth_distance = levels.distance.at(frame.node);
        bool descended = false;
        while (frame.cursor < frame.next.size()) {
            const Neighbor nb = frame.next[frame.cursor++];
            const NodeId v = nb.node->id;
            auto dit = levels.distance.find(v);
            if (dit == levels.distance.end() || dit->second != depth_distance + 1 ||
                !on_path.contains(v) || visiting.contains(v)) {
                continue;
            }
            node_trail.push_back(v);
            name_trail.push_back(nb.node->name);
            relation_trail.push_back(nb.edge->display_relation);
            if (v == dst) {
                ReasoningPath path;
                path.nodes = node_trail;
                path.node_names = name_trail;
                path.relations = relation_trail;
                path.question_node = src;
                path.answer_node = dst;
                result.paths.push_back(std::move(path));
                node_trail.pop_back();
                name_trail.pop_back();
                relation_trail.pop_back();
                if (result.paths.size() == limit) {
                    overflowed = true;
                    break;
                }
                continue;
            }
            visiting.insert(v);
            stack.push_back(Frame{v, graph.neighbors(v)});
            descended = true;
            break;
        }
        if (overflowed) break;
        if (!descended) {
            stack.pop_back();
            if (!stack.empty()) {
                visiting.erase(node_trail.back());
                node_trail.pop_back();
                name_trail.pop_back();
                relation_trail.pop_back();
            }
        }
    }

    if (overflowed) {
        result.paths.pop_back(); // keep exactly cap paths
        result.truncated = true;
    }
    result.status = PairStatus::connected;
    return result;
}

std::string render_path(const ReasoningPath& path) {
    std::string out;
    for (std::size_t i = 0; i < path.node_names.size(); ++i) {
        if (i > 0) {
            out += " \xE2\x80\x94";            // em dash
            out += path.relations[i - 1];
            out += "\xE2\x86\x92 ";            // arrow
        }
        out += path.node_names[i];
    }
    return out;
}

std::string render_paths_numbered(std::span<const ReasoningPath> paths) {
    std::string out;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        out += std::to_string(i + 1);
        out += ". ";
        out += render_path(paths[i]);
        if (i + 1 < paths.size()) out.push_back('\n');
    }
    return out;
}

namespace {

// 1-based indices parsed as digit runs; invalid and duplicate values are
// dropped, keeping reply order, truncated to k, then restored to path order.
std::vector<std::size_t> parse_selection(const std::string& reply, std::size_t path_count,
                                         std::size_t k) {
    std::vector<std::size_t> picked;
    std::unordered_set<std::size_t> seen;
    std::size_t i = 0;
    while (i < reply.size() && picked.size() < k) {
        if (!std::isdigit(static_cast<unsigned char>(reply[i]))) {
            ++i;
            continue;
        }
        std::size_t value = 0;
        while (i < reply.size() && std::isdigit(static_cast<unsigned char>(reply[i]))) {
            value = value * 10 + static_cast<std::size_t>(reply[i] - '0');
            ++i;
        }
        if (value >= 1 && value <= path_count && seen.insert(value).second) {
            picked.push_back(value);
        }
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace

PruneResult prune_paths(std::span<const ReasoningPath> paths, const std::string& question,
                        Gateway& gateway, const PromptLibrary& prompts, std::size_t k) {
    if (k < 1) {
        throw Error("prune_paths: k must be >= 1");
    }
    PruneResult result;
    if (paths.size() <= k) {
        result.paths.assign(paths.begin(), paths.end());
        return result;
    }
    const std::string prompt = prompts.render(TemplateId::prune, {{"paths", render_paths_numbered(paths)},
                                                                  {"question", question},
                                                                  {"k", std::to_string(k)}});
    result.llm_called = true;
    std::vector<std::size_t> selection =
        parse_selection(gateway.chat(ChatRequest{TemplateId::prune, prompt}), paths.size(), k);
    if (selection.empty()) {
        selection = parse_selection(
            gateway.chat(ChatRequest{TemplateId::prune, prompt + kPruneRetrySuffix}), paths.size(), k);
    }
    if (selection.empty()) {
        result.fallback = true;
        for (std::size_t i = 0; i < k; ++i) {
            result.paths.push_back(paths[i]);
        }
        return result;
    }
    for (std::size_t index : selection) {
        result.paths.push_back(paths[index - 1]);
    }
    return result;
}

void PathConfig::validate() const {
    if (k_paths < 1) throw ConfigError("paths: k_paths must be >= 1");
    if (max_raw_paths < 1) throw ConfigError("paths: max_raw_paths must be >= 1");
}

std::size_t PathBundle::connected_pairs() const {
    std::size_t n = 0;
    for (const PairPaths& p : pairs) {
        if (p.status == PairStatus::connected) ++n;
    }
    return n;
}

std::size_t PathBundle::total_paths() const {
    std::size_t n = 0;
    for (const PairPaths& p : pairs) n += p.paths.size();
    return n;
}

std::vector<const ReasoningPath*> PathBundle::all_paths() const {
    std::vector<const ReasoningPath*> out;
    for (const PairPaths& p : pairs) {
        for (const ReasoningPath& path : p.paths) out.push_back(&path);
    }
    return out;
}

PathBundle collect_paths(std::span<const NodeId> question_nodes,
                         std::span<const NodeId> answer_nodes, const KnowledgeGraph& graph,
                         Gateway& gateway, const PromptLibrary& prompts, const PathConfig& config,
                         const std::string& question) {
    config.validate();
    std::vector<NodeId> q_sorted(question_nodes.begin(), question_nodes.end());
    std::vector<NodeId> a_sorted(answer_nodes.begin(), answer_nodes.end());
    std::sort(q_sorted.begin(), q_sorted.end());
    q_sorted.erase(std::unique(q_sorted.begin(), q_sorted.end()), q_sorted.end());
    std::sort(a_sorted.begin(), a_sorted.end());
    a_sorted.erase(std::unique(a_sorted.begin(), a_sorted.end()), a_sorted.end());

    PathBundle bundle;
    for (NodeId q : q_sorted) {
        for (NodeId a : a_sorted) {
            PairPaths pair;
            pair.question_node = q;
            pair.answer_node = a;
            if (q == a) {
                // zero-hop paths carry no relational evidence
                pair.status = PairStatus::identical_endpoints;
                bundle.pairs.push_back(std::move(pair));
                continue;
            }
            PathSearchResult search = all_shortest_paths(graph, q, a, config.max_raw_paths);
            pair.status = search.status;
            pair.raw_count = search.paths.size();
            pair.truncated = search.truncated;
            if (search.status == PairStatus::connected) {
                PruneResult pruned =
                    prune_paths(search.paths, question, gateway, prompts, config.k_paths);
                pair.prune_fallback = pruned.fallback;
                pair.paths = std::move(pruned.paths);
            }
            bundle.pairs.push_back(std::move(pair));
        }
    }
    return bundle;
}

} // namespace kgcot
