#pragma once
// Shared test utilities: scratch directories, fixture paths, the Fig-2 style
// fixture graph, and a subprocess runner for CLI tests.

#include "kgcot/graph.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#ifndef KGCOT_TEST_DATA_DIR
#define KGCOT_TEST_DATA_DIR "tests/data"
#endif

namespace kgcot::test {

inline std::filesystem::path data_dir() {
    return std::filesystem::path(KGCOT_TEST_DATA_DIR);
}

inline std::filesystem::path data_file(const std::string& name) {
    return data_dir() / name;
}

/// Temp directory removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("kgcot-" + tag + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path file(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline KnowledgeGraph fixture_graph() {
    return KnowledgeGraph::load(data_file("fixture_graph.csv"));
}

// Fixture node ids, mirroring fixture_graph.csv.
inline constexpr NodeId kDifficultyWalking = 0;
inline constexpr NodeId kBroadBasedGait = 1;
inline constexpr NodeId kAtaxia = 2;
inline constexpr NodeId kOpticDisc = 3;
inline constexpr NodeId kMedulloblastoma = 4;
inline constexpr NodeId kBrain = 5;

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs a command line through /bin/sh, capturing stdout/stderr.
inline CommandResult run_command(const std::string& command) {
    ScratchDir scratch("cmd");
    const auto out_path = scratch.file("out");
    const auto err_path = scratch.file("err");
    const std::string full =
        command + " >" + out_path.string() + " 2>" + err_path.string();
    const int status = std::system(full.c_str());
    CommandResult result;
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    if (status == -1) {
        result.exit_code = -1;
    } else if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else {
        result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    }
    return result;
}

/// Random connected undirected graph rendered as a triple CSV, then loaded
/// through the production loader. Node ids are 0..n-1; names "node <id>".
inline KnowledgeGraph random_connected_graph(std::mt19937& rng, std::size_t max_nodes,
                                             std::size_t max_edges) {
    std::uniform_int_distribution<std::size_t> node_count_dist(2, max_nodes);
    const std::size_t n = node_count_dist(rng);

    std::vector<std::pair<NodeId, NodeId>> edges;
    // spanning tree keeps it connected
    for (std::size_t v = 1; v < n; ++v) {
        std::uniform_int_distribution<std::size_t> parent_dist(0, v - 1);
        edges.emplace_back(static_cast<NodeId>(parent_dist(rng)), static_cast<NodeId>(v));
    }
    const std::size_t extra_cap = max_edges > edges.size() ? max_edges - edges.size() : 0;
    std::uniform_int_distribution<std::size_t> extra_dist(0, extra_cap);
    const std::size_t extra = extra_dist(rng);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < extra; ++i) {
        const NodeId a = static_cast<NodeId>(pick(rng));
        const NodeId b = static_cast<NodeId>(pick(rng));
        if (a != b) edges.emplace_back(a, b);
    }

    std::ostringstream csv;
    csv << "relation,display_relation,x_index,x_id,x_type,x_name,x_source,"
           "y_index,y_id,y_type,y_name,y_source\n";
    for (const auto& [a, b] : edges) {
        csv << "rel,linked to," << a << ",ID:" << a << ",thing,node " << a << ",SRC," << b
            << ",ID:" << b << ",thing,node " << b << ",SRC\n";
    }
    std::istringstream in(csv.str());
    return KnowledgeGraph::from_csv(in, {}, "<random-graph>");
}

} // namespace kgcot::test
