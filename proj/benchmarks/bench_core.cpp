#include <benchmark/benchmark.h>

#include "kgcot/embed_index.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/path_engine.hpp"
#include "kgcot/prompts.hpp"
#include "kgcot/providers.hpp"

#include <random>
#include <sstream>

namespace {

using namespace kgcot;

std::string random_graph_csv(std::size_t nodes, std::size_t extra_edges, unsigned seed) {
    std::mt19937 rng(seed);
    std::ostringstream csv;
    csv << "relation,display_relation,x_index,x_id,x_type,x_name,x_source,"
           "y_index,y_id,y_type,y_name,y_source\n";
    auto row = [&csv](std::size_t a, std::size_t b) {
        csv << "rel,linked to," << a << ",I" << a << ",thing,node " << a << ",S," << b << ",I" << b
            << ",thing,node " << b << ",S\n";
    };
    for (std::size_t v = 1; v < nodes; ++v) {
        std::uniform_int_distribution<std::size_t> parent(0, v - 1);
        row(parent(rng), v);
    }
    std::uniform_int_distribution<std::size_t> pick(0, nodes - 1);
    for (std::size_t i = 0; i < extra_edges; ++i) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        if (a != b) row(a, b);
    }
    return csv.str();
}

const KnowledgeGraph& bench_graph() {
    static const KnowledgeGraph graph = [] {
        std::istringstream in(random_graph_csv(2000, 6000, 99));
        return KnowledgeGraph::from_csv(in, {}, "<bench>");
    }();
    return graph;
}

ProviderConfig bench_provider_config(const std::string& model) {
    ProviderConfig cfg;
    cfg.provider_id = "scripted";
    cfg.model_id = model;
    cfg.rate_limit_rpm = 60000000;
    cfg.in_flight_limit = 8;
    return cfg;
}

Gateway& bench_gateway() {
    static auto provider = std::make_shared<ScriptedProvider>();
    static Gateway gateway = [] {
        provider->set_embed_dimension(64);
        return Gateway(provider, bench_provider_config("chat"), provider,
                       bench_provider_config("embed"));
    }();
    return gateway;
}

const EmbedIndex& bench_index() {
    static const EmbedIndex index = EmbedIndex::build(bench_graph(), bench_gateway());
    return index;
}

void BM_GraphLoadCsv(benchmark::State& state) {
    const std::string csv = random_graph_csv(static_cast<std::size_t>(state.range(0)),
                                             static_cast<std::size_t>(state.range(0)) * 3, 7);
    for (auto _ : state) {
        std::istringstream in(csv);
        KnowledgeGraph g = KnowledgeGraph::from_csv(in, {}, "<bench>");
        benchmark::DoNotOptimize(g.edge_count());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * 4);
}
BENCHMARK(BM_GraphLoadCsv)->Arg(1000)->Arg(5000);

void BM_AllShortestPaths(benchmark::State& state) {
    const KnowledgeGraph& graph = bench_graph();
    std::mt19937 rng(5);
    std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(graph.node_count() - 1));
    for (auto _ : state) {
        const NodeId src = pick(rng);
        const NodeId dst = pick(rng);
        if (src == dst) continue;
        auto result = all_shortest_paths(graph, src, dst, 64);
        benchmark::DoNotOptimize(result.paths.size());
    }
}
BENCHMARK(BM_AllShortestPaths);

void BM_TopK(benchmark::State& state) {
    const EmbedIndex& index = bench_index();
    Gateway& gateway = bench_gateway();
    std::size_t i = 0;
    for (auto _ : state) {
        auto set = index.top_k("query " + std::to_string(i++ % 128),
                               static_cast<std::size_t>(state.range(0)), gateway);
        benchmark::DoNotOptimize(set.entries.size());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(index.size()));
}
BENCHMARK(BM_TopK)->Arg(10)->Arg(50);

void BM_RenderPrompt(benchmark::State& state) {
    PromptLibrary prompts;
    const std::map<std::string, std::string> slots{
        {"question", "A 4-year-old boy presents with difficulty walking."},
        {"answer", "B. Medulloblastoma"},
        {"paths", "1. difficulty walking -> ataxia -> medulloblastoma"},
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(prompts.render(TemplateId::generate, slots));
    }
}
BENCHMARK(BM_RenderPrompt);

} // namespace

BENCHMARK_MAIN();
