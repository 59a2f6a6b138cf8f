// kgcot: knowledge-graph-guided chain-of-thought dataset builder.
//
// Subcommands: build-index, run, inspect, stats. Configuration comes from one
// JSON file; CLI flags override file values. Credentials are only ever read
// from environment variables named in the config.

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include "kgcot/config.hpp"
#include "kgcot/dataset.hpp"
#include "kgcot/embed_index.hpp"
#include "kgcot/errors.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/pipeline.hpp"
#include "kgcot/providers.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

using nlohmann::ordered_json;

struct CommonFlags {
    std::string config_path;
    std::string graph_override;
    std::string index_override;
    std::string cache_dir_override;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "Run configuration JSON file")
        ->required();
    cmd->add_option("--graph", flags.graph_override, "Override: graph triple CSV or snapshot path");
    cmd->add_option("--index", flags.index_override, "Override: embedding index path");
    cmd->add_option("--cache-dir", flags.cache_dir_override, "Override: provider response cache directory");
}

kgcot::RunConfig load_with_overrides(const CommonFlags& flags) {
    kgcot::RunConfig config = kgcot::load_run_config(flags.config_path);
    if (!flags.graph_override.empty()) config.graph_path = flags.graph_override;
    if (!flags.index_override.empty()) config.index_path = flags.index_override;
    if (!flags.cache_dir_override.empty()) config.cache_dir = flags.cache_dir_override;
    return config;
}

kgcot::Gateway make_gateway(const kgcot::RunConfig& config) {
    auto chat = kgcot::make_chat_provider(config.chat_provider);
    auto embed = kgcot::make_embed_provider(config.embed_provider);
    return kgcot::Gateway(std::move(chat), config.chat_provider, std::move(embed),
                          config.embed_provider, config.cache_dir);
}

int cmd_build_index(const CommonFlags& flags, const std::string& snapshot_path) {
    kgcot::RunConfig config = load_with_overrides(flags);
    kgcot::validate_for_build_index(config);

    kgcot::KnowledgeGraph graph = kgcot::KnowledgeGraph::load(config.graph_path, config.columns);
    kgcot::Gateway gateway = make_gateway(config);
    kgcot::EmbedIndex index = kgcot::EmbedIndex::build(graph, gateway);
    if (config.index_path.has_parent_path()) {
        std::filesystem::create_directories(config.index_path.parent_path());
    }
    index.save(config.index_path);

    std::cout << graph.node_count() << " nodes, " << graph.edge_count() << " edges, "
              << index.size() << " vectors\n";
    std::cout << "index written to " << config.index_path.string() << " (dimension "
              << index.dimension() << ", embedder " << index.embedder_id() << ")\n";
    if (!snapshot_path.empty()) {
        const std::filesystem::path snapshot(snapshot_path);
        if (snapshot.has_parent_path()) {
            std::filesystem::create_directories(snapshot.parent_path());
        }
        graph.save_snapshot(snapshot);
        std::cout << "graph snapshot written to " << snapshot.string() << "\n";
    }
    return 0;
}

struct RunFlags {
    std::string input;
    bool resume = false;
    std::string output_dir;
    std::string checkpoint_dir;
    std::string filtered_path;
    std::string audit_path;
    std::string stats_path;
    std::string stats_table_path;
    std::optional<std::size_t> workers;
    std::optional<double> tau;
    std::optional<std::size_t> k_candidates;
    std::optional<std::size_t> k_paths;
    std::optional<std::size_t> max_raw_paths;
};

void apply_run_flags(kgcot::RunConfig& config, const RunFlags& flags) {
    if (!flags.output_dir.empty()) {
        const std::filesystem::path dir(flags.output_dir);
        config.output_dir = dir;
        config.pipeline.checkpoint_dir = dir / "checkpoint";
        config.pipeline.filtered_path = dir / "filtered.jsonl";
        config.pipeline.audit_path = dir / "audit.jsonl";
        config.pipeline.stats_path = dir / "stats.json";
        config.pipeline.stats_table_path = dir / "stats.txt";
    }
    if (!flags.checkpoint_dir.empty()) config.pipeline.checkpoint_dir = flags.checkpoint_dir;
    if (!flags.filtered_path.empty()) config.pipeline.filtered_path = flags.filtered_path;
    if (!flags.audit_path.empty()) config.pipeline.audit_path = flags.audit_path;
    if (!flags.stats_path.empty()) config.pipeline.stats_path = flags.stats_path;
    if (!flags.stats_table_path.empty()) config.pipeline.stats_table_path = flags.stats_table_path;
    if (flags.workers) config.pipeline.workers = *flags.workers;
    if (flags.tau) config.mapping.tau = *flags.tau;
    if (flags.k_candidates) config.mapping.k_candidates = *flags.k_candidates;
    if (flags.k_paths) config.paths.k_paths = *flags.k_paths;
    if (flags.max_raw_paths) config.paths.max_raw_paths = *flags.max_raw_paths;
}

int cmd_run(const CommonFlags& common, const RunFlags& flags) {
    kgcot::RunConfig config = load_with_overrides(common);
    apply_run_flags(config, flags);
    kgcot::validate_for_run(config, flags.input);

    // input validation happens before any provider is constructed
    std::vector<kgcot::QaPair> pairs = kgcot::load_qa_jsonl(flags.input);

    kgcot::KnowledgeGraph graph = kgcot::KnowledgeGraph::load(config.graph_path, config.columns);
    kgcot::EmbedIndex index = kgcot::EmbedIndex::load(config.index_path, graph);
    kgcot::PromptLibrary prompts = kgcot::build_prompt_library(config);
    kgcot::Gateway gateway = make_gateway(config);

    kgcot::Pipeline pipeline(graph, index, gateway, prompts, config.mapping, config.paths,
                             config.pipeline);
    kgcot::PipelineResult result = pipeline.run(pairs, flags.resume);

    const kgcot::GatewayStats gs = gateway.stats();
    std::cout << "processed " << result.audit_lines.size() << " pairs ("
              << result.reused_from_checkpoint << " resumed from checkpoint, "
              << result.skipped_non_train << " skipped non-train)\n";
    std::cout << "chat calls: " << gs.chat_provider_calls << " (cache hits: " << gs.chat_cache_hits
              << ", retries: " << gs.chat_retries << "); embed texts: " << gs.embed_texts
              << " (cache hits: " << gs.embed_cache_hits << ")\n";
    std::cout << kgcot::render_stats_table(result.stats);
    std::cout << "totals: " << result.stats.total.raw << " / " << result.stats.total.generated
              << " / " << result.stats.total.filtered << " (raw / generated / quality filtered)\n";
    std::cout << "outputs: filtered=" << config.pipeline.filtered_path.string()
              << " audit=" << config.pipeline.audit_path.string()
              << " stats=" << config.pipeline.stats_path.string() << "\n";
    return 0;
}

std::vector<std::string> read_lines(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw kgcot::IngestError("cannot open " + what + ": " + path.string());
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::string render_bundle(const ordered_json& bundle) {
    std::ostringstream out;
    for (const auto& pair : bundle.at("pairs")) {
        out << "  (#" << pair.at("question_node").get<long long>() << " -> #"
            << pair.at("answer_node").get<long long>() << ") "
            << pair.at("status").get<std::string>();
        const auto& paths = pair.at("paths");
        out << ", " << paths.size() << " path(s)";
        if (pair.value("truncated", false)) out << " [truncated]";
        if (pair.value("prune_fallback", false)) out << " [prune fallback]";
        out << "\n";
        for (const auto& path : paths) {
            kgcot::ReasoningPath rp;
            rp.node_names = path.at("names").get<std::vector<std::string>>();
            rp.relations = path.at("relations").get<std::vector<std::string>>();
            out << "    " << kgcot::render_path(rp) << "\n";
        }
    }
    return out.str();
}

std::string render_mappings(const ordered_json& record) {
    std::ostringstream out;
    for (const auto& m : record.at("mappings")) {
        out << "  [" << m.at("origin").get<std::string>() << "] "
            << m.at("surface").get<std::string>() << " -> #" << m.at("node").get<long long>() << " "
            << m.at("node_name").get<std::string>() << " (" << m.at("stage").get<std::string>();
        if (m.contains("score")) {
            out << ", score " << m.at("score").get<double>();
        }
        out << ")\n";
    }
    for (const auto& m : record.at("unmapped")) {
        out << "  [" << m.at("origin").get<std::string>() << "] "
            << m.at("surface").get<std::string>() << " -> unmapped\n";
    }
    return out.str();
}

void print_record_trace(const ordered_json& record) {
    std::cout << "record " << record.at("id").get<std::string>() << " ("
              << record.at("source").get<std::string>()
              << ") — status: " << record.at("status").get<std::string>();
    if (record.contains("reason") && !record.at("reason").is_null()) {
        std::cout << " (" << record.at("reason").get<std::string>() << ")";
    }
    std::cout << "\nquestion: " << record.at("question").get<std::string>() << "\n";
    if (record.contains("options")) {
        std::cout << "options:\n";
        for (const auto& opt : record.at("options")) {
            std::cout << "  " << opt.at("label").get<std::string>() << ". "
                      << opt.value("text", std::string{}) << "\n";
        }
    }
    const auto& answer = record.at("answer");
    std::cout << "gold: ";
    if (answer.contains("label")) std::cout << answer.at("label").get<std::string>();
    if (answer.contains("text")) {
        if (answer.contains("label")) std::cout << " — ";
        std::cout << answer.at("text").get<std::string>();
    }
    std::cout << "\nmentions:\n";
    for (const auto& m : record.at("mentions")) {
        std::cout << "  [" << m.at("origin").get<std::string>() << "] "
                  << m.at("surface").get<std::string>() << "\n";
    }
    std::cout << "mappings:\n" << render_mappings(record);
    std::cout << "paths:\n" << render_bundle(record.at("bundle"));
    const std::string reasoning = record.at("reasoning").get<std::string>();
    if (!reasoning.empty()) {
        std::cout << "reasoning:\n  " << reasoning << "\n";
    }
    if (record.contains("verdict") && !record.at("verdict").is_null()) {
        const auto& v = record.at("verdict");
        std::cout << "verdict: predicted \"" << v.at("predicted").get<std::string>() << "\" — "
                  << (v.at("matched").get<bool>() ? "matched" : "not matched");
        if (v.value("parse_failed", false)) std::cout << " [parse failed]";
        std::cout << "\n";
    }
    if (record.contains("note")) {
        std::cout << "note: " << record.at("note").get<std::string>() << "\n";
    }
}

int cmd_inspect(const CommonFlags& common, const std::string& what, const std::string& id_filter,
                const std::string& audit_override, const std::string& stats_override) {
    kgcot::RunConfig config = load_with_overrides(common);
    const std::filesystem::path audit_path =
        audit_override.empty() ? config.pipeline.audit_path : std::filesystem::path(audit_override);
    const std::filesystem::path stats_path =
        stats_override.empty() ? config.pipeline.stats_path : std::filesystem::path(stats_override);

    if (what == "stats") {
        std::ifstream in(stats_path);
        if (!in) {
            throw kgcot::IngestError("cannot open stats record: " + stats_path.string());
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        std::cout << kgcot::render_stats_table(kgcot::stats_from_json(buf.str()));
        return 0;
    }

    const std::vector<std::string> lines = read_lines(audit_path, "audit file");
    if (what == "paths" || what == "mapping") {
        bool any = false;
        for (const std::string& line : lines) {
            ordered_json record = ordered_json::parse(line);
            if (!id_filter.empty() && record.at("id").get<std::string>() != id_filter) continue;
            any = true;
            std::cout << "record " << record.at("id").get<std::string>() << " ("
                      << record.at("status").get<std::string>() << ")\n";
            std::cout << (what == "paths" ? render_bundle(record.at("bundle"))
                                          : render_mappings(record));
        }
        if (!any && !id_filter.empty()) {
            std::cerr << "error: no audit record with id '" << id_filter << "'\n";
            return 1;
        }
        return 0;
    }

    for (const std::string& line : lines) {
        ordered_json record = ordered_json::parse(line);
        if (record.at("id").get<std::string>() == what) {
            print_record_trace(record);
            return 0;
        }
    }
    std::cerr << "error: no audit record with id '" << what << "'\n";
    return 1;
}

int cmd_stats(const CommonFlags& common, const std::string& audit_override,
              const std::string& stats_override) {
    kgcot::RunConfig config = load_with_overrides(common);
    const std::filesystem::path audit_path =
        audit_override.empty() ? config.pipeline.audit_path : std::filesystem::path(audit_override);
    const std::filesystem::path stats_path =
        stats_override.empty() ? config.pipeline.stats_path : std::filesystem::path(stats_override);

    const std::vector<std::string> lines = read_lines(audit_path, "audit file");
    kgcot::PipelineStats recomputed = kgcot::stats_from_audit_lines(lines);
    std::cout << kgcot::render_stats_table(recomputed);

    if (!std::filesystem::exists(stats_path)) {
        std::cout << "no stored stats record at " << stats_path.string() << "; nothing to compare\n";
        return 0;
    }
    std::ifstream in(stats_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    kgcot::PipelineStats stored = kgcot::stats_from_json(buf.str());
    if (!(recomputed == stored)) {
        std::cerr << "error: stored stats record disagrees with recomputed stats\n";
        std::cerr << "stored:\n" << kgcot::render_stats_table(stored);
        return 1;
    }
    std::cout << "stats record is consistent with the audit output\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-graph-guided chain-of-thought dataset builder", "kgcot"};
    app.require_subcommand(1);

    CommonFlags build_flags;
    std::string build_snapshot;
    CLI::App* build = app.add_subcommand(
        "build-index", "Load the graph, embed every node name, persist the index");
    add_common_flags(build, build_flags);
    build->add_option("--snapshot", build_snapshot,
                      "Also write a binary graph snapshot for fast reload");

    CommonFlags run_common;
    RunFlags run_flags;
    CLI::App* run = app.add_subcommand(
        "run", "Convert QA pairs into quality-filtered reasoning records");
    add_common_flags(run, run_common);
    run->add_option("--input", run_flags.input, "QA pairs, one JSON object per line")->required();
    run->add_flag("--resume", run_flags.resume, "Continue from the checkpoint directory");
    run->add_option("--output-dir", run_flags.output_dir,
                    "Override: directory for filtered/audit/stats outputs and the checkpoint");
    run->add_option("--checkpoint-dir", run_flags.checkpoint_dir, "Override: checkpoint directory");
    run->add_option("--filtered", run_flags.filtered_path, "Override: filtered output JSONL path");
    run->add_option("--audit", run_flags.audit_path, "Override: audit output JSONL path");
    run->add_option("--stats", run_flags.stats_path, "Override: stats JSON path");
    run->add_option("--stats-table", run_flags.stats_table_path, "Override: stats text table path");
    run->add_option("--workers", run_flags.workers, "Override: concurrent pair workers");
    run->add_option("--tau", run_flags.tau, "Override: similarity threshold in (0,1)");
    run->add_option("--k-candidates", run_flags.k_candidates, "Override: candidate set size");
    run->add_option("--k-paths", run_flags.k_paths, "Override: paths kept per pair after pruning");
    run->add_option("--max-raw-paths", run_flags.max_raw_paths,
                    "Override: shortest-path enumeration cap per pair");

    CommonFlags inspect_common;
    std::string inspect_what;
    std::string inspect_id;
    std::string inspect_audit;
    std::string inspect_stats;
    CLI::App* inspect = app.add_subcommand(
        "inspect", "Pretty-print a record trace, path bundles, mappings, or the stats table");
    add_common_flags(inspect, inspect_common);
    inspect
        ->add_option("what", inspect_what,
                     "A record id, or one of: paths, mapping, stats")
        ->required();
    inspect->add_option("--id", inspect_id, "Restrict 'paths'/'mapping' output to one record id");
    inspect->add_option("--audit", inspect_audit, "Override: audit JSONL to read");
    inspect->add_option("--stats", inspect_stats, "Override: stats JSON to read");

    CommonFlags stats_common;
    std::string stats_audit;
    std::string stats_stats;
    CLI::App* stats = app.add_subcommand(
        "stats", "Recompute stats from the audit output and check the stored record");
    add_common_flags(stats, stats_common);
    stats->add_option("--audit", stats_audit, "Override: audit JSONL to read");
    stats->add_option("--stats", stats_stats, "Override: stats JSON to compare against");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) return cmd_build_index(build_flags, build_snapshot);
        if (run->parsed()) return cmd_run(run_common, run_flags);
        if (inspect->parsed()) {
            return cmd_inspect(inspect_common, inspect_what, inspect_id, inspect_audit,
                               inspect_stats);
        }
        if (stats->parsed()) return cmd_stats(stats_common, stats_audit, stats_stats);
    } catch (const kgcot::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
