#pragma once
#include "kgcot/entity_mapper.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/path_engine.hpp"
#include "kgcot/pipeline.hpp"
#include "kgcot/prompts.hpp"

#include <filesystem>
#include <map>

namespace kgcot {

/// Whole-run configuration, loaded from one JSON file. Relative paths inside
/// the file resolve against the file's directory; CLI flag overrides resolve
/// against the working directory and win over file values.
struct RunConfig {
    std::filesystem::path config_dir; // resolution base, set by the loader

    std::filesystem::path graph_path;
    ColumnMap columns;
    std::filesystem::path index_path;
    std::optional<std::filesystem::path> cache_dir;

    ProviderConfig chat_provider;
    ProviderConfig embed_provider;

    MappingConfig mapping;
    PathConfig paths;
    PipelineConfig pipeline;
    std::filesystem::path output_dir; // default parent for pipeline outputs

    std::map<TemplateId, std::filesystem::path> template_overrides;
};

RunConfig load_run_config(const std::filesystem::path& file);

/// Builds the prompt library with any configured overrides applied, then
/// proves every template renders (so template problems surface at validation
/// time, not mid-run).
PromptLibrary build_prompt_library(const RunConfig& config);

/// Bounds and referenced input files, shared by all subcommands.
/// Throws ConfigError; performs no side effects.
void validate_config_common(const RunConfig& config);

/// build-index additionally needs the graph file.
void validate_for_build_index(const RunConfig& config);

/// run additionally needs graph, index, and the input file.
void validate_for_run(const RunConfig& config, const std::filesystem::path& input);

} // namespace kgcot
