#include "kgcot/config.hpp"

#include "kgcot/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace kgcot {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    if (p.is_absolute()) return p;
    return base / p;
}

ProviderConfig parse_provider(const nlohmann::json& j, const std::filesystem::path& base,
                              const std::string& lane) {
    ProviderConfig cfg;
    cfg.provider_id = j.value("provider", std::string{});
    cfg.model_id = j.value("model", std::string{});
    cfg.endpoint = j.value("endpoint", std::string{});
    cfg.credential_env = j.value("credential_env", std::string{});
    if (j.contains("script")) {
        cfg.script_path = resolve(base, j["script"].get<std::string>()).string();
    }
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_base_ms = j.value("backoff_ms", cfg.backoff_base_ms);
    cfg.rate_limit_rpm = j.value("rate_limit_rpm", cfg.rate_limit_rpm);
    cfg.in_flight_limit = j.value("in_flight", cfg.in_flight_limit);
    cfg.embed_batch_size = j.value("embed_batch", cfg.embed_batch_size);
    if (cfg.provider_id.empty()) {
        throw ConfigError("providers." + lane + ": 'provider' must be set");
    }
    return cfg;
}

void require_file(const std::filesystem::path& path, const std::string& what) {
    if (path.empty()) {
        throw ConfigError(what + " path is not configured");
    }
    if (!std::filesystem::exists(path)) {
        throw ConfigError(what + " not found: " + path.string());
    }
}

} // namespace

RunConfig load_run_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open config file: " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid config JSON in " + file.string() + ": " + e.what());
    }
    if (doc.value("version", 0) != 1) {
        throw ConfigError(file.string() + ": unsupported or missing config version (expected 1)");
    }

    RunConfig cfg;
    cfg.config_dir = std::filesystem::absolute(file).parent_path();
    const auto& base = cfg.config_dir;

    if (doc.contains("graph")) {
        const auto& g = doc["graph"];
        if (g.contains("path")) cfg.graph_path = resolve(base, g["path"].get<std::string>());
        if (g.contains("columns")) {
            const auto& c = g["columns"];
            cfg.columns.x_id = c.value("x_id", cfg.columns.x_id);
            cfg.columns.x_name = c.value("x_name", cfg.columns.x_name);
            cfg.columns.x_type = c.value("x_type", cfg.columns.x_type);
            cfg.columns.x_source = c.value("x_source", cfg.columns.x_source);
            cfg.columns.y_id = c.value("y_id", cfg.columns.y_id);
            cfg.columns.y_name = c.value("y_name", cfg.columns.y_name);
            cfg.columns.y_type = c.value("y_type", cfg.columns.y_type);
            cfg.columns.y_source = c.value("y_source", cfg.columns.y_source);
            cfg.columns.relation = c.value("relation", cfg.columns.relation);
            cfg.columns.display_relation = c.value("display_relation", cfg.columns.display_relation);
        }
    }
    if (doc.contains("index") && doc["index"].contains("path")) {
        cfg.index_path = resolve(base, doc["index"]["path"].get<std::string>());
    }
    if (doc.contains("cache_dir")) {
        cfg.cache_dir = resolve(base, doc["cache_dir"].get<std::string>());
    }

    if (!doc.contains("providers") || !doc["providers"].contains("chat") ||
        !doc["providers"].contains("embed")) {
        throw ConfigError(file.string() + ": 'providers.chat' and 'providers.embed' must be set");
    }
    cfg.chat_provider = parse_provider(doc["providers"]["chat"], base, "chat");
    cfg.embed_provider = parse_provider(doc["providers"]["embed"], base, "embed");

    if (doc.contains("mapping")) {
        const auto& m = doc["mapping"];
        cfg.mapping.tau = m.value("tau", cfg.mapping.tau);
        cfg.mapping.k_candidates = m.value("k_candidates", cfg.mapping.k_candidates);
        cfg.mapping.max_mentions_per_origin =
            m.value("max_mentions_per_origin", cfg.mapping.max_mentions_per_origin);
    }
    if (doc.contains("paths")) {
        const auto& p = doc["paths"];
        cfg.paths.k_paths = p.value("k_paths", cfg.paths.k_paths);
        cfg.paths.max_raw_paths = p.value("max_raw_paths", cfg.paths.max_raw_paths);
    }

    cfg.output_dir = resolve(base, doc.contains("pipeline")
                                       ? doc["pipeline"].value("output_dir", std::string{"out"})
                                       : std::string{"out"});
    if (doc.contains("pipeline")) {
        const auto& p = doc["pipeline"];
        cfg.pipeline.workers = p.value("workers", cfg.pipeline.workers);
        cfg.pipeline.train_only = p.value("train_only", cfg.pipeline.train_only);
        cfg.pipeline.judge_open_answers =
            p.value("judge_open_answers", cfg.pipeline.judge_open_answers);
        if (p.contains("checkpoint_dir")) {
            cfg.pipeline.checkpoint_dir = resolve(base, p["checkpoint_dir"].get<std::string>());
        }
        if (p.contains("filtered_path")) {
            cfg.pipeline.filtered_path = resolve(base, p["filtered_path"].get<std::string>());
        }
        if (p.contains("audit_path")) {
            cfg.pipeline.audit_path = resolve(base, p["audit_path"].get<std::string>());
        }
        if (p.contains("stats_path")) {
            cfg.pipeline.stats_path = resolve(base, p["stats_path"].get<std::string>());
        }
        if (p.contains("stats_table_path")) {
            cfg.pipeline.stats_table_path = resolve(base, p["stats_table_path"].get<std::string>());
        }
    }
    // unset pipeline outputs default into output_dir
    if (cfg.pipeline.checkpoint_dir.empty()) cfg.pipeline.checkpoint_dir = cfg.output_dir / "checkpoint";
    if (cfg.pipeline.filtered_path.empty()) cfg.pipeline.filtered_path = cfg.output_dir / "filtered.jsonl";
    if (cfg.pipeline.audit_path.empty()) cfg.pipeline.audit_path = cfg.output_dir / "audit.jsonl";
    if (cfg.pipeline.stats_path.empty()) cfg.pipeline.stats_path = cfg.output_dir / "stats.json";
    if (cfg.pipeline.stats_table_path.empty()) cfg.pipeline.stats_table_path = cfg.output_dir / "stats.txt";

    if (doc.contains("templates")) {
        for (const auto& [key, value] : doc["templates"].items()) {
            auto id = template_from_name(key);
            if (!id) {
                throw ConfigError(file.string() + ": unknown template name '" + key + "'");
            }
            cfg.template_overrides[*id] = resolve(base, value.get<std::string>());
        }
    }
    return cfg;
}

PromptLibrary build_prompt_library(const RunConfig& config) {
    PromptLibrary prompts;
    for (const auto& [id, path] : config.template_overrides) {
        prompts.load_override(id, path);
    }
    // prove every template renders before any provider call
    prompts.render(TemplateId::extraction, {{"question", "q"}, {"answer", "a"}});
    prompts.render(TemplateId::select,
                   {{"entity", "e"}, {"candidates", "1. c"}, {"question", "q"}, {"answer", "a"}});
    prompts.render(TemplateId::prune, {{"paths", "1. p"}, {"question", "q"}, {"k", "3"}});
    prompts.render(TemplateId::generate, {{"question", "q"}, {"answer", "a"}, {"paths", "1. p"}});
    prompts.render(TemplateId::eval, {{"question", "q"}, {"cot", "c"}});
    prompts.render(TemplateId::judge,
                   {{"question", "q"}, {"reference", "r"}, {"candidate", "c"}});
    return prompts;
}

void validate_config_common(const RunConfig& config) {
    config.mapping.validate();
    config.paths.validate();
    config.pipeline.validate();
    config.chat_provider.validate("providers.chat");
    config.embed_provider.validate("providers.embed");
    if (config.chat_provider.provider_id == "scripted") {
        require_file(config.chat_provider.script_path, "chat provider script");
    }
    if (config.embed_provider.provider_id == "scripted") {
        require_file(config.embed_provider.script_path, "embed provider script");
    }
    for (const auto& [id, path] : config.template_overrides) {
        require_file(path, "template override for '" + std::string(template_name(id)) + "'");
    }
    build_prompt_library(config);
}

void validate_for_build_index(const RunConfig& config) {
    validate_config_common(config);
    require_file(config.graph_path, "graph file");
    if (config.index_path.empty()) {
        throw ConfigError("index path is not configured");
    }
}

void validate_for_run(const RunConfig& config, const std::filesystem::path& input) {
    validate_config_common(config);
    require_file(config.graph_path, "graph file");
    require_file(config.index_path, "embedding index (run build-index first)");
    require_file(input, "input file");
}

} // namespace kgcot
