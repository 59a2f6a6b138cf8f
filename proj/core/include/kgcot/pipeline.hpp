#pragma once
#include "kgcot/answer_match.hpp"
#include "kgcot/embed_index.hpp"
#include "kgcot/entity_mapper.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/path_engine.hpp"
#include "kgcot/prompts.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kgcot {

/// One question-answer pair from a source dataset.
struct QaPair {
    std::string id;     // stable, unique within a run
    std::string source; // dataset tag, e.g. "medqa"
    std::string question;
    std::vector<QaOption> options; // empty for open-answer pairs
    GoldAnswer gold;
    std::string split; // optional; non-"train" rows are skipped by the guard

    /// Answer text for entity extraction: gold text, or the gold option's text.
    std::string answer_surface_text() const;
    /// Answer as presented to generation, e.g. "B. Medulloblastoma".
    std::string answer_display() const;
    /// "A. xxx\nB. yyy" block; empty when there are no options.
    std::string options_block() const;
};

enum class RecordStatus { generated, retained, rejected, excluded };
enum class ExcludeReason { none, no_entities, no_mapping, no_paths, llm_failure };

std::string_view record_status_name(RecordStatus status);
std::string_view exclude_reason_name(ExcludeReason reason);

struct Verdict {
    std::string predicted;    // the recovered answer text
    bool matched = false;     // predicted vs gold per match_answer
    bool parse_failed = false; // empty eval output after one re-prompt
};

/// Full lifecycle trace of one QA pair through the pipeline.
struct CotRecord {
    QaPair qa;
    std::vector<EntityMention> mentions;
    MappingReport mapping;
    PathBundle bundle;
    std::string cot;
    std::optional<Verdict> verdict;
    RecordStatus status = RecordStatus::excluded;
    ExcludeReason reason = ExcludeReason::none;
    std::string failure_note;
};

struct SourceCounts {
    std::uint64_t raw = 0;
    std::uint64_t generated = 0;
    std::uint64_t filtered = 0;

    bool operator==(const SourceCounts&) const = default;
};

/// Per-source raw/generated/filtered counts plus totals, first-seen order.
struct PipelineStats {
    std::vector<std::pair<std::string, SourceCounts>> per_source;
    SourceCounts total;

    /// Enforces filtered <= generated <= raw per source and for the total.
    void validate() const;
    bool operator==(const PipelineStats&) const = default;
};

/// Counts by source and status: raw = all records, generated = those that
/// reached CoT generation, filtered = retained only.
PipelineStats compute_stats(const std::vector<CotRecord>& records);
PipelineStats compute_stats(const std::vector<std::pair<std::string, RecordStatus>>& tallies);

/// Aligned text table, columns Raw / Generated / Quality Filtered, one row
/// per source plus a Total row.
std::string render_stats_table(const PipelineStats& stats);

/// Eq-4 step: path-guided CoT generation. Precondition: the bundle holds at
/// least one path. An empty reply is re-prompted once; a second empty reply
/// throws ProviderError (the caller records an llm-failure exclusion).
std::string generate_cot(const QaPair& qa, const PathBundle& bundle, Gateway& gateway,
                         const PromptLibrary& prompts);

/// Eq-5 step: recover the answer from Q and the CoT alone (the rendered eval
/// prompt never receives the gold answer), then compare against gold.
/// An unparseable reply after one re-prompt yields matched=false with the
/// parse_failed flag set (conservative rejection).
Verdict verify_cot(const QaPair& qa, const std::string& cot, Gateway& gateway,
                   const PromptLibrary& prompts, bool judge_open_answers = false);

struct PipelineConfig {
    std::size_t workers = 4;
    std::filesystem::path checkpoint_dir;
    std::filesystem::path filtered_path;
    std::filesystem::path audit_path;
    std::filesystem::path stats_path;       // machine-readable JSON
    std::filesystem::path stats_table_path; // aligned text table
    bool train_only = true;
    bool judge_open_answers = false;

    void validate() const; // throws ConfigError
};

struct PipelineResult {
    std::vector<std::string> audit_lines;    // one JSON object per pair, input order
    std::vector<std::string> filtered_lines; // retained records only, input order
    PipelineStats stats;
    std::size_t reused_from_checkpoint = 0;
    std::size_t skipped_non_train = 0;
};

/// Orchestrates extract -> map -> collect paths -> generate -> verify per
/// pair, with per-pair checkpointing. A resumed run never re-calls providers
/// for completed pairs and produces byte-identical outputs to an
/// uninterrupted run. Pairs are processed concurrently up to `workers`;
/// outputs are always written in input order.
class Pipeline {
public:
    Pipeline(const KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
             const PromptLibrary& prompts, MappingConfig mapping, PathConfig paths,
             PipelineConfig config);

    /// Runs one pair end to end. Provider failures become llm-failure
    /// exclusions; credential errors propagate (they are fatal to the run).
    CotRecord process_pair(const QaPair& qa) const;

    /// Full run over the dataset. With resume=false a non-empty checkpoint
    /// directory is an error; with resume=true completed pairs are reused.
    PipelineResult run(const std::vector<QaPair>& pairs, bool resume = false) const;

private:
    const KnowledgeGraph& graph_;
    const EmbedIndex& index_;
    Gateway& gateway_;
    const PromptLibrary& prompts_;
    MappingConfig mapping_;
    PathConfig paths_;
    PipelineConfig config_;
};

} // namespace kgcot
