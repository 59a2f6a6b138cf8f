#pragma once
#include "kgcot/embed_index.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/graph.hpp"
#include "kgcot/prompts.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kgcot {

enum class MentionOrigin { question, answer };

std::string_view origin_name(MentionOrigin origin);

/// A mention extracted from the question or answer text.
struct EntityMention {
    std::string surface;
    MentionOrigin origin = MentionOrigin::question;
    int ordinal = 0; // dense from 0 within one origin
};

enum class MappingStage { exact, similarity, llm_selected };

std::string_view stage_name(MappingStage stage);

/// A mention resolved to a graph node, with the stage that decided it.
/// `score` is present iff the similarity stage decided (and then > tau).
struct MappedEntity {
    EntityMention mention;
    NodeId node = 0;
    std::string node_name;
    MappingStage stage = MappingStage::exact;
    std::optional<double> score;
};

struct MappingConfig {
    double tau = 0.85;                       // similarity threshold, strict >
    std::size_t k_candidates = 10;           // candidate set size
    std::size_t max_mentions_per_origin = 16; // bounds path-pair explosion

    void validate() const; // throws ConfigError
};

struct ExtractionResult {
    std::vector<EntityMention> mentions;
    bool parse_failed = false;
    std::string error; // human-readable parse failure detail
};

/// Prompts the LLM to list entities in Q and A, then parses the delimited
/// reply ("q1; q2 ∥ a1; a2"). Duplicate surfaces within one origin keep the
/// first occurrence; each origin is capped at max_mentions_per_origin.
/// An unparseable reply is re-prompted once with a stricter format reminder;
/// a second failure is reported on the result, not thrown.
ExtractionResult extract_entities(const std::string& question, const std::string& answer,
                                  Gateway& gateway, const PromptLibrary& prompts,
                                  const MappingConfig& config);

/// Splits a raw extraction reply into mentions. Exposed for tests.
ExtractionResult parse_extraction_reply(const std::string& reply, const MappingConfig& config);

struct QaContext {
    std::string question;
    std::string answer;
};

struct MapOutcome {
    std::optional<MappedEntity> mapped; // empty when the mention stays unmapped
    std::string note;                   // diagnostic, e.g. rejected LLM selections
};

/// Resolves one mention via the three stages in strict order:
///   1. case-folded exact match (whole-graph fast path, then candidate scan),
///   2. top candidate iff its cosine is strictly greater than tau,
///   3. LLM selection among the candidates; only a verbatim candidate name is
///      accepted, with one structured re-prompt on violation.
MapOutcome map_entity(const EntityMention& mention, const KnowledgeGraph& graph,
                      const EmbedIndex& index, Gateway& gateway, const PromptLibrary& prompts,
                      const MappingConfig& config, const QaContext& context);

struct MappingReport {
    std::vector<MappedEntity> question_mapped; // deduped by node id, mention order
    std::vector<MappedEntity> answer_mapped;
    std::vector<EntityMention> unmapped;

    bool question_empty() const { return question_mapped.empty(); }
    bool answer_empty() const { return answer_mapped.empty(); }
    std::vector<NodeId> question_nodes() const; // ascending
    std::vector<NodeId> answer_nodes() const;   // ascending
};

/// Maps every mention; duplicate node ids within one origin collapse to the
/// first mapping. Unmapped mentions are recorded, never fatal.
MappingReport map_all(std::span<const EntityMention> mentions, const KnowledgeGraph& graph,
                      const EmbedIndex& index, Gateway& gateway, const PromptLibrary& prompts,
                      const MappingConfig& config, const QaContext& context);

} // namespace kgcot
