#include "kgcot/entity_mapper.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <algorithm>
#include <unordered_set>

namespace kgcot {

namespace {

constexpr std::string_view kSeparator = "\xE2\x88\xA5"; // '∥'
constexpr std::string_view kAsciiSeparator = "||";

constexpr const char* kExtractionRetrySuffix =
    "\n\nYour previous reply could not be parsed. Respond with ONLY one line in the exact "
    "delimited format: <question entities separated by '; '> \xE2\x88\xA5 <answer entities "
    "separated by '; '>.";

constexpr const char* kSelectRetrySuffix =
    "\n\nYour previous reply was not one of the candidates. Respond with exactly one candidate "
    "node name from the list above, copied verbatim, and nothing else.";

std::vector<std::string> parse_entity_list(std::string_view part) {
    std::vector<std::string> out;
    for (const std::string& piece : split(part, ';')) {
        std::string entity = trim(piece);
        if (!entity.empty()) {
            out.push_back(std::move(entity));
        }
    }
    return out;
}

void append_mentions(std::vector<EntityMention>& mentions, const std::vector<std::string>& surfaces,
                     MentionOrigin origin, std::size_t cap) {
    std::unordered_set<std::string> seen;
    int ordinal = 0;
    for (const std::string& surface : surfaces) {
        if (static_cast<std::size_t>(ordinal) >= cap) break;
        if (!seen.insert(fold_name(surface)).second) continue; // first occurrence kept
        mentions.push_back(EntityMention{surface, origin, ordinal++});
    }
}

std::string render_candidates(const CandidateSet& set) {
    std::string out;
    for (std::size_t i = 0; i < set.entries.size(); ++i) {
        out += std::to_string(i + 1);
        out += ". ";
        out += set.entries[i].name;
        if (i + 1 < set.entries.size()) out.push_back('\n');
    }
    return out;
}

} // namespace

std::string_view origin_name(MentionOrigin origin) {
    return origin == MentionOrigin::question ? "question" : "answer";
}

std::string_view stage_name(MappingStage stage) {
    switch (stage) {
        case MappingStage::exact: return "exact";
        case MappingStage::similarity: return "similarity";
        case MappingStage::llm_selected: return "llm_selected";
    }
    return "unknown";
}

void MappingConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) {
        throw ConfigError("mapping: tau must be in (0, 1)");
    }
    if (k_candidates < 1) {
        throw ConfigError("mapping: k_candidates must be >= 1");
    }
    if (max_mentions_per_origin < 1) {
        throw ConfigError("mapping: max_mentions_per_origin must be >= 1");
    }
}

ExtractionResult parse_extraction_reply(const std::string& reply, const MappingConfig& config) {
    ExtractionResult result;
    std::size_t sep_pos = reply.find(kSeparator);
    std::size_t sep_len = kSeparator.size();
    if (sep_pos == std::string::npos) {
        sep_pos = reply.find(kAsciiSeparator);
        sep_len = kAsciiSeparator.size();
    }
    if (sep_pos == std::string::npos) {
        result.parse_failed = true;
        result.error = "missing entity separator in extraction reply";
        return result;
    }
    const std::string question_part = reply.substr(0, sep_pos);
    const std::string answer_part = reply.substr(sep_pos + sep_len);
    append_mentions(result.mentions, parse_entity_list(question_part), MentionOrigin::question,
                    config.max_mentions_per_origin);
    append_mentions(result.mentions, parse_entity_list(answer_part), MentionOrigin::answer,
                    config.max_mentions_per_origin);
    return result;
}

ExtractionResult extract_entities(const std::string& question, const std::string& answer,
                                  Gateway& gateway, const PromptLibrary& prompts,
                                  const MappingConfig& config) {
    if (trim(question).empty()) {
        throw Error("extract_entities: question must not be empty");
    }
    const std::string prompt =
        prompts.render(TemplateId::extraction, {{"question", question}, {"answer", answer}});
    ChatRequest request{TemplateId::extraction, prompt};
    ExtractionResult result = parse_extraction_reply(gateway.chat(request), config);
    if (!result.parse_failed) {
        return result;
    }
    // one re-prompt with a stricter format reminder
    ChatRequest retry{TemplateId::extraction, prompt + kExtractionRetrySuffix};
    result = parse_extraction_reply(gateway.chat(retry), config);
    if (result.parse_failed) {
        result.error = "extraction reply unparseable after one re-prompt";
    }
    return result;
}

MapOutcome map_entity(const EntityMention& mention, const KnowledgeGraph& graph,
                      const EmbedIndex& index, Gateway& gateway, const PromptLibrary& prompts,
                      const MappingConfig& config, const QaContext& context) {
    MapOutcome outcome;

    // Whole-graph exact lookup first; guards against weak embedders that do
    // not rank identical strings on top.
    if (auto node = graph.node_by_name(mention.surface)) {
        outcome.mapped =
            MappedEntity{mention, node->id, node->name, MappingStage::exact, std::nullopt};
        return outcome;
    }

    const CandidateSet candidates = index.top_k(mention.surface, config.k_candidates, gateway);

    // Stage 1: exact match within the candidate set.
    const std::string folded = fold_name(mention.surface);
    for (const Candidate& c : candidates.entries) {
        if (fold_name(c.name) == folded) {
            outcome.mapped = MappedEntity{mention, c.id, c.name, MappingStage::exact, std::nullopt};
            return outcome;
        }
    }

    // Stage 2: top candidate iff strictly above the threshold.
    if (!candidates.entries.empty() && candidates.entries.front().score > config.tau) {
        const Candidate& top = candidates.entries.front();
        outcome.mapped =
            MappedEntity{mention, top.id, top.name, MappingStage::similarity, top.score};
        return outcome;
    }

    // Stage 3: LLM selection among the candidates; only a verbatim candidate
    // name is accepted.
    const std::string prompt = prompts.render(TemplateId::select, {{"entity", mention.surface},
                                                                   {"candidates", render_candidates(candidates)},
                                                                   {"question", context.question},
                                                                   {"answer", context.answer}});
    auto find_candidate = [&](const std::string& reply) -> const Candidate* {
        const std::string wanted = fold_name(reply);
        for (const Candidate& c : candidates.entries) {
            if (fold_name(c.name) == wanted) return &c;
        }
        return nullptr;
    };

    std::string reply = gateway.chat(ChatRequest{TemplateId::select, prompt});
    const Candidate* chosen = find_candidate(reply);
    if (!chosen) {
        reply = gateway.chat(ChatRequest{TemplateId::select, prompt + kSelectRetrySuffix});
        chosen = find_candidate(reply);
    }
    if (!chosen) {
        outcome.note = "llm selection named a non-candidate twice: '" + trim(reply) + "'";
        return outcome;
    }
    outcome.mapped =
        MappedEntity{mention, chosen->id, chosen->name, MappingStage::llm_selected, std::nullopt};
    return outcome;
}

std::vector<NodeId> MappingReport::question_nodes() const {
    std::vector<NodeId> ids;
    ids.reserve(question_mapped.size());
    for (const MappedEntity& m : question_mapped) ids.push_back(m.node);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<NodeId> MappingReport::answer_nodes() const {
    std::vector<NodeId> ids;
    ids.reserve(answer_mapped.size());
    for (const MappedEntity& m : answer_mapped) ids.push_back(m.node);
    std::sort(ids.begin(), ids.end());
    return ids;
}

MappingReport map_all(std::span<const EntityMention> mentions, const KnowledgeGraph& graph,
                      const EmbedIndex& index, Gateway& gateway, const PromptLibrary& prompts,
                      const MappingConfig& config, const QaContext& context) {
    MappingReport report;
    std::unordered_set<NodeId> question_seen;
    std::unordered_set<NodeId> answer_seen;
    for (const EntityMention& mention : mentions) {
        MapOutcome outcome = map_entity(mention, graph, index, gateway, prompts, config, context);
        if (!outcome.mapped) {
            report.unmapped.push_back(mention);
            continue;
        }
        auto& seen = mention.origin == MentionOrigin::question ? question_seen : answer_seen;
        if (!seen.insert(outcome.mapped->node).second) {
            continue; // duplicate node within one origin collapses
        }
        auto& bucket = mention.origin == MentionOrigin::question ? report.question_mapped
                                                                 : report.answer_mapped;
        bucket.push_back(std::move(*outcome.mapped));
    }
    return report;
}

} // namespace kgcot
