#include "kgcot/dataset.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace kgcot {

using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void line_fail(const std::string& source, std::size_t line, const std::string& what) {
    std::ostringstream msg;
    msg << source << " line " << line << ": " << what;
    throw IngestError(msg.str());
}

std::string require_string(const ordered_json& obj, const char* key, const std::string& source,
                           std::size_t line) {
    if (!obj.contains(key) || !obj[key].is_string()) {
        line_fail(source, line, std::string("missing or non-string field '") + key + "'");
    }
    return obj[key].get<std::string>();
}

QaPair parse_qa_object(const ordered_json& obj, const std::string& source_name, std::size_t line) {
    QaPair qa;
    qa.id = require_string(obj, "id", source_name, line);
    if (trim(qa.id).empty()) line_fail(source_name, line, "empty id");
    qa.source = require_string(obj, "source", source_name, line);
    if (trim(qa.source).empty()) line_fail(source_name, line, "empty source");
    qa.question = require_string(obj, "question", source_name, line);
    if (trim(qa.question).empty()) line_fail(source_name, line, "empty question");

    if (obj.contains("options")) {
        if (!obj["options"].is_array()) line_fail(source_name, line, "'options' must be an array");
        std::unordered_set<std::string> labels;
        for (const auto& item : obj["options"]) {
            QaOption opt;
            opt.label = require_string(item, "label", source_name, line);
            opt.text = item.value("text", std::string{});
            if (trim(opt.label).empty()) line_fail(source_name, line, "option with empty label");
            if (!labels.insert(fold_name(opt.label)).second) {
                line_fail(source_name, line, "duplicate option label '" + opt.label + "'");
            }
            qa.options.push_back(std::move(opt));
        }
    }

    if (!obj.contains("answer") || !obj["answer"].is_object()) {
        line_fail(source_name, line, "missing 'answer' object");
    }
    qa.gold.label = obj["answer"].value("label", std::string{});
    qa.gold.text = obj["answer"].value("text", std::string{});
    if (qa.gold.label.empty() && qa.gold.text.empty()) {
        line_fail(source_name, line, "answer needs a label or a text");
    }
    if (!qa.options.empty()) {
        if (qa.gold.label.empty()) {
            line_fail(source_name, line, "multiple-choice answer needs a label");
        }
        bool found = false;
        for (const QaOption& opt : qa.options) {
            if (fold_name(opt.label) == fold_name(qa.gold.label)) {
                found = true;
                break;
            }
        }
        if (!found) {
            line_fail(source_name, line, "answer label '" + qa.gold.label + "' is not an option label");
        }
    }

    qa.split = obj.value("split", std::string{});
    return qa;
}

ordered_json qa_to_json(const QaPair& qa) {
    ordered_json j;
    j["id"] = qa.id;
    j["source"] = qa.source;
    j["question"] = qa.question;
    if (!qa.options.empty()) {
        ordered_json options = ordered_json::array();
        for (const QaOption& opt : qa.options) {
            options.push_back({{"label", opt.label}, {"text", opt.text}});
        }
        j["options"] = std::move(options);
    }
    ordered_json answer;
    if (!qa.gold.label.empty()) answer["label"] = qa.gold.label;
    if (!qa.gold.text.empty()) answer["text"] = qa.gold.text;
    j["answer"] = std::move(answer);
    if (!qa.split.empty()) j["split"] = qa.split;
    return j;
}

ordered_json mention_to_json(const EntityMention& m) {
    return {{"surface", m.surface}, {"origin", std::string(origin_name(m.origin))}, {"ordinal", m.ordinal}};
}

ordered_json mapped_to_json(const MappedEntity& m) {
    ordered_json j;
    j["surface"] = m.mention.surface;
    j["origin"] = std::string(origin_name(m.mention.origin));
    j["ordinal"] = m.mention.ordinal;
    j["node"] = m.node;
    j["node_name"] = m.node_name;
    j["stage"] = std::string(stage_name(m.stage));
    if (m.score) j["score"] = *m.score;
    return j;
}

ordered_json bundle_to_json(const PathBundle& bundle) {
    ordered_json pairs = ordered_json::array();
    for (const PairPaths& pair : bundle.pairs) {
        ordered_json pj;
        pj["question_node"] = pair.question_node;
        pj["answer_node"] = pair.answer_node;
        pj["status"] = std::string(pair_status_name(pair.status));
        pj["raw_count"] = pair.raw_count;
        pj["truncated"] = pair.truncated;
        pj["prune_fallback"] = pair.prune_fallback;
        ordered_json paths = ordered_json::array();
        for (const ReasoningPath& path : pair.paths) {
            paths.push_back({{"nodes", path.nodes},
                             {"names", path.node_names},
                             {"relations", path.relations}});
        }
        pj["paths"] = std::move(paths);
        pairs.push_back(std::move(pj));
    }
    return ordered_json{{"pairs", std::move(pairs)}};
}

RecordStatus status_from_string(const std::string& s, const std::string& where) {
    if (s == "generated") return RecordStatus::generated;
    if (s == "retained") return RecordStatus::retained;
    if (s == "rejected") return RecordStatus::rejected;
    if (s == "excluded") return RecordStatus::excluded;
    throw IngestError(where + ": unknown record status '" + s + "'");
}

} // namespace

std::vector<QaPair> load_qa_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IngestError("cannot open input file: " + path.string());
    }
    return parse_qa_jsonl(in, path.string());
}

std::vector<QaPair> parse_qa_jsonl(std::istream& in, const std::string& source_name) {
    std::vector<QaPair> pairs;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ordered_json obj;
        try {
            obj = ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            line_fail(source_name, line_number, std::string("invalid JSON: ") + e.what());
        }
        if (!obj.is_object()) {
            line_fail(source_name, line_number, "expected a JSON object");
        }
        QaPair qa = parse_qa_object(obj, source_name, line_number);
        if (!ids.insert(qa.id).second) {
            line_fail(source_name, line_number, "duplicate id '" + qa.id + "'");
        }
        pairs.push_back(std::move(qa));
    }
    return pairs;
}

std::string serialize_qa(const QaPair& qa) {
    return qa_to_json(qa).dump();
}

std::string serialize_record(const CotRecord& record) {
    ordered_json j = qa_to_json(record.qa);

    ordered_json mentions = ordered_json::array();
    for (const EntityMention& m : record.mentions) mentions.push_back(mention_to_json(m));
    j["mentions"] = std::move(mentions);

    ordered_json mappings = ordered_json::array();
    for (const MappedEntity& m : record.mapping.question_mapped) mappings.push_back(mapped_to_json(m));
    for (const MappedEntity& m : record.mapping.answer_mapped) mappings.push_back(mapped_to_json(m));
    j["mappings"] = std::move(mappings);

    ordered_json unmapped = ordered_json::array();
    for (const EntityMention& m : record.mapping.unmapped) {
        unmapped.push_back({{"surface", m.surface}, {"origin", std::string(origin_name(m.origin))}});
    }
    j["unmapped"] = std::move(unmapped);

    j["bundle"] = bundle_to_json(record.bundle);
    j["reasoning"] = record.cot;
    if (record.verdict) {
        j["verdict"] = {{"predicted", record.verdict->predicted},
                        {"matched", record.verdict->matched},
                        {"parse_failed", record.verdict->parse_failed}};
    } else {
        j["verdict"] = nullptr;
    }
    j["status"] = std::string(record_status_name(record.status));
    if (record.reason == ExcludeReason::none) {
        j["reason"] = nullptr;
    } else {
        j["reason"] = std::string(exclude_reason_name(record.reason));
    }
    if (!record.failure_note.empty()) {
        j["note"] = record.failure_note;
    }
    return j.dump();
}

std::string filtered_line_from_audit(const std::string& audit_line) {
    ordered_json audit = ordered_json::parse(audit_line);
    ordered_json out;
    out["id"] = audit.at("id");
    out["source"] = audit.at("source");
    out["question"] = audit.at("question");
    if (audit.contains("options")) {
        out["options"] = audit.at("options");
    }
    out["answer"] = audit.at("answer");
    out["reasoning"] = audit.at("reasoning");
    return out.dump();
}

AuditSummary summarize_audit_line(const std::string& line) {
    AuditSummary summary;
    ordered_json audit;
    try {
        audit = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("invalid audit line: ") + e.what());
    }
    summary.id = audit.at("id").get<std::string>();
    summary.source = audit.at("source").get<std::string>();
    summary.status = status_from_string(audit.at("status").get<std::string>(), "audit line");
    return summary;
}

PipelineStats stats_from_audit_lines(const std::vector<std::string>& lines) {
    std::vector<std::pair<std::string, RecordStatus>> tallies;
    tallies.reserve(lines.size());
    for (const std::string& line : lines) {
        AuditSummary s = summarize_audit_line(line);
        tallies.emplace_back(std::move(s.source), s.status);
    }
    return compute_stats(tallies);
}

std::string stats_to_json(const PipelineStats& stats) {
    ordered_json j;
    j["version"] = 1;
    j["columns"] = {"raw", "generated", "quality_filtered"};
    ordered_json sources = ordered_json::array();
    for (const auto& [name, counts] : stats.per_source) {
        sources.push_back({{"source", name},
                           {"raw", counts.raw},
                           {"generated", counts.generated},
                           {"quality_filtered", counts.filtered}});
    }
    j["sources"] = std::move(sources);
    j["total"] = {{"raw", stats.total.raw},
                  {"generated", stats.total.generated},
                  {"quality_filtered", stats.total.filtered}};
    return j.dump(2);
}

PipelineStats stats_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("invalid stats record: ") + e.what());
    }
    if (j.value("version", 0) != 1) {
        throw IngestError("unsupported stats record version");
    }
    PipelineStats stats;
    for (const auto& item : j.at("sources")) {
        SourceCounts counts;
        counts.raw = item.at("raw").get<std::uint64_t>();
        counts.generated = item.at("generated").get<std::uint64_t>();
        counts.filtered = item.at("quality_filtered").get<std::uint64_t>();
        stats.per_source.emplace_back(item.at("source").get<std::string>(), counts);
    }
    stats.total.raw = j.at("total").at("raw").get<std::uint64_t>();
    stats.total.generated = j.at("total").at("generated").get<std::uint64_t>();
    stats.total.filtered = j.at("total").at("quality_filtered").get<std::uint64_t>();
    return stats;
}

} // namespace kgcot
