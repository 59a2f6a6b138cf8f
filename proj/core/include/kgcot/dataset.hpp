#pragma once
#include "kgcot/pipeline.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace kgcot {

/// Loads QA pairs from JSONL: one {id, source, question, options?, answer,
/// split?} object per line. Malformed lines raise IngestError naming the
/// line number; duplicate ids are rejected.
std::vector<QaPair> load_qa_jsonl(const std::filesystem::path& path);
std::vector<QaPair> parse_qa_jsonl(std::istream& in, const std::string& source_name);

/// Canonical one-line JSON for a pair; used for the checkpoint input digest.
std::string serialize_qa(const QaPair& qa);

/// Audit JSONL line for a record (no trailing newline). Byte-deterministic.
std::string serialize_record(const CotRecord& record);

/// Derives the filtered-output line {id, source, question, options?, answer,
/// reasoning} from an audit line. Single code path for fresh and resumed
/// records keeps outputs byte-identical across resume boundaries.
std::string filtered_line_from_audit(const std::string& audit_line);

/// Minimal fields read back from an audit line.
struct AuditSummary {
    std::string id;
    std::string source;
    RecordStatus status = RecordStatus::excluded;
};
AuditSummary summarize_audit_line(const std::string& line);

PipelineStats stats_from_audit_lines(const std::vector<std::string>& lines);

std::string stats_to_json(const PipelineStats& stats);
PipelineStats stats_from_json(const std::string& json_text);

} // namespace kgcot
