#include "kgcot/pipeline.hpp"

#include "kgcot/dataset.hpp"
#include "kgcot/errors.hpp"
#include "kgcot/hash.hpp"
#include "kgcot/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace kgcot {

namespace {

constexpr const char* kGenerateRetrySuffix =
    "\n\nYour previous reply was empty. Write the full step-by-step reasoning now.";

constexpr const char* kEvalRetrySuffix =
    "\n\nYour previous reply was empty. Respond with the answer only.";

} // namespace

std::string QaPair::answer_surface_text() const {
    if (!gold.text.empty()) return gold.text;
    for (const QaOption& opt : options) {
        if (fold_name(opt.label) == fold_name(gold.label)) return opt.text;
    }
    return {};
}

std::string QaPair::answer_display() const {
    if (options.empty()) return gold.text;
    std::string text = answer_surface_text();
    if (text.empty()) return gold.label;
    return gold.label + ". " + text;
}

std::string QaPair::options_block() const {
    std::string out;
    for (std::size_t i = 0; i < options.size(); ++i) {
        if (i) out.push_back('\n');
        out += options[i].label;
        out += ". ";
        out += options[i].text;
    }
    return out;
}

std::string_view record_status_name(RecordStatus status) {
    switch (status) {
        case RecordStatus::generated: return "generated";
        case RecordStatus::retained: return "retained";
        case RecordStatus::rejected: return "rejected";
        case RecordStatus::excluded: return "excluded";
    }
    return "unknown";
}

std::string_view exclude_reason_name(ExcludeReason reason) {
    switch (reason) {
        case ExcludeReason::none: return "none";
        case ExcludeReason::no_entities: return "no-entities";
        case ExcludeReason::no_mapping: return "no-mapping";
        case ExcludeReason::no_paths: return "no-paths";
        case ExcludeReason::llm_failure: return "llm-failure";
    }
    return "unknown";
}

void PipelineStats::validate() const {
    auto check = [](const std::string& name, const SourceCounts& c) {
        if (!(c.filtered <= c.generated && c.generated <= c.raw)) {
            throw Error("stats invariant violated for '" + name + "': filtered " +
                        std::to_string(c.filtered) + " <= generated " + std::to_string(c.generated) +
                        " <= raw " + std::to_string(c.raw) + " does not hold");
        }
    };
    SourceCounts sum;
    for (const auto& [name, counts] : per_source) {
        check(name, counts);
        sum.raw += counts.raw;
        sum.generated += counts.generated;
        sum.filtered += counts.filtered;
    }
    check("total", total);
    if (sum.raw != total.raw || sum.generated != total.generated || sum.filtered != total.filtered) {
        throw Error("stats total does not equal the sum of its sources");
    }
}

PipelineStats compute_stats(const std::vector<std::pair<std::string, RecordStatus>>& tallies) {
    PipelineStats stats;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& [source, status] : tallies) {
        auto [it, inserted] = index.emplace(source, stats.per_source.size());
        if (inserted) {
            stats.per_source.emplace_back(source, SourceCounts{});
        }
        SourceCounts& counts = stats.per_source[it->second].second;
        counts.raw += 1;
        stats.total.raw += 1;
        const bool generated = status == RecordStatus::generated ||
                               status == RecordStatus::retained ||
                               status == RecordStatus::rejected;
        if (generated) {
            counts.generated += 1;
            stats.total.generated += 1;
        }
        if (status == RecordStatus::retained) {
            counts.filtered += 1;
            stats.total.filtered += 1;
        }
    }
    stats.validate();
    return stats;
}

PipelineStats compute_stats(const std::vector<CotRecord>& records) {
    std::vector<std::pair<std::string, RecordStatus>> tallies;
    tallies.reserve(records.size());
    for (const CotRecord& record : records) {
        tallies.emplace_back(record.qa.source, record.status);
    }
    return compute_stats(tallies);
}

std::string render_stats_table(const PipelineStats& stats) {
    static constexpr const char* kRawHeader = "Raw";
    static constexpr const char* kGeneratedHeader = "Generated";
    static constexpr const char* kFilteredHeader = "Quality Filtered";

    std::size_t name_width = std::string("Source").size();
    for (const auto& [name, counts] : stats.per_source) {
        name_width = std::max(name_width, name.size());
    }
    name_width = std::max(name_width, std::string("Total").size());

    auto number_width = [](std::uint64_t max_value, const char* header) {
        return std::max(std::to_string(max_value).size(), std::string(header).size());
    };
    const std::size_t raw_w = number_width(stats.total.raw, kRawHeader);
    const std::size_t gen_w = number_width(stats.total.generated, kGeneratedHeader);
    const std::size_t fil_w = number_width(stats.total.filtered, kFilteredHeader);

    std::ostringstream out;
    auto row = [&](const std::string& name, const std::string& raw, const std::string& gen,
                   const std::string& fil) {
        out << name << std::string(name_width - name.size(), ' ');
        out << "  " << std::string(raw_w - raw.size(), ' ') << raw;
        out << "  " << std::string(gen_w - gen.size(), ' ') << gen;
        out << "  " << std::string(fil_w - fil.size(), ' ') << fil;
        out << '\n';
    };
    row("Source", kRawHeader, kGeneratedHeader, kFilteredHeader);
    for (const auto& [name, counts] : stats.per_source) {
        row(name, std::to_string(counts.raw), std::to_string(counts.generated),
            std::to_string(counts.filtered));
    }
    row("Total", std::to_string(stats.total.raw), std::to_string(stats.total.generated),
        std::to_string(stats.total.filtered));
    return out.str();
}

std::string generate_cot(const QaPair& qa, const PathBundle& bundle, Gateway& gateway,
                         const PromptLibrary& prompts) {
    if (bundle.total_paths() == 0) {
        throw Error("generate_cot: path bundle must contain at least one path");
    }
    std::string question_block = qa.question;
    if (!qa.options.empty()) {
        question_block += "\n\nOptions:\n";
        question_block += qa.options_block();
    }
    std::string paths_text;
    std::size_t n = 1;
    for (const ReasoningPath* path : bundle.all_paths()) {
        if (n > 1) paths_text.push_back('\n');
        paths_text += std::to_string(n++);
        paths_text += ". ";
        paths_text += render_path(*path);
    }
    const std::string prompt = prompts.render(TemplateId::generate, {{"question", question_block},
                                                                     {"answer", qa.answer_display()},
                                                                     {"paths", paths_text}});
    std::string reply = gateway.chat(ChatRequest{TemplateId::generate, prompt});
    if (!trim(reply).empty()) {
        return reply;
    }
    reply = gateway.chat(ChatRequest{TemplateId::generate, prompt + kGenerateRetrySuffix});
    if (trim(reply).empty()) {
        throw ProviderError("generation produced empty output after one re-prompt", false);
    }
    return reply;
}

Verdict verify_cot(const QaPair& qa, const std::string& cot, Gateway& gateway,
                   const PromptLibrary& prompts, bool judge_open_answers) {
    if (trim(cot).empty()) {
        throw Error("verify_cot: cot must not be empty");
    }
    // The eval template accepts only {question, cot}; the gold answer is
    // structurally absent from this prompt.
    const std::string prompt =
        prompts.render(TemplateId::eval, {{"question", qa.question}, {"cot", cot}});
    std::string reply = gateway.chat(ChatRequest{TemplateId::eval, prompt});
    if (trim(reply).empty()) {
        reply = gateway.chat(ChatRequest{TemplateId::eval, prompt + kEvalRetrySuffix});
    }
    Verdict verdict;
    verdict.predicted = trim(reply);
    if (verdict.predicted.empty()) {
        verdict.parse_failed = true;
        verdict.matched = false; // conservative rejection
        return verdict;
    }
    verdict.matched = match_answer(verdict.predicted, qa.gold, qa.options);
    if (!verdict.matched && judge_open_answers && qa.options.empty() && !qa.gold.text.empty()) {
        const std::string judge_prompt =
            prompts.render(TemplateId::judge, {{"question", qa.question},
                                               {"reference", qa.gold.text},
                                               {"candidate", verdict.predicted}});
        const std::string judge_reply = gateway.chat(ChatRequest{TemplateId::judge, judge_prompt});
        verdict.matched = fold_name(trim(judge_reply)) == "yes";
    }
    return verdict;
}

void PipelineConfig::validate() const {
    if (workers < 1) throw ConfigError("pipeline: workers must be >= 1");
    if (checkpoint_dir.empty()) throw ConfigError("pipeline: checkpoint_dir must be set");
    if (filtered_path.empty()) throw ConfigError("pipeline: filtered_path must be set");
    if (audit_path.empty()) throw ConfigError("pipeline: audit_path must be set");
    if (stats_path.empty()) throw ConfigError("pipeline: stats_path must be set");
    if (stats_table_path.empty()) throw ConfigError("pipeline: stats_table_path must be set");
}

namespace {

/// Per-pair checkpoint state: meta.json pins the input digest, records.jsonl
/// accumulates one audit line per completed pair (append + flush, so a kill
/// loses at most the line being written; a partial trailing line is dropped
/// on load).
class CheckpointStore {
public:
    explicit CheckpointStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    bool has_records() const {
        std::error_code ec;
        return std::filesystem::exists(records_path(), ec) &&
               std::filesystem::file_size(records_path(), ec) > 0;
    }

    void ensure_meta(const std::string& input_digest) const {
        const auto meta = meta_path();
        if (std::filesystem::exists(meta)) {
            std::ifstream in(meta);
            nlohmann::json doc;
            try {
                in >> doc;
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("corrupt checkpoint meta " + meta.string() + ": " + e.what());
            }
            if (doc.value("version", 0) != 1) {
                throw ConfigError("unsupported checkpoint version in " + meta.string());
            }
            if (doc.value("input_digest", std::string{}) != input_digest) {
                throw ConfigError("checkpoint at " + dir_.string() +
                                  " was created for a different input; refusing to resume");
            }
            return;
        }
        nlohmann::ordered_json doc{{"version", 1}, {"input_digest", input_digest}};
        const auto tmp = meta.string() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::trunc);
            out << doc.dump(2) << '\n';
            if (!out) throw ConfigError("cannot write checkpoint meta " + meta.string());
        }
        std::filesystem::rename(tmp, meta);
    }

    std::unordered_map<std::string, std::string> load_records() const {
        std::unordered_map<std::string, std::string> records;
        std::string content;
        {
            std::ifstream in(records_path(), std::ios::binary);
            if (!in) return records;
            std::ostringstream buf;
            buf << in.rdbuf();
            content = buf.str();
        }
        if (content.empty()) return records;

        // A kill mid-append can leave a torn final line. Parse line by line;
        // a trailing line that does not parse (or lacks its newline) is cut
        // off so later appends start on a clean boundary.
        std::size_t pos = 0;
        std::size_t line_number = 0;
        while (pos < content.size()) {
            ++line_number;
            const std::size_t line_start = pos;
            const std::size_t nl = content.find('\n', pos);
            const bool has_newline = nl != std::string::npos;
            const std::string line =
                content.substr(line_start, (has_newline ? nl : content.size()) - line_start);
            pos = has_newline ? nl + 1 : content.size();
            const bool is_last = pos >= content.size();

            if (trim(line).empty()) continue;

            std::optional<AuditSummary> summary;
            try {
                summary = summarize_audit_line(line);
            } catch (const Error&) {
                if (!is_last) {
                    throw IngestError("corrupt checkpoint record at " + records_path().string() +
                                      " line " + std::to_string(line_number));
                }
                std::cerr << "warning: dropping partial trailing checkpoint line\n";
                std::error_code ec;
                std::filesystem::resize_file(records_path(), line_start, ec);
                if (ec) {
                    throw Error("cannot repair torn checkpoint file " + records_path().string());
                }
                break;
            }
            if (is_last && !has_newline) {
                // record intact, newline lost mid-kill: restore the boundary
                std::ofstream out(records_path(), std::ios::binary | std::ios::app);
                out << '\n';
            }
            records[summary->id] = line;
        }
        return records;
    }

    void append(const std::string& line) {
        if (!out_.is_open()) {
            out_.open(records_path(), std::ios::binary | std::ios::app);
            if (!out_) {
                throw Error("cannot open checkpoint records file " + records_path().string());
            }
        }
        out_ << line << '\n';
        out_.flush();
    }

private:
    std::filesystem::path meta_path() const { return dir_ / "meta.json"; }
    std::filesystem::path records_path() const { return dir_ / "records.jsonl"; }

    std::filesystem::path dir_;
    std::ofstream out_;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("cannot write output file " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const std::string& line : lines) {
        out += line;
        out.push_back('\n');
    }
    return out;
}

} // namespace

Pipeline::Pipeline(const KnowledgeGraph& graph, const EmbedIndex& index, Gateway& gateway,
                   const PromptLibrary& prompts, MappingConfig mapping, PathConfig paths,
                   PipelineConfig config)
    : graph_(graph),
      index_(index),
      gateway_(gateway),
      prompts_(prompts),
      mapping_(mapping),
      paths_(paths),
      config_(std::move(config)) {
    mapping_.validate();
    paths_.validate();
    config_.validate();
}

CotRecord Pipeline::process_pair(const QaPair& qa) const {
    CotRecord record;
    record.qa = qa;
    try {
        ExtractionResult extraction = extract_entities(qa.question, qa.answer_surface_text(),
                                                       gateway_, prompts_, mapping_);
        record.mentions = extraction.mentions;
        bool has_question = false;
        bool has_answer = false;
        for (const EntityMention& m : record.mentions) {
            (m.origin == MentionOrigin::question ? has_question : has_answer) = true;
        }
        if (extraction.parse_failed || !has_question || !has_answer) {
            record.status = RecordStatus::excluded;
            record.reason = ExcludeReason::no_entities;
            record.failure_note = extraction.error;
            return record;
        }

        const QaContext context{qa.question, qa.answer_surface_text()};
        record.mapping =
            map_all(record.mentions, graph_, index_, gateway_, prompts_, mapping_, context);
        if (record.mapping.question_empty() || record.mapping.answer_empty()) {
            record.status = RecordStatus::excluded;
            record.reason = ExcludeReason::no_mapping;
            return record;
        }

        record.bundle = collect_paths(record.mapping.question_nodes(), record.mapping.answer_nodes(),
                                      graph_, gateway_, prompts_, paths_, qa.question);
        if (record.bundle.connected_pairs() == 0 || record.bundle.total_paths() == 0) {
            record.status = RecordStatus::excluded;
            record.reason = ExcludeReason::no_paths;
            return record;
        }

        record.cot = generate_cot(qa, record.bundle, gateway_, prompts_);
        record.status = RecordStatus::generated;
        record.verdict = verify_cot(qa, record.cot, gateway_, prompts_, config_.judge_open_answers);
        record.status = record.verdict->matched ? RecordStatus::retained : RecordStatus::rejected;
        return record;
    } catch (const CredentialError&) {
        throw; // configuration problem, fatal to the whole run
    } catch (const ProviderError& e) {
        record.status = RecordStatus::excluded;
        record.reason = ExcludeReason::llm_failure;
        record.failure_note = e.what();
        return record;
    }
}

PipelineResult Pipeline::run(const std::vector<QaPair>& pairs, bool resume) const {
    PipelineResult result;

    std::vector<const QaPair*> active;
    active.reserve(pairs.size());
    std::unordered_set<std::string> seen_ids;
    for (const QaPair& qa : pairs) {
        if (config_.train_only && !qa.split.empty() && qa.split != "train") {
            ++result.skipped_non_train;
            continue;
        }
        if (!seen_ids.insert(qa.id).second) {
            throw ConfigError("duplicate QA id in run input: '" + qa.id + "'");
        }
        active.push_back(&qa);
    }

    std::string digest_input;
    for (const QaPair* qa : active) {
        digest_input += serialize_qa(*qa);
        digest_input.push_back('\n');
    }
    const std::string digest = sha256_hex(digest_input);

    CheckpointStore store(config_.checkpoint_dir);
    if (!resume && store.has_records()) {
        throw ConfigError("checkpoint directory " + config_.checkpoint_dir.string() +
                          " already holds records; pass resume or use a clean directory");
    }
    store.ensure_meta(digest);
    const auto completed = store.load_records();

    std::vector<std::string> lines(active.size());
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < active.size(); ++i) {
        auto it = completed.find(active[i]->id);
        if (it != completed.end()) {
            lines[i] = it->second;
            ++result.reused_from_checkpoint;
        } else {
            todo.push_back(i);
        }
    }

    if (!todo.empty()) {
        std::mutex sink_mutex;
        std::atomic<std::size_t> cursor{0};
        std::exception_ptr first_error;
        std::mutex error_mutex;

        auto worker = [&] {
            while (true) {
                const std::size_t slot = cursor.fetch_add(1);
                if (slot >= todo.size()) return;
                {
                    std::lock_guard lock(error_mutex);
                    if (first_error) return;
                }
                const std::size_t i = todo[slot];
                try {
                    CotRecord record = process_pair(*active[i]);
                    std::string line = serialize_record(record);
                    std::lock_guard lock(sink_mutex);
                    store.append(line);
                    lines[i] = std::move(line);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    return;
                }
            }
        };

        const std::size_t worker_count = std::min(config_.workers, todo.size());
        std::vector<std::thread> threads;
        threads.reserve(worker_count);
        for (std::size_t i = 0; i < worker_count; ++i) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    result.audit_lines = std::move(lines);
    for (const std::string& line : result.audit_lines) {
        if (summarize_audit_line(line).status == RecordStatus::retained) {
            result.filtered_lines.push_back(filtered_line_from_audit(line));
        }
    }
    result.stats = stats_from_audit_lines(result.audit_lines);

    write_file_atomic(config_.audit_path, join_lines(result.audit_lines));
    write_file_atomic(config_.filtered_path, join_lines(result.filtered_lines));
    write_file_atomic(config_.stats_path, stats_to_json(result.stats) + "\n");
    write_file_atomic(config_.stats_table_path, render_stats_table(result.stats));
    return result;
}

} // namespace kgcot
