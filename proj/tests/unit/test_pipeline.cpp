#include <doctest.h>

#include "kgcot/dataset.hpp"
#include "kgcot/errors.hpp"
#include "kgcot/pipeline.hpp"
#include "kgcot/providers.hpp"
#include "kgcot/text.hpp"

#include "../support/helpers.hpp"

#include <nlohmann/json.hpp>

#include <random>
#include <sstream>

using namespace kgcot;
using namespace kgcot::test;

namespace {

ProviderConfig scripted_config(const std::string& model) {
    ProviderConfig cfg;
    cfg.provider_id = "scripted";
    cfg.model_id = model;
    cfg.backoff_base_ms = 1;
    cfg.rate_limit_rpm = 600000;
    return cfg;
}

QaPair fig2_pair() {
    QaPair qa;
    qa.id = "qa001";
    qa.source = "medqa";
    qa.question =
        "A 4-year-old boy presents with difficulty walking, a broad-based gait, and bilateral "
        "optic disc swelling. What is the most likely diagnosis?";
    qa.options = {{"A", "Ischemic stroke"}, {"B", "Medulloblastoma"}, {"C", "Migraine"},
                  {"D", "Asthma"}};
    qa.gold = {"B", ""};
    qa.split = "train";
    return qa;
}

PathBundle single_path_bundle() {
    PathBundle bundle;
    PairPaths pair;
    pair.question_node = 0;
    pair.answer_node = 4;
    pair.status = PairStatus::connected;
    pair.raw_count = 1;
    ReasoningPath path;
    path.nodes = {0, 2, 4};
    path.node_names = {"difficulty walking", "ataxia", "medulloblastoma"};
    path.relations = {"phenotype of", "phenotype of"};
    path.question_node = 0;
    path.answer_node = 4;
    pair.paths.push_back(std::move(path));
    bundle.pairs.push_back(std::move(pair));
    return bundle;
}

struct PipelineFixture {
    std::shared_ptr<ScriptedProvider> provider;
    KnowledgeGraph graph = fixture_graph();
    std::optional<Gateway> gateway;
    std::optional<EmbedIndex> index;
    PromptLibrary prompts;
    MappingConfig mapping;
    PathConfig paths;
    PipelineConfig config;
    ScratchDir scratch{"pipeline"};

    explicit PipelineFixture(std::optional<std::filesystem::path> cache_dir = std::nullopt) {
        provider = ScriptedProvider::load(data_file("fixture_rules.json"));
        gateway.emplace(provider, scripted_config("fixture-chat-v1"), provider,
                        scripted_config("fixture-embed-v1"), std::move(cache_dir));
        index = EmbedIndex::build(graph, *gateway);
        config.workers = 4;
        config.checkpoint_dir = scratch.file("checkpoint");
        config.filtered_path = scratch.file("filtered.jsonl");
        config.audit_path = scratch.file("audit.jsonl");
        config.stats_path = scratch.file("stats.json");
        config.stats_table_path = scratch.file("stats.txt");
    }

    Pipeline pipeline() {
        return Pipeline(graph, *index, *gateway, prompts, mapping, paths, config);
    }
};

} // namespace

TEST_CASE("generate_cot stores the scripted reply verbatim and references path nodes") {
    PipelineFixture fx;
    const std::string cot = generate_cot(fig2_pair(), single_path_bundle(), *fx.gateway, fx.prompts);
    CHECK(contains(cot, "ataxia"));
    CHECK(contains(cot, "medulloblastoma"));
}

TEST_CASE("generate_cot rejects an empty bundle as a precondition violation") {
    PipelineFixture fx;
    PathBundle empty;
    CHECK_THROWS_AS(generate_cot(fig2_pair(), empty, *fx.gateway, fx.prompts), Error);
}

TEST_CASE("generate_cot re-prompts once on empty output, then fails as llm-failure material") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {}, "   "});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;
    CHECK_THROWS_AS(generate_cot(fig2_pair(), single_path_bundle(), gateway, prompts),
                    ProviderError);
    CHECK(provider->chat_calls() == 2);
}

TEST_CASE("verify_cot matches the gold label and retains") {
    PipelineFixture fx;
    Verdict verdict = verify_cot(fig2_pair(), "reasoning that mentions the 4-year-old boy case",
                                 *fx.gateway, fx.prompts);
    CHECK(verdict.matched);
    CHECK(verdict.predicted == "B");
    CHECK_FALSE(verdict.parse_failed);
}

TEST_CASE("verify_cot with a wrong label rejects") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"eval", {}, "A"});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;
    Verdict verdict = verify_cot(fig2_pair(), "some reasoning", gateway, prompts);
    CHECK_FALSE(verdict.matched);
    CHECK(verdict.predicted == "A");
}

TEST_CASE("verify_cot accepts free text that names the gold option") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"eval", {}, "the answer is (b)"});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;
    Verdict verdict = verify_cot(fig2_pair(), "some reasoning", gateway, prompts);
    CHECK(verdict.matched);
}

TEST_CASE("verify_cot flags empty replies as parse failure and rejects conservatively") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"eval", {}, ""});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;
    Verdict verdict = verify_cot(fig2_pair(), "some reasoning", gateway, prompts);
    CHECK(verdict.parse_failed);
    CHECK_FALSE(verdict.matched);
    CHECK(provider->chat_calls() == 2);
}

TEST_CASE("open-answer judging is off by default and only engages when enabled") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"eval", {}, "a paraphrase of the reference"});
    provider->add_chat_rule({"judge", {}, "yes"});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;

    QaPair qa;
    qa.id = "open1";
    qa.source = "huatuo";
    qa.question = "Describe the first-line management.";
    qa.gold = {"", "the reference answer"};

    Verdict strict = verify_cot(qa, "some reasoning", gateway, prompts, /*judge=*/false);
    CHECK_FALSE(strict.matched); // normalized equality fails, no judge call
    CHECK(provider->chat_calls() == 1);

    Verdict judged = verify_cot(qa, "some reasoning", gateway, prompts, /*judge=*/true);
    CHECK(judged.matched);

    // the judge is never consulted for multiple-choice pairs
    Verdict mc = verify_cot(fig2_pair(), "some reasoning", gateway, prompts, /*judge=*/true);
    CHECK_FALSE(mc.matched); // "a paraphrase..." extracts no label
}

TEST_CASE("the rendered eval prompt bytes never contain the gold answer") {
    PipelineFixture fx;
    std::mt19937 rng(47);
    for (int trial = 0; trial < 100; ++trial) {
        const std::string gold_text = "GOLD-" + std::to_string(rng());
        QaPair qa;
        qa.id = "p" + std::to_string(trial);
        qa.source = "synthetic";
        qa.question = "question " + std::to_string(rng());
        qa.options = {{"A", "first distractor"}, {"B", gold_text}};
        qa.gold = {"B", gold_text};
        const std::string cot = "reasoning " + std::to_string(rng());
        const std::string prompt =
            fx.prompts.render(TemplateId::eval, {{"question", qa.question}, {"cot", cot}});
        CHECK_FALSE(contains(prompt, gold_text));
        CHECK_FALSE(contains(prompt, "GOLD-"));
    }
}

TEST_CASE("compute_stats on an empty record set is all zeros") {
    PipelineStats stats = compute_stats(std::vector<CotRecord>{});
    CHECK(stats.per_source.empty());
    CHECK(stats.total.raw == 0);
    CHECK(stats.total.generated == 0);
    CHECK(stats.total.filtered == 0);
}

TEST_CASE("compute_stats counts 3 retained + 1 rejected + 1 excluded as 5/4/3") {
    std::vector<std::pair<std::string, RecordStatus>> tallies{
        {"s", RecordStatus::retained}, {"s", RecordStatus::retained},
        {"s", RecordStatus::retained}, {"s", RecordStatus::rejected},
        {"s", RecordStatus::excluded},
    };
    PipelineStats stats = compute_stats(tallies);
    REQUIRE(stats.per_source.size() == 1);
    CHECK(stats.per_source[0].second.raw == 5);
    CHECK(stats.per_source[0].second.generated == 4);
    CHECK(stats.per_source[0].second.filtered == 3);
}

TEST_CASE("compute_stats totals add per-source rows") {
    std::vector<std::pair<std::string, RecordStatus>> tallies{
        {"a", RecordStatus::retained},
        {"b", RecordStatus::rejected},
        {"a", RecordStatus::excluded},
    };
    PipelineStats stats = compute_stats(tallies);
    REQUIRE(stats.per_source.size() == 2);
    CHECK(stats.per_source[0].first == "a"); // first-seen order
    CHECK(stats.total.raw == 3);
    CHECK(stats.total.generated == 2);
    CHECK(stats.total.filtered == 1);
}

TEST_CASE("stats table renders the Raw / Generated / Quality Filtered column order") {
    // column shape and monotonicity reference at published scale
    PipelineStats stats;
    stats.per_source = {
        {"medqa", {9595, 8528, 8016}},     {"medmcqa", {9131, 7598, 6197}},
        {"pubmedqa", {24826, 20613, 10444}}, {"mmlu", {1089, 893, 827}},
        {"medxpert", {1000, 951, 666}},    {"huatuo", {9271, 7010, 6475}},
        {"hle", {159, 132, 57}},
    };
    stats.total = {55071, 45725, 32682};
    stats.validate(); // filtered <= generated <= raw everywhere, totals add up

    const std::string table = render_stats_table(stats);
    const auto raw_pos = table.find("Raw");
    const auto gen_pos = table.find("Generated");
    const auto fil_pos = table.find("Quality Filtered");
    REQUIRE(raw_pos != std::string::npos);
    REQUIRE(gen_pos != std::string::npos);
    REQUIRE(fil_pos != std::string::npos);
    CHECK(raw_pos < gen_pos);
    CHECK(gen_pos < fil_pos);
    CHECK(contains(table, "55071"));
    CHECK(contains(table, "32682"));
    CHECK(table.find("Total") > table.find("hle")); // totals row last
}

TEST_CASE("stats invariant violations are caught") {
    PipelineStats stats;
    stats.per_source = {{"s", {1, 2, 0}}}; // generated > raw
    stats.total = {1, 2, 0};
    CHECK_THROWS_AS(stats.validate(), Error);
}

TEST_CASE("stats JSON round-trips") {
    std::vector<std::pair<std::string, RecordStatus>> tallies{
        {"a", RecordStatus::retained}, {"b", RecordStatus::excluded}};
    PipelineStats stats = compute_stats(tallies);
    PipelineStats back = stats_from_json(stats_to_json(stats));
    CHECK(back == stats);
}

TEST_CASE("process_pair walks the fig-2 pair to retained with the expected trace") {
    PipelineFixture fx;
    Pipeline pipeline = fx.pipeline();
    CotRecord record = pipeline.process_pair(fig2_pair());

    CHECK(record.status == RecordStatus::retained);
    REQUIRE(record.verdict.has_value());
    CHECK(record.verdict->matched);
    CHECK(record.mentions.size() == 4); // 3 question + 1 answer
    CHECK(record.mapping.question_nodes() ==
          std::vector<NodeId>{kDifficultyWalking, kBroadBasedGait, kOpticDisc});
    CHECK(record.mapping.answer_nodes() == std::vector<NodeId>{kMedulloblastoma});
    CHECK(record.bundle.connected_pairs() == 3);
    CHECK(record.bundle.total_paths() == 3);
    CHECK(contains(record.cot, "ataxia"));

    // similarity mapping carries its score; exact mappings do not
    bool saw_similarity = false;
    for (const MappedEntity& m : record.mapping.question_mapped) {
        if (m.stage == MappingStage::similarity) {
            saw_similarity = true;
            REQUIRE(m.score.has_value());
            CHECK(*m.score > 0.85);
        } else {
            CHECK_FALSE(m.score.has_value());
        }
    }
    CHECK(saw_similarity);
}

TEST_CASE("process_pair exclusion reasons") {
    PipelineFixture fx;
    Pipeline pipeline = fx.pipeline();

    SUBCASE("no entities") {
        QaPair qa = fig2_pair();
        qa.id = "qa007";
        qa.question = "What is the sum of 2 mg and 3 mg of the same compound in milligrams?";
        qa.options = {{"A", "5"}, {"B", "6"}};
        qa.gold = {"A", ""};
        CotRecord record = pipeline.process_pair(qa);
        CHECK(record.status == RecordStatus::excluded);
        CHECK(record.reason == ExcludeReason::no_entities);
    }
    SUBCASE("no mapping") {
        // entities extracted but none resolves: selection replies garbage
        auto provider = std::make_shared<ScriptedProvider>();
        provider->add_chat_rule({"extraction", {}, "utterly unknown syndrome \xE2\x88\xA5 another mystery"});
        provider->add_chat_rule({"select", {}, "not a candidate"});
        Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
        EmbedIndex index = EmbedIndex::build(fx.graph, gateway);
        Pipeline local(fx.graph, index, gateway, fx.prompts, fx.mapping, fx.paths, fx.config);
        CotRecord record = local.process_pair(fig2_pair());
        CHECK(record.status == RecordStatus::excluded);
        CHECK(record.reason == ExcludeReason::no_mapping);
    }
    SUBCASE("no paths") {
        // answer maps to a node disconnected from the question nodes
        std::istringstream csv(
            "relation,display_relation,x_index,x_id,x_type,x_name,x_source,"
            "y_index,y_id,y_type,y_name,y_source\n"
            "rel,linked,0,A,t,ataxia,S,1,B,t,gait,S\n"
            "rel,linked,2,C,t,islanda,S,3,D,t,islandb,S\n");
        KnowledgeGraph island = KnowledgeGraph::from_csv(csv);
        auto provider = std::make_shared<ScriptedProvider>();
        provider->add_chat_rule({"extraction", {}, "ataxia \xE2\x88\xA5 islanda"});
        Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
        EmbedIndex index = EmbedIndex::build(island, gateway);
        Pipeline local(island, index, gateway, fx.prompts, fx.mapping, fx.paths, fx.config);
        CotRecord record = local.process_pair(fig2_pair());
        CHECK(record.status == RecordStatus::excluded);
        CHECK(record.reason == ExcludeReason::no_paths);
    }
    SUBCASE("llm failure") {
        auto provider = std::make_shared<ScriptedProvider>();
        provider->add_chat_rule({"extraction", {}, "never answers", 1000, "transient"});
        auto cfg = scripted_config("chat");
        cfg.max_retries = 1;
        Gateway gateway(provider, cfg, provider, scripted_config("embed"));
        EmbedIndex index = EmbedIndex::build(fx.graph, gateway);
        Pipeline local(fx.graph, index, gateway, fx.prompts, fx.mapping, fx.paths, fx.config);
        CotRecord record = local.process_pair(fig2_pair());
        CHECK(record.status == RecordStatus::excluded);
        CHECK(record.reason == ExcludeReason::llm_failure);
        CHECK_FALSE(record.failure_note.empty());
    }
}

TEST_CASE("full fixture run: 12 raw, 10 generated, 8 filtered") {
    PipelineFixture fx;
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));
    REQUIRE(pairs.size() == 12);
    Pipeline pipeline = fx.pipeline();
    PipelineResult result = pipeline.run(pairs);

    CHECK(result.stats.total.raw == 12);
    CHECK(result.stats.total.generated == 10);
    CHECK(result.stats.total.filtered == 8);
    REQUIRE(result.stats.per_source.size() == 2);
    CHECK(result.stats.per_source[0].first == "medqa");
    CHECK(result.stats.per_source[0].second.raw == 7);
    CHECK(result.stats.per_source[0].second.generated == 6);
    CHECK(result.stats.per_source[0].second.filtered == 5);
    CHECK(result.stats.per_source[1].first == "medmcqa");
    CHECK(result.stats.per_source[1].second.raw == 5);
    CHECK(result.stats.per_source[1].second.generated == 4);
    CHECK(result.stats.per_source[1].second.filtered == 3);

    // filter soundness: exactly the scripted-correct ids, each matched
    std::vector<std::string> filtered_ids;
    for (const std::string& line : result.filtered_lines) {
        filtered_ids.push_back(nlohmann::json::parse(line).at("id").get<std::string>());
    }
    CHECK(filtered_ids == std::vector<std::string>{"qa001", "qa002", "qa003", "qa004", "qa005",
                                                   "qa008", "qa009", "qa010"});

    // every ingested pair lands in exactly one terminal status
    std::map<std::string, int> status_counts;
    for (const std::string& line : result.audit_lines) {
        auto doc = nlohmann::json::parse(line);
        status_counts[doc.at("status").get<std::string>()]++;
        const std::string status = doc.at("status").get<std::string>();
        if (status == "retained") {
            CHECK(doc.at("verdict").at("matched").get<bool>());
        }
        if (status == "rejected") {
            CHECK_FALSE(doc.at("verdict").at("matched").get<bool>());
        }
        if (status == "excluded") {
            CHECK(doc.at("reason").is_string());
        }
    }
    CHECK(status_counts["retained"] == 8);
    CHECK(status_counts["rejected"] == 2);
    CHECK(status_counts["excluded"] == 2);
    CHECK(result.audit_lines.size() == 12);

    // outputs landed on disk
    CHECK(std::filesystem::exists(fx.config.filtered_path));
    CHECK(std::filesystem::exists(fx.config.audit_path));
    CHECK(std::filesystem::exists(fx.config.stats_path));
    CHECK(read_file(fx.config.stats_table_path) == render_stats_table(result.stats));
}

TEST_CASE("two independent runs produce byte-identical outputs") {
    auto run_once = [](int tag) {
        PipelineFixture fx;
        (void)tag;
        std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));
        Pipeline pipeline = fx.pipeline();
        pipeline.run(pairs);
        return std::tuple{read_file(fx.config.filtered_path), read_file(fx.config.audit_path),
                          read_file(fx.config.stats_path)};
    };
    CHECK(run_once(1) == run_once(2));
}

TEST_CASE("resume from a partial checkpoint skips completed pairs, bytes stay identical") {
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));

    PipelineFixture full;
    Pipeline pipeline_full = full.pipeline();
    pipeline_full.run(pairs);
    const auto full_chat_calls = full.provider->chat_calls();
    const std::string want_filtered = read_file(full.config.filtered_path);
    const std::string want_audit = read_file(full.config.audit_path);
    const std::string want_stats = read_file(full.config.stats_path);

    // fabricate an interrupted first leg: same meta, only 5 completed records
    PipelineFixture partial;
    std::filesystem::create_directories(partial.config.checkpoint_dir);
    std::filesystem::copy_file(full.config.checkpoint_dir / "meta.json",
                               partial.config.checkpoint_dir / "meta.json");
    {
        std::istringstream in(read_file(full.config.checkpoint_dir / "records.jsonl"));
        std::ostringstream head;
        std::string line;
        for (int i = 0; i < 5 && std::getline(in, line); ++i) head << line << '\n';
        write_file(partial.config.checkpoint_dir / "records.jsonl", head.str());
    }

    Pipeline pipeline_b = partial.pipeline();
    PipelineResult resumed = pipeline_b.run(pairs, /*resume=*/true);
    CHECK(resumed.reused_from_checkpoint == 5);
    // the 7 remaining pairs call providers; the 5 completed ones never do
    CHECK(partial.provider->chat_calls() > 0);
    CHECK(partial.provider->chat_calls() < full_chat_calls);

    CHECK(read_file(partial.config.filtered_path) == want_filtered);
    CHECK(read_file(partial.config.audit_path) == want_audit);
    CHECK(read_file(partial.config.stats_path) == want_stats);
}

TEST_CASE("resume tolerates a partial trailing checkpoint line") {
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));

    PipelineFixture full;
    full.pipeline().run(pairs);
    const std::string want_audit = read_file(full.config.audit_path);

    PipelineFixture partial;
    std::filesystem::create_directories(partial.config.checkpoint_dir);
    std::filesystem::copy_file(full.config.checkpoint_dir / "meta.json",
                               partial.config.checkpoint_dir / "meta.json");
    {
        std::istringstream in(read_file(full.config.checkpoint_dir / "records.jsonl"));
        std::ostringstream head;
        std::string line;
        for (int i = 0; i < 3 && std::getline(in, line); ++i) head << line << '\n';
        head << R"({"id": "qa0)"; // torn write, no newline
        write_file(partial.config.checkpoint_dir / "records.jsonl", head.str());
    }
    PipelineResult resumed = partial.pipeline().run(pairs, /*resume=*/true);
    CHECK(resumed.reused_from_checkpoint == 3);
    CHECK(read_file(partial.config.audit_path) == want_audit);
}

TEST_CASE("a fresh run refuses a dirty checkpoint directory") {
    PipelineFixture fx;
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));
    Pipeline pipeline = fx.pipeline();
    pipeline.run(pairs);
    CHECK_THROWS_AS(fx.pipeline().run(pairs, /*resume=*/false), ConfigError);
}

TEST_CASE("resume rejects a checkpoint for different input") {
    PipelineFixture fx;
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));
    Pipeline pipeline = fx.pipeline();
    pipeline.run(pairs);
    std::vector<QaPair> fewer(pairs.begin(), pairs.end() - 1);
    CHECK_THROWS_AS(fx.pipeline().run(fewer, /*resume=*/true), ConfigError);
}

TEST_CASE("non-train rows are skipped by the guard and never ingested") {
    PipelineFixture fx;
    std::vector<QaPair> pairs = load_qa_jsonl(data_file("fixture_qa.jsonl"));
    pairs[3].split = "test";
    Pipeline pipeline = fx.pipeline();
    PipelineResult result = pipeline.run(pairs);
    CHECK(result.skipped_non_train == 1);
    CHECK(result.stats.total.raw == 11);
}

TEST_CASE("qa JSONL loader validates lines and names offenders") {
    ScratchDir scratch("qa");
    SUBCASE("malformed json on line 3") {
        write_file(scratch.file("bad.jsonl"),
                   R"({"id":"a","source":"s","question":"q?","answer":{"text":"t"}})"
                   "\n"
                   R"({"id":"b","source":"s","question":"q?","answer":{"text":"t"}})"
                   "\n"
                   "{oops\n");
        CHECK_THROWS_WITH_AS(load_qa_jsonl(scratch.file("bad.jsonl")),
                             doctest::Contains("line 3"), IngestError);
    }
    SUBCASE("duplicate ids") {
        write_file(scratch.file("dup.jsonl"),
                   R"({"id":"a","source":"s","question":"q?","answer":{"text":"t"}})"
                   "\n"
                   R"({"id":"a","source":"s","question":"q?","answer":{"text":"t"}})"
                   "\n");
        CHECK_THROWS_WITH_AS(load_qa_jsonl(scratch.file("dup.jsonl")),
                             doctest::Contains("duplicate id"), IngestError);
    }
    SUBCASE("gold label must be an option label") {
        write_file(scratch.file("badgold.jsonl"),
                   R"({"id":"a","source":"s","question":"q?","options":[{"label":"A","text":"x"}],"answer":{"label":"Z"}})"
                   "\n");
        CHECK_THROWS_AS(load_qa_jsonl(scratch.file("badgold.jsonl")), IngestError);
    }
    SUBCASE("answer needs label or text") {
        write_file(scratch.file("noanswer.jsonl"),
                   R"({"id":"a","source":"s","question":"q?","answer":{}})"
                   "\n");
        CHECK_THROWS_AS(load_qa_jsonl(scratch.file("noanswer.jsonl")), IngestError);
    }
}

TEST_CASE("audit line serialization round-trips the filtered projection") {
    PipelineFixture fx;
    Pipeline pipeline = fx.pipeline();
    CotRecord record = pipeline.process_pair(fig2_pair());
    const std::string audit_line = serialize_record(record);
    const std::string filtered_line = filtered_line_from_audit(audit_line);
    auto filtered = nlohmann::json::parse(filtered_line);
    CHECK(filtered.at("id") == "qa001");
    CHECK(filtered.at("source") == "medqa");
    CHECK(filtered.at("reasoning").get<std::string>() == record.cot);
    CHECK(filtered.at("answer").at("label") == "B");
    CHECK(filtered.at("options").size() == 4);

    AuditSummary summary = summarize_audit_line(audit_line);
    CHECK(summary.id == "qa001");
    CHECK(summary.status == RecordStatus::retained);
}
