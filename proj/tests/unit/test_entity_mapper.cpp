#include <doctest.h>

#include "kgcot/entity_mapper.hpp"
#include "kgcot/errors.hpp"
#include "kgcot/providers.hpp"

#include "../support/helpers.hpp"

#include <cmath>
#include <random>

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

struct MapperFixture {
    std::shared_ptr<ScriptedProvider> provider = std::make_shared<ScriptedProvider>();
    KnowledgeGraph graph = fixture_graph();
    std::optional<Gateway> gateway;
    std::optional<EmbedIndex> index;
    PromptLibrary prompts;
    MappingConfig config;
    QaContext context{"What causes the gait problem?", "medulloblastoma"};

    MapperFixture() {
        // fixture basis vectors, as in fixture_rules.json
        provider->set_embed_dimension(8);
        provider->add_embed_rule("difficulty walking", {1, 0, 0, 0, 0, 0, 0, 0});
        provider->add_embed_rule("broad-based gait", {0, 1, 0, 0, 0, 0, 0, 0});
        provider->add_embed_rule("ataxia", {0, 0, 1, 0, 0, 0, 0, 0});
        provider->add_embed_rule("abnormality of the optic disc", {0, 0, 0, 1, 0, 0, 0, 0});
        provider->add_embed_rule("medulloblastoma", {0, 0, 0, 0, 1, 0, 0, 0});
        provider->add_embed_rule("brain", {0, 0, 0, 0, 0, 1, 0, 0});
        gateway.emplace(provider, scripted_config("chat"), provider, scripted_config("embed"));
        index = EmbedIndex::build(graph, *gateway);
    }

    MapOutcome map(const std::string& surface, MentionOrigin origin = MentionOrigin::question) {
        return map_entity(EntityMention{surface, origin, 0}, graph, *index, *gateway, prompts,
                          config, context);
    }
};

} // namespace

TEST_CASE("extraction reply parsing") {
    MappingConfig config;
    SUBCASE("two question mentions and one answer mention") {
        auto result = parse_extraction_reply(
            "difficulty walking; broad-based gait \xE2\x88\xA5 medulloblastoma", config);
        REQUIRE_FALSE(result.parse_failed);
        REQUIRE(result.mentions.size() == 3);
        CHECK(result.mentions[0].surface == "difficulty walking");
        CHECK(result.mentions[0].origin == MentionOrigin::question);
        CHECK(result.mentions[0].ordinal == 0);
        CHECK(result.mentions[1].surface == "broad-based gait");
        CHECK(result.mentions[1].ordinal == 1);
        CHECK(result.mentions[2].surface == "medulloblastoma");
        CHECK(result.mentions[2].origin == MentionOrigin::answer);
        CHECK(result.mentions[2].ordinal == 0);
    }
    SUBCASE("ascii fallback separator") {
        auto result = parse_extraction_reply("a; b || c", config);
        REQUIRE_FALSE(result.parse_failed);
        CHECK(result.mentions.size() == 3);
    }
    SUBCASE("duplicates within an origin keep the first") {
        auto result = parse_extraction_reply("ataxia; Ataxia; ataxia \xE2\x88\xA5 x", config);
        REQUIRE_FALSE(result.parse_failed);
        REQUIRE(result.mentions.size() == 2);
        CHECK(result.mentions[0].surface == "ataxia");
    }
    SUBCASE("empty sides mean zero mentions, not a parse failure") {
        auto result = parse_extraction_reply(" \xE2\x88\xA5 ", config);
        CHECK_FALSE(result.parse_failed);
        CHECK(result.mentions.empty());
    }
    SUBCASE("missing separator is a parse failure") {
        auto result = parse_extraction_reply("no separator here", config);
        CHECK(result.parse_failed);
    }
    SUBCASE("per-origin cap bounds the mention count") {
        MappingConfig small;
        small.max_mentions_per_origin = 2;
        auto result = parse_extraction_reply("a; b; c; d \xE2\x88\xA5 e", small);
        REQUIRE_FALSE(result.parse_failed);
        CHECK(result.mentions.size() == 3); // 2 question + 1 answer
    }
}

TEST_CASE("extract_entities re-prompts once on an unparseable reply") {
    auto provider = std::make_shared<ScriptedProvider>();
    // first-match-wins: the stricter retry prompt carries the reminder text
    provider->add_chat_rule({"extraction", {"could not be parsed"}, "fixed \xE2\x88\xA5 reply"});
    provider->add_chat_rule({"extraction", {}, "still not parseable"});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;
    MappingConfig config;

    auto result = extract_entities("Q?", "A", gateway, prompts, config);
    REQUIRE_FALSE(result.parse_failed);
    REQUIRE(result.mentions.size() == 2);
    CHECK(result.mentions[0].surface == "fixed");
    CHECK(provider->chat_calls() == 2);
}

TEST_CASE("extract_entities reports a parse failure after two bad replies") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"extraction", {}, "never parseable"});
    Gateway gateway(provider, scripted_config("chat"), provider, scripted_config("embed"));
    PromptLibrary prompts;

    auto result = extract_entities("Q?", "A", gateway, prompts, {});
    CHECK(result.parse_failed);
    CHECK(provider->chat_calls() == 2);
}

TEST_CASE("stage 1: exact match, case-folded, including the whole-graph fast path") {
    MapperFixture fx;
    auto outcome = fx.map("Difficulty Walking");
    REQUIRE(outcome.mapped.has_value());
    CHECK(outcome.mapped->node == kDifficultyWalking);
    CHECK(outcome.mapped->stage == MappingStage::exact);
    CHECK_FALSE(outcome.mapped->score.has_value());
    CHECK(fx.provider->embed_calls() > 0); // index build only
}

TEST_CASE("stage 2: similarity above tau maps to the top candidate") {
    MapperFixture fx;
    // cosine vs "abnormality of the optic disc" = 0.87
    fx.provider->add_embed_rule("bilateral optic disc swelling",
                                {0, 0, 0, 0.87f, 0, 0, 0.493051721424842f, 0});
    auto outcome = fx.map("bilateral optic disc swelling");
    REQUIRE(outcome.mapped.has_value());
    CHECK(outcome.mapped->node == kOpticDisc);
    CHECK(outcome.mapped->stage == MappingStage::similarity);
    REQUIRE(outcome.mapped->score.has_value());
    CHECK(*outcome.mapped->score > 0.85);
    CHECK(*outcome.mapped->score == doctest::Approx(0.87).epsilon(1e-6));
}

TEST_CASE("a top score exactly equal to tau falls through to stage 3") {
    MapperFixture fx;
    fx.provider->add_embed_rule("borderline mention", {0, 0, 0.9f, 0, 0, 0, 0.3f, 0});
    // pin tau to the exactly computed top score; strict '>' must reject it
    const EmbeddingVector query{{0, 0, 0.9f, 0, 0, 0, 0.3f, 0}};
    const EmbeddingVector node{{0, 0, 1, 0, 0, 0, 0, 0}};
    fx.config.tau = cosine(query, node);
    fx.provider->add_chat_rule({"select", {"borderline mention"}, "ataxia"});

    auto outcome = fx.map("borderline mention");
    REQUIRE(outcome.mapped.has_value());
    CHECK(outcome.mapped->stage == MappingStage::llm_selected);
    CHECK(outcome.mapped->node == kAtaxia);
}

TEST_CASE("stage 3: selection accepts only verbatim candidate names") {
    MapperFixture fx;
    fx.provider->add_embed_rule("mystery growth", {0, 0, 0.5f, 0, 0.5f, 0, 0.707106781f, 0});
    SUBCASE("valid candidate accepted") {
        fx.provider->add_chat_rule({"select", {"mystery growth"}, "Medulloblastoma"});
        auto outcome = fx.map("mystery growth");
        REQUIRE(outcome.mapped.has_value());
        CHECK(outcome.mapped->stage == MappingStage::llm_selected);
        CHECK(outcome.mapped->node == kMedulloblastoma);
    }
    SUBCASE("non-candidate twice leaves the mention unmapped") {
        fx.provider->add_chat_rule({"select", {"mystery growth"}, "made-up node"});
        auto outcome = fx.map("mystery growth");
        CHECK_FALSE(outcome.mapped.has_value());
        CHECK(fx.provider->chat_calls() == 2); // one re-prompt
    }
    SUBCASE("re-prompt can rescue an invalid first reply") {
        fx.provider->add_chat_rule({"select", {"copied verbatim"}, "brain"});
        fx.provider->add_chat_rule({"select", {"mystery growth"}, "made-up node"});
        auto outcome = fx.map("mystery growth");
        REQUIRE(outcome.mapped.has_value());
        CHECK(outcome.mapped->node == kBrain);
    }
}

TEST_CASE("stage precedence: a planted exact match wins over any score") {
    std::mt19937 rng(41);
    std::uniform_real_distribution<float> score_dist(0.86f, 0.999f);
    for (int trial = 0; trial < 50; ++trial) {
        MapperFixture fx;
        // adversarial: another candidate scores near 1, the exact match scores low
        const float high = score_dist(rng);
        fx.provider->add_embed_rule("ATAXIA ",
                                    {0, high, 0, 0, 0, 0,
                                     std::sqrt(std::max(0.0f, 1.0f - high * high)), 0});
        auto outcome = fx.map("ATAXIA ");
        REQUIRE(outcome.mapped.has_value());
        CHECK(outcome.mapped->stage == MappingStage::exact);
        CHECK(outcome.mapped->node == kAtaxia);
    }
}

TEST_CASE("stage-2 soundness: lowering tau never changes an exact outcome") {
    MapperFixture fx;
    fx.config.tau = 0.05;
    auto outcome = fx.map("medulloblastoma");
    REQUIRE(outcome.mapped.has_value());
    CHECK(outcome.mapped->stage == MappingStage::exact);
}

TEST_CASE("monotonicity: enlarging k_candidates never unmaps a mapped mention") {
    MapperFixture fx;
    fx.provider->add_embed_rule("bilateral optic disc swelling",
                                {0, 0, 0, 0.87f, 0, 0, 0.493051721424842f, 0});
    for (std::size_t k = 1; k <= 6; ++k) {
        fx.config.k_candidates = k;
        auto outcome = fx.map("bilateral optic disc swelling");
        REQUIRE(outcome.mapped.has_value());
        CHECK(outcome.mapped->node == kOpticDisc);
    }
}

TEST_CASE("determinism: identical runs produce identical mappings") {
    for (int run = 0; run < 2; ++run) {
        static std::vector<std::string> seen;
        MapperFixture fx;
        fx.provider->add_embed_rule("bilateral optic disc swelling",
                                    {0, 0, 0, 0.87f, 0, 0, 0.493051721424842f, 0});
        auto outcome = fx.map("bilateral optic disc swelling");
        REQUIRE(outcome.mapped.has_value());
        const std::string signature = std::string(stage_name(outcome.mapped->stage)) + "/" +
                                      std::to_string(outcome.mapped->node) + "/" +
                                      std::to_string(*outcome.mapped->score);
        seen.push_back(signature);
        if (seen.size() == 2) CHECK(seen[0] == seen[1]);
    }
}

TEST_CASE("map_all collapses duplicate nodes and records unmapped mentions") {
    MapperFixture fx;
    fx.provider->add_chat_rule({"select", {}, "not a candidate"});
    std::vector<EntityMention> mentions{
        {"difficulty walking", MentionOrigin::question, 0},
        {"Difficulty   Walking", MentionOrigin::question, 1}, // same node after folding
        {"completely unknown thing", MentionOrigin::question, 2},
        {"medulloblastoma", MentionOrigin::answer, 0},
    };
    MappingReport report = map_all(mentions, fx.graph, *fx.index, *fx.gateway, fx.prompts,
                                   fx.config, fx.context);
    CHECK(report.question_mapped.size() == 1);
    CHECK(report.question_nodes() == std::vector<NodeId>{kDifficultyWalking});
    CHECK(report.answer_nodes() == std::vector<NodeId>{kMedulloblastoma});
    REQUIRE(report.unmapped.size() == 1);
    CHECK(report.unmapped[0].surface == "completely unknown thing");
}

TEST_CASE("map_all with every answer mention unmapped leaves the answer set empty") {
    MapperFixture fx;
    fx.provider->add_chat_rule({"select", {}, "nope"});
    std::vector<EntityMention> mentions{
        {"ataxia", MentionOrigin::question, 0},
        {"unknown answer entity", MentionOrigin::answer, 0},
    };
    MappingReport report = map_all(mentions, fx.graph, *fx.index, *fx.gateway, fx.prompts,
                                   fx.config, fx.context);
    CHECK_FALSE(report.question_empty());
    CHECK(report.answer_empty());
}

TEST_CASE("fig-2 style mention set maps to the expected node sets") {
    MapperFixture fx;
    fx.provider->add_embed_rule("bilateral optic disc swelling",
                                {0, 0, 0, 0.87f, 0, 0, 0.493051721424842f, 0});
    std::vector<EntityMention> mentions{
        {"difficulty walking", MentionOrigin::question, 0},
        {"broad-based gait", MentionOrigin::question, 1},
        {"bilateral optic disc swelling", MentionOrigin::question, 2},
        {"medulloblastoma", MentionOrigin::answer, 0},
    };
    MappingReport report = map_all(mentions, fx.graph, *fx.index, *fx.gateway, fx.prompts,
                                   fx.config, fx.context);
    CHECK(report.question_nodes() ==
          std::vector<NodeId>{kDifficultyWalking, kBroadBasedGait, kOpticDisc});
    CHECK(report.answer_nodes() == std::vector<NodeId>{kMedulloblastoma});
    CHECK(report.unmapped.empty());
}

TEST_CASE("mapping config bounds") {
    MappingConfig config;
    config.tau = 1.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.tau = 0.0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
    config.tau = 0.85;
    config.k_candidates = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
}
