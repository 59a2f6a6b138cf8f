#include <doctest.h>

#include "kgcot/errors.hpp"
#include "kgcot/gateway.hpp"
#include "kgcot/providers.hpp"

#include "../support/helpers.hpp"

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

using namespace kgcot;
using namespace kgcot::test;

namespace {

ProviderConfig fast_config(const std::string& model) {
    ProviderConfig cfg;
    cfg.provider_id = "scripted";
    cfg.model_id = model;
    cfg.max_retries = 3;
    cfg.backoff_base_ms = 1;
    cfg.rate_limit_rpm = 600000;
    cfg.in_flight_limit = 8;
    return cfg;
}

} // namespace

TEST_CASE("scripted rule matching drives replies") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"prune", {"PRUNE"}, "1,3"});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    CHECK(gateway.chat(ChatRequest{TemplateId::prune, "please PRUNE these"}) == "1,3");
    CHECK_THROWS_AS(gateway.chat(ChatRequest{TemplateId::prune, "nothing matches"}), ProviderError);
}

TEST_CASE("second identical request is served from cache with zero provider calls") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"eval", {"ping"}, "pong"});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    const ChatRequest request{TemplateId::eval, "ping"};
    const std::string first = gateway.chat(request);
    const auto calls = provider->chat_calls();
    const std::string second = gateway.chat(request);
    CHECK(first == "pong");
    CHECK(second == first); // cache soundness: identical bytes
    CHECK(provider->chat_calls() == calls);
    CHECK(gateway.stats().chat_cache_hits == 1);
}

TEST_CASE("file cache survives a new gateway instance") {
    ScratchDir scratch("gwcache");
    {
        auto provider = std::make_shared<ScriptedProvider>();
        provider->add_chat_rule({"eval", {"ping"}, "pong"});
        Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"),
                        scratch.path());
        CHECK(gateway.chat(ChatRequest{TemplateId::eval, "ping"}) == "pong");
    }
    auto provider = std::make_shared<ScriptedProvider>();
    // no rules: any provider call would fail loudly
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"), scratch.path());
    CHECK(gateway.chat(ChatRequest{TemplateId::eval, "ping"}) == "pong");
    CHECK(provider->chat_calls() == 0);
}

TEST_CASE("transient failures retry with recorded attempts") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"flaky"}, "recovered", 2, "transient"});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    CHECK(gateway.chat(ChatRequest{TemplateId::generate, "flaky call"}) == "recovered");
    CHECK(gateway.stats().chat_retries == 2);
    CHECK(provider->chat_calls() == 3);
}

TEST_CASE("exhausted retries raise a transport error with an attempt trace") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"dead"}, "never", 100, "transient"});
    auto cfg = fast_config("chat");
    cfg.max_retries = 2;
    Gateway gateway(provider, cfg, provider, fast_config("embed"));

    CHECK_THROWS_WITH_AS(gateway.chat(ChatRequest{TemplateId::generate, "dead end"}),
                         doctest::Contains("attempt 3"), ProviderError);
    CHECK(provider->chat_calls() == 3); // initial + 2 retries
}

TEST_CASE("credential failures are not retried") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"auth"}, "never", 100, "credential"});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    CHECK_THROWS_AS(gateway.chat(ChatRequest{TemplateId::generate, "auth wall"}), CredentialError);
    CHECK(provider->chat_calls() == 1);
}

TEST_CASE("permanent provider errors are not retried") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"broken"}, "never", 100, "permanent"});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    CHECK_THROWS_AS(gateway.chat(ChatRequest{TemplateId::generate, "broken call"}), ProviderError);
    CHECK(provider->chat_calls() == 1);
}

TEST_CASE("embed preserves order and batches per text") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->set_embed_dimension(4);
    provider->add_embed_rule("a", {1, 0, 0, 0});
    provider->add_embed_rule("b", {0, 1, 0, 0});
    provider->add_embed_rule("c", {0, 0, 1, 0});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));

    auto vectors = gateway.embed({"a", "b", "c"});
    REQUIRE(vectors.size() == 3);
    CHECK(vectors[0].values[0] == 1.0f);
    CHECK(vectors[1].values[1] == 1.0f);
    CHECK(vectors[2].values[2] == 1.0f);

    // repeated text in one batch embeds once but returns twice
    auto repeated = gateway.embed({"a", "a"});
    REQUIRE(repeated.size() == 2);
    CHECK(repeated[0].values == repeated[1].values);
}

TEST_CASE("empty embed batch is a precondition error") {
    auto provider = std::make_shared<ScriptedProvider>();
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));
    CHECK_THROWS_AS(gateway.embed({}), Error);
}

TEST_CASE("hash embedder is deterministic") {
    const EmbeddingVector a = hash_embedding("ataxia", 16);
    const EmbeddingVector b = hash_embedding("ataxia", 16);
    REQUIRE(a.dimension() == 16);
    CHECK(a.values == b.values);
    CHECK(all_finite(a));
    const EmbeddingVector c = hash_embedding("ataxia!", 16);
    CHECK(a.values != c.values);
}

TEST_CASE("cross-batch dimension drift is rejected") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->set_embed_dimension(8);
    provider->add_embed_rule("wide", {0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f,
                                      0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f});
    Gateway gateway(provider, fast_config("chat"), provider, fast_config("embed"));
    gateway.embed({"narrow"}); // pins dimension 8
    CHECK_THROWS_AS(gateway.embed({"wide"}), BuildError);
}

TEST_CASE("in-flight concurrency never exceeds the configured limit") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"stress"}, "ok", 0, "transient", 5});
    auto cfg = fast_config("chat");
    cfg.in_flight_limit = 3;
    Gateway gateway(provider, cfg, provider, fast_config("embed"));

    std::vector<std::future<void>> futures;
    for (int i = 0; i < 24; ++i) {
        futures.push_back(std::async(std::launch::async, [&gateway, i] {
            gateway.chat(ChatRequest{TemplateId::generate, "stress " + std::to_string(i)});
        }));
    }
    for (auto& f : futures) f.get();
    CHECK(provider->chat_calls() == 24);
    CHECK(provider->max_in_flight() <= 3);
}

TEST_CASE("observed request rate stays at or below the configured limit") {
    auto provider = std::make_shared<ScriptedProvider>();
    provider->add_chat_rule({"generate", {"paced"}, "ok"});
    auto cfg = fast_config("chat");
    cfg.rate_limit_rpm = 600; // 10 per second, burst capacity 10
    Gateway gateway(provider, cfg, provider, fast_config("embed"));

    const auto start = std::chrono::steady_clock::now();
    const int requests = 14; // 10 burst tokens + 4 refills
    for (int i = 0; i < requests; ++i) {
        gateway.chat(ChatRequest{TemplateId::generate, "paced " + std::to_string(i)});
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(elapsed >= 0.35); // 4 refill waits at 10/s
    CHECK(provider->chat_calls() == requests);
}
