#pragma once
#include "kgcot/embedding.hpp"
#include "kgcot/prompts.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgcot {

/// One single-shot chat completion request.
struct ChatRequest {
    TemplateId template_id = TemplateId::extraction;
    std::string prompt;
    double temperature = 0.0;
    int max_output_tokens = 4096;
};

struct ProviderConfig {
    std::string provider_id;    // "scripted" | "openai"
    std::string model_id;
    std::string endpoint;       // base URL for remote providers
    std::string credential_env; // env var holding the API key (never a literal key)
    std::string script_path;    // rule file for the scripted provider
    int max_retries = 3;        // retries after the first attempt
    int backoff_base_ms = 200;
    int rate_limit_rpm = 600;
    int in_flight_limit = 8;
    int embed_batch_size = 64;

    /// Throws ConfigError when bounds are violated.
    void validate(const std::string& lane_name) const;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const ChatRequest& request) = 0;
};

class EmbedProvider {
public:
    virtual ~EmbedProvider() = default;
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

struct GatewayStats {
    std::uint64_t chat_requests = 0;
    std::uint64_t chat_provider_calls = 0;
    std::uint64_t chat_cache_hits = 0;
    std::uint64_t chat_retries = 0;
    std::uint64_t embed_texts = 0;
    std::uint64_t embed_provider_calls = 0;
    std::uint64_t embed_cache_hits = 0;
    std::uint64_t embed_retries = 0;
};

namespace detail {

/// Bounds the number of callers inside a section.
class InFlightLimiter {
public:
    explicit InFlightLimiter(int limit) : limit_(limit) {}
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int limit_;
    int active_ = 0;
};

/// Token bucket: capacity of one second's worth of requests, refilled at
/// `rpm`/60 per second. Callers block until a token is available.
class RateLimiter {
public:
    explicit RateLimiter(int rpm);
    void acquire();

private:
    std::mutex mutex_;
    double tokens_;
    double capacity_;
    double per_second_;
    std::chrono::steady_clock::time_point last_;
};

/// Content-addressed response cache: an in-memory map plus, when configured,
/// one file per request hash written atomically (tmp + rename).
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir);
    std::optional<std::string> get(const std::string& key_hash);
    void put(const std::string& key_hash, const std::string& value);

private:
    std::optional<std::filesystem::path> dir_;
    std::shared_mutex mutex_;
    std::unordered_map<std::string, std::string> memory_;
};

} // namespace detail

/// Uniform front door for chat and embedding calls: retries with exponential
/// backoff, a per-lane rate limit and in-flight bound, and response caching
/// keyed by (provider id, model id, request hash, decoding params).
///
/// Shared and safe for concurrent callers.
class Gateway {
public:
    Gateway(std::shared_ptr<ChatProvider> chat, ProviderConfig chat_config,
            std::shared_ptr<EmbedProvider> embed, ProviderConfig embed_config,
            std::optional<std::filesystem::path> cache_dir = std::nullopt);

    /// Single-shot completion. Transient failures are retried up to
    /// max_retries with exponential backoff; identical requests are served
    /// from the cache without touching the provider.
    std::string chat(const ChatRequest& request);

    /// Embeds a non-empty batch, order-preserving, one vector per input.
    /// Caches per text keyed by (provider id, model id, text), so rebuilds
    /// over unchanged texts make no provider calls. Enforces one consistent
    /// dimension and finite entries across the gateway's lifetime.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    GatewayStats stats() const;
    std::string chat_identity() const;  // "<provider id>:<model id>"
    std::string embed_identity() const;

    const ProviderConfig& chat_config() const { return chat_config_; }
    const ProviderConfig& embed_config() const { return embed_config_; }

private:
    struct Lane {
        detail::InFlightLimiter in_flight;
        detail::RateLimiter rate;
        Lane(int in_flight_limit, int rpm) : in_flight(in_flight_limit), rate(rpm) {}
    };

    template <typename Call>
    auto run_with_retries(const ProviderConfig& cfg, Lane& lane, std::atomic<std::uint64_t>& retry_counter,
                          const char* what, Call&& call) -> decltype(call());

    std::vector<EmbeddingVector> embed_uncached(const std::vector<std::string>& texts);
    void check_embedding(const EmbeddingVector& vec);

    std::shared_ptr<ChatProvider> chat_provider_;
    std::shared_ptr<EmbedProvider> embed_provider_;
    ProviderConfig chat_config_;
    ProviderConfig embed_config_;
    Lane chat_lane_;
    Lane embed_lane_;
    detail::ResponseCache cache_;

    std::mutex dim_mutex_;
    std::optional<std::size_t> expected_dimension_;

    mutable std::atomic<std::uint64_t> chat_requests_{0};
    mutable std::atomic<std::uint64_t> chat_provider_calls_{0};
    mutable std::atomic<std::uint64_t> chat_cache_hits_{0};
    mutable std::atomic<std::uint64_t> chat_retries_{0};
    mutable std::atomic<std::uint64_t> embed_texts_{0};
    mutable std::atomic<std::uint64_t> embed_provider_calls_{0};
    mutable std::atomic<std::uint64_t> embed_cache_hits_{0};
    mutable std::atomic<std::uint64_t> embed_retries_{0};
};

} // namespace kgcot
