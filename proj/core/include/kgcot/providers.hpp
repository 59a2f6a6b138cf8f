#pragma once
#include "kgcot/gateway.hpp"

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace kgcot {

/// One declarative chat rule: matches when the request uses `template_name`
/// and every `contains` pattern occurs in the rendered prompt. Rules are
/// evaluated in file order; the first match wins.
struct ScriptedChatRule {
    std::string template_name;
    std::vector<std::string> contains;
    std::string reply;
    int fail_times = 0;          // raise `error` for this many matching calls first
    std::string error = "transient"; // transient | permanent | credential
    int delay_ms = 0;            // simulated latency per matching call
};

/// Deterministic rule-based stand-in for chat and embedding services.
///
/// Chat replies come from the first matching rule; an unmatched request is a
/// permanent provider error so tests fail loudly. Embeddings come from exact
/// text rules when present, otherwise from a deterministic hash of the text
/// (unit-norm, `embed_dimension` wide). Counters expose call totals and the
/// high-water mark of concurrent calls.
class ScriptedProvider : public ChatProvider, public EmbedProvider {
public:
    ScriptedProvider() = default;

    /// Loads the versioned JSON rule file (see docs/scripted-provider.md).
    static std::shared_ptr<ScriptedProvider> load(const std::filesystem::path& file);

    void add_chat_rule(ScriptedChatRule rule);
    void add_embed_rule(std::string text, std::vector<float> vector);
    void set_embed_dimension(std::size_t dim);

    std::string complete(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

    std::uint64_t chat_calls() const { return chat_calls_.load(); }
    std::uint64_t embed_calls() const { return embed_calls_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }

private:
    struct RuleState {
        ScriptedChatRule rule;
        std::atomic<int> failures_left{0};
    };

    std::vector<std::unique_ptr<RuleState>> chat_rules_;
    std::vector<std::pair<std::string, std::vector<float>>> embed_rules_;
    std::size_t embed_dimension_ = 16;

    std::atomic<std::uint64_t> chat_calls_{0};
    std::atomic<std::uint64_t> embed_calls_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

/// Deterministic unit-norm embedding derived from the text bytes alone.
EmbeddingVector hash_embedding(const std::string& text, std::size_t dimension);

/// OpenAI-style HTTP provider for chat completions and embeddings.
/// The API key is read from the environment variable named in the config;
/// 401/403 raise CredentialError (never retried), 408/429/5xx and transport
/// failures raise transient ProviderError.
class OpenAiHttpProvider : public ChatProvider, public EmbedProvider {
public:
    explicit OpenAiHttpProvider(ProviderConfig config);

    std::string complete(const ChatRequest& request) override;
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::string api_key() const;
    ProviderConfig config_;
    std::string base_url_;  // scheme://host[:port]
    std::string base_path_; // path prefix, e.g. /v1
};

/// Builds a provider pair from a ProviderConfig ("scripted" or "openai").
std::shared_ptr<ChatProvider> make_chat_provider(const ProviderConfig& config);
std::shared_ptr<EmbedProvider> make_embed_provider(const ProviderConfig& config);

} // namespace kgcot
