#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "kgcot/providers.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/text.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace kgcot {

namespace {

// splitmix64 over an FNV-1a seed of the text
std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct InFlightScope {
    std::atomic<int>& current;
    std::atomic<int>& high;
    explicit InFlightScope(std::atomic<int>& c, std::atomic<int>& h) : current(c), high(h) {
        const int now = current.fetch_add(1) + 1;
        int seen = high.load();
        while (seen < now && !high.compare_exchange_weak(seen, now)) {
        }
    }
    ~InFlightScope() { current.fetch_sub(1); }
};

} // namespace

EmbeddingVector hash_embedding(const std::string& text, std::size_t dimension) {
    EmbeddingVector vec;
    vec.values.resize(dimension);
    std::uint64_t state = fnv1a(text);
    double norm = 0.0;
    for (std::size_t i = 0; i < dimension; ++i) {
        const std::uint64_t r = splitmix64(state);
        // map to [-1, 1)
        const double x = (static_cast<double>(r >> 11) / 9007199254740992.0) * 2.0 - 1.0;
        vec.values[i] = static_cast<float>(x);
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
        vec.values[0] = 1.0f;
        return vec;
    }
    for (float& v : vec.values) {
        v = static_cast<float>(v / norm);
    }
    return vec;
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw ConfigError("cannot open scripted provider rule file: " + file.string());
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("invalid scripted rule file " + file.string() + ": " + e.what());
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer() || doc["version"] != 1) {
        throw ConfigError("scripted rule file " + file.string() + ": unsupported or missing version");
    }
    auto provider = std::make_shared<ScriptedProvider>();
    if (doc.contains("embed_dimension")) {
        provider->set_embed_dimension(doc["embed_dimension"].get<std::size_t>());
    }
    for (const auto& r : doc.value("chat_rules", nlohmann::json::array())) {
        ScriptedChatRule rule;
        rule.template_name = r.at("template").get<std::string>();
        if (!template_from_name(rule.template_name)) {
            throw ConfigError("scripted rule file " + file.string() + ": unknown template '" +
                              rule.template_name + "'");
        }
        for (const auto& pattern : r.value("contains", nlohmann::json::array())) {
            rule.contains.push_back(pattern.get<std::string>());
        }
        rule.reply = r.value("reply", std::string{});
        rule.fail_times = r.value("fail_times", 0);
        rule.error = r.value("error", std::string{"transient"});
        rule.delay_ms = r.value("delay_ms", 0);
        provider->add_chat_rule(std::move(rule));
    }
    for (const auto& r : doc.value("embed_rules", nlohmann::json::array())) {
        provider->add_embed_rule(r.at("text").get<std::string>(),
                                 r.at("vector").get<std::vector<float>>());
    }
    return provider;
}

void ScriptedProvider::add_chat_rule(ScriptedChatRule rule) {
    auto state = std::make_unique<RuleState>();
    state->failures_left.store(rule.fail_times);
    state->rule = std::move(rule);
    chat_rules_.push_back(std::move(state));
}

void ScriptedProvider::add_embed_rule(std::string text, std::vector<float> vector) {
    embed_rules_.emplace_back(std::move(text), std::move(vector));
}

void ScriptedProvider::set_embed_dimension(std::size_t dim) {
    embed_dimension_ = dim;
}

std::string ScriptedProvider::complete(const ChatRequest& request) {
    InFlightScope scope(in_flight_, max_in_flight_);
    chat_calls_.fetch_add(1);
    const std::string_view tname = template_name(request.template_id);
    for (const auto& state : chat_rules_) {
        const ScriptedChatRule& rule = state->rule;
        if (rule.template_name != tname) continue;
        bool matched = true;
        for (const std::string& pattern : rule.contains) {
            if (!contains(request.prompt, pattern)) {
                matched = false;
                break;
            }
        }
        if (!matched) continue;
        if (rule.delay_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(rule.delay_ms));
        }
        int left = state->failures_left.load();
        while (left > 0) {
            if (state->failures_left.compare_exchange_weak(left, left - 1)) {
                if (rule.error == "credential") {
                    throw CredentialError("scripted credential failure");
                }
                throw ProviderError("scripted failure (" + rule.error + ")",
                                    rule.error == "transient");
            }
        }
        return rule.reply;
    }
    throw ProviderError("scripted provider: no rule matches template '" + std::string(tname) +
                            "' (prompt starts: '" + request.prompt.substr(0, 96) + "')",
                        false);
}

std::vector<EmbeddingVector> ScriptedProvider::embed(const std::vector<std::string>& texts) {
    InFlightScope scope(in_flight_, max_in_flight_);
    embed_calls_.fetch_add(1);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        const std::vector<float>* scripted = nullptr;
        for (const auto& [key, vec] : embed_rules_) {
            if (key == text) {
                scripted = &vec;
                break;
            }
        }
        if (scripted) {
            out.push_back(EmbeddingVector{*scripted});
        } else {
            out.push_back(hash_embedding(text, embed_dimension_));
        }
    }
    return out;
}

OpenAiHttpProvider::OpenAiHttpProvider(ProviderConfig config) : config_(std::move(config)) {
    const std::string& ep = config_.endpoint;
    if (ep.empty()) {
        throw ConfigError("openai provider: endpoint must not be empty");
    }
    const auto scheme_end = ep.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("openai provider: endpoint must start with http:// or https://");
    }
    const auto path_start = ep.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base_url_ = ep;
        base_path_.clear();
    } else {
        base_url_ = ep.substr(0, path_start);
        base_path_ = ep.substr(path_start);
        while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    }
}

std::string OpenAiHttpProvider::api_key() const {
    if (config_.credential_env.empty()) {
        throw CredentialError("openai provider: credential_env is not configured");
    }
    const char* key = std::getenv(config_.credential_env.c_str());
    if (!key || !*key) {
        throw CredentialError("openai provider: environment variable '" + config_.credential_env +
                              "' is not set");
    }
    return key;
}

namespace {

[[noreturn]] void throw_http_status(const std::string& what, int status, const std::string& body) {
    const std::string head = body.substr(0, 200);
    if (status == 401 || status == 403) {
        throw CredentialError(what + ": authentication failed (HTTP " + std::to_string(status) +
                              "): " + head);
    }
    const bool transient = status == 408 || status == 429 || (status >= 500 && status < 600);
    throw ProviderError(what + ": HTTP " + std::to_string(status) + ": " + head, transient);
}

} // namespace

std::string OpenAiHttpProvider::complete(const ChatRequest& request) {
    nlohmann::json body{
        {"model", config_.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_output_tokens},
    };
    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key()}};
    auto res = client.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("chat: transport failure contacting " + base_url_, true);
    }
    if (res->status != 200) {
        throw_http_status("chat", res->status, res->body);
    }
    try {
        auto doc = nlohmann::json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("chat: malformed provider response: ") + e.what(), false);
    }
}

std::vector<EmbeddingVector> OpenAiHttpProvider::embed(const std::vector<std::string>& texts) {
    nlohmann::json body{{"model", config_.model_id}, {"input", texts}};
    httplib::Client client(base_url_);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    httplib::Headers headers{{"Authorization", "Bearer " + api_key()}};
    auto res = client.Post(base_path_ + "/embeddings", headers, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("embed: transport failure contacting " + base_url_, true);
    }
    if (res->status != 200) {
        throw_http_status("embed", res->status, res->body);
    }
    try {
        auto doc = nlohmann::json::parse(res->body);
        const auto& data = doc.at("data");
        std::vector<EmbeddingVector> out(texts.size());
        for (const auto& item : data) {
            const std::size_t index = item.at("index").get<std::size_t>();
            if (index >= out.size()) {
                throw ProviderError("embed: provider returned out-of-range index", false);
            }
            out[index].values = item.at("embedding").get<std::vector<float>>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("embed: malformed provider response: ") + e.what(), false);
    }
}

std::shared_ptr<ChatProvider> make_chat_provider(const ProviderConfig& config) {
    if (config.provider_id == "scripted") {
        if (config.script_path.empty()) {
            throw ConfigError("scripted chat provider requires a script path");
        }
        return ScriptedProvider::load(config.script_path);
    }
    if (config.provider_id == "openai") {
        return std::make_shared<OpenAiHttpProvider>(config);
    }
    throw ConfigError("unknown chat provider id: '" + config.provider_id + "'");
}

std::shared_ptr<EmbedProvider> make_embed_provider(const ProviderConfig& config) {
    if (config.provider_id == "scripted") {
        if (config.script_path.empty()) {
            throw ConfigError("scripted embed provider requires a script path");
        }
        return ScriptedProvider::load(config.script_path);
    }
    if (config.provider_id == "openai") {
        return std::make_shared<OpenAiHttpProvider>(config);
    }
    throw ConfigError("unknown embed provider id: '" + config.provider_id + "'");
}

} // namespace kgcot
