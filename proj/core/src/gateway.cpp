#include "kgcot/gateway.hpp"

#include "kgcot/errors.hpp"
#include "kgcot/hash.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace kgcot {

namespace detail {

void InFlightLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return active_ < limit_; });
    ++active_;
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --active_;
    }
    cv_.notify_one();
}

RateLimiter::RateLimiter(int rpm)
    : per_second_(rpm / 60.0), last_(std::chrono::steady_clock::now()) {
    capacity_ = std::max(1.0, per_second_);
    tokens_ = capacity_;
}

void RateLimiter::acquire() {
    std::unique_lock lock(mutex_);
    while (true) {
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * per_second_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait_s = (1.0 - tokens_) / per_second_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_s));
        lock.lock();
    }
}

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) {
        std::filesystem::create_directories(*dir_);
    }
}

std::optional<std::string> ResponseCache::get(const std::string& key_hash) {
    {
        std::shared_lock lock(mutex_);
        auto it = memory_.find(key_hash);
        if (it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    const auto file = *dir_ / key_hash;
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string value = buf.str();
    {
        std::unique_lock lock(mutex_);
        memory_.emplace(key_hash, value);
    }
    return value;
}

void ResponseCache::put(const std::string& key_hash, const std::string& value) {
    {
        std::unique_lock lock(mutex_);
        memory_[key_hash] = value;
    }
    if (!dir_) return;
    const auto file = *dir_ / key_hash;
    const auto tmp = *dir_ / (key_hash + ".tmp." + std::to_string(
                                  std::hash<std::thread::id>{}(std::this_thread::get_id())));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(value.data(), static_cast<std::streamsize>(value.size()));
        if (!out) {
            std::filesystem::remove(tmp);
            return; // cache write failure is not fatal to the request
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, file, ec);
    if (ec) {
        std::filesystem::remove(tmp);
    }
}

} // namespace detail

void ProviderConfig::validate(const std::string& lane_name) const {
    if (provider_id.empty()) throw ConfigError(lane_name + ": provider id must not be empty");
    if (max_retries < 0) throw ConfigError(lane_name + ": max_retries must be >= 0");
    if (backoff_base_ms < 0) throw ConfigError(lane_name + ": backoff_base_ms must be >= 0");
    if (rate_limit_rpm < 1) throw ConfigError(lane_name + ": rate_limit_rpm must be >= 1");
    if (in_flight_limit < 1) throw ConfigError(lane_name + ": in_flight_limit must be >= 1");
    if (embed_batch_size < 1) throw ConfigError(lane_name + ": embed_batch_size must be >= 1");
}

namespace {

std::string format_params(double temperature, int max_tokens) {
    std::ostringstream out;
    out.precision(6);
    out << std::fixed << temperature << '|' << max_tokens;
    return out.str();
}

std::string chat_cache_key(const ProviderConfig& cfg, const ChatRequest& req) {
    std::string descriptor;
    descriptor += "chat\x1f";
    descriptor += cfg.provider_id;
    descriptor += '\x1f';
    descriptor += cfg.model_id;
    descriptor += '\x1f';
    descriptor += template_name(req.template_id);
    descriptor += '\x1f';
    descriptor += format_params(req.temperature, req.max_output_tokens);
    descriptor += '\x1f';
    descriptor += req.prompt;
    return sha256_hex(descriptor);
}

std::string embed_cache_key(const ProviderConfig& cfg, const std::string& text) {
    std::string descriptor;
    descriptor += "embed\x1f";
    descriptor += cfg.provider_id;
    descriptor += '\x1f';
    descriptor += cfg.model_id;
    descriptor += '\x1f';
    descriptor += text;
    return sha256_hex(descriptor);
}

std::string encode_vector(const EmbeddingVector& v) {
    std::string out(v.values.size() * sizeof(float), '\0');
    std::memcpy(out.data(), v.values.data(), out.size());
    return out;
}

EmbeddingVector decode_vector(const std::string& bytes) {
    EmbeddingVector v;
    v.values.resize(bytes.size() / sizeof(float));
    std::memcpy(v.values.data(), bytes.data(), v.values.size() * sizeof(float));
    return v;
}

} // namespace

Gateway::Gateway(std::shared_ptr<ChatProvider> chat, ProviderConfig chat_config,
                 std::shared_ptr<EmbedProvider> embed, ProviderConfig embed_config,
                 std::optional<std::filesystem::path> cache_dir)
    : chat_provider_(std::move(chat)),
      embed_provider_(std::move(embed)),
      chat_config_(std::move(chat_config)),
      embed_config_(std::move(embed_config)),
      chat_lane_(chat_config_.in_flight_limit, chat_config_.rate_limit_rpm),
      embed_lane_(embed_config_.in_flight_limit, embed_config_.rate_limit_rpm),
      cache_(std::move(cache_dir)) {
    chat_config_.validate("chat provider");
    embed_config_.validate("embed provider");
}

template <typename Call>
auto Gateway::run_with_retries(const ProviderConfig& cfg, Lane& lane,
                               std::atomic<std::uint64_t>& retry_counter, const char* what,
                               Call&& call) -> decltype(call()) {
    std::string attempt_trace;
    for (int attempt = 1;; ++attempt) {
        try {
            lane.rate.acquire();
            lane.in_flight.acquire();
            struct Release {
                detail::InFlightLimiter& l;
                ~Release() { l.release(); }
            } release{lane.in_flight};
            return call();
        } catch (const ProviderError& e) {
            if (!e.transient()) throw;
            attempt_trace += "attempt ";
            attempt_trace += std::to_string(attempt);
            attempt_trace += ": ";
            attempt_trace += e.what();
            attempt_trace += "; ";
            if (attempt > cfg.max_retries) {
                throw ProviderError(std::string(what) + ": retries exhausted after " +
                                        std::to_string(attempt) + " attempts [" + attempt_trace + "]",
                                    false);
            }
            retry_counter.fetch_add(1, std::memory_order_relaxed);
            const auto delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(cfg.backoff_base_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
    }
}

std::string Gateway::chat(const ChatRequest& request) {
    chat_requests_.fetch_add(1, std::memory_order_relaxed);
    const std::string key = chat_cache_key(chat_config_, request);
    if (auto hit = cache_.get(key)) {
        chat_cache_hits_.fetch_add(1, std::memory_order_relaxed);
        return *hit;
    }
    std::string reply = run_with_retries(chat_config_, chat_lane_, chat_retries_, "chat", [&] {
        chat_provider_calls_.fetch_add(1, std::memory_order_relaxed);
        return chat_provider_->complete(request);
    });
    cache_.put(key, reply);
    return reply;
}

void Gateway::check_embedding(const EmbeddingVector& vec) {
    if (!all_finite(vec)) {
        throw BuildError("embedding contains non-finite entries");
    }
    std::lock_guard lock(dim_mutex_);
    if (!expected_dimension_) {
        if (vec.dimension() == 0) throw BuildError("embedding has dimension zero");
        expected_dimension_ = vec.dimension();
        return;
    }
    if (vec.dimension() != *expected_dimension_) {
        throw BuildError("embedding dimension mismatch: expected " +
                         std::to_string(*expected_dimension_) + ", got " +
                         std::to_string(vec.dimension()));
    }
}

std::vector<EmbeddingVector> Gateway::embed_uncached(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    try {
        out = run_with_retries(embed_config_, embed_lane_, embed_retries_, "embed", [&] {
            embed_provider_calls_.fetch_add(1, std::memory_order_relaxed);
            return embed_provider_->embed(texts);
        });
    } catch (const ProviderError& e) {
        throw ProviderError("embed batch of " + std::to_string(texts.size()) +
                                " texts (first: '" + texts.front() + "') failed: " + e.what(),
                            false);
    }
    if (out.size() != texts.size()) {
        throw ProviderError("embed provider returned " + std::to_string(out.size()) +
                                " vectors for " + std::to_string(texts.size()) + " inputs",
                            false);
    }
    return out;
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) {
        throw Error("embed: empty batch");
    }
    embed_texts_.fetch_add(texts.size(), std::memory_order_relaxed);

    std::unordered_map<std::string, EmbeddingVector> resolved;
    std::vector<std::string> missing;
    for (const std::string& text : texts) {
        if (resolved.contains(text)) continue;
        const std::string key = embed_cache_key(embed_config_, text);
        if (auto hit = cache_.get(key)) {
            embed_cache_hits_.fetch_add(1, std::memory_order_relaxed);
            EmbeddingVector vec = decode_vector(*hit);
            check_embedding(vec);
            resolved.emplace(text, std::move(vec));
        } else {
            missing.push_back(text);
        }
    }

    if (!missing.empty()) {
        const std::size_t batch_size = static_cast<std::size_t>(embed_config_.embed_batch_size);
        std::vector<std::vector<std::string>> batches;
        for (std::size_t i = 0; i < missing.size(); i += batch_size) {
            batches.emplace_back(missing.begin() + i,
                                 missing.begin() + std::min(missing.size(), i + batch_size));
        }
        std::vector<std::vector<EmbeddingVector>> results(batches.size());
        if (batches.size() > 1 && embed_config_.in_flight_limit > 1) {
            std::vector<std::future<std::vector<EmbeddingVector>>> futures;
            futures.reserve(batches.size());
            for (const auto& batch : batches) {
                futures.push_back(
                    std::async(std::launch::async, [this, &batch] { return embed_uncached(batch); }));
            }
            for (std::size_t i = 0; i < futures.size(); ++i) {
                results[i] = futures[i].get();
            }
        } else {
            for (std::size_t i = 0; i < batches.size(); ++i) {
                results[i] = embed_uncached(batches[i]);
            }
        }
        for (std::size_t b = 0; b < batches.size(); ++b) {
            for (std::size_t i = 0; i < batches[b].size(); ++i) {
                EmbeddingVector& vec = results[b][i];
                check_embedding(vec);
                cache_.put(embed_cache_key(embed_config_, batches[b][i]), encode_vector(vec));
                resolved.emplace(batches[b][i], std::move(vec));
            }
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const std::string& text : texts) {
        out.push_back(resolved.at(text));
    }
    return out;
}

GatewayStats Gateway::stats() const {
    GatewayStats s;
    s.chat_requests = chat_requests_.load();
    s.chat_provider_calls = chat_provider_calls_.load();
    s.chat_cache_hits = chat_cache_hits_.load();
    s.chat_retries = chat_retries_.load();
    s.embed_texts = embed_texts_.load();
    s.embed_provider_calls = embed_provider_calls_.load();
    s.embed_cache_hits = embed_cache_hits_.load();
    s.embed_retries = embed_retries_.load();
    return s;
}

std::string Gateway::chat_identity() const {
    return chat_config_.provider_id + ":" + chat_config_.model_id;
}

std::string Gateway::embed_identity() const {
    return embed_config_.provider_id + ":" + embed_config_.model_id;
}

} // namespace kgcot
