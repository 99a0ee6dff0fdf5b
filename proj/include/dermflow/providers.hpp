#pragma once

#include "dermflow/error.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <type_traits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dermflow::providers {

using Vector = std::vector<double>;

struct TokenVector {
    std::string token;
    Vector vector;
};

struct NliScores {
    double contradiction = 0.0;
    double neutral = 0.0;
    double entailment = 0.0;

    friend bool operator==(const NliScores&, const NliScores&) = default;
};

class VisionModel {
public:
    virtual ~VisionModel() = default;
    /// `image` holds encoded PNG or JPEG bytes.
    virtual std::string analyze(std::span<const std::uint8_t> image, std::string_view prompt) = 0;
};

class TextModel {
public:
    virtual ~TextModel() = default;
    virtual std::string complete(std::string_view prompt) = 0;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) = 0;
    virtual std::vector<std::vector<TokenVector>> embed_tokens(const std::vector<std::string>& texts) = 0;
};

class NliProvider {
public:
    virtual ~NliProvider() = default;
    virtual NliScores infer(std::string_view premise, std::string_view hypothesis) = 0;
};

struct RetryPolicy {
    int max_retries = 2;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
    std::chrono::milliseconds deadline{60000};
    /// Replaceable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Run `call`, retrying retryable ProviderErrors with exponential backoff. Backoff that
/// would cross the deadline ends the attempts. `retries` receives the number of retries made.
/// The last error is rethrown once attempts are exhausted.
std::string call_with_retry(const RetryPolicy& policy, const std::function<std::string()>& call, int* retries = nullptr);

/// call_with_retry for calls returning something other than a string.
template <class F>
auto call_with_retry_value(const RetryPolicy& policy, F&& call, int* retries = nullptr) {
    std::optional<std::invoke_result_t<F&>> out;
    call_with_retry(policy, [&] {
        out.emplace(call());
        return std::string();
    }, retries);
    return std::move(*out);
}

struct ProviderSet {
    std::shared_ptr<VisionModel> vision;
    std::shared_ptr<TextModel> text;  // used for the explainable-review step
    std::shared_ptr<EmbeddingProvider> embedding;
    std::shared_ptr<NliProvider> nli;
    RetryPolicy retry;
};

// Wire contract helpers. Requests are JSON objects; digests are SHA-256 (hex) of the
// compact JSON dump with sorted keys.

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string sha256_hex(std::string_view data);

std::string vision_request(std::span<const std::uint8_t> image, std::string_view prompt);
std::string text_request(std::string_view prompt);
std::string embedding_request(const std::vector<std::string>& texts, bool tokens);
std::string nli_request(std::string_view premise, std::string_view hypothesis);

/// Response decoders; malformed bodies raise a non-retryable ProviderError.
std::string decode_text_response(std::string_view body);
std::vector<Vector> decode_sentence_vectors(std::string_view body, std::size_t expected);
std::vector<std::vector<TokenVector>> decode_token_vectors(std::string_view body, std::size_t expected);
NliScores decode_nli_response(std::string_view body);

/// Deterministic providers answering from canned responses keyed by request digest.
/// A fixtures directory holds vision.json, text.json, embedding.json and nli.json, each
/// an object mapping digest to the response body. Unknown digests raise a non-retryable
/// ProviderError naming the digest.
class MockProviders {
public:
    MockProviders();
    static MockProviders load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    void record_vision(std::span<const std::uint8_t> image, std::string_view prompt, std::string_view text);
    void record_text(std::string_view prompt, std::string_view text);
    void record_sentence_embedding(const std::vector<std::string>& texts, const std::vector<Vector>& vectors);
    void record_token_embedding(const std::vector<std::string>& texts, const std::vector<std::vector<TokenVector>>& vectors);
    void record_nli(std::string_view premise, std::string_view hypothesis, NliScores scores);

    /// Raw access by kind ("vision", "text", "embedding", "nli") and digest.
    void record_raw(const std::string& kind, const std::string& digest, const std::string& body);
    std::string lookup(const std::string& kind, const std::string& request) const;

    std::size_t size() const noexcept;

    /// Providers sharing this store. Each call also increments call_count(kind).
    ProviderSet provider_set(RetryPolicy retry = {}) const;

    std::size_t call_count(const std::string& kind) const;

private:
    struct State;
    std::shared_ptr<State> state_;
};

struct HttpEndpoints {
    std::string vision;
    std::string text;
    std::string embedding;
    std::string nli;
    std::string bearer_token;
    std::chrono::milliseconds timeout{30000};
};

/// Providers reached over HTTP with the JSON wire contract. Connection errors, timeouts,
/// 408, 429 and 5xx are retryable; other statuses and malformed bodies are not.
ProviderSet http_provider_set(const HttpEndpoints& endpoints, RetryPolicy retry = {});

/// Wraps a provider set so the first `failures` calls of each kind listed in `kinds`
/// raise ProviderTimeout before reaching the wrapped provider.
ProviderSet inject_timeouts(const ProviderSet& inner, int failures, const std::vector<std::string>& kinds);

}  // namespace dermflow::providers
