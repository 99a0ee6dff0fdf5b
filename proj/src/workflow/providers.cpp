#include "dermflow/providers.hpp"

#include <json.hpp>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include <cmath>
#include <thread>

namespace dermflow::providers {

using nlohmann::json;

namespace {

json parse_body(std::string_view body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed provider response: ") + e.what(), false);
    }
}

Vector to_vector(const json& j) {
    if (!j.is_array()) {
        throw ProviderError("vector is not an array", false);
    }
    Vector v;
    v.reserve(j.size());
    for (const json& x : j) {
        if (!x.is_number()) {
            throw ProviderError("vector component is not a number", false);
        }
        v.push_back(x.get<double>());
    }
    return v;
}

}  // namespace

std::string call_with_retry(const RetryPolicy& policy, const std::function<std::string()>& call, int* retries) {
    const auto start = std::chrono::steady_clock::now();
    std::chrono::milliseconds slept{0};
    auto backoff = policy.initial_backoff;
    int attempt = 0;
    for (;;) {
        if (retries) {
            *retries = attempt;
        }
        try {
            return call();
        } catch (const ProviderError& e) {
            if (!e.retryable() || attempt >= policy.max_retries) {
                throw;
            }
            const auto elapsed = std::max(std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start), slept);
            if (elapsed + backoff > policy.deadline) {
                throw;
            }
            if (policy.sleep) {
                policy.sleep(backoff);
            } else {
                std::this_thread::sleep_for(backoff);
            }
            slept += backoff;
            backoff = std::chrono::milliseconds(static_cast<long long>(std::llround(static_cast<double>(backoff.count()) * policy.multiplier)));
            ++attempt;
        }
    }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) {
        throw InvalidArgument("base64 length is not a multiple of 4");
    }
    std::vector<std::uint8_t> out(3 * text.size() / 4);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
    if (n < 0) {
        throw InvalidArgument("invalid base64");
    }
    std::size_t size = static_cast<std::size_t>(n);
    // EVP_DecodeBlock keeps the zero bytes produced by padding.
    if (!text.empty() && text.back() == '=') {
        --size;
        if (text.size() >= 2 && text[text.size() - 2] == '=') {
            --size;
        }
    }
    out.resize(size);
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[SHA256_DIGEST_LENGTH];
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * SHA256_DIGEST_LENGTH);
    for (unsigned char b : digest) {
        out += kHex[b >> 4];
        out += kHex[b & 15];
    }
    return out;
}

std::string vision_request(std::span<const std::uint8_t> image, std::string_view prompt) {
    return json{{"image", base64_encode(image)}, {"prompt", prompt}}.dump();
}

std::string text_request(std::string_view prompt) {
    return json{{"prompt", prompt}}.dump();
}

std::string embedding_request(const std::vector<std::string>& texts, bool tokens) {
    return json{{"texts", texts}, {"granularity", tokens ? "token" : "sentence"}}.dump();
}

std::string nli_request(std::string_view premise, std::string_view hypothesis) {
    return json{{"premise", premise}, {"hypothesis", hypothesis}}.dump();
}

std::string decode_text_response(std::string_view body) {
    const json j = parse_body(body);
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
        throw ProviderError("response lacks a string 'text' field", false);
    }
    return j["text"].get<std::string>();
}

std::vector<Vector> decode_sentence_vectors(std::string_view body, std::size_t expected) {
    const json j = parse_body(body);
    if (!j.is_object() || !j.contains("vectors") || !j["vectors"].is_array() || j["vectors"].size() != expected) {
        throw ProviderError("response lacks 'vectors' with one entry per text", false);
    }
    std::vector<Vector> out;
    for (const json& v : j["vectors"]) {
        out.push_back(to_vector(v));
    }
    return out;
}

std::vector<std::vector<TokenVector>> decode_token_vectors(std::string_view body, std::size_t expected) {
    const json j = parse_body(body);
    if (!j.is_object() || !j.contains("token_vectors") || !j["token_vectors"].is_array() || j["token_vectors"].size() != expected) {
        throw ProviderError("response lacks 'token_vectors' with one entry per text", false);
    }
    std::vector<std::vector<TokenVector>> out;
    for (const json& text : j["token_vectors"]) {
        if (!text.is_array()) {
            throw ProviderError("token_vectors entry is not an array", false);
        }
        std::vector<TokenVector> tokens;
        for (const json& t : text) {
            if (!t.is_object() || !t.contains("token") || !t["token"].is_string() || !t.contains("vector")) {
                throw ProviderError("token entry needs 'token' and 'vector'", false);
            }
            tokens.push_back({t["token"].get<std::string>(), to_vector(t["vector"])});
        }
        out.push_back(std::move(tokens));
    }
    return out;
}

NliScores decode_nli_response(std::string_view body) {
    const json j = parse_body(body);
    for (const char* k : {"contradiction", "neutral", "entailment"}) {
        if (!j.is_object() || !j.contains(k) || !j[k].is_number()) {
            throw ProviderError(std::string("NLI response lacks numeric '") + k + "'", false);
        }
    }
    NliScores s{j["contradiction"].get<double>(), j["neutral"].get<double>(), j["entailment"].get<double>()};
    for (double p : {s.contradiction, s.neutral, s.entailment}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ProviderError("NLI probability outside [0, 1]", false);
        }
    }
    if (std::abs(s.contradiction + s.neutral + s.entailment - 1.0) > 1e-6) {
        throw ProviderError("NLI probabilities do not sum to 1", false);
    }
    return s;
}

}  // namespace dermflow::providers
