#include "dermflow/providers.hpp"

#include <httplib.h>

namespace dermflow::providers {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host:port
    std::string path;
};

Endpoint split_url(const std::string& url) {
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) {
        throw InvalidArgument("provider URL needs a scheme: " + url);
    }
    const auto slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, slash), url.substr(slash)};
}

class HttpCaller {
public:
    HttpCaller(std::string url, std::string token, std::chrono::milliseconds timeout)
        : endpoint_(split_url(url)), token_(std::move(token)), timeout_(timeout) {}

    std::string post(const std::string& body) const {
        if (endpoint_.origin.empty()) {
            throw ProviderError("provider endpoint not configured", false);
        }
        httplib::Client client(endpoint_.origin);
        const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
        const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);
        client.set_connection_timeout(seconds.count(), micros.count());
        client.set_read_timeout(seconds.count(), micros.count());
        client.set_write_timeout(seconds.count(), micros.count());
        httplib::Headers headers;
        if (!token_.empty()) {
            headers.emplace("Authorization", "Bearer " + token_);
        }
        const auto res = client.Post(endpoint_.path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
                throw ProviderTimeout("provider " + endpoint_.origin + endpoint_.path + " timed out (" + httplib::to_string(err) + ")");
            }
            throw ProviderError("provider " + endpoint_.origin + endpoint_.path + " unreachable (" + httplib::to_string(err) + ")");
        }
        const int status = res->status;
        if (status == 200) {
            return res->body;
        }
        const bool transient = status == 408 || status == 429 || status >= 500;
        throw ProviderError("provider " + endpoint_.origin + endpoint_.path + " returned HTTP " + std::to_string(status), transient);
    }

private:
    Endpoint endpoint_;
    std::string token_;
    std::chrono::milliseconds timeout_;
};

class HttpVision : public VisionModel {
public:
    explicit HttpVision(HttpCaller c) : caller_(std::move(c)) {}
    std::string analyze(std::span<const std::uint8_t> image, std::string_view prompt) override {
        return decode_text_response(caller_.post(vision_request(image, prompt)));
    }

private:
    HttpCaller caller_;
};

class HttpText : public TextModel {
public:
    explicit HttpText(HttpCaller c) : caller_(std::move(c)) {}
    std::string complete(std::string_view prompt) override {
        return decode_text_response(caller_.post(text_request(prompt)));
    }

private:
    HttpCaller caller_;
};

class HttpEmbedding : public EmbeddingProvider {
public:
    explicit HttpEmbedding(HttpCaller c) : caller_(std::move(c)) {}
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override {
        return decode_sentence_vectors(caller_.post(embedding_request(texts, false)), texts.size());
    }
    std::vector<std::vector<TokenVector>> embed_tokens(const std::vector<std::string>& texts) override {
        return decode_token_vectors(caller_.post(embedding_request(texts, true)), texts.size());
    }

private:
    HttpCaller caller_;
};

class HttpNli : public NliProvider {
public:
    explicit HttpNli(HttpCaller c) : caller_(std::move(c)) {}
    NliScores infer(std::string_view premise, std::string_view hypothesis) override {
        return decode_nli_response(caller_.post(nli_request(premise, hypothesis)));
    }

private:
    HttpCaller caller_;
};

}  // namespace

ProviderSet http_provider_set(const HttpEndpoints& e, RetryPolicy retry) {
    ProviderSet set;
    if (!e.vision.empty()) {
        set.vision = std::make_shared<HttpVision>(HttpCaller(e.vision, e.bearer_token, e.timeout));
    }
    if (!e.text.empty()) {
        set.text = std::make_shared<HttpText>(HttpCaller(e.text, e.bearer_token, e.timeout));
    }
    if (!e.embedding.empty()) {
        set.embedding = std::make_shared<HttpEmbedding>(HttpCaller(e.embedding, e.bearer_token, e.timeout));
    }
    if (!e.nli.empty()) {
        set.nli = std::make_shared<HttpNli>(HttpCaller(e.nli, e.bearer_token, e.timeout));
    }
    set.retry = std::move(retry);
    return set;
}

}  // namespace dermflow::providers
