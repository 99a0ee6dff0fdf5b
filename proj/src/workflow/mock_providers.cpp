#include "dermflow/image_io.hpp"
#include "dermflow/providers.hpp"

#include <json.hpp>

#include <fstream>
#include <mutex>

namespace dermflow::providers {

using nlohmann::json;

namespace {

constexpr const char* kKinds[] = {"vision", "text", "embedding", "nli"};

json vector_json(const Vector& v) {
    return json(v);
}

}  // namespace

struct MockProviders::State {
    mutable std::mutex mutex;
    std::map<std::string, std::map<std::string, std::string>> responses;  // kind -> digest -> body
    mutable std::map<std::string, std::size_t> calls;
};

MockProviders::MockProviders() : state_(std::make_shared<State>()) {}

MockProviders MockProviders::load(const std::filesystem::path& dir) {
    MockProviders mock;
    for (const char* kind : kKinds) {
        const auto path = dir / (std::string(kind) + ".json");
        if (!std::filesystem::exists(path)) {
            continue;
        }
        const std::vector<std::uint8_t> bytes = imaging::read_file_bytes(path);
        json j;
        try {
            j = json::parse(bytes.begin(), bytes.end());
        } catch (const json::exception& e) {
            throw InvalidArgument("mock fixture " + path.string() + " is not valid JSON: " + e.what());
        }
        if (!j.is_object()) {
            throw InvalidArgument("mock fixture " + path.string() + " must be an object");
        }
        for (const auto& [digest, body] : j.items()) {
            mock.record_raw(kind, digest, body.dump());
        }
    }
    return mock;
}

void MockProviders::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::lock_guard lock(state_->mutex);
    for (const char* kind : kKinds) {
        json j = json::object();
        if (auto it = state_->responses.find(kind); it != state_->responses.end()) {
            for (const auto& [digest, body] : it->second) {
                j[digest] = json::parse(body);
            }
        }
        std::ofstream out(dir / (std::string(kind) + ".json"), std::ios::binary);
        out << j.dump(1) << '\n';
        if (!out) {
            throw Error("cannot write mock fixtures to " + dir.string());
        }
    }
}

void MockProviders::record_raw(const std::string& kind, const std::string& digest, const std::string& body) {
    std::lock_guard lock(state_->mutex);
    state_->responses[kind][digest] = body;
}

void MockProviders::record_vision(std::span<const std::uint8_t> image, std::string_view prompt, std::string_view text) {
    record_raw("vision", sha256_hex(vision_request(image, prompt)), json{{"text", text}}.dump());
}

void MockProviders::record_text(std::string_view prompt, std::string_view text) {
    record_raw("text", sha256_hex(text_request(prompt)), json{{"text", text}}.dump());
}

void MockProviders::record_sentence_embedding(const std::vector<std::string>& texts, const std::vector<Vector>& vectors) {
    json v = json::array();
    for (const Vector& x : vectors) {
        v.push_back(vector_json(x));
    }
    record_raw("embedding", sha256_hex(embedding_request(texts, false)), json{{"vectors", v}}.dump());
}

void MockProviders::record_token_embedding(const std::vector<std::string>& texts, const std::vector<std::vector<TokenVector>>& vectors) {
    json all = json::array();
    for (const auto& text : vectors) {
        json tokens = json::array();
        for (const TokenVector& t : text) {
            tokens.push_back({{"token", t.token}, {"vector", vector_json(t.vector)}});
        }
        all.push_back(tokens);
    }
    record_raw("embedding", sha256_hex(embedding_request(texts, true)), json{{"token_vectors", all}}.dump());
}

void MockProviders::record_nli(std::string_view premise, std::string_view hypothesis, NliScores s) {
    record_raw("nli", sha256_hex(nli_request(premise, hypothesis)),
               json{{"contradiction", s.contradiction}, {"neutral", s.neutral}, {"entailment", s.entailment}}.dump());
}

std::string MockProviders::lookup(const std::string& kind, const std::string& request) const {
    const std::string digest = sha256_hex(request);
    std::lock_guard lock(state_->mutex);
    ++state_->calls[kind];
    const auto k = state_->responses.find(kind);
    if (k != state_->responses.end()) {
        if (const auto it = k->second.find(digest); it != k->second.end()) {
            return it->second;
        }
    }
    throw ProviderError("mock " + kind + " provider has no response for request digest " + digest, false);
}

std::size_t MockProviders::size() const noexcept {
    std::lock_guard lock(state_->mutex);
    std::size_t n = 0;
    for (const auto& [kind, m] : state_->responses) {
        n += m.size();
    }
    return n;
}

std::size_t MockProviders::call_count(const std::string& kind) const {
    std::lock_guard lock(state_->mutex);
    const auto it = state_->calls.find(kind);
    return it == state_->calls.end() ? 0 : it->second;
}

namespace {

class MockVision : public VisionModel {
public:
    explicit MockVision(MockProviders m) : mock_(std::move(m)) {}
    std::string analyze(std::span<const std::uint8_t> image, std::string_view prompt) override {
        return decode_text_response(mock_.lookup("vision", vision_request(image, prompt)));
    }

private:
    MockProviders mock_;
};

class MockText : public TextModel {
public:
    explicit MockText(MockProviders m) : mock_(std::move(m)) {}
    std::string complete(std::string_view prompt) override {
        return decode_text_response(mock_.lookup("text", text_request(prompt)));
    }

private:
    MockProviders mock_;
};

class MockEmbedding : public EmbeddingProvider {
public:
    explicit MockEmbedding(MockProviders m) : mock_(std::move(m)) {}
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override {
        return decode_sentence_vectors(mock_.lookup("embedding", embedding_request(texts, false)), texts.size());
    }
    std::vector<std::vector<TokenVector>> embed_tokens(const std::vector<std::string>& texts) override {
        return decode_token_vectors(mock_.lookup("embedding", embedding_request(texts, true)), texts.size());
    }

private:
    MockProviders mock_;
};

class MockNli : public NliProvider {
public:
    explicit MockNli(MockProviders m) : mock_(std::move(m)) {}
    NliScores infer(std::string_view premise, std::string_view hypothesis) override {
        return decode_nli_response(mock_.lookup("nli", nli_request(premise, hypothesis)));
    }

private:
    MockProviders mock_;
};

// Fault injection: counts calls per kind and throws ProviderTimeout for the first N.
struct FaultBudget {
    std::mutex mutex;
    std::map<std::string, int> remaining;

    void maybe_fail(const std::string& kind) {
        std::lock_guard lock(mutex);
        auto it = remaining.find(kind);
        if (it != remaining.end() && it->second > 0) {
            --it->second;
            throw ProviderTimeout("injected timeout (" + kind + ")");
        }
    }
};

class FaultyVision : public VisionModel {
public:
    FaultyVision(std::shared_ptr<VisionModel> inner, std::shared_ptr<FaultBudget> b) : inner_(std::move(inner)), budget_(std::move(b)) {}
    std::string analyze(std::span<const std::uint8_t> image, std::string_view prompt) override {
        budget_->maybe_fail("vision");
        return inner_->analyze(image, prompt);
    }

private:
    std::shared_ptr<VisionModel> inner_;
    std::shared_ptr<FaultBudget> budget_;
};

class FaultyText : public TextModel {
public:
    FaultyText(std::shared_ptr<TextModel> inner, std::shared_ptr<FaultBudget> b) : inner_(std::move(inner)), budget_(std::move(b)) {}
    std::string complete(std::string_view prompt) override {
        budget_->maybe_fail("text");
        return inner_->complete(prompt);
    }

private:
    std::shared_ptr<TextModel> inner_;
    std::shared_ptr<FaultBudget> budget_;
};

class FaultyEmbedding : public EmbeddingProvider {
public:
    FaultyEmbedding(std::shared_ptr<EmbeddingProvider> inner, std::shared_ptr<FaultBudget> b) : inner_(std::move(inner)), budget_(std::move(b)) {}
    std::vector<Vector> embed_sentences(const std::vector<std::string>& texts) override {
        budget_->maybe_fail("embedding");
        return inner_->embed_sentences(texts);
    }
    std::vector<std::vector<TokenVector>> embed_tokens(const std::vector<std::string>& texts) override {
        budget_->maybe_fail("embedding");
        return inner_->embed_tokens(texts);
    }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::shared_ptr<FaultBudget> budget_;
};

class FaultyNli : public NliProvider {
public:
    FaultyNli(std::shared_ptr<NliProvider> inner, std::shared_ptr<FaultBudget> b) : inner_(std::move(inner)), budget_(std::move(b)) {}
    NliScores infer(std::string_view premise, std::string_view hypothesis) override {
        budget_->maybe_fail("nli");
        return inner_->infer(premise, hypothesis);
    }

private:
    std::shared_ptr<NliProvider> inner_;
    std::shared_ptr<FaultBudget> budget_;
};

}  // namespace

ProviderSet MockProviders::provider_set(RetryPolicy retry) const {
    ProviderSet set;
    set.vision = std::make_shared<MockVision>(*this);
    set.text = std::make_shared<MockText>(*this);
    set.embedding = std::make_shared<MockEmbedding>(*this);
    set.nli = std::make_shared<MockNli>(*this);
    set.retry = std::move(retry);
    return set;
}

ProviderSet inject_timeouts(const ProviderSet& inner, int failures, const std::vector<std::string>& kinds) {
    auto budget = std::make_shared<FaultBudget>();
    for (const std::string& k : kinds) {
        budget->remaining[k] = failures;
    }
    ProviderSet out = inner;
    if (inner.vision) {
        out.vision = std::make_shared<FaultyVision>(inner.vision, budget);
    }
    if (inner.text) {
        out.text = std::make_shared<FaultyText>(inner.text, budget);
    }
    if (inner.embedding) {
        out.embedding = std::make_shared<FaultyEmbedding>(inner.embedding, budget);
    }
    if (inner.nli) {
        out.nli = std::make_shared<FaultyNli>(inner.nli, budget);
    }
    return out;
}

}  // namespace dermflow::providers
