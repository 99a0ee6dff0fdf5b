#pragma once

#include "dermflow/evaluation.hpp"
#include "dermflow/providers.hpp"
#include "dermflow/segmentation.hpp"
#include "dermflow/workflow.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dermflow::service {

enum class ProviderMode { Mock, Live };

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    ProviderMode mode = ProviderMode::Mock;
    std::filesystem::path fixtures_dir;  // mock mode
    providers::HttpEndpoints endpoints;  // live mode
    int max_retries = 2;
    int initial_backoff_ms = 1000;
    int deadline_ms = 60000;
    std::filesystem::path store_dir = "dermflow-data";
    std::string api_token;  // empty disables the bearer check
    std::size_t max_upload_bytes = 20u << 20;
    segmentation::GrabCutParams grabcut;
    evaluation::Weights weights;
    std::string entity_template = "{entity}";
    std::filesystem::path lexicon_path;  // empty uses the bundled lexicon
    int eval_workers = 4;

    /// Throws InvalidArgument when the combination is unusable (e.g. mock mode without fixtures).
    void validate() const;
    providers::RetryPolicy retry_policy() const;
};

struct EnvBinding {
    std::string variable;  // e.g. DERMFLOW_LISTEN_PORT
    std::string key;       // JSON pointer into the config document, e.g. /listen/port
};

/// Every environment variable that overrides a config key, in documentation order.
const std::vector<EnvBinding>& env_bindings();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Parse a JSON config document, apply environment overrides, resolve relative paths against
/// `base_dir` and validate.
ServiceConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir, const EnvLookup& env = process_env);
ServiceConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

/// Mock providers from the fixtures directory or HTTP providers, with the configured retry policy.
providers::ProviderSet make_providers(const ServiceConfig& config);

/// Document-per-case file store. Each write goes to a temporary file that is renamed over the target.
class CaseStore {
public:
    explicit CaseStore(std::filesystem::path root);

    void save(const workflow::Case& c);
    /// Throws NotFound when absent.
    workflow::Case load(const std::string& id) const;
    bool exists(const std::string& id) const;
    std::vector<std::string> ids() const;

    /// Stored responses for idempotent retries, keyed by an opaque digest.
    std::optional<std::string> load_response(const std::string& digest) const;
    void save_response(const std::string& digest, const std::string& document);

    void save_eval(const std::string& id, const std::string& document);
    std::optional<std::string> load_eval(const std::string& id) const;

    const std::filesystem::path& root() const noexcept { return root_; }

private:
    std::filesystem::path root_;
};

/// Case ids are 32 lowercase hex digits; anything else is rejected before touching the store.
bool valid_case_id(std::string_view id) noexcept;

/// Atomic file replacement via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

class NotFound : public Error {
public:
    using Error::Error;
};

/// HTTP front end. Routes:
///   POST /cases                  image upload (raw PNG/JPEG body, or JSON {"image": base64})
///   POST /cases/{id}/analyze     initial analysis
///   POST /cases/{id}/xai         lesion path (measurements and explainable review)
///   POST /cases/{id}/followup    condition follow-up
///   GET  /cases/{id}/report      case record and artifacts (?include_image=1 embeds the image)
///   GET  /cases/{id}/image       stored image bytes
///   POST /eval/runs              start an evaluation run {"corpus": dir, "reviews": file}
///   GET  /eval/runs/{id}         progress events and, when finished, the capability report
///   GET  /health
class Service {
public:
    Service(ServiceConfig config, providers::ProviderSet providers);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Bind the configured address and return the port.
    int bind();
    /// Serve until stop(); bind() first.
    void run();
    void stop();
    /// Block until all evaluation runs finished.
    void wait_for_eval_runs();

    const ServiceConfig& config() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dermflow::service
