#include "dermflow/image_io.hpp"
#include "dermflow/service.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdlib>

namespace dermflow::service {

using nlohmann::json;

namespace {

json defaults_document() {
    const ServiceConfig d;
    const segmentation::GrabCutParams& g = d.grabcut;
    return json{
        {"listen", {{"host", d.host}, {"port", d.port}}},
        {"providers",
         {{"mode", "mock"},
          {"fixtures_dir", ""},
          {"vision_url", ""},
          {"text_url", ""},
          {"embedding_url", ""},
          {"nli_url", ""},
          {"bearer_token", ""},
          {"timeout_ms", static_cast<int>(d.endpoints.timeout.count())},
          {"max_retries", d.max_retries},
          {"initial_backoff_ms", d.initial_backoff_ms},
          {"deadline_ms", d.deadline_ms}}},
        {"store", {{"dir", d.store_dir.string()}, {"max_upload_bytes", d.max_upload_bytes}}},
        {"api_token", ""},
        {"grabcut",
         {{"gmm_components", g.gmm_components},
          {"iterations", g.iterations},
          {"gamma", g.gamma},
          {"connectivity", g.connectivity},
          {"foreground_dilation", g.foreground_dilation},
          {"background_margin", g.background_margin}}},
        {"evaluation",
         {{"weights", {{"context", d.weights.context}, {"entities", d.weights.entities}}},
          {"entity_template", d.entity_template},
          {"lexicon_path", ""},
          {"workers", d.eval_workers}}},
    };
}

// Reject keys the defaults do not know, and values of the wrong JSON type.
void check_shape(const json& user, const json& def, const std::string& where) {
    if (!user.is_object()) {
        throw InvalidArgument("config " + (where.empty() ? std::string("document") : where) + " must be an object");
    }
    for (const auto& [key, value] : user.items()) {
        const std::string path = where + "/" + key;
        if (!def.contains(key)) {
            throw InvalidArgument("unknown config key " + path);
        }
        const json& d = def.at(key);
        if (d.is_object()) {
            check_shape(value, d, path);
        } else if (d.is_string() != value.is_string() || d.is_number() != value.is_number() || d.is_boolean() != value.is_boolean()) {
            throw InvalidArgument("config key " + path + " has the wrong type");
        }
    }
}

json convert_env(const std::string& variable, const std::string& raw, const json& current) {
    if (current.is_string()) {
        return raw;
    }
    if (current.is_number_float()) {
        double v = 0;
        const auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
        if (ec != std::errc() || p != raw.data() + raw.size()) {
            throw InvalidArgument(variable + " must be a number, got '" + raw + "'");
        }
        return v;
    }
    long long v = 0;
    const auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc() || p != raw.data() + raw.size()) {
        throw InvalidArgument(variable + " must be an integer, got '" + raw + "'");
    }
    return v;
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) {
        return {};
    }
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

}  // namespace

const std::vector<EnvBinding>& env_bindings() {
    static const std::vector<EnvBinding> bindings = {
        {"DERMFLOW_LISTEN_HOST", "/listen/host"},
        {"DERMFLOW_LISTEN_PORT", "/listen/port"},
        {"DERMFLOW_PROVIDER_MODE", "/providers/mode"},
        {"DERMFLOW_FIXTURES_DIR", "/providers/fixtures_dir"},
        {"DERMFLOW_VISION_URL", "/providers/vision_url"},
        {"DERMFLOW_TEXT_URL", "/providers/text_url"},
        {"DERMFLOW_EMBEDDING_URL", "/providers/embedding_url"},
        {"DERMFLOW_NLI_URL", "/providers/nli_url"},
        {"DERMFLOW_PROVIDER_TOKEN", "/providers/bearer_token"},
        {"DERMFLOW_PROVIDER_TIMEOUT_MS", "/providers/timeout_ms"},
        {"DERMFLOW_MAX_RETRIES", "/providers/max_retries"},
        {"DERMFLOW_INITIAL_BACKOFF_MS", "/providers/initial_backoff_ms"},
        {"DERMFLOW_DEADLINE_MS", "/providers/deadline_ms"},
        {"DERMFLOW_STORE_DIR", "/store/dir"},
        {"DERMFLOW_MAX_UPLOAD_BYTES", "/store/max_upload_bytes"},
        {"DERMFLOW_API_TOKEN", "/api_token"},
        {"DERMFLOW_GRABCUT_COMPONENTS", "/grabcut/gmm_components"},
        {"DERMFLOW_GRABCUT_ITERATIONS", "/grabcut/iterations"},
        {"DERMFLOW_GRABCUT_GAMMA", "/grabcut/gamma"},
        {"DERMFLOW_GRABCUT_CONNECTIVITY", "/grabcut/connectivity"},
        {"DERMFLOW_GRABCUT_FOREGROUND_DILATION", "/grabcut/foreground_dilation"},
        {"DERMFLOW_GRABCUT_BACKGROUND_MARGIN", "/grabcut/background_margin"},
        {"DERMFLOW_WEIGHT_CONTEXT", "/evaluation/weights/context"},
        {"DERMFLOW_WEIGHT_ENTITIES", "/evaluation/weights/entities"},
        {"DERMFLOW_ENTITY_TEMPLATE", "/evaluation/entity_template"},
        {"DERMFLOW_LEXICON_PATH", "/evaluation/lexicon_path"},
        {"DERMFLOW_EVAL_WORKERS", "/evaluation/workers"},
    };
    return bindings;
}

std::optional<std::string> process_env(const std::string& name) {
    if (const char* v = std::getenv(name.c_str())) {
        return std::string(v);
    }
    return std::nullopt;
}

ServiceConfig parse_config(std::string_view text, const std::filesystem::path& base_dir, const EnvLookup& env) {
    json user;
    try {
        user = text.find_first_not_of(" \t\r\n") == std::string_view::npos ? json::object() : json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
    json doc = defaults_document();
    check_shape(user, doc, "");
    doc.merge_patch(user);
    for (const EnvBinding& b : env_bindings()) {
        if (const auto value = env(b.variable)) {
            const json::json_pointer ptr(b.key);
            doc[ptr] = convert_env(b.variable, *value, doc[ptr]);
        }
    }

    ServiceConfig c;
    try {
        c.host = doc["listen"]["host"].get<std::string>();
        c.port = doc["listen"]["port"].get<int>();
        const json& p = doc["providers"];
        const std::string mode = p["mode"].get<std::string>();
        if (mode == "mock") {
            c.mode = ProviderMode::Mock;
        } else if (mode == "live") {
            c.mode = ProviderMode::Live;
        } else {
            throw InvalidArgument("providers.mode must be \"mock\" or \"live\", got \"" + mode + "\"");
        }
        c.fixtures_dir = resolve(p["fixtures_dir"].get<std::string>(), base_dir);
        c.endpoints.vision = p["vision_url"].get<std::string>();
        c.endpoints.text = p["text_url"].get<std::string>();
        c.endpoints.embedding = p["embedding_url"].get<std::string>();
        c.endpoints.nli = p["nli_url"].get<std::string>();
        c.endpoints.bearer_token = p["bearer_token"].get<std::string>();
        c.endpoints.timeout = std::chrono::milliseconds(p["timeout_ms"].get<long long>());
        c.max_retries = p["max_retries"].get<int>();
        c.initial_backoff_ms = p["initial_backoff_ms"].get<int>();
        c.deadline_ms = p["deadline_ms"].get<int>();
        c.store_dir = resolve(doc["store"]["dir"].get<std::string>(), base_dir);
        c.max_upload_bytes = doc["store"]["max_upload_bytes"].get<std::size_t>();
        c.api_token = doc["api_token"].get<std::string>();
        const json& g = doc["grabcut"];
        c.grabcut.gmm_components = g["gmm_components"].get<int>();
        c.grabcut.iterations = g["iterations"].get<int>();
        c.grabcut.gamma = g["gamma"].get<double>();
        c.grabcut.connectivity = g["connectivity"].get<int>();
        c.grabcut.foreground_dilation = g["foreground_dilation"].get<int>();
        c.grabcut.background_margin = g["background_margin"].get<int>();
        const json& e = doc["evaluation"];
        c.weights.context = e["weights"]["context"].get<double>();
        c.weights.entities = e["weights"]["entities"].get<double>();
        c.entity_template = e["entity_template"].get<std::string>();
        c.lexicon_path = resolve(e["lexicon_path"].get<std::string>(), base_dir);
        c.eval_workers = e["workers"].get<int>();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("invalid config value: ") + e.what());
    }
    c.validate();
    return c;
}

ServiceConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
    const auto bytes = imaging::read_file_bytes(path);
    return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        std::filesystem::absolute(path).parent_path(), env);
}

void ServiceConfig::validate() const {
    if (port < 0 || port > 65535) {
        throw InvalidArgument("listen port out of range");
    }
    if (mode == ProviderMode::Mock && fixtures_dir.empty()) {
        throw InvalidArgument("mock mode requires providers.fixtures_dir");
    }
    if (mode == ProviderMode::Live && (endpoints.vision.empty() || endpoints.text.empty())) {
        throw InvalidArgument("live mode requires at least providers.vision_url and providers.text_url");
    }
    if (max_retries < 0 || initial_backoff_ms < 0 || deadline_ms <= 0 || endpoints.timeout.count() <= 0) {
        throw InvalidArgument("retry and timeout settings must be non-negative (deadline and timeout positive)");
    }
    if (store_dir.empty()) {
        throw InvalidArgument("store.dir must be set");
    }
    if (max_upload_bytes == 0) {
        throw InvalidArgument("store.max_upload_bytes must be positive");
    }
    if (eval_workers < 1) {
        throw InvalidArgument("evaluation.workers must be at least 1");
    }
    grabcut.validate();
    weights.validate();
}

providers::RetryPolicy ServiceConfig::retry_policy() const {
    providers::RetryPolicy p;
    p.max_retries = max_retries;
    p.initial_backoff = std::chrono::milliseconds(initial_backoff_ms);
    p.deadline = std::chrono::milliseconds(deadline_ms);
    return p;
}

providers::ProviderSet make_providers(const ServiceConfig& c) {
    if (c.mode == ProviderMode::Mock) {
        if (!std::filesystem::is_directory(c.fixtures_dir)) {
            throw InvalidArgument("fixtures directory " + c.fixtures_dir.string() + " does not exist");
        }
        return providers::MockProviders::load(c.fixtures_dir).provider_set(c.retry_policy());
    }
    return providers::http_provider_set(c.endpoints, c.retry_policy());
}

}  // namespace dermflow::service
