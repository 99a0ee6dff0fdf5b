#include "dermflow/image_io.hpp"
#include "dermflow/service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <map>
#include <mutex>
#include <random>
#include <thread>

namespace dermflow::service {

using nlohmann::json;

namespace {

struct Reply {
    int status = 200;
    json body;
};

struct HttpError : Error {
    HttpError(int s, std::string code_, const std::string& what, json extra_ = nullptr)
        : Error(what), status(s), code(std::move(code_)), extra(std::move(extra_)) {}
    int status;
    std::string code;
    json extra;
};

json error_body(const std::string& code, const std::string& message) {
    return json{{"error", {{"code", code}, {"message", message}}}};
}

std::string random_hex(std::size_t n) {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += kHex[rng() & 15];
    }
    return s;
}

json case_document(const workflow::Case& c, bool include_image = false) {
    json doc = json::parse(workflow::case_to_json(c, include_image));
    doc["links"] = {{"image", "/cases/" + c.id() + "/image"}, {"report", "/cases/" + c.id() + "/report"}};
    return doc;
}

}  // namespace

struct EvalRun {
    std::mutex mutex;
    std::string status = "running";
    std::size_t done = 0;
    std::size_t total = 0;
    json events = json::array();
    json report = nullptr;
    std::string table;
    std::string error;

    json to_json(const std::string& id) {
        std::lock_guard lock(mutex);
        json j{{"id", id}, {"status", status}, {"progress", {{"done", done}, {"total", total}}}, {"events", events}};
        if (!report.is_null()) {
            j["report"] = report;
            j["table"] = table;
        }
        if (!error.empty()) {
            j["error"] = error;
        }
        return j;
    }
};

struct Service::Impl {
    ServiceConfig config;
    providers::ProviderSet providers;
    CaseStore store;
    std::optional<prompts::Lexicon> lexicon;
    httplib::Server server;

    std::mutex locks_mutex;
    std::map<std::string, std::shared_ptr<std::mutex>> locks;

    std::mutex runs_mutex;
    std::map<std::string, std::shared_ptr<EvalRun>> runs;
    std::vector<std::thread> run_threads;

    Impl(ServiceConfig c, providers::ProviderSet p) : config(std::move(c)), providers(std::move(p)), store(config.store_dir) {
        if (!config.lexicon_path.empty()) {
            lexicon = prompts::Lexicon::load(config.lexicon_path);
        }
    }

    std::shared_ptr<std::mutex> lock_for(const std::string& key) {
        std::lock_guard lock(locks_mutex);
        auto& m = locks[key];
        if (!m) {
            m = std::make_shared<std::mutex>();
        }
        return m;
    }

    const prompts::Lexicon& active_lexicon() const { return lexicon ? *lexicon : prompts::Lexicon::builtin(); }

    // Routes -----------------------------------------------------------------

    Reply create_case(const httplib::Request& req) {
        std::vector<std::uint8_t> bytes;
        const std::string type = req.get_header_value("Content-Type");
        if (type.rfind("application/json", 0) == 0) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception&) {
                throw HttpError(400, "bad_request", "request body is not valid JSON");
            }
            if (!body.is_object() || !body.contains("image") || !body["image"].is_string()) {
                throw HttpError(400, "bad_request", "expected {\"image\": <base64>}");
            }
            bytes = providers::base64_decode(body["image"].get<std::string>());
        } else {
            bytes.assign(req.body.begin(), req.body.end());
        }
        if (bytes.empty()) {
            throw HttpError(400, "bad_request", "empty image upload");
        }
        if (bytes.size() > config.max_upload_bytes) {
            throw HttpError(413, "too_large", "image is " + std::to_string(bytes.size()) + " bytes; limit is " + std::to_string(config.max_upload_bytes));
        }
        workflow::Case c = workflow::Case::from_bytes(std::move(bytes));
        store.save(c);
        return {201, json{{"id", c.id()}, {"state", workflow::to_string(c.state())}, {"created_at", c.created_at()}}};
    }

    template <class Stage>
    Reply mutate(const std::string& id, Stage&& stage) {
        if (!valid_case_id(id)) {
            throw NotFound("case " + id + " not found");
        }
        const auto m = lock_for("case:" + id);
        std::lock_guard lock(*m);
        workflow::Case c = store.load(id);
        try {
            stage(c);
        } catch (const WorkflowFailed& e) {
            store.save(c);
            const bool upstream = c.failure_reason().rfind("no lesion", 0) != 0;
            throw HttpError(upstream ? 502 : 422, upstream ? "provider_failure" : "workflow_failed", e.what(), case_document(c));
        }
        store.save(c);
        return {200, case_document(c)};
    }

    Reply report(const std::string& id, bool include_image) {
        if (!valid_case_id(id)) {
            throw NotFound("case " + id + " not found");
        }
        const auto m = lock_for("case:" + id);
        std::lock_guard lock(*m);
        return {200, case_document(store.load(id), include_image)};
    }

    Reply start_eval(const httplib::Request& req) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception&) {
            throw HttpError(400, "bad_request", "request body is not valid JSON");
        }
        if (!body.is_object() || !body.contains("corpus") || !body["corpus"].is_string()) {
            throw HttpError(400, "bad_request", "expected {\"corpus\": <directory>, \"reviews\": <file>}");
        }
        const std::filesystem::path corpus_dir = body["corpus"].get<std::string>();
        json items = json::array();
        evaluation::Corpus corpus;
        try {
            corpus = evaluation::load_corpus(corpus_dir, active_lexicon());
        } catch (const InvalidArgument& e) {
            items.push_back({{"document", corpus_dir.string()}, {"message", e.what()}});
        }
        for (const auto& e : corpus.errors) {
            items.push_back({{"document", e.document}, {"message", e.message}});
        }
        std::vector<evaluation::ExpertReview> reviews;
        std::filesystem::path reviews_path;
        if (body.contains("reviews") && body["reviews"].is_string()) {
            reviews_path = body["reviews"].get<std::string>();
        } else if (std::filesystem::exists(corpus_dir / "reviews.csv")) {
            reviews_path = corpus_dir / "reviews.csv";
        }
        if (!reviews_path.empty()) {
            try {
                auto ingest = evaluation::ingest_expert_reviews(reviews_path);
                for (const auto& e : ingest.errors) {
                    items.push_back({{"document", reviews_path.filename().string() + ":" + std::to_string(e.line)}, {"message", e.message}});
                }
                reviews = std::move(ingest.reviews);
            } catch (const Error& e) {
                items.push_back({{"document", reviews_path.string()}, {"message", e.what()}});
            }
        }
        if (items.empty() && corpus.cases.empty()) {
            items.push_back({{"document", corpus_dir.string()}, {"message", "corpus has no case documents"}});
        }
        if (!items.empty()) {
            throw HttpError(422, "invalid_corpus", "corpus has " + std::to_string(items.size()) + " problem(s)", json{{"items", items}});
        }

        evaluation::RunOptions options;
        options.weights = config.weights;
        if (body.contains("weights")) {
            const json& w = body["weights"];
            options.weights.context = w.value("context", options.weights.context);
            options.weights.entities = w.value("entities", options.weights.entities);
            options.weights.validate();
        }
        options.scoring.entity_template = config.entity_template;
        options.workers = config.eval_workers;
        providers::ProviderSet ps = providers;
        if (config.mode == ProviderMode::Mock && std::filesystem::is_directory(corpus_dir / "providers")) {
            ps = providers::MockProviders::load(corpus_dir / "providers").provider_set(config.retry_policy());
        }

        const std::string id = random_hex(16);
        auto run = std::make_shared<EvalRun>();
        run->total = corpus.cases.size();
        options.progress = [run](std::size_t done, std::size_t total, const evaluation::ScoreRecord& r) {
            std::lock_guard lock(run->mutex);
            run->done = done;
            run->total = total;
            run->events.push_back({{"done", done}, {"total", total}, {"case_id", r.case_id}});
        };
        {
            std::lock_guard lock(runs_mutex);
            runs[id] = run;
            run_threads.emplace_back([this, id, run, cases = std::move(corpus.cases), reviews = std::move(reviews), ps, options] {
                try {
                    const auto report = evaluation::run_evaluation(cases, reviews, ps, options);
                    std::lock_guard lock(run->mutex);
                    run->report = json::parse(evaluation::report_to_json(report));
                    run->table = evaluation::render_table(report);
                    run->status = "done";
                } catch (const std::exception& e) {
                    std::lock_guard lock(run->mutex);
                    run->status = "failed";
                    run->error = e.what();
                }
                try {
                    store.save_eval(id, run->to_json(id).dump());
                } catch (const std::exception&) {
                    // the in-memory result stays available
                }
            });
        }
        return {202, json{{"id", id}, {"status", "running"}, {"total", run->total}, {"links", {{"self", "/eval/runs/" + id}}}}};
    }

    Reply get_eval(const std::string& id) {
        {
            std::lock_guard lock(runs_mutex);
            if (auto it = runs.find(id); it != runs.end()) {
                return {200, it->second->to_json(id)};
            }
        }
        if (auto stored = store.load_eval(id)) {
            return {200, json::parse(*stored)};
        }
        throw NotFound("evaluation run " + id + " not found");
    }

    // Plumbing ---------------------------------------------------------------

    bool authorized(const httplib::Request& req) const {
        return config.api_token.empty() || req.get_header_value("Authorization") == "Bearer " + config.api_token;
    }

    static void send(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    void handle(const httplib::Request& req, httplib::Response& res, const std::function<Reply()>& fn) {
        if (!authorized(req)) {
            send(res, 401, error_body("unauthorized", "missing or wrong bearer token"));
            return;
        }
        const std::string key = req.get_header_value("Idempotency-Key");
        if (req.method != "POST" || key.empty()) {
            dispatch(res, fn);
            return;
        }
        const std::string digest = providers::sha256_hex(key + "\n" + req.method + " " + req.path);
        const std::string request_digest = providers::sha256_hex(req.body);
        const auto m = lock_for("idem:" + digest);
        std::lock_guard lock(*m);
        if (const auto stored = store.load_response(digest)) {
            const json s = json::parse(*stored);
            if (s.at("request") != request_digest) {
                send(res, 422, error_body("idempotency_mismatch", "idempotency key reused with a different request body"));
                return;
            }
            res.set_header("Idempotent-Replayed", "true");
            send(res, s.at("status").get<int>(), s.at("body"));
            return;
        }
        dispatch(res, fn);
        if (res.status != 500) {
            store.save_response(digest, json{{"status", res.status}, {"request", request_digest}, {"body", json::parse(res.body)}}.dump());
        }
    }

    static void dispatch(httplib::Response& res, const std::function<Reply()>& fn) {
        try {
            Reply r = fn();
            send(res, r.status, r.body);
        } catch (const HttpError& e) {
            json body = error_body(e.code, e.what());
            if (!e.extra.is_null()) {
                if (e.extra.contains("items")) {
                    body["error"]["items"] = e.extra["items"];
                } else {
                    body["case"] = e.extra;
                }
            }
            send(res, e.status, body);
        } catch (const NotFound& e) {
            send(res, 404, error_body("not_found", e.what()));
        } catch (const IllegalTransition& e) {
            send(res, 409, error_body("illegal_transition", e.what()));
        } catch (const UnsupportedFormat& e) {
            send(res, 400, error_body("unsupported_format", e.what()));
        } catch (const InvalidArgument& e) {
            send(res, 400, error_body("bad_request", e.what()));
        } catch (const ProviderError& e) {
            send(res, 502, error_body("provider_failure", e.what()));
        } catch (const std::exception& e) {
            send(res, 500, error_body("internal", e.what()));
        }
    }

    void routes() {
        server.new_task_queue = [] { return new httplib::ThreadPool(std::max(8u, std::thread::hardware_concurrency())); };
        server.set_payload_max_length(config.max_upload_bytes * 2 + 4096);
        server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                const std::string code = res.status == 413 ? "too_large" : (res.status == 404 ? "not_found" : "error");
                res.set_content(error_body(code, httplib::status_message(res.status)).dump(), "application/json");
            }
        });
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, json{{"status", "ok"}}); });
        server.Post("/cases", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return create_case(req); });
        });
        server.Post(R"(/cases/([^/]+)/analyze)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return mutate(req.matches[1], [&](workflow::Case& c) { workflow::run_initial_analysis(c, providers); }); });
        });
        server.Post(R"(/cases/([^/]+)/xai)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return mutate(req.matches[1], [&](workflow::Case& c) { workflow::run_lesion_path(c, providers, config.grabcut); }); });
        });
        server.Post(R"(/cases/([^/]+)/followup)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return mutate(req.matches[1], [&](workflow::Case& c) { workflow::run_condition_followup(c, providers); }); });
        });
        server.Get(R"(/cases/([^/]+)/report)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string flag = req.get_param_value("include_image");
            handle(req, res, [&] { return report(req.matches[1], flag == "1" || flag == "true"); });
        });
        server.Get(R"(/cases/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
            if (!authorized(req)) {
                send(res, 401, error_body("unauthorized", "missing or wrong bearer token"));
                return;
            }
            const std::string id = req.matches[1];
            if (!store.exists(id)) {
                send(res, 404, error_body("not_found", "case " + id + " not found"));
                return;
            }
            const auto bytes = imaging::read_file_bytes(store.root() / "cases" / id / "image.bin");
            const bool png = imaging::detect_format(bytes) == imaging::ImageFormat::Png;
            res.set_content(std::string(bytes.begin(), bytes.end()), png ? "image/png" : "image/jpeg");
        });
        server.Post("/eval/runs", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return start_eval(req); });
        });
        server.Get(R"(/eval/runs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            handle(req, res, [&] { return get_eval(req.matches[1]); });
        });
    }
};

Service::Service(ServiceConfig config, providers::ProviderSet providers) : impl_(std::make_unique<Impl>(std::move(config), std::move(providers))) {
    impl_->routes();
}

Service::~Service() {
    stop();
    wait_for_eval_runs();
}

int Service::bind() {
    const auto& c = impl_->config;
    int port = c.port;
    if (port == 0) {
        port = impl_->server.bind_to_any_port(c.host);
    } else if (!impl_->server.bind_to_port(c.host, port)) {
        port = -1;
    }
    if (port <= 0) {
        throw Error("cannot bind " + c.host + ":" + std::to_string(c.port));
    }
    return port;
}

void Service::run() {
    impl_->server.listen_after_bind();
}

void Service::stop() {
    impl_->server.stop();
}

void Service::wait_for_eval_runs() {
    std::vector<std::thread> threads;
    {
        std::lock_guard lock(impl_->runs_mutex);
        threads.swap(impl_->run_threads);
    }
    for (auto& t : threads) {
        if (t.joinable()) {
            t.join();
        }
    }
}

const ServiceConfig& Service::config() const noexcept {
    return impl_->config;
}

}  // namespace dermflow::service
