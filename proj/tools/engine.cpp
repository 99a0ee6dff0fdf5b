// engine: command-line front end for the dermflow service and evaluation harness.

#include "dermflow/evaluation.hpp"
#include "dermflow/features.hpp"
#include "dermflow/image_io.hpp"
#include "dermflow/prompts.hpp"
#include "dermflow/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <thread>

namespace fs = std::filesystem;
using namespace dermflow;

namespace {

std::string read_text(const fs::path& p) {
    const auto bytes = imaging::read_file_bytes(p);
    return std::string(bytes.begin(), bytes.end());
}

int run_serve(const fs::path& config_path) {
    const service::ServiceConfig config = service::load_config(config_path);
    service::Service svc(config, service::make_providers(config));

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread([&svc, signals] {
        int sig = 0;
        sigwait(&signals, &sig);
        svc.stop();
    }).detach();

    const int port = svc.bind();
    std::cout << "dermflow listening on " << config.host << ":" << port << " (store " << config.store_dir.string() << ", "
              << (config.mode == service::ProviderMode::Mock ? "mock" : "live") << " providers)" << std::endl;
    svc.run();
    svc.wait_for_eval_runs();
    return 0;
}

struct EvalArgs {
    fs::path corpus;
    fs::path reviews;
    fs::path out;
    fs::path config;
    fs::path fixtures;
    int workers = 0;
};

int run_eval(const EvalArgs& a) {
    std::optional<service::ServiceConfig> config;
    if (!a.config.empty()) {
        config = service::load_config(a.config);
    }
    const prompts::Lexicon lexicon =
        config && !config->lexicon_path.empty() ? prompts::Lexicon::load(config->lexicon_path) : prompts::Lexicon::builtin();

    const evaluation::Corpus corpus = evaluation::load_corpus(a.corpus, lexicon);
    bool bad = false;
    for (const auto& e : corpus.errors) {
        std::cerr << "corpus: " << e.document << ": " << e.message << "\n";
        bad = true;
    }
    std::vector<evaluation::ExpertReview> reviews;
    if (!a.reviews.empty()) {
        auto ingest = evaluation::ingest_expert_reviews(a.reviews);
        for (const auto& e : ingest.errors) {
            std::cerr << "reviews: " << a.reviews.filename().string() << ":" << e.line << ": " << e.message << "\n";
            bad = true;
        }
        reviews = std::move(ingest.reviews);
    }
    if (bad) {
        return 1;
    }

    providers::ProviderSet ps;
    evaluation::RunOptions options;
    if (!a.fixtures.empty()) {
        ps = providers::MockProviders::load(a.fixtures).provider_set(config ? config->retry_policy() : providers::RetryPolicy{});
    } else if (config) {
        ps = service::make_providers(*config);
    } else if (fs::is_directory(a.corpus / "providers")) {
        ps = providers::MockProviders::load(a.corpus / "providers").provider_set();
    } else {
        throw InvalidArgument("no providers: pass --config or --fixtures, or add a providers/ directory to the corpus");
    }
    if (config) {
        options.weights = config->weights;
        options.scoring.entity_template = config->entity_template;
        options.workers = config->eval_workers;
    }
    if (a.workers > 0) {
        options.workers = a.workers;
    }
    options.progress = [](std::size_t done, std::size_t total, const evaluation::ScoreRecord&) {
        if (done == total || done % 10 == 0) {
            std::cerr << "scored " << done << "/" << total << "\n";
        }
    };

    const auto report = evaluation::run_evaluation(corpus.cases, reviews, ps, options);
    if (!a.out.empty()) {
        if (a.out.has_parent_path()) {
            fs::create_directories(a.out.parent_path());
        }
        service::write_file_atomic(a.out, evaluation::report_to_json(report));
    }
    std::cout << evaluation::render_table(report);
    return 0;
}

int run_features(const fs::path& image, const fs::path& plots_dir, const segmentation::GrabCutParams& params) {
    const auto analysis = features::analyze_lesion(imaging::load_image(image), params);
    std::cout << analysis.report.text;
    if (!plots_dir.empty()) {
        fs::create_directories(plots_dir);
        for (const auto& p : analysis.report.plots) {
            service::write_file_atomic(plots_dir / (p.name + ".png"), std::string_view(reinterpret_cast<const char*>(p.png.data()), p.png.size()));
        }
    }
    return 0;
}

std::string prompt_text(const std::string& prompt) {
    if (prompt == "lesion") {
        return prompts::build_lesion_prompt();
    }
    if (prompt == "condition") {
        return prompts::build_condition_prompt();
    }
    return read_text(prompt);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dermflow engine"};
    app.require_subcommand(1);

    fs::path config_path;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score a corpus and print the capability table");
    eval_cmd->add_option("--corpus", eval_args.corpus, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--reviews", eval_args.reviews, "Expert review CSV")->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_args.out, "Write the JSON report here");
    eval_cmd->add_option("--config", eval_args.config, "Service config for providers and weights")->check(CLI::ExistingFile);
    eval_cmd->add_option("--fixtures", eval_args.fixtures, "Mock provider fixtures directory")->check(CLI::ExistingDirectory);
    eval_cmd->add_option("--workers", eval_args.workers, "Scoring threads")->check(CLI::PositiveNumber);

    fs::path image_path;
    fs::path plots_dir;
    fs::path features_config;
    auto* features_cmd = app.add_subcommand("features", "Segment a lesion image and print the technical report");
    features_cmd->add_option("--image", image_path, "PNG or JPEG image")->required()->check(CLI::ExistingFile);
    features_cmd->add_option("--plots", plots_dir, "Write plot PNGs into this directory");
    features_cmd->add_option("--config", features_config, "Service config for segmentation parameters")->check(CLI::ExistingFile);

    fs::path digest_image;
    std::string digest_prompt;
    auto* digest_cmd = app.add_subcommand("digest", "Print the mock fixture digest of a vision or text request");
    digest_cmd->add_option("--image", digest_image, "Image for a vision request")->check(CLI::ExistingFile);
    digest_cmd->add_option("--prompt", digest_prompt, "\"lesion\", \"condition\" or a prompt file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            return run_serve(config_path);
        }
        if (*eval_cmd) {
            return run_eval(eval_args);
        }
        if (*features_cmd) {
            service::ServiceConfig c;
            if (!features_config.empty()) {
                c = service::load_config(features_config);
            }
            return run_features(image_path, plots_dir, c.grabcut);
        }
        if (*digest_cmd) {
            const std::string prompt = prompt_text(digest_prompt);
            const std::string request =
                digest_image.empty() ? providers::text_request(prompt) : providers::vision_request(imaging::read_file_bytes(digest_image), prompt);
            std::cout << (digest_image.empty() ? "text " : "vision ") << providers::sha256_hex(request) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "engine: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
