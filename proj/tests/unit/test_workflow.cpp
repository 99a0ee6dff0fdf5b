#include "dermflow/error.hpp"
#include "dermflow/image_io.hpp"
#include "dermflow/workflow.hpp"

#include "synthetic.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace dermflow;
using namespace dermflow::workflow;
using dermflow::providers::MockProviders;
using dermflow::providers::ProviderSet;
using dermflow::providers::RetryPolicy;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(DERMFLOW_FIXTURES_DIR) + "/responses/" + name, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SleepLog {
    std::shared_ptr<std::vector<long long>> waits = std::make_shared<std::vector<long long>>();

    RetryPolicy policy() const {
        RetryPolicy p;
        auto w = waits;
        p.sleep = [w](std::chrono::milliseconds d) { w->push_back(d.count()); };
        return p;
    }
};

const imaging::RasterImage& lesion_image() {
    static const imaging::RasterImage img = testing::lesion_scene(160, 11);
    return img;
}

// Expected XAI prompt computed from the same building blocks the engine composes.
std::string expected_xai_prompt(const imaging::RasterImage& img, const std::string& initial_text) {
    prompts::ParsedAssessment a = prompts::parse_assessment(initial_text);
    prompts::check_lesion_compliance(a);
    return prompts::build_xai_prompt(a, features::analyze_lesion(img).report);
}

struct LesionMock {
    MockProviders mock;
    std::vector<std::uint8_t> bytes;
};

LesionMock lesion_mock(const imaging::RasterImage& img, const std::string& xai_fixture) {
    LesionMock m;
    m.bytes = imaging::encode_png(img);
    const std::string initial = fixture("lesion_case.txt");
    m.mock.record_vision(m.bytes, prompts::build_lesion_prompt(), initial);
    m.mock.record_text(expected_xai_prompt(img, initial), fixture(xai_fixture));
    return m;
}

std::vector<StateKind> audit_states(const Case& c) {
    std::vector<StateKind> out;
    for (const auto& t : c.audit()) {
        out.push_back(t.to);
    }
    return out;
}

}  // namespace

TEST_CASE("transition table matches the workflow graph") {
    const StateKind all[] = {StateKind::Created,   StateKind::InitialAnalyzed,     StateKind::LesionMeasured, StateKind::XaiComplete,
                             StateKind::ConditionFollowedUp, StateKind::Ended, StateKind::Failed};
    const std::set<std::pair<StateKind, StateKind>> legal = {
        {StateKind::Created, StateKind::InitialAnalyzed},
        {StateKind::InitialAnalyzed, StateKind::LesionMeasured},
        {StateKind::InitialAnalyzed, StateKind::ConditionFollowedUp},
        {StateKind::InitialAnalyzed, StateKind::Ended},
        {StateKind::LesionMeasured, StateKind::XaiComplete},
        {StateKind::Created, StateKind::Failed},
        {StateKind::InitialAnalyzed, StateKind::Failed},
        {StateKind::LesionMeasured, StateKind::Failed},
    };
    for (StateKind from : all) {
        for (StateKind to : all) {
            CHECK_MESSAGE(transition_allowed(from, to) == (legal.count({from, to}) == 1), to_string(from), " -> ", to_string(to));
        }
        CHECK(state_from_string(to_string(from)) == from);
    }
    CHECK_THROWS_AS(state_from_string("Bogus"), InvalidArgument);
}

TEST_CASE("case creation and illegal transitions") {
    Case c = Case::from_image(lesion_image());
    CHECK(c.state() == StateKind::Created);
    CHECK(c.id().size() == 32);
    CHECK(c.created_at().size() == 24);
    CHECK(c.image() == lesion_image());
    CHECK(Case::from_image(lesion_image()).id() != c.id());
    CHECK_THROWS_AS(c.advance(StateKind::XaiComplete), IllegalTransition);
    CHECK(c.audit().empty());
    c.advance(StateKind::InitialAnalyzed);
    c.fail("boom");
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.failure_reason() == "boom");
    CHECK_THROWS_AS(c.fail("again"), IllegalTransition);
    CHECK(c.audit().size() == 2);

    CHECK_THROWS_AS(Case::from_bytes({'n', 'o', 'p', 'e'}), UnsupportedFormat);
}

TEST_CASE("send2lab parsing") {
    SUBCASE("referral line") {
        auto d = parse_send2lab("Summary text.\nLAB_REFERRAL: yes - asymmetric pigmented lesion with color spread\n");
        CHECK(d.required);
        CHECK(d.from_referral_line);
        CHECK(d.rationale == "asymmetric pigmented lesion with color spread");
        d = parse_send2lab("**LAB_REFERRAL:** No \xE2\x80\x94 benign appearance");
        CHECK_FALSE(d.required);
        CHECK(d.rationale == "benign appearance");
    }
    SUBCASE("referral line without rationale borrows the supporting sentence") {
        const auto d = parse_send2lab("A biopsy is recommended given the border.\nLAB_REFERRAL: yes");
        CHECK(d.required);
        CHECK(d.rationale == "A biopsy is recommended given the border.");
    }
    SUBCASE("prose fallback") {
        const auto d = parse_send2lab(fixture("xai_lesion.txt"));
        CHECK(d.required);
        CHECK_FALSE(d.from_referral_line);
        CHECK(d.rationale.find("biopsy is required") != std::string::npos);
    }
    SUBCASE("negated prose") {
        const auto d = parse_send2lab("The lesion looks benign. A biopsy is not required at this point.");
        CHECK_FALSE(d.required);
        CHECK(d.rationale == "A biopsy is not required at this point.");
        CHECK_FALSE(parse_send2lab("Nothing about testing here.").required);
    }
    SUBCASE("required implies a rationale") {
        for (const char* text : {"LAB_REFERRAL: yes", "Laboratory analysis is warranted.", "lab_referral: YES -  ",
                                 "Histopathology needed. LAB_REFERRAL: yes"}) {
            const auto d = parse_send2lab(text);
            CHECK(d.required);
            CHECK_FALSE(d.rationale.empty());
        }
    }
}

TEST_CASE("lesion use case runs to XaiComplete with a lab referral") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    SleepLog sleeps;
    Case c = Case::from_bytes(m.bytes);
    run_full(c, m.mock.provider_set(sleeps.policy()));

    REQUIRE_MESSAGE(c.state() == StateKind::XaiComplete, c.failure_reason());
    CHECK(audit_states(c) == std::vector{StateKind::InitialAnalyzed, StateKind::LesionMeasured, StateKind::XaiComplete});
    const Artifacts& a = c.artifacts();
    REQUIRE(a.path);
    CHECK(a.path->path == prompts::Path::Lesion);
    REQUIRE(a.initial_assessment);
    CHECK(a.initial_assessment->diagnoses.front() == "Melanoma");
    CHECK(a.initial_assessment->compliant());
    REQUIRE(a.send2lab);
    CHECK(a.send2lab->required);
    CHECK(a.send2lab->rationale.find("biopsy") != std::string::npos);
    CHECK(a.retries.at("initial") == 0);
    CHECK(a.retries.at("xai") == 0);
    CHECK(sleeps.waits->empty());
    CHECK_FALSE(a.followup_assessment);

    // The XAI prompt carries every measured value.
    REQUIRE(a.technical_report);
    REQUIRE(a.xai_prompt);
    const auto& f = a.technical_report->features;
    for (double v : {f.area, f.perimeter, f.circularity, f.asymmetry_major, f.asymmetry_minor, f.asymmetry_avg, f.color_std.r,
                     f.color_std.g, f.color_std.b}) {
        CHECK_MESSAGE(a.xai_prompt->find(features::format_number(v)) != std::string::npos, features::format_number(v));
    }
    CHECK(f.area > 3000);
    CHECK(m.mock.call_count("vision") == 1);
    CHECK(m.mock.call_count("text") == 1);
}

TEST_CASE("benign disk with a no-referral review") {
    const auto disk = testing::paint(testing::disk_mask(120, 120, 60, 60, 22), {110, 70, 50}, {226, 182, 160}, 3.0, 5);
    const LesionMock m = lesion_mock(disk, "xai_benign.txt");
    Case c = Case::from_bytes(m.bytes);
    run_full(c, m.mock.provider_set(SleepLog{}.policy()));
    REQUIRE_MESSAGE(c.state() == StateKind::XaiComplete, c.failure_reason());
    CHECK_FALSE(c.artifacts().send2lab->required);
    CHECK(c.artifacts().send2lab->from_referral_line);
    CHECK(c.artifacts().technical_report->features.asymmetry_avg < 0.1);
}

TEST_CASE("condition use case runs the follow-up") {
    MockProviders mock;
    const auto bytes = imaging::encode_png(lesion_image());
    mock.record_vision(bytes, prompts::build_lesion_prompt(), fixture("condition_initial.txt"));
    mock.record_vision(bytes, prompts::build_condition_prompt(), fixture("condition_followup.txt"));
    Case c = Case::from_bytes(bytes);
    run_full(c, mock.provider_set(SleepLog{}.policy()));

    REQUIRE_MESSAGE(c.state() == StateKind::ConditionFollowedUp, c.failure_reason());
    CHECK(audit_states(c) == std::vector{StateKind::InitialAnalyzed, StateKind::ConditionFollowedUp});
    CHECK(c.artifacts().path->path == prompts::Path::Condition);
    const auto& f = *c.artifacts().followup_assessment;
    CHECK(f.diagnoses.size() <= 3);
    CHECK(std::find(f.diagnoses.begin(), f.diagnoses.end(), "Traumatic ulcer") != f.diagnoses.end());
    REQUIRE(f.final_diagnosis);
    CHECK(*f.final_diagnosis == "Aphthous stomatitis (canker sore)");
    CHECK_FALSE(c.artifacts().technical_report);
    CHECK_FALSE(c.artifacts().xai_report);
    CHECK(mock.call_count("vision") == 2);
    CHECK(mock.call_count("text") == 0);
}

TEST_CASE("follow-up with five diagnoses is truncated and flagged") {
    MockProviders mock;
    const auto bytes = imaging::encode_png(lesion_image());
    mock.record_vision(bytes, prompts::build_lesion_prompt(), fixture("condition_initial.txt"));
    mock.record_vision(bytes, prompts::build_condition_prompt(),
                       "Visual Description: Inflamed mucosa.\n\nDiagnosis Selection:\n1. Aphthous ulcer\n2. Traumatic ulcer\n"
                       "3. Oral candidiasis\n4. Herpetic stomatitis\n5. Lichen planus\n\nFinal Diagnosis: Aphthous ulcer\n");
    Case c = Case::from_bytes(bytes);
    run_full(c, mock.provider_set(SleepLog{}.policy()));
    REQUIRE(c.state() == StateKind::ConditionFollowedUp);
    const auto& f = *c.artifacts().followup_assessment;
    CHECK(f.diagnoses == std::vector<std::string>{"Aphthous ulcer", "Traumatic ulcer", "Oral candidiasis"});
    CHECK_FALSE(f.compliant());
}

TEST_CASE("non-dermatology image ends the workflow") {
    MockProviders mock;
    const auto bytes = imaging::encode_png(lesion_image());
    mock.record_vision(bytes, prompts::build_lesion_prompt(), fixture("non_skin.txt"));
    Case c = Case::from_bytes(bytes);
    run_full(c, mock.provider_set(SleepLog{}.policy()));
    CHECK(c.state() == StateKind::Ended);
    CHECK(c.artifacts().path->path == prompts::Path::End);
    CHECK(mock.call_count("vision") == 1);
    CHECK(mock.call_count("text") == 0);
}

TEST_CASE("unstructured response fails the case") {
    MockProviders mock;
    const auto bytes = imaging::encode_png(lesion_image());
    mock.record_vision(bytes, prompts::build_lesion_prompt(), fixture("unstructured.txt"));
    Case c = Case::from_bytes(bytes);
    CHECK_THROWS_AS(run_initial_analysis(c, mock.provider_set(SleepLog{}.policy())), WorkflowFailed);
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.failure_reason().rfind("unstructured", 0) == 0);
    CHECK_FALSE(c.artifacts().initial_assessment);
}

TEST_CASE("fault injection: two timeouts then success") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    SleepLog sleeps;
    const ProviderSet faulty = providers::inject_timeouts(m.mock.provider_set(sleeps.policy()), 2, {"text"});
    Case c = Case::from_bytes(m.bytes);
    run_full(c, faulty);
    REQUIRE_MESSAGE(c.state() == StateKind::XaiComplete, c.failure_reason());
    CHECK(c.artifacts().retries.at("xai") == 2);
    CHECK(c.artifacts().retries.at("initial") == 0);
    CHECK(*sleeps.waits == std::vector<long long>{1000, 2000});
}

TEST_CASE("fault injection: retries exhausted") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    SleepLog sleeps;
    const ProviderSet faulty = providers::inject_timeouts(m.mock.provider_set(sleeps.policy()), 3, {"text"});
    Case c = Case::from_bytes(m.bytes);
    run_full(c, faulty);
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.artifacts().retries.at("xai") == 2);
    CHECK(c.failure_reason().find("after 2 retries") != std::string::npos);
    CHECK(audit_states(c) == std::vector{StateKind::InitialAnalyzed, StateKind::LesionMeasured, StateKind::Failed});
    CHECK_FALSE(c.artifacts().xai_report);
    CHECK_FALSE(c.artifacts().send2lab);
    CHECK(m.mock.call_count("text") == 0);  // all three attempts hit injected timeouts
}

TEST_CASE("deadline stops retrying") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    SleepLog sleeps;
    RetryPolicy p = sleeps.policy();
    p.deadline = std::chrono::milliseconds(1500);
    Case c = Case::from_bytes(m.bytes);
    run_full(c, providers::inject_timeouts(m.mock.provider_set(p), 2, {"vision"}));
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.artifacts().retries.at("initial") == 1);
    CHECK(*sleeps.waits == std::vector<long long>{1000});
}

TEST_CASE("missing mock response is not retried") {
    MockProviders mock;
    SleepLog sleeps;
    Case c = Case::from_image(lesion_image());
    run_full(c, mock.provider_set(sleeps.policy()));
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.artifacts().retries.at("initial") == 0);
    CHECK(sleeps.waits->empty());
    CHECK(c.failure_reason().find("digest") != std::string::npos);
}

TEST_CASE("blank image on the lesion path fails with no lesion") {
    const imaging::RasterImage blank(64, 64, {200, 160, 140});
    MockProviders mock;
    const auto bytes = imaging::encode_png(blank);
    mock.record_vision(bytes, prompts::build_lesion_prompt(), fixture("lesion_case.txt"));
    Case c = Case::from_bytes(bytes);
    run_full(c, mock.provider_set(SleepLog{}.policy()));
    CHECK(c.state() == StateKind::Failed);
    CHECK(c.failure_reason().rfind("no lesion", 0) == 0);
    CHECK(mock.call_count("text") == 0);
}

TEST_CASE("no provider calls after a terminal state") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    const ProviderSet ps = m.mock.provider_set(SleepLog{}.policy());
    Case c = Case::from_bytes(m.bytes);
    run_full(c, ps);
    REQUIRE(c.state() == StateKind::XaiComplete);
    const auto vision = m.mock.call_count("vision");
    const auto text = m.mock.call_count("text");
    CHECK_THROWS_AS(run_initial_analysis(c, ps), IllegalTransition);
    CHECK_THROWS_AS(run_lesion_path(c, ps), IllegalTransition);
    CHECK_THROWS_AS(run_condition_followup(c, ps), IllegalTransition);
    CHECK_THROWS_AS(run_full(c, ps), IllegalTransition);
    CHECK(m.mock.call_count("vision") == vision);
    CHECK(m.mock.call_count("text") == text);
    CHECK(c.audit().size() == 3);

    // A wrong-path request on a live case is refused without side effects as well.
    MockProviders cond;
    cond.record_vision(m.bytes, prompts::build_lesion_prompt(), fixture("condition_initial.txt"));
    Case d = Case::from_bytes(m.bytes);
    run_initial_analysis(d, cond.provider_set());
    CHECK_THROWS_AS(run_lesion_path(d, cond.provider_set()), IllegalTransition);
    CHECK(d.state() == StateKind::InitialAnalyzed);
}

TEST_CASE("replay is byte identical") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    Case a = Case::from_bytes(m.bytes);
    Case b = Case::from_bytes(m.bytes);
    run_full(a, m.mock.provider_set());
    run_full(b, m.mock.provider_set());
    CHECK(a.id() != b.id());
    CHECK(artifact_bundle(a) == artifact_bundle(b));

    MockProviders cond;
    cond.record_vision(m.bytes, prompts::build_lesion_prompt(), fixture("condition_initial.txt"));
    cond.record_vision(m.bytes, prompts::build_condition_prompt(), fixture("condition_followup.txt"));
    Case c = Case::from_bytes(m.bytes);
    Case d = Case::from_bytes(m.bytes);
    run_full(c, cond.provider_set());
    run_full(d, cond.provider_set());
    CHECK(artifact_bundle(c) == artifact_bundle(d));
}

TEST_CASE("artifacts appear only with their producing transition") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    const ProviderSet ps = m.mock.provider_set();
    Case c = Case::from_bytes(m.bytes);
    CHECK_FALSE(c.artifacts().initial_assessment);
    run_initial_analysis(c, ps);
    CHECK(c.artifacts().initial_assessment);
    CHECK_FALSE(c.artifacts().technical_report);
    run_lesion_path(c, ps);
    CHECK(c.artifacts().technical_report);
    CHECK(c.artifacts().xai_report);
}

TEST_CASE("case JSON round trip") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    Case c = Case::from_bytes(m.bytes);
    run_full(c, m.mock.provider_set());
    const std::string text = case_to_json(c);
    const Case back = case_from_json(text);
    CHECK(back.id() == c.id());
    CHECK(back.state() == c.state());
    CHECK(back.image() == c.image());
    CHECK(artifact_bundle(back) == artifact_bundle(c));
    CHECK(case_to_json(back) == text);

    auto j = nlohmann::json::parse(text);
    j["audit"][0]["to"] = "XaiComplete";
    CHECK_THROWS_AS(case_from_json(j.dump()), InvalidArgument);
    CHECK_THROWS_AS(case_from_json("{"), InvalidArgument);
    CHECK(nlohmann::json::parse(case_to_json(c, false))["image"].count("data") == 0);
}

TEST_CASE("mock fixtures survive save and load") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    const auto dir = std::filesystem::temp_directory_path() / ("dermflow_mock_" + std::to_string(::getpid()));
    m.mock.save(dir);
    const MockProviders loaded = MockProviders::load(dir);
    CHECK(loaded.size() == m.mock.size());
    Case a = Case::from_bytes(m.bytes);
    Case b = Case::from_bytes(m.bytes);
    run_full(a, m.mock.provider_set());
    run_full(b, loaded.provider_set());
    CHECK(artifact_bundle(a) == artifact_bundle(b));
    std::filesystem::remove_all(dir);
}

TEST_CASE("HTTP providers against a local fake server") {
    const LesionMock m = lesion_mock(lesion_image(), "xai_lesion.txt");
    httplib::Server server;
    std::atomic<int> text_calls{0};
    std::atomic<int> unauthorized{0};
    auto authorized = [&](const httplib::Request& req) {
        if (req.get_header_value("Authorization") != "Bearer secret") {
            ++unauthorized;
            return false;
        }
        return true;
    };
    server.Post("/v1/vision", [&](const httplib::Request& req, httplib::Response& res) {
        if (!authorized(req)) {
            res.status = 401;
            return;
        }
        try {
            res.set_content(m.mock.lookup("vision", req.body), "application/json");
        } catch (const ProviderError&) {
            res.status = 404;
        }
    });
    server.Post("/v1/text", [&](const httplib::Request& req, httplib::Response& res) {
        if (!authorized(req)) {
            res.status = 401;
            return;
        }
        if (text_calls++ < 2) {
            res.status = 503;
            return;
        }
        res.set_content(m.mock.lookup("text", req.body), "application/json");
    });
    server.Post("/v1/broken", [](const httplib::Request&, httplib::Response& res) { res.set_content("{\"nope\":1}", "application/json"); });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    providers::HttpEndpoints endpoints;
    endpoints.vision = base + "/v1/vision";
    endpoints.text = base + "/v1/text";
    endpoints.bearer_token = "secret";
    endpoints.timeout = std::chrono::milliseconds(5000);

    SUBCASE("transient 503s are retried") {
        SleepLog sleeps;
        Case c = Case::from_bytes(m.bytes);
        run_full(c, providers::http_provider_set(endpoints, sleeps.policy()));
        REQUIRE_MESSAGE(c.state() == StateKind::XaiComplete, c.failure_reason());
        CHECK(c.artifacts().retries.at("xai") == 2);
        CHECK(c.artifacts().send2lab->required);
        Case replay = Case::from_bytes(m.bytes);
        run_full(replay, m.mock.provider_set());
        CHECK(artifact_bundle(replay).size() > 0);
        CHECK(*c.artifacts().xai_report == *replay.artifacts().xai_report);
    }
    SUBCASE("client errors fail without retry") {
        endpoints.bearer_token = "wrong";
        SleepLog sleeps;
        Case c = Case::from_bytes(m.bytes);
        run_full(c, providers::http_provider_set(endpoints, sleeps.policy()));
        CHECK(c.state() == StateKind::Failed);
        CHECK(c.failure_reason().find("401") != std::string::npos);
        CHECK(sleeps.waits->empty());
        CHECK(unauthorized == 1);
    }
    SUBCASE("malformed body is a provider error") {
        endpoints.vision = base + "/v1/broken";
        Case c = Case::from_bytes(m.bytes);
        run_full(c, providers::http_provider_set(endpoints, SleepLog{}.policy()));
        CHECK(c.state() == StateKind::Failed);
        CHECK(c.artifacts().retries.at("initial") == 0);
    }
    SUBCASE("unreachable endpoint") {
        endpoints.vision = "http://127.0.0.1:1/v1/vision";
        SleepLog sleeps;
        Case c = Case::from_bytes(m.bytes);
        run_full(c, providers::http_provider_set(endpoints, sleeps.policy()));
        CHECK(c.state() == StateKind::Failed);
    }

    server.stop();
    worker.join();
}

TEST_CASE("base64 and digest helpers") {
    CHECK(providers::base64_encode(std::vector<std::uint8_t>{'f', 'o', 'o', 'b'}) == "Zm9vYg==");
    CHECK(providers::base64_decode("Zm9vYg==") == std::vector<std::uint8_t>{'f', 'o', 'o', 'b'});
    CHECK(providers::base64_decode("").empty());
    CHECK_THROWS_AS(providers::base64_decode("abc"), InvalidArgument);
    CHECK(providers::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const std::vector<std::uint8_t> bytes = {0, 1, 2, 250, 251, 252, 253, 254, 255};
    for (std::size_t n = 0; n <= bytes.size(); ++n) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(n));
        CHECK(providers::base64_decode(providers::base64_encode(part)) == part);
    }
}
