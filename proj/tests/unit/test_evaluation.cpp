#include "dermflow/error.hpp"
#include "dermflow/evaluation.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace dermflow;
using namespace dermflow::evaluation;
using dermflow::providers::MockProviders;
using dermflow::providers::NliScores;

namespace {

std::string fixture(const std::string& name) {
    std::ifstream in(std::string(DERMFLOW_FIXTURES_DIR) + "/responses/" + name, std::ios::binary);
    REQUIRE(in);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Independent oracle: similarity matrix written out, then row and column maxima.
BertScore brute_bert(const std::vector<TokenVector>& prem, const std::vector<TokenVector>& hyp) {
    const std::size_t n = hyp.size();
    const std::size_t m = prem.size();
    std::vector<std::vector<double>> sim(n, std::vector<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double dot = 0;
            double a = 0;
            double b = 0;
            for (std::size_t d = 0; d < hyp[i].vector.size(); ++d) {
                dot += hyp[i].vector[d] * prem[j].vector[d];
                a += hyp[i].vector[d] * hyp[i].vector[d];
                b += prem[j].vector[d] * prem[j].vector[d];
            }
            sim[i][j] = dot / std::sqrt(a * b);
        }
    }
    BertScore s;
    for (std::size_t i = 0; i < n; ++i) {
        s.precision += *std::max_element(sim[i].begin(), sim[i].end());
    }
    for (std::size_t j = 0; j < m; ++j) {
        double best = -2;
        for (std::size_t i = 0; i < n; ++i) {
            best = std::max(best, sim[i][j]);
        }
        s.recall += best;
    }
    s.precision /= static_cast<double>(n);
    s.recall /= static_cast<double>(m);
    return s;
}

std::vector<TokenVector> random_tokens(std::mt19937& rng, std::size_t count, std::size_t dim, bool non_negative) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<TokenVector> out;
    for (std::size_t k = 0; k < count; ++k) {
        Vector v(dim);
        for (double& x : v) {
            x = non_negative ? std::fabs(g(rng)) + 1e-3 : g(rng);
        }
        out.push_back({"t" + std::to_string(k), v});
    }
    return out;
}

ScoreRecord record(const std::string& id, double ts_c, double ts_e, NliLabel ctx, NliLabel ent) {
    ScoreRecord r;
    r.case_id = id;
    r.ts_context = ts_c;
    r.ts_entity = ts_e;
    r.nli_context.label = ctx;
    r.nli_entity = NliResult{ent, 0.9, {}};
    r.bert = {0.6, 0.7, 2 * 0.6 * 0.7 / 1.3};
    return r;
}

// Records with the reference label counts and track means, built directly.
std::vector<ScoreRecord> table_records() {
    std::vector<ScoreRecord> out;
    for (int i = 0; i < 73; ++i) {
        const NliLabel ctx = i < 63 ? NliLabel::Entailment : (i < 70 ? NliLabel::Neutral : NliLabel::Contradiction);
        const NliLabel ent = i < 30 ? NliLabel::Entailment : (i < 52 ? NliLabel::Neutral : NliLabel::Contradiction);
        const double wiggle = (i % 2 == 0 ? 0.05 : -0.05) * (i == 72 ? 0 : 1);
        out.push_back(record("c" + std::to_string(100 + i), 0.70 + wiggle, 0.69 - wiggle, ctx, ent));
    }
    return out;
}

std::vector<ExpertReview> table_reviews() {
    std::vector<ExpertReview> out;
    for (int i = 0; i < 73; ++i) {
        out.push_back({"c" + std::to_string(100 + i), i < 28 ? 5 : 4, i < 23 ? 5 : 4, "dr"});
    }
    return out;
}

const std::filesystem::path kCorpus = DERMFLOW_EVAL_CORPUS;

}  // namespace

TEST_CASE("cosine similarity hand cases") {
    const Vector a{3.0, -2.0, 7.5};
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::fabs(cosine_similarity(Vector{1, 0}, Vector{0, 1})) < 1e-12);
    CHECK(std::fabs(cosine_similarity(Vector{1, 0}, Vector{1, 1}) - 0.70710678118654752) < 1e-9);
    CHECK(std::fabs(cosine_similarity(Vector{1, 2}, Vector{-1, -2}) + 1.0) < 1e-12);
    CHECK_THROWS_AS(cosine_similarity(Vector{0, 0}, Vector{1, 1}), InvalidArgument);
    CHECK_THROWS_AS(cosine_similarity(Vector{1, 0}, Vector{1, 0, 0}), InvalidArgument);
    CHECK_THROWS_AS(cosine_similarity(Vector{}, Vector{}), InvalidArgument);
}

TEST_CASE("bert score") {
    std::mt19937 rng(7);
    SUBCASE("identical input") {
        const auto t = random_tokens(rng, 6, 8, false);
        const BertScore s = bert_score(t, t);
        CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.recall == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.f1 == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("single premise token as hypothesis") {
        const auto prem = random_tokens(rng, 5, 4, false);
        const std::vector<TokenVector> hyp{prem[2]};
        const BertScore s = bert_score(prem, hyp);
        CHECK(s.precision == doctest::Approx(1.0).epsilon(1e-12));
        double mean = 0;
        for (const auto& p : prem) {
            mean += cosine_similarity(p.vector, prem[2].vector);
        }
        CHECK(std::fabs(s.recall - mean / 5.0) < 1e-12);
    }
    SUBCASE("greedy matching oracle on random 5x7 matrices") {
        for (int trial = 0; trial < 200; ++trial) {
            const auto prem = random_tokens(rng, 5, 6, false);
            const auto hyp = random_tokens(rng, 7, 6, false);
            const BertScore s = bert_score(prem, hyp);
            const BertScore o = brute_bert(prem, hyp);
            CHECK(std::fabs(s.precision - o.precision) < 1e-9);
            CHECK(std::fabs(s.recall - o.recall) < 1e-9);
        }
    }
    SUBCASE("F1 is the harmonic mean; ranges") {
        for (int trial = 0; trial < 1000; ++trial) {
            const bool non_negative = trial % 2 == 0;
            const auto prem = random_tokens(rng, 1 + trial % 5, 3, non_negative);
            const auto hyp = random_tokens(rng, 1 + trial % 7, 3, non_negative);
            const BertScore s = bert_score(prem, hyp);
            CHECK(s.precision >= -1.0);
            CHECK(s.precision <= 1.0);
            CHECK(s.recall >= -1.0);
            CHECK(s.recall <= 1.0);
            const double sum = s.precision + s.recall;
            CHECK(s.f1 == (sum > 0 ? 2 * s.precision * s.recall / sum : 0.0));
            if (non_negative) {
                CHECK(s.precision >= 0.0);
                CHECK(s.recall >= 0.0);
            }
        }
    }
    CHECK_THROWS_AS(bert_score({}, random_tokens(rng, 2, 2, false)), InvalidArgument);
}

TEST_CASE("provider-backed scoring") {
    MockProviders mock;
    mock.record_sentence_embedding({"same text"}, {Vector{0.2, 0.4, 0.1}});
    mock.record_sentence_embedding({"a"}, {Vector{1, 0}});
    mock.record_sentence_embedding({"b"}, {Vector{1, 1}});
    mock.record_nli("same text", "same text", {0.005, 0.005, 0.99});
    mock.record_nli("a", "b", {0.2, 0.5, 0.3});
    const auto ps = mock.provider_set();
    CHECK(textual_similarity("same text", "same text", ps) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::fabs(textual_similarity("a", "b", ps) - 0.70710678118654752) < 1e-9);
    const NliResult e = nli_assess("same text", "same text", ps);
    CHECK(e.label == NliLabel::Entailment);
    CHECK(e.probability == 0.99);
    CHECK(nli_assess("a", "b", ps).label == NliLabel::Neutral);
    CHECK_THROWS_AS(nli_assess("", "b", ps), InvalidArgument);
    CHECK_THROWS_AS(textual_similarity("a", "missing", ps), ProviderError);

    mock.record_raw("nli", providers::sha256_hex(providers::nli_request("x", "y")), R"({"contradiction":0.5,"neutral":0.5,"entailment":0.5})");
    CHECK_THROWS_AS(nli_assess("x", "y", ps), ProviderError);

    CHECK(nli_label({0.4, 0.4, 0.2}).label == NliLabel::Neutral);
    CHECK(nli_label({0.4, 0.2, 0.4}).label == NliLabel::Contradiction);
    CHECK(nli_label({0.1, 0.2, 0.7}).probability == 0.7);
}

TEST_CASE("weighted row") {
    const Weights w;
    CHECK(std::round(weighted_row(0.70, 0.69, w) * 100) / 100 == 0.87);
    CHECK(std::round(weighted_row(0.86, 0.41, w) * 100) / 100 == 0.85);
    CHECK(weighted_row(0, 0, w) == 0);
    const Weights unit{1.0, 1.0};
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pw(0.1, 3.0);
    for (int i = 0; i < 500; ++i) {
        const double x = u(rng);
        CHECK(weighted_row(x, x, unit) == doctest::Approx(x).epsilon(1e-15));
        const Weights ww{pw(rng), pw(rng)};
        const double c = u(rng);
        const double e = u(rng);
        const double d = std::fabs(u(rng));
        CHECK(weighted_row(c + d, e, ww) >= weighted_row(c, e, ww));
        CHECK(weighted_row(c, e + d, ww) >= weighted_row(c, e, ww));
    }
    CHECK_THROWS_AS(weighted_row(1, 1, Weights{0.0, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(weighted_row(1, 1, Weights{1.0, -1.0}), InvalidArgument);
}

TEST_CASE("aggregate reproduces the reference table from its counts") {
    const CapabilityReport r = aggregate(table_records(), table_reviews());
    CHECK(r.case_count == 73);
    CHECK(r.textual_similarity.context == doctest::Approx(0.70).epsilon(1e-12));
    CHECK(r.textual_similarity.entity == doctest::Approx(0.69).epsilon(1e-12));
    CHECK(std::fabs(r.textual_similarity.value - 0.87) <= 0.005);
    CHECK(std::fabs(r.nli_entailment.row.value - 0.85) <= 0.01);
    CHECK(std::fabs(r.nli_neutral.row.value - 0.22) <= 0.015);
    CHECK(std::fabs(r.nli_contradiction.row.value - 0.17) <= 0.015);
    REQUIRE(r.expert);
    CHECK(std::fabs(r.expert->mean - 0.87) <= 0.005);
    CHECK(std::fabs(r.capability - 0.86) <= 0.01);
    CHECK(r.nli_entailment.context_count == 63);
    CHECK(r.nli_neutral.entity_count == 22);
    // Fractions per track sum to one.
    CHECK(std::fabs(r.nli_entailment.row.context + r.nli_neutral.row.context + r.nli_contradiction.row.context - 1.0) < 1e-9);
    CHECK(std::fabs(r.nli_entailment.row.entity + r.nli_neutral.row.entity + r.nli_contradiction.row.entity - 1.0) < 1e-9);
    const double expected = (r.textual_similarity.value + r.nli_entailment.row.value + r.expert->mean) / 3.0;
    CHECK(r.capability == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("aggregate clamps and handles boundaries") {
    SUBCASE("all ones clamp to 1") {
        const CapabilityReport r = aggregate({record("x", 1.0, 1.0, NliLabel::Entailment, NliLabel::Entailment)}, {{"x", 5, 5, "dr"}});
        CHECK(r.textual_similarity.raw == 1.25);
        CHECK(r.textual_similarity.value == 1.0);
        CHECK(r.nli_entailment.row.raw == 1.25);
        CHECK(r.expert->mean == 1.0);
        CHECK(r.capability == 1.0);
        CHECK(r.capability_raw == doctest::Approx(3.5 / 3.0));
        CHECK(render_table(r).find("clamped") != std::string::npos);
    }
    SUBCASE("zero entailments") {
        const CapabilityReport r = aggregate({record("x", 0.5, 0.5, NliLabel::Neutral, NliLabel::Contradiction)}, {{"x", 5, 5, "dr"}});
        CHECK(r.nli_entailment.row.value == 0.0);
        CHECK(r.capability == doctest::Approx((0.625 + 0.0 + 1.0) / 3.0));
    }
    SUBCASE("no reviews") {
        const CapabilityReport r = aggregate({record("x", 0.5, 0.5, NliLabel::Entailment, NliLabel::Entailment)}, {});
        CHECK_FALSE(r.expert);
        CHECK(r.capability == doctest::Approx((0.625 + 1.0) / 2.0));
    }
    CHECK_THROWS_AS(aggregate({}, {}), InvalidArgument);
}

TEST_CASE("aggregate is permutation invariant") {
    auto records = table_records();
    auto reviews = table_reviews();
    std::mt19937 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& r : records) {
        r.ts_context = u(rng);
        r.bert.precision = u(rng);
    }
    const std::string base = report_to_json(aggregate(records, reviews));
    for (int k = 0; k < 10; ++k) {
        std::shuffle(records.begin(), records.end(), rng);
        std::shuffle(reviews.begin(), reviews.end(), rng);
        CHECK(report_to_json(aggregate(records, reviews)) == base);
    }
}

TEST_CASE("expert review ingest") {
    const ReviewIngest in = parse_expert_reviews(
        "case_id,symptom,reasoning,reviewer\n"
        "case-7, 4, 5, dr-a\n"
        "# comment\n"
        "\n"
        "case-8;3;2;dr-b\n"
        "case-9\t1\t1\tdr-c\n"
        "case-10, 6, 4, dr-a\n"
        "case-11, 4, x, dr-a\n"
        "case-12, 4, 4\n"
        "case-13, 0, 4, dr-a\n"
        ", 4, 4, dr-a\n"
        "case-14, 4.5, 4, dr-a\n");
    REQUIRE(in.reviews.size() == 3);
    CHECK(in.reviews[0].case_id == "case-7");
    CHECK(in.reviews[0].symptom_image_score == 4);
    CHECK(in.reviews[0].diagnostic_reasoning_score == 5);
    CHECK(in.reviews[0].reviewer == "dr-a");
    CHECK(in.reviews[1].case_id == "case-8");
    CHECK(in.reviews[2].diagnostic_reasoning_score == 1);
    REQUIRE(in.errors.size() == 6);
    CHECK(in.errors[0].line == 7);
    CHECK(in.errors[0].message.find("outside 1..5") != std::string::npos);
    CHECK(in.errors[2].message.find("4 fields") != std::string::npos);

    // Reference means normalize to the table entries.
    CHECK(std::round(4.38 / 5 * 1000) / 1000 == 0.876);
    CHECK(std::fabs(320.0 / 73 / 5 - 0.877) < 0.0005);
    CHECK(std::fabs(315.0 / 73 / 5 - 0.863) < 0.0005);
}

TEST_CASE("case documents") {
    const EvalCase c = parse_eval_case(R"({"id":"k1","premise":"The lesion is a melanoma.","hypothesis":"Likely melanoma.",
                                          "premise_entity":"Melanoma","hypothesis_entity":"Melanoma","image":"k1.png"})");
    CHECK(c.id == "k1");
    CHECK(c.image == "k1.png");
    CHECK_FALSE(c.entity_extraction_failed);

    nlohmann::json doc{{"id", "darier"}, {"premise", fixture("premise_darier.txt")}, {"hypothesis", fixture("hypothesis_darier.txt")}};
    const EvalCase d = parse_eval_case(doc.dump());
    CHECK(d.premise_entity == "Darier Disease");
    CHECK(d.hypothesis_entity == "Darier Disease (Keratosis Follicularis)");
    CHECK_FALSE(d.entity_extraction_failed);

    const EvalCase none = parse_eval_case(R"({"id":"n","premise":"Something odd.","hypothesis":"Hard to say."})");
    CHECK(none.entity_extraction_failed);
    CHECK_THROWS_AS(parse_eval_case(R"({"id":"n","premise":" ","hypothesis":"x"})"), InvalidArgument);
    CHECK_THROWS_AS(parse_eval_case(R"({"premise":"a","hypothesis":"x"})"), InvalidArgument);
    CHECK_THROWS_AS(parse_eval_case("[1]"), InvalidArgument);
    CHECK_THROWS_AS(parse_eval_case("{"), InvalidArgument);

    MockProviders mock;
    mock.record_sentence_embedding({"Something odd."}, {Vector{1, 0}});
    mock.record_sentence_embedding({"Hard to say."}, {Vector{1, 1}});
    mock.record_token_embedding({"Something odd."}, {{{"something", {1, 0}}, {"odd", {0, 1}}}});
    mock.record_token_embedding({"Hard to say."}, {{{"hard", {1, 0}}}});
    mock.record_nli("Something odd.", "Hard to say.", {0.1, 0.8, 0.1});
    const ScoreRecord r = score_case(none, mock.provider_set());
    CHECK_FALSE(r.ts_entity);
    CHECK_FALSE(r.nli_entity);
    REQUIRE(r.flags.size() == 1);
    CHECK(r.flags[0].find("extraction failed") != std::string::npos);
    const CapabilityReport rep = aggregate({r, record("other", 0.5, 0.5, NliLabel::Entailment, NliLabel::Entailment)}, {});
    CHECK(rep.entity_case_count == 1);
    CHECK(rep.nli_entailment.row.entity == 1.0);
}

TEST_CASE("corpus loading reports bad documents individually") {
    const auto dir = std::filesystem::temp_directory_path() / ("dermflow_corpus_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "a.json") << R"({"id":"a","premise":"p","hypothesis":"h","premise_entity":"Melanoma","hypothesis_entity":"Nevus"})";
    std::ofstream(dir / "b.json") << R"({"id":"b","premise":"","hypothesis":"h"})";
    std::ofstream(dir / "c.json") << "not json";
    std::ofstream(dir / "d.json") << R"({"id":"a","premise":"p","hypothesis":"h"})";
    std::ofstream(dir / "notes.txt") << "ignored";
    const Corpus c = load_corpus(dir);
    CHECK(c.cases.size() == 1);
    REQUIRE(c.errors.size() == 3);
    CHECK(c.errors[0].document == "b.json");
    CHECK(c.errors[2].message.find("duplicate") != std::string::npos);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(load_corpus(dir), InvalidArgument);
}

TEST_CASE("fixture corpus end to end") {
    const Corpus corpus = load_corpus(kCorpus);
    REQUIRE(corpus.errors.empty());
    REQUIRE(corpus.cases.size() == 73);
    const ReviewIngest reviews = ingest_expert_reviews(kCorpus / "reviews.csv");
    REQUIRE(reviews.errors.empty());
    REQUIRE(reviews.reviews.size() == 73);
    const MockProviders mock = MockProviders::load(kCorpus / "providers");

    std::size_t progress_calls = 0;
    RunOptions options;
    options.workers = 4;
    options.progress = [&](std::size_t done, std::size_t total, const ScoreRecord&) {
        ++progress_calls;
        CHECK(done <= total);
    };
    const auto start = std::chrono::steady_clock::now();
    const CapabilityReport r = run_evaluation(corpus.cases, reviews.reviews, mock.provider_set(), options);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    MESSAGE("scored 73 cases in " << seconds << " s");
    CHECK(progress_calls == 73);

    CHECK(r.nli_entailment.context_count == 63);
    CHECK(r.nli_neutral.context_count == 7);
    CHECK(r.nli_contradiction.context_count == 3);
    CHECK(r.nli_entailment.entity_count == 30);
    CHECK(r.nli_neutral.entity_count == 22);
    CHECK(r.nli_contradiction.entity_count == 21);
    CHECK(std::fabs(r.textual_similarity.context - 0.70) < 1e-9);
    CHECK(std::fabs(r.textual_similarity.entity - 0.69) < 1e-9);
    CHECK(std::fabs(r.textual_similarity.value - 0.87) <= 0.005);
    CHECK(std::fabs(r.nli_entailment.row.value - 0.85) <= 0.01);
    CHECK(std::fabs(r.expert->mean - 0.87) <= 0.005);
    CHECK(std::fabs(r.capability - 0.86) <= 0.01);
    CHECK(std::fabs(r.bert.precision - 0.63) <= 0.02);
    CHECK(std::fabs(r.bert.recall - 0.67) <= 0.02);
    CHECK(std::fabs(r.bert.f1 - 0.65) <= 0.02);

    const ScoreRecord& first = r.records.at(0);
    CHECK(first.case_id == "case-001");
    CHECK(first.ts_context == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(first.nli_context.label == NliLabel::Entailment);
    CHECK(first.nli_context.probability == 0.675);
    const ScoreRecord& second = r.records.at(1);
    CHECK(second.ts_context == doctest::Approx(0.89).epsilon(1e-12));
    CHECK(second.nli_entity->label == NliLabel::Entailment);
    CHECK(second.nli_entity->probability == 0.83);

    // Same result with a single worker.
    options.workers = 1;
    options.progress = nullptr;
    CHECK(report_to_json(run_evaluation(corpus.cases, reviews.reviews, mock.provider_set(), options)) == report_to_json(r));

    const std::string table = render_table(r);
    MESSAGE(table);
    for (const char* row : {"Textual Similarity", "NLI_N", "NLI_C", "NLI_E", "Expert Review", "Capability", "BERT Score"}) {
        CHECK(table.find(row) != std::string::npos);
    }
    CHECK(table.find("(63) 0.863") != std::string::npos);
    CHECK(table.find("(4.38) 0.877") != std::string::npos);
    const auto j = nlohmann::json::parse(report_to_json(r));
    CHECK(j["records"].size() == 73);
    CHECK(j["plots"]["distributions"]["f1"]["counts"].size() == 10);
    CHECK(j["rows"]["nli_entailment"]["context_count"] == 63);
}

TEST_CASE("scoring failure aborts the run") {
    const Corpus corpus = load_corpus(kCorpus);
    MockProviders empty;
    CHECK_THROWS_AS(run_evaluation(corpus.cases, {}, empty.provider_set()), ProviderError);
    CHECK_THROWS_AS(run_evaluation({}, {}, empty.provider_set()), InvalidArgument);
}
