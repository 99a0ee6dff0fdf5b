#pragma once

#include "dermflow/prompts.hpp"
#include "dermflow/providers.hpp"

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dermflow::evaluation {

using providers::TokenVector;
using providers::Vector;

struct EvalCase {
    std::string id;
    std::string question;
    std::string premise;
    std::string premise_entity;
    std::string hypothesis;
    std::string hypothesis_entity;
    std::optional<std::string> image;
    /// Set when an entity was missing from the document and could not be extracted.
    bool entity_extraction_failed = false;
};

enum class NliLabel { Contradiction, Neutral, Entailment };

std::string_view to_string(NliLabel label) noexcept;

struct NliResult {
    NliLabel label = NliLabel::Neutral;
    double probability = 0.0;
    providers::NliScores scores;
};

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct ScoreRecord {
    std::string case_id;
    double ts_context = 0.0;
    std::optional<double> ts_entity;  // empty when the case has no entities
    BertScore bert;
    NliResult nli_context;
    std::optional<NliResult> nli_entity;
    std::vector<std::string> flags;
};

struct ExpertReview {
    std::string case_id;
    int symptom_image_score = 0;
    int diagnostic_reasoning_score = 0;
    std::string reviewer;
};

struct RowError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct ReviewIngest {
    std::vector<ExpertReview> reviews;
    std::vector<RowError> errors;
};

struct Weights {
    double context = 1.5;
    double entities = 1.0;

    /// Throws InvalidArgument unless both weights are positive and finite.
    void validate() const;
};

/// A weighted row. `value` is clamped to [0, 1] for reporting; `raw` is unclamped.
struct WeightedRow {
    double context = 0.0;
    double entity = 0.0;
    double raw = 0.0;
    double value = 0.0;
};

struct NliRow {
    std::size_t context_count = 0;
    std::size_t entity_count = 0;
    WeightedRow row;
};

struct ExpertRow {
    double symptom_mean = 0.0;    // Likert mean, 1..5
    double reasoning_mean = 0.0;  // Likert mean, 1..5
    double symptom_normalized = 0.0;
    double reasoning_normalized = 0.0;
    double mean = 0.0;  // unweighted mean of the two normalized items
    std::size_t review_count = 0;
};

struct CapabilityReport {
    Weights weights;
    std::size_t case_count = 0;
    std::size_t entity_case_count = 0;
    WeightedRow textual_similarity;
    NliRow nli_contradiction;
    NliRow nli_neutral;
    NliRow nli_entailment;
    BertScore bert;  // means; reported, not part of capability
    std::optional<ExpertRow> expert;
    double capability_raw = 0.0;
    double capability = 0.0;  // clamped to [0, 1]
    std::vector<ScoreRecord> records;
};

/// A.B / (|A| |B|). Throws InvalidArgument on dimension mismatch, empty or zero vectors.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Sentence-embed each text with its own call, then cosine.
double textual_similarity(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& providers);

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
/// Throws InvalidArgument on an empty token list.
BertScore bert_score(const std::vector<TokenVector>& premise, const std::vector<TokenVector>& hypothesis);

/// Token-embed each text with its own call, then bert_score.
BertScore bert_score_texts(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& providers);

/// Label is the argmax; exact ties resolve Neutral, then Contradiction, then Entailment.
NliResult nli_label(const providers::NliScores& scores);

NliResult nli_assess(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& providers);

/// (w_context * context + w_entities * entity) / 2, not clamped.
double weighted_row(double context, double entity, const Weights& weights);

struct ScoringOptions {
    /// Entity-track NLI text; "{entity}" is replaced by the entity.
    std::string entity_template = "{entity}";
};

/// Score one case with textual similarity, BERTScore and NLI on both tracks.
ScoreRecord score_case(const EvalCase& c, const providers::ProviderSet& providers, const ScoringOptions& options = {});

/// Fold records and reviews into the capability report. Throws InvalidArgument on no records.
CapabilityReport aggregate(std::vector<ScoreRecord> records, const std::vector<ExpertReview>& reviews, const Weights& weights = {});

/// Delimited rows "case id, symptom score, reasoning score, reviewer". Comma, semicolon or
/// tab separated; a header row and '#' comments are skipped. Bad rows become errors.
ReviewIngest parse_expert_reviews(std::string_view text);
ReviewIngest ingest_expert_reviews(const std::filesystem::path& path);

struct CorpusError {
    std::string document;
    std::string message;
};

struct Corpus {
    std::vector<EvalCase> cases;  // sorted by id
    std::vector<CorpusError> errors;
};

/// One JSON document per case. Missing entities are extracted from the texts with `lexicon`.
EvalCase parse_eval_case(std::string_view json_text, const prompts::Lexicon& lexicon = prompts::Lexicon::builtin());
/// Every *.json in `dir/cases` (or `dir` itself when it has no cases/ subdirectory).
Corpus load_corpus(const std::filesystem::path& dir, const prompts::Lexicon& lexicon = prompts::Lexicon::builtin());

struct RunOptions {
    Weights weights;
    ScoringOptions scoring;
    int workers = 4;
    /// Called once per finished case, from worker threads, serialized.
    std::function<void(std::size_t done, std::size_t total, const ScoreRecord& record)> progress;
};

/// Score all cases on a bounded worker pool and aggregate. The first scoring failure is rethrown.
CapabilityReport run_evaluation(const std::vector<EvalCase>& cases, const std::vector<ExpertReview>& reviews,
                                const providers::ProviderSet& providers, const RunOptions& options = {});

/// Plain-text capability table: track rows by context, entities and weighted average.
std::string render_table(const CapabilityReport& report);

/// Structured report: rows, per-case records and histogram data for the score plots.
std::string report_to_json(const CapabilityReport& report);

}  // namespace dermflow::evaluation
