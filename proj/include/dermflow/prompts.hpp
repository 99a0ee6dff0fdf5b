#pragma once

#include "dermflow/features.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dermflow::prompts {

enum class RulesKind { Lesion, Condition, Xai };

struct Section {
    std::string heading;
    std::string instruction;
};

struct RulesOfConduct {
    RulesKind kind = RulesKind::Lesion;
    std::vector<Section> sections;
    std::optional<std::vector<std::string>> allowed_diagnoses;
    /// Headings the model is asked to answer under, in order.
    std::vector<std::string> response_headings;
};

/// The closed list of lesion labels offered to the model, in prompt order.
const std::vector<std::string>& lesion_labels();

/// Case- and whitespace-insensitive membership in lesion_labels().
bool in_lesion_list(std::string_view name);

RulesOfConduct lesion_rules();
RulesOfConduct condition_rules();

/// Sections joined as "Heading:\ninstruction" blocks followed by the response-format block.
std::string render_prompt(const RulesOfConduct& rules);

/// Block telling the model which headings to use, generated from response_headings.
std::string response_format_doc(const RulesOfConduct& rules);

std::string build_lesion_prompt();
std::string build_condition_prompt();

enum class AbcdeStatus { Missing, NotApplicable, Populated };

struct Abcde {
    AbcdeStatus status = AbcdeStatus::Missing;
    std::string asymmetry;
    std::string border;
    std::string color;
    std::string diameter;
    std::string evolution;
    std::string text;  // whole section body
};

struct ParsedAssessment {
    std::string visual_description;
    std::vector<std::string> feature_presence;
    std::string feature_localization;
    Abcde abcde;
    std::vector<std::string> diagnoses;  // at most 3
    std::optional<std::string> final_diagnosis;
    std::string clinical_features;
    std::vector<std::string> issues;  // compliance problems found while parsing or checking
    std::string raw;

    bool compliant() const noexcept { return issues.empty(); }
};

/// Heading-driven parse, tolerant of numbering, bullets, bold markers and case. Throws
/// InvalidArgument on blank input and UnstructuredResponse when no known heading appears.
ParsedAssessment parse_assessment(std::string_view response);

/// Record an issue for every diagnosis outside the lesion label list.
void check_lesion_compliance(ParsedAssessment& assessment);

/// Prompt for the explainable-review step. Throws InvalidArgument without a technical report.
std::string build_xai_prompt(const ParsedAssessment& initial, const std::optional<features::TechnicalReport>& report);

enum class Path { Lesion, Condition, End };

struct PathDecision {
    Path path = Path::End;
    std::string reason;
};

std::string_view to_string(Path path) noexcept;

PathDecision classify_path(const ParsedAssessment& assessment);

/// True when the text states "skin condition/disorder/disease/infection" without a
/// negation among the three preceding words.
bool asserts_skin_condition(std::string_view text);

class Lexicon {
public:
    /// Lesion labels plus the bundled condition list.
    static const Lexicon& builtin();
    /// Lesion labels plus one entry per non-blank, non-'#' line of `text`.
    static Lexicon from_text(std::string_view text);
    static Lexicon load(const std::filesystem::path& path);

    const std::vector<std::string>& entries() const noexcept { return entries_; }

private:
    std::vector<std::string> entries_;  // longest first
};

/// Diagnosis names from the structured diagnosis section when present, otherwise by
/// longest dictionary match. premise_mode keeps only the first sentence with a match.
std::vector<std::string> extract_entities(std::string_view text, bool premise_mode,
                                          const Lexicon& lexicon = Lexicon::builtin());

}  // namespace dermflow::prompts
