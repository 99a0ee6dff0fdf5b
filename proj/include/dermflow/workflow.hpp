#pragma once

#include "dermflow/features.hpp"
#include "dermflow/imaging.hpp"
#include "dermflow/prompts.hpp"
#include "dermflow/providers.hpp"
#include "dermflow/segmentation.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dermflow::workflow {

enum class StateKind { Created, InitialAnalyzed, LesionMeasured, XaiComplete, ConditionFollowedUp, Ended, Failed };

std::string_view to_string(StateKind state) noexcept;
StateKind state_from_string(std::string_view name);
bool is_terminal(StateKind state) noexcept;
/// Created -> InitialAnalyzed -> {LesionMeasured -> XaiComplete, ConditionFollowedUp, Ended};
/// any non-terminal state -> Failed.
bool transition_allowed(StateKind from, StateKind to) noexcept;

struct Transition {
    StateKind from;
    StateKind to;
    std::string note;
    std::string at;  // UTC, ISO 8601
};

struct Send2LabDecision {
    bool required = false;
    std::string rationale;
    bool from_referral_line = false;  // true when the LAB_REFERRAL line was found
};

/// Reads "LAB_REFERRAL: yes|no - rationale"; without it, looks for a sentence that calls
/// for a biopsy or laboratory test and is not negated.
Send2LabDecision parse_send2lab(std::string_view xai_report);

struct Artifacts {
    std::optional<prompts::ParsedAssessment> initial_assessment;
    std::optional<prompts::PathDecision> path;
    std::optional<features::TechnicalReport> technical_report;
    std::optional<std::string> xai_prompt;
    std::optional<std::string> xai_report;
    std::optional<Send2LabDecision> send2lab;
    std::optional<prompts::ParsedAssessment> followup_assessment;
    std::map<std::string, int> retries;  // stage -> retries used by its provider call
};

class Case {
public:
    /// New case holding the image encoded as PNG.
    static Case from_image(const imaging::RasterImage& image);
    /// New case from encoded PNG/JPEG bytes; throws UnsupportedFormat when they do not decode.
    static Case from_bytes(std::vector<std::uint8_t> bytes);
    /// Rebuild a stored case. The audit trail must replay legally from Created.
    static Case restore(std::string id, std::string created_at, std::vector<std::uint8_t> bytes, std::vector<Transition> audit,
                        std::string failure_reason, Artifacts artifacts);

    const std::string& id() const noexcept { return id_; }
    const std::string& created_at() const noexcept { return created_at_; }
    const imaging::RasterImage& image() const noexcept { return image_; }
    const std::vector<std::uint8_t>& image_bytes() const noexcept { return bytes_; }
    StateKind state() const noexcept { return state_; }
    const std::string& failure_reason() const noexcept { return failure_reason_; }
    const std::vector<Transition>& audit() const noexcept { return audit_; }
    const Artifacts& artifacts() const noexcept { return artifacts_; }
    Artifacts& artifacts() noexcept { return artifacts_; }

    /// Append a transition; throws IllegalTransition when not allowed.
    void advance(StateKind to, std::string note = {});
    /// Move to Failed with a reason (no-op check: terminal states cannot fail again).
    void fail(std::string reason);

private:
    Case(std::string id, std::string created_at, std::vector<std::uint8_t> bytes, imaging::RasterImage image);

    std::string id_;
    std::string created_at_;
    std::vector<std::uint8_t> bytes_;
    imaging::RasterImage image_;
    StateKind state_ = StateKind::Created;
    std::string failure_reason_;
    std::vector<Transition> audit_;
    Artifacts artifacts_;
};

struct InitialResult {
    prompts::ParsedAssessment assessment;
    prompts::PathDecision decision;
};

struct LesionPathResult {
    features::TechnicalReport report;
    std::string xai_report;
    Send2LabDecision send2lab;
};

// Each stage checks its precondition (IllegalTransition when violated). A stage that fails
// moves the case to Failed and throws WorkflowFailed carrying the recorded reason.

InitialResult run_initial_analysis(Case& c, const providers::ProviderSet& providers);
LesionPathResult run_lesion_path(Case& c, const providers::ProviderSet& providers, const segmentation::GrabCutParams& params = {});
prompts::ParsedAssessment run_condition_followup(Case& c, const providers::ProviderSet& providers);

/// Runs the whole workflow to a terminal state. Failures are recorded on the case, not thrown.
Case& run_full(Case& c, const providers::ProviderSet& providers, const segmentation::GrabCutParams& params = {});

/// Artifacts as canonical JSON, without ids or timestamps, so replays compare byte for byte.
std::string artifact_bundle(const Case& c);

/// Full case record as JSON (id, timestamps, state, audit, artifacts and, optionally, the base64 image).
std::string case_to_json(const Case& c, bool include_image = true);
Case case_from_json(std::string_view text);

}  // namespace dermflow::workflow
