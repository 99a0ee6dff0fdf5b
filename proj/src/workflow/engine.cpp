#include "dermflow/workflow.hpp"

namespace dermflow::workflow {

namespace {

[[noreturn]] void fail(Case& c, const std::string& reason) {
    c.fail(reason);
    throw WorkflowFailed(reason);
}

void require_state(const Case& c, StateKind expected, const char* stage) {
    if (c.state() != expected) {
        throw IllegalTransition(std::string(stage) + " requires state " + std::string(to_string(expected)) + ", case is " +
                                std::string(to_string(c.state())));
    }
}

template <class Provider>
Provider& require_provider(Case& c, const std::shared_ptr<Provider>& p, const char* what) {
    if (!p) {
        fail(c, std::string("no ") + what + " provider configured");
    }
    return *p;
}

std::string call_stage(Case& c, const providers::RetryPolicy& policy, const std::string& stage, const std::function<std::string()>& call) {
    int retries = 0;
    try {
        std::string out = providers::call_with_retry(policy, call, &retries);
        c.artifacts().retries[stage] = retries;
        return out;
    } catch (const ProviderError& e) {
        c.artifacts().retries[stage] = retries;
        fail(c, stage + " provider call failed after " + std::to_string(retries) + " retries: " + e.what());
    }
}

prompts::ParsedAssessment parse_or_fail(Case& c, const std::string& response, const std::string& stage) {
    try {
        return prompts::parse_assessment(response);
    } catch (const UnstructuredResponse& e) {
        fail(c, "unstructured response at " + stage + ": " + e.what());
    } catch (const InvalidArgument& e) {
        fail(c, "unstructured response at " + stage + ": " + e.what());
    }
}

}  // namespace

InitialResult run_initial_analysis(Case& c, const providers::ProviderSet& ps) {
    require_state(c, StateKind::Created, "initial analysis");
    auto& vision = require_provider(c, ps.vision, "vision");
    const std::string prompt = prompts::build_lesion_prompt();
    const std::string response = call_stage(c, ps.retry, "initial", [&] { return vision.analyze(c.image_bytes(), prompt); });
    prompts::ParsedAssessment assessment = parse_or_fail(c, response, "initial");
    prompts::PathDecision decision = prompts::classify_path(assessment);
    if (decision.path == prompts::Path::Lesion) {
        prompts::check_lesion_compliance(assessment);
    }
    c.artifacts().initial_assessment = assessment;
    c.artifacts().path = decision;
    c.advance(StateKind::InitialAnalyzed, "path " + std::string(prompts::to_string(decision.path)));
    return {std::move(assessment), std::move(decision)};
}

LesionPathResult run_lesion_path(Case& c, const providers::ProviderSet& ps, const segmentation::GrabCutParams& params) {
    require_state(c, StateKind::InitialAnalyzed, "lesion path");
    const auto& path = c.artifacts().path;
    if (!path || path->path != prompts::Path::Lesion) {
        throw IllegalTransition("lesion path requires a Lesion path decision");
    }
    auto& text = require_provider(c, ps.text, "text");

    features::LesionAnalysis analysis;
    try {
        analysis = features::analyze_lesion(c.image(), params);
    } catch (const NoLesionError& e) {
        fail(c, std::string("no lesion found: ") + e.what());
    } catch (const DegenerateHistogram& e) {
        fail(c, std::string("no lesion found: ") + e.what());
    } catch (const UninitializedTrimap& e) {
        fail(c, std::string("no lesion found: ") + e.what());
    } catch (const DegenerateMask& e) {
        fail(c, std::string("no lesion found: ") + e.what());
    }
    c.artifacts().technical_report = analysis.report;
    c.advance(StateKind::LesionMeasured, "area " + features::format_number(analysis.report.features.area) + " px");

    const std::string prompt = prompts::build_xai_prompt(*c.artifacts().initial_assessment, analysis.report);
    c.artifacts().xai_prompt = prompt;
    const std::string xai = call_stage(c, ps.retry, "xai", [&] { return text.complete(prompt); });
    Send2LabDecision decision = parse_send2lab(xai);
    c.artifacts().xai_report = xai;
    c.artifacts().send2lab = decision;
    c.advance(StateKind::XaiComplete, decision.required ? "lab referral required" : "no lab referral");
    return {analysis.report, xai, std::move(decision)};
}

prompts::ParsedAssessment run_condition_followup(Case& c, const providers::ProviderSet& ps) {
    require_state(c, StateKind::InitialAnalyzed, "condition follow-up");
    const auto& path = c.artifacts().path;
    if (!path || path->path != prompts::Path::Condition) {
        throw IllegalTransition("condition follow-up requires a Condition path decision");
    }
    auto& vision = require_provider(c, ps.vision, "vision");
    const std::string prompt = prompts::build_condition_prompt();
    const std::string response = call_stage(c, ps.retry, "followup", [&] { return vision.analyze(c.image_bytes(), prompt); });
    prompts::ParsedAssessment assessment = parse_or_fail(c, response, "followup");
    c.artifacts().followup_assessment = assessment;
    c.advance(StateKind::ConditionFollowedUp,
              assessment.final_diagnosis ? "final " + *assessment.final_diagnosis : std::string("no final diagnosis"));
    return assessment;
}

Case& run_full(Case& c, const providers::ProviderSet& ps, const segmentation::GrabCutParams& params) {
    require_state(c, StateKind::Created, "full run");
    try {
        const InitialResult initial = run_initial_analysis(c, ps);
        switch (initial.decision.path) {
            case prompts::Path::Lesion:
                run_lesion_path(c, ps, params);
                break;
            case prompts::Path::Condition:
                run_condition_followup(c, ps);
                break;
            case prompts::Path::End:
                c.advance(StateKind::Ended, initial.decision.reason);
                break;
        }
    } catch (const WorkflowFailed&) {
        // already recorded on the case
    }
    return c;
}

}  // namespace dermflow::workflow
