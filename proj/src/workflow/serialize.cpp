#include "dermflow/workflow.hpp"

#include <json.hpp>

namespace dermflow::workflow {

using nlohmann::json;

namespace {

std::string_view status_name(prompts::AbcdeStatus s) {
    switch (s) {
        case prompts::AbcdeStatus::Missing:
            return "missing";
        case prompts::AbcdeStatus::NotApplicable:
            return "not_applicable";
        case prompts::AbcdeStatus::Populated:
            return "populated";
    }
    return "missing";
}

prompts::AbcdeStatus status_from(const std::string& s) {
    if (s == "populated") {
        return prompts::AbcdeStatus::Populated;
    }
    if (s == "not_applicable") {
        return prompts::AbcdeStatus::NotApplicable;
    }
    if (s == "missing") {
        return prompts::AbcdeStatus::Missing;
    }
    throw InvalidArgument("unknown ABCDE status '" + s + "'");
}

prompts::Path path_from(const std::string& s) {
    for (auto p : {prompts::Path::Lesion, prompts::Path::Condition, prompts::Path::End}) {
        if (prompts::to_string(p) == s) {
            return p;
        }
    }
    throw InvalidArgument("unknown path '" + s + "'");
}

json to_json(const prompts::ParsedAssessment& a) {
    json j{
        {"visual_description", a.visual_description},
        {"feature_presence", a.feature_presence},
        {"feature_localization", a.feature_localization},
        {"abcde",
         {{"status", status_name(a.abcde.status)},
          {"asymmetry", a.abcde.asymmetry},
          {"border", a.abcde.border},
          {"color", a.abcde.color},
          {"diameter", a.abcde.diameter},
          {"evolution", a.abcde.evolution},
          {"text", a.abcde.text}}},
        {"diagnoses", a.diagnoses},
        {"final_diagnosis", a.final_diagnosis ? json(*a.final_diagnosis) : json(nullptr)},
        {"clinical_features", a.clinical_features},
        {"issues", a.issues},
        {"compliant", a.compliant()},
        {"raw", a.raw},
    };
    return j;
}

prompts::ParsedAssessment assessment_from(const json& j) {
    prompts::ParsedAssessment a;
    a.visual_description = j.at("visual_description").get<std::string>();
    a.feature_presence = j.at("feature_presence").get<std::vector<std::string>>();
    a.feature_localization = j.at("feature_localization").get<std::string>();
    const json& b = j.at("abcde");
    a.abcde.status = status_from(b.at("status").get<std::string>());
    a.abcde.asymmetry = b.at("asymmetry").get<std::string>();
    a.abcde.border = b.at("border").get<std::string>();
    a.abcde.color = b.at("color").get<std::string>();
    a.abcde.diameter = b.at("diameter").get<std::string>();
    a.abcde.evolution = b.at("evolution").get<std::string>();
    a.abcde.text = b.at("text").get<std::string>();
    a.diagnoses = j.at("diagnoses").get<std::vector<std::string>>();
    if (!j.at("final_diagnosis").is_null()) {
        a.final_diagnosis = j.at("final_diagnosis").get<std::string>();
    }
    a.clinical_features = j.at("clinical_features").get<std::string>();
    a.issues = j.at("issues").get<std::vector<std::string>>();
    a.raw = j.at("raw").get<std::string>();
    return a;
}

json to_json(const features::LesionFeatures& f) {
    return json{
        {"area", f.area},
        {"perimeter", f.perimeter},
        {"circularity", f.circularity},
        {"asymmetry_major", f.asymmetry_major},
        {"asymmetry_minor", f.asymmetry_minor},
        {"asymmetry_avg", f.asymmetry_avg},
        {"color_std", {{"r", f.color_std.r}, {"g", f.color_std.g}, {"b", f.color_std.b}}},
    };
}

features::LesionFeatures features_from(const json& j) {
    features::LesionFeatures f;
    f.area = j.at("area").get<double>();
    f.perimeter = j.at("perimeter").get<double>();
    f.circularity = j.at("circularity").get<double>();
    f.asymmetry_major = j.at("asymmetry_major").get<double>();
    f.asymmetry_minor = j.at("asymmetry_minor").get<double>();
    f.asymmetry_avg = j.at("asymmetry_avg").get<double>();
    const json& c = j.at("color_std");
    f.color_std = {c.at("r").get<double>(), c.at("g").get<double>(), c.at("b").get<double>()};
    return f;
}

json to_json(const features::TechnicalReport& r) {
    json plots = json::array();
    for (const auto& p : r.plots) {
        plots.push_back({{"name", p.name}, {"png", providers::base64_encode(p.png)}});
    }
    return json{{"text", r.text}, {"features", to_json(r.features)}, {"plots", plots}};
}

features::TechnicalReport report_from(const json& j) {
    features::TechnicalReport r;
    r.text = j.at("text").get<std::string>();
    r.features = features_from(j.at("features"));
    for (const json& p : j.at("plots")) {
        r.plots.push_back({p.at("name").get<std::string>(), providers::base64_decode(p.at("png").get<std::string>())});
    }
    return r;
}

json artifacts_json(const Artifacts& a) {
    json j = json::object();
    if (a.initial_assessment) {
        j["initial_assessment"] = to_json(*a.initial_assessment);
    }
    if (a.path) {
        j["path"] = {{"path", prompts::to_string(a.path->path)}, {"reason", a.path->reason}};
    }
    if (a.technical_report) {
        j["technical_report"] = to_json(*a.technical_report);
    }
    if (a.xai_prompt) {
        j["xai_prompt"] = *a.xai_prompt;
    }
    if (a.xai_report) {
        j["xai_report"] = *a.xai_report;
    }
    if (a.send2lab) {
        j["send2lab"] = {{"required", a.send2lab->required},
                         {"rationale", a.send2lab->rationale},
                         {"from_referral_line", a.send2lab->from_referral_line}};
    }
    if (a.followup_assessment) {
        j["followup_assessment"] = to_json(*a.followup_assessment);
    }
    j["retries"] = a.retries;
    return j;
}

Artifacts artifacts_from(const json& j) {
    Artifacts a;
    if (j.contains("initial_assessment")) {
        a.initial_assessment = assessment_from(j.at("initial_assessment"));
    }
    if (j.contains("path")) {
        a.path = prompts::PathDecision{path_from(j.at("path").at("path").get<std::string>()), j.at("path").at("reason").get<std::string>()};
    }
    if (j.contains("technical_report")) {
        a.technical_report = report_from(j.at("technical_report"));
    }
    if (j.contains("xai_prompt")) {
        a.xai_prompt = j.at("xai_prompt").get<std::string>();
    }
    if (j.contains("xai_report")) {
        a.xai_report = j.at("xai_report").get<std::string>();
    }
    if (j.contains("send2lab")) {
        const json& s = j.at("send2lab");
        a.send2lab = Send2LabDecision{s.at("required").get<bool>(), s.at("rationale").get<std::string>(),
                                      s.at("from_referral_line").get<bool>()};
    }
    if (j.contains("followup_assessment")) {
        a.followup_assessment = assessment_from(j.at("followup_assessment"));
    }
    if (j.contains("retries")) {
        a.retries = j.at("retries").get<std::map<std::string, int>>();
    }
    return a;
}

}  // namespace

std::string artifact_bundle(const Case& c) {
    json j = artifacts_json(c.artifacts());
    j["state"] = to_string(c.state());
    j["failure_reason"] = c.failure_reason();
    json states = json::array();
    for (const Transition& t : c.audit()) {
        states.push_back({{"from", to_string(t.from)}, {"to", to_string(t.to)}, {"note", t.note}});
    }
    j["transitions"] = states;
    return j.dump();
}

std::string case_to_json(const Case& c, bool include_image) {
    json audit = json::array();
    for (const Transition& t : c.audit()) {
        audit.push_back({{"from", to_string(t.from)}, {"to", to_string(t.to)}, {"note", t.note}, {"at", t.at}});
    }
    json j{
        {"id", c.id()},
        {"created_at", c.created_at()},
        {"state", to_string(c.state())},
        {"failure_reason", c.failure_reason()},
        {"audit", audit},
        {"artifacts", artifacts_json(c.artifacts())},
        {"image", {{"width", c.image().width()}, {"height", c.image().height()}}},
    };
    if (include_image) {
        j["image"]["data"] = providers::base64_encode(c.image_bytes());
    }
    return j.dump();
}

Case case_from_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        std::vector<Transition> audit;
        for (const json& t : j.at("audit")) {
            audit.push_back({state_from_string(t.at("from").get<std::string>()), state_from_string(t.at("to").get<std::string>()),
                             t.at("note").get<std::string>(), t.at("at").get<std::string>()});
        }
        const json& image = j.at("image");
        if (!image.contains("data")) {
            throw InvalidArgument("case record has no image data");
        }
        return Case::restore(j.at("id").get<std::string>(), j.at("created_at").get<std::string>(),
                             providers::base64_decode(image.at("data").get<std::string>()), std::move(audit),
                             j.at("failure_reason").get<std::string>(), artifacts_from(j.at("artifacts")));
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed case record: ") + e.what());
    }
}

}  // namespace dermflow::workflow
