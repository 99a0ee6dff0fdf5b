#include "dermflow/error.hpp"
#include "dermflow/prompts.hpp"
#include "resources.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace dermflow::prompts {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string fold(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = !out.empty();
            continue;
        }
        if (space) {
            out += ' ';
            space = false;
        }
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

void replace_all(std::string& s, std::string_view key, std::string_view value) {
    for (std::size_t at = s.find(key); at != std::string::npos; at = s.find(key, at + value.size())) {
        s.replace(at, key.size(), value);
    }
}

std::vector<Section> parse_template(std::string_view text) {
    std::vector<Section> sections;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string body;
    auto flush = [&] {
        if (!sections.empty()) {
            sections.back().instruction = trim(body);
        }
        body.clear();
    };
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.size() > 6 && t.starts_with("== ") && t.ends_with(" ==")) {
            flush();
            sections.push_back({t.substr(3, t.size() - 6), {}});
        } else {
            body += line;
            body += '\n';
        }
    }
    flush();
    return sections;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += sep;
        }
        out += items[i];
    }
    return out;
}

}  // namespace

const std::vector<std::string>& lesion_labels() {
    static const std::vector<std::string> labels = {
        "nevus",
        "melanoma",
        "basal cell carcinoma",
        "actinic keratosis",
        "benign keratosis",
        "dermatofibroma",
        "vascular lesion",
        "squamous cell carcinoma",
        "Lentigo Maligna",
        "Blue Nevus",
        "Sebaceous Hyperplasia",
        "Keratoacanthoma",
        "Atypical (Dysplastic) Nevus",
        "Solar Lentigo",
        "Pigmented Basal Cell Carcinoma",
        "Cutaneous Horn",
        "Molluscum Contagiosum",
        "Cyst",
        "Lichen Planus",
        "Psoriasis",
    };
    return labels;
}

bool in_lesion_list(std::string_view name) {
    const std::string key = fold(name);
    return std::any_of(lesion_labels().begin(), lesion_labels().end(), [&](const std::string& l) { return fold(l) == key; });
}

RulesOfConduct lesion_rules() {
    RulesOfConduct rules;
    rules.kind = RulesKind::Lesion;
    rules.sections = parse_template(resources::lesion_prompt);
    rules.allowed_diagnoses = lesion_labels();
    const std::string labels = join(lesion_labels(), ", ");
    for (Section& s : rules.sections) {
        replace_all(s.instruction, "{labels}", labels);
    }
    rules.response_headings = {"Visual Description", "Feature Presence", "Feature Localization", "ABCDE Approximation",
                               "Diagnosis Selection"};
    return rules;
}

RulesOfConduct condition_rules() {
    RulesOfConduct rules;
    rules.kind = RulesKind::Condition;
    rules.sections = parse_template(resources::condition_prompt);
    rules.response_headings = {"Differential Diagnosis", "Final Diagnosis", "Clinical Features Supporting Diagnosis"};
    return rules;
}

std::string response_format_doc(const RulesOfConduct& rules) {
    std::string out = "Response format:\nAnswer under these headings, in this order, each written on its own line and followed by a colon:\n";
    for (std::size_t i = 0; i < rules.response_headings.size(); ++i) {
        out += std::to_string(i + 1) + ". " + rules.response_headings[i] + '\n';
    }
    return out;
}

std::string render_prompt(const RulesOfConduct& rules) {
    std::string out;
    for (const Section& s : rules.sections) {
        out += s.heading + ":\n" + s.instruction + "\n\n";
    }
    if (!rules.response_headings.empty()) {
        out += response_format_doc(rules);
    }
    return out;
}

std::string build_lesion_prompt() {
    return render_prompt(lesion_rules());
}

std::string build_condition_prompt() {
    return render_prompt(condition_rules());
}

std::string build_xai_prompt(const ParsedAssessment& initial, const std::optional<features::TechnicalReport>& report) {
    if (!report) {
        throw InvalidArgument("the explainable review needs a technical report");
    }
    RulesOfConduct rules;
    rules.kind = RulesKind::Xai;
    rules.sections = parse_template(resources::xai_prompt);

    std::string candidates;
    if (initial.diagnoses.empty()) {
        candidates = "No candidate diagnoses were proposed. Build a differential of up to three diagnoses from the image findings and the measurements.";
    } else {
        for (std::size_t i = 0; i < initial.diagnoses.size(); ++i) {
            candidates += std::to_string(i + 1) + ". " + initial.diagnoses[i] + (i + 1 < initial.diagnoses.size() ? "\n" : "");
        }
    }
    const std::string assessment = trim(initial.raw).empty() ? "(no initial assessment text)" : trim(initial.raw);
    for (Section& s : rules.sections) {
        // Placeholders fill whole sections, so inserted text is never rescanned.
        if (s.instruction == "{initial}") {
            s.instruction = assessment;
        } else if (s.instruction == "{candidates}") {
            s.instruction = candidates;
        } else if (s.instruction == "{report}") {
            s.instruction = trim(report->text);
        }
    }
    return render_prompt(rules);
}

}  // namespace dermflow::prompts
