#include "dermflow/error.hpp"
#include "dermflow/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

namespace dermflow::prompts {

namespace {

enum class Key { Visual, Presence, Localization, Abcde, Diagnosis, Final, Clinical };

struct Block {
    Key key;
    std::string inline_value;
    std::vector<std::string> lines;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string strip_markup(std::string_view line) {
    std::string out;
    out.reserve(line.size());
    for (char c : line) {
        if (c != '*') {
            out += c;
        }
    }
    std::string t = trim(out);
    std::size_t hashes = 0;
    while (hashes < t.size() && t[hashes] == '#') {
        ++hashes;
    }
    t = trim(std::string_view(t).substr(hashes));
    // Trailing line-break markers from LaTeX-ish exports.
    while (t.ends_with("\\\\")) {
        t = trim(std::string_view(t).substr(0, t.size() - 2));
    }
    return t;
}

const std::regex& heading_regex() {
    static const std::regex re(
        R"(^(?:\d+[.)]\s*|[-•]\s+)?(visual description|feature presence|feature locali[sz]ation|abcde(?: approximation| criteria)?|diagnosis selection|answer selection|differential diagnosis|differential|diagnoses|final diagnosis|diagnosis|clinical features(?: supporting(?: the| your)? diagnosis)?)\s*(?:(?::|-|–|—)\s*(.*))?$)",
        std::regex::icase | std::regex::optimize);
    return re;
}

std::optional<Block> match_heading(std::string_view raw_line) {
    const std::string line = strip_markup(raw_line);
    std::smatch m;
    if (!std::regex_match(line, m, heading_regex())) {
        return std::nullopt;
    }
    const std::string name = lower(m[1].str());
    Block b{Key::Visual, trim(m[2].str()), {}};
    if (name == "visual description") {
        b.key = Key::Visual;
    } else if (name == "feature presence") {
        b.key = Key::Presence;
    } else if (name.starts_with("feature local")) {
        b.key = Key::Localization;
    } else if (name.starts_with("abcde")) {
        b.key = Key::Abcde;
    } else if (name == "final diagnosis") {
        b.key = Key::Final;
    } else if (name.starts_with("clinical features")) {
        b.key = Key::Clinical;
    } else {
        b.key = Key::Diagnosis;
    }
    return b;
}

const std::regex& numbered_regex() {
    static const std::regex re(R"(^\s*\d+[.)]\s+(.*)$)");
    return re;
}

const std::regex& bullet_regex() {
    static const std::regex re(R"(^\s*(?:\d+[.)]|[-•])\s+(.*)$)");
    return re;
}

std::vector<std::string> items(const std::vector<std::string>& lines, const std::regex& re) {
    std::vector<std::string> out;
    std::smatch m;
    for (const std::string& l : lines) {
        const std::string s = strip_markup(l);
        if (std::regex_match(s, m, re)) {
            const std::string v = trim(m[1].str());
            if (!v.empty()) {
                out.push_back(v);
            }
        }
    }
    return out;
}

std::string joined(const Block& b) {
    std::string out = b.inline_value;
    for (const std::string& l : b.lines) {
        const std::string t = trim(l);
        if (t.empty()) {
            continue;
        }
        if (!out.empty()) {
            out += '\n';
        }
        out += t;
    }
    return out;
}

/// Diagnosis name from a list item: text before the first explanation separator, no trailing period.
std::string clean_name(std::string_view item) {
    std::string s = strip_markup(item);
    std::size_t cut = s.size();
    for (std::string_view sep : {" — ", " – ", " - ", ": "}) {
        cut = std::min(cut, s.find(sep));
    }
    s = trim(std::string_view(s).substr(0, cut));
    while (!s.empty() && (s.back() == '.' || s.back() == ':' || s.back() == ',')) {
        s.pop_back();
    }
    return trim(s);
}

std::vector<std::string> diagnoses_from(const Block& b) {
    std::vector<std::string> out;
    if (!b.inline_value.empty() && !b.inline_value.ends_with(':')) {
        out.push_back(clean_name(b.inline_value));
        return out;
    }
    std::vector<std::string> found = items(b.lines, numbered_regex());
    if (found.empty()) {
        found = items(b.lines, bullet_regex());
    }
    if (found.empty()) {
        for (const std::string& l : b.lines) {
            if (!trim(l).empty()) {
                found.push_back(l);
                break;
            }
        }
    }
    for (const std::string& f : found) {
        const std::string name = clean_name(f);
        if (!name.empty()) {
            out.push_back(name);
        }
    }
    return out;
}

/// Numbered items that follow a line announcing a differential.
std::vector<std::string> differential_fallback(const std::vector<std::string>& lines) {
    std::vector<std::string> out;
    bool armed = false;
    std::smatch m;
    for (const std::string& raw : lines) {
        const std::string line = strip_markup(raw);
        if (match_heading(raw)) {
            if (!out.empty()) {
                break;
            }
            armed = false;
            continue;
        }
        if (!armed) {
            const std::string l = lower(line);
            armed = l.find("differential") != std::string::npos || l.find("consider") != std::string::npos;
            continue;
        }
        if (std::regex_match(line, m, numbered_regex())) {
            const std::string name = clean_name(m[1].str());
            if (!name.empty()) {
                out.push_back(name);
            }
        }
    }
    return out;
}

bool marks_not_applicable(std::string_view text) {
    static const std::regex re(R"(^\s*(?:n/?a|not applicable|none)\b.*)", std::regex::icase);
    return std::regex_match(std::string(text), re);
}

void fill_abcde(Abcde& abcde, const Block& b) {
    abcde.text = joined(b);
    std::string first = b.inline_value;
    if (first.empty()) {
        for (const std::string& l : b.lines) {
            if (!trim(l).empty()) {
                first = strip_markup(l);
                break;
            }
        }
    }
    if (marks_not_applicable(first)) {
        abcde.status = AbcdeStatus::NotApplicable;
        return;
    }
    if (abcde.text.empty()) {
        abcde.status = AbcdeStatus::Missing;
        return;
    }
    abcde.status = AbcdeStatus::Populated;
    static const std::regex letter(R"(^(?:[-•]\s*|[A-Ea-e][.)]\s*)?(asymmetry|border|colou?r|diameter|evolution|evolving)\s*[:\-–—]\s*(.*)$)",
                                   std::regex::icase);
    std::vector<std::string> lines = b.lines;
    lines.insert(lines.begin(), b.inline_value);
    std::smatch m;
    for (const std::string& raw : lines) {
        const std::string l = strip_markup(raw);
        if (!std::regex_match(l, m, letter)) {
            continue;
        }
        const std::string name = lower(m[1].str());
        const std::string value = trim(m[2].str());
        if (name == "asymmetry") {
            abcde.asymmetry = value;
        } else if (name == "border") {
            abcde.border = value;
        } else if (name.starts_with("colo")) {
            abcde.color = value;
        } else if (name == "diameter") {
            abcde.diameter = value;
        } else {
            abcde.evolution = value;
        }
    }
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

ParsedAssessment parse_assessment(std::string_view response) {
    if (trim(response).empty()) {
        throw InvalidArgument("empty response");
    }
    ParsedAssessment a;
    a.raw = std::string(response);
    const std::vector<std::string> lines = split_lines(response);

    std::vector<std::string> preamble;
    std::vector<Block> blocks;
    for (const std::string& line : lines) {
        if (auto h = match_heading(line)) {
            blocks.push_back(std::move(*h));
        } else if (blocks.empty()) {
            preamble.push_back(line);
        } else {
            blocks.back().lines.push_back(line);
        }
    }
    if (blocks.empty()) {
        throw UnstructuredResponse();
    }

    auto first_of = [&](Key k) -> const Block* {
        for (const Block& b : blocks) {
            if (b.key == k) {
                return &b;
            }
        }
        return nullptr;
    };

    if (const Block* b = first_of(Key::Visual)) {
        a.visual_description = joined(*b);
    } else {
        a.visual_description = joined(Block{Key::Visual, {}, preamble});
    }
    if (const Block* b = first_of(Key::Presence)) {
        a.feature_presence = items(b->lines, bullet_regex());
        if (a.feature_presence.empty()) {
            for (const std::string& l : split_lines(joined(*b))) {
                a.feature_presence.push_back(l);
            }
        }
    }
    if (const Block* b = first_of(Key::Localization)) {
        a.feature_localization = joined(*b);
    }
    if (const Block* b = first_of(Key::Abcde)) {
        fill_abcde(a.abcde, *b);
    }
    if (const Block* b = first_of(Key::Clinical)) {
        a.clinical_features = joined(*b);
    }
    if (const Block* b = first_of(Key::Final)) {
        std::string v = b->inline_value;
        if (v.empty() && !b->lines.empty()) {
            v = joined(Block{Key::Final, {}, b->lines});
            v = v.substr(0, v.find('\n'));
        }
        if (!clean_name(v).empty()) {
            a.final_diagnosis = clean_name(v);
        }
    }

    for (const Block& b : blocks) {
        if (b.key == Key::Diagnosis) {
            a.diagnoses = diagnoses_from(b);
            if (!a.diagnoses.empty()) {
                break;
            }
        }
    }
    if (a.diagnoses.empty()) {
        a.diagnoses = differential_fallback(lines);
    }
    if (a.diagnoses.empty() && a.final_diagnosis) {
        a.diagnoses.push_back(*a.final_diagnosis);
    }
    if (a.diagnoses.size() > 3) {
        a.issues.push_back("response listed " + std::to_string(a.diagnoses.size()) + " diagnoses; kept the first 3");
        a.diagnoses.resize(3);
    }
    return a;
}

void check_lesion_compliance(ParsedAssessment& assessment) {
    for (const std::string& d : assessment.diagnoses) {
        if (!in_lesion_list(d)) {
            assessment.issues.push_back("diagnosis '" + d + "' is not in the lesion label list");
        }
    }
}

std::string_view to_string(Path path) noexcept {
    switch (path) {
        case Path::Lesion:
            return "lesion";
        case Path::Condition:
            return "condition";
        case Path::End:
            return "end";
    }
    return "end";
}

bool asserts_skin_condition(std::string_view text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalpha(u) || c == '\'') {
            cur += static_cast<char>(std::tolower(u));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        tokens.push_back(cur);
    }
    static const std::vector<std::string> kinds = {"condition", "conditions", "disorder", "disorders", "disease", "diseases", "infection", "infections"};
    static const std::vector<std::string> negations = {"not", "no", "never", "without", "neither", "nor", "cannot", "unlikely"};
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] != "skin" || std::find(kinds.begin(), kinds.end(), tokens[i + 1]) == kinds.end()) {
            continue;
        }
        bool negated = false;
        for (std::size_t k = i >= 3 ? i - 3 : 0; k < i; ++k) {
            negated = negated || std::find(negations.begin(), negations.end(), tokens[k]) != negations.end() ||
                      tokens[k].ends_with("n't");
        }
        if (!negated) {
            return true;
        }
    }
    return false;
}

PathDecision classify_path(const ParsedAssessment& a) {
    if (a.abcde.status == AbcdeStatus::Populated) {
        for (const std::string& d : a.diagnoses) {
            if (in_lesion_list(d)) {
                return {Path::Lesion, "ABCDE approximation present and '" + d + "' is a listed lesion label"};
            }
        }
        return {Path::End, "ABCDE approximation present but no diagnosis from the lesion label list"};
    }
    if (a.abcde.status == AbcdeStatus::NotApplicable) {
        if (asserts_skin_condition(a.raw)) {
            return {Path::Condition, "ABCDE marked not applicable and the response describes a skin condition"};
        }
        return {Path::End, "ABCDE marked not applicable and no skin condition is asserted"};
    }
    return {Path::End, "no ABCDE approximation in the response"};
}

}  // namespace dermflow::prompts
