#include "dermflow/workflow.hpp"

#include <regex>

namespace dermflow::workflow {

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n*_-:");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n*_");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        cur += (c == '\n' || c == '\r') ? ' ' : c;
        const bool end = c == '.' || c == '!' || c == '?';
        const bool boundary = i + 1 == text.size() || text[i + 1] == ' ' || text[i + 1] == '\n';
        if ((end && boundary) || (c == '\n' && i + 1 < text.size() && text[i + 1] == '\n')) {
            if (auto t = trim(cur); !t.empty()) {
                out.push_back(std::move(t));
            }
            cur.clear();
        }
    }
    if (auto t = trim(cur); !t.empty()) {
        out.push_back(std::move(t));
    }
    return out;
}

const std::regex& referral_line() {
    static const std::regex re(R"(^[\s*_>#-]*LAB_REFERRAL[\s*_]*:[\s*_]*(yes|no)\b[\s*_]*(?:[-:,;]|\xE2\x80\x94|\xE2\x80\x93)?\s*(.*)$)",
                               std::regex::icase);
    return re;
}

const std::regex& lab_term() {
    static const std::regex re(R"(\b(biops(y|ies)|laboratory|lab (test|analysis|work)|histopatholog\w*|diagnostic test(ing|s)?|dermatopatholog\w*)\b)",
                               std::regex::icase);
    return re;
}

const std::regex& need_term() {
    static const std::regex re(R"(\b(required|require[sd]?|recommended|recommend|necessary|needed|warranted|advised|advisable|indicated|should be (performed|done|considered|obtained))\b)",
                               std::regex::icase);
    return re;
}

const std::regex& negation() {
    static const std::regex re(R"(\b(not|no|unnecessary|never|without)\b|n't\b)", std::regex::icase);
    return re;
}

}  // namespace

Send2LabDecision parse_send2lab(std::string_view xai_report) {
    const std::string text(xai_report);
    std::vector<std::string> lines;
    {
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto nl = text.find('\n', start);
            lines.push_back(text.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
            if (nl == std::string::npos) {
                break;
            }
            start = nl + 1;
        }
    }
    // The last referral line wins if the model repeats it.
    std::optional<Send2LabDecision> explicit_decision;
    for (const std::string& line : lines) {
        std::smatch m;
        if (std::regex_search(line, m, referral_line())) {
            Send2LabDecision d;
            d.from_referral_line = true;
            std::string answer = m[1].str();
            d.required = answer[0] == 'y' || answer[0] == 'Y';
            d.rationale = trim(m[2].str());
            explicit_decision = d;
        }
    }

    std::optional<std::string> need_sentence;
    std::optional<std::string> negated_sentence;
    for (const std::string& s : sentences(xai_report)) {
        if (std::regex_search(s, referral_line()) || !std::regex_search(s, lab_term()) || !std::regex_search(s, need_term())) {
            continue;
        }
        if (std::regex_search(s, negation())) {
            if (!negated_sentence) {
                negated_sentence = s;
            }
        } else if (!need_sentence) {
            need_sentence = s;
        }
    }

    if (explicit_decision) {
        if (explicit_decision->rationale.empty()) {
            if (explicit_decision->required) {
                explicit_decision->rationale = need_sentence.value_or("laboratory referral requested in the review");
            } else {
                explicit_decision->rationale = negated_sentence.value_or("review states no laboratory referral is needed");
            }
        }
        return *explicit_decision;
    }
    Send2LabDecision d;
    if (need_sentence) {
        d.required = true;
        d.rationale = *need_sentence;
    } else {
        d.rationale = negated_sentence.value_or("review does not call for laboratory analysis");
    }
    return d;
}

}  // namespace dermflow::workflow
