#include "dermflow/error.hpp"
#include "dermflow/image_io.hpp"
#include "dermflow/prompts.hpp"
#include "resources.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace dermflow::prompts {

namespace {

bool word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0;
}

bool iequal(char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
}

std::string fold(std::string_view s) {
    std::string out;
    for (char c : s) {
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string canonical(std::string name) {
    if (!name.empty()) {
        name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    }
    return name;
}

/// Match `entry` at `pos` ignoring case and treating any run of spaces/hyphens in the
/// text as equal to a single space or hyphen in the entry. Returns the end offset or 0.
std::size_t match_at(std::string_view text, std::size_t pos, std::string_view entry) {
    std::size_t i = pos;
    for (std::size_t k = 0; k < entry.size(); ++k) {
        const char e = entry[k];
        if (e == ' ' || e == '-') {
            if (i >= text.size() || (text[i] != ' ' && text[i] != '-' && text[i] != '\n')) {
                return 0;
            }
            while (i < text.size() && (text[i] == ' ' || text[i] == '-' || text[i] == '\n')) {
                ++i;
            }
            continue;
        }
        if (i >= text.size() || !iequal(text[i], e)) {
            return 0;
        }
        ++i;
    }
    if (i < text.size() && word_char(text[i])) {
        return 0;
    }
    return i;
}

struct Hit {
    std::size_t begin;
    std::size_t end;
    std::string name;
};

std::vector<Hit> dictionary_hits(std::string_view text, const Lexicon& lexicon) {
    std::vector<Hit> hits;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (!word_char(text[pos]) || (pos > 0 && word_char(text[pos - 1]))) {
            ++pos;
            continue;
        }
        std::size_t end = 0;
        const std::string* found = nullptr;
        for (const std::string& entry : lexicon.entries()) {
            end = match_at(text, pos, entry);
            if (end != 0) {
                found = &entry;
                break;
            }
        }
        if (!found) {
            ++pos;
            continue;
        }
        std::string name = canonical(*found);
        // Keep a parenthetical qualifier that directly follows the name.
        std::size_t q = end;
        while (q < text.size() && text[q] == ' ') {
            ++q;
        }
        if (q < text.size() && text[q] == '(') {
            const std::size_t close = text.find(')', q);
            if (close != std::string_view::npos && close - q < 80 && text.substr(q, close - q).find('\n') == std::string_view::npos) {
                name += " " + std::string(text.substr(q, close - q + 1));
                end = close + 1;
            }
        }
        hits.push_back({pos, end, std::move(name)});
        pos = end;
    }
    return hits;
}

std::vector<std::string> dedupe(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    std::vector<std::string> seen;
    for (const std::string& n : names) {
        std::string t = n;
        while (!t.empty() && std::isspace(static_cast<unsigned char>(t.back()))) {
            t.pop_back();
        }
        const auto first = t.find_first_not_of(" \t\r\n");
        if (first == std::string::npos) {
            continue;
        }
        t = t.substr(first);
        const std::string key = fold(t);
        if (std::find(seen.begin(), seen.end(), key) == seen.end()) {
            seen.push_back(key);
            out.push_back(t);
        }
    }
    return out;
}

/// Offsets where sentences end: after . ! ? followed by whitespace, and at blank lines.
std::vector<std::size_t> sentence_ends(std::string_view text) {
    std::vector<std::size_t> ends;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool stop = (c == '.' || c == '!' || c == '?') && (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
        const bool blank = c == '\n' && i + 1 < text.size() && text[i + 1] == '\n';
        if (stop || blank) {
            ends.push_back(i + 1);
        }
    }
    ends.push_back(text.size());
    return ends;
}

}  // namespace

Lexicon Lexicon::from_text(std::string_view text) {
    Lexicon lex;
    lex.entries_ = lesion_labels();
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        lex.entries_.push_back(line.substr(first, last - first + 1));
    }
    // Dedupe case-insensitively keeping the first spelling, then longest first.
    std::vector<std::string> unique;
    std::vector<std::string> keys;
    for (const std::string& e : lex.entries_) {
        const std::string k = fold(e);
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            keys.push_back(k);
            unique.push_back(e);
        }
    }
    std::stable_sort(unique.begin(), unique.end(), [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    lex.entries_ = std::move(unique);
    return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = imaging::read_file_bytes(path);
    return from_text(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const Lexicon& Lexicon::builtin() {
    static const Lexicon lex = from_text(resources::condition_lexicon);
    return lex;
}

std::vector<std::string> extract_entities(std::string_view text, bool premise_mode, const Lexicon& lexicon) {
    try {
        const ParsedAssessment a = parse_assessment(text);
        if (a.final_diagnosis) {
            return dedupe({*a.final_diagnosis});
        }
        if (!a.diagnoses.empty()) {
            return dedupe(a.diagnoses);
        }
    } catch (const Error&) {
        // Free text: fall through to the dictionary.
    }

    std::vector<Hit> hits = dictionary_hits(text, lexicon);
    if (premise_mode && !hits.empty()) {
        const std::vector<std::size_t> ends = sentence_ends(text);
        const std::size_t first = hits.front().begin;
        std::size_t lo = 0;
        std::size_t hi = text.size();
        for (std::size_t e : ends) {
            if (e > first) {
                hi = e;
                break;
            }
            lo = e;
        }
        std::erase_if(hits, [&](const Hit& h) { return h.begin < lo || h.begin >= hi; });
    }
    std::vector<std::string> names;
    for (const Hit& h : hits) {
        names.push_back(h.name);
    }
    return dedupe(names);
}

}  // namespace dermflow::prompts
