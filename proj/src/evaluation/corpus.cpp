#include "dermflow/evaluation.hpp"
#include "dermflow/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace dermflow::evaluation {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string optional_string(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) {
        return {};
    }
    if (!j[key].is_string()) {
        throw InvalidArgument(std::string("field '") + key + "' must be a string");
    }
    return trim(j[key].get<std::string>());
}

std::optional<int> parse_int(const std::string& s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace

EvalCase parse_eval_case(std::string_view text, const prompts::Lexicon& lexicon) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw InvalidArgument("case document must be a JSON object");
    }
    EvalCase c;
    c.id = optional_string(j, "id");
    c.question = optional_string(j, "question");
    c.premise = optional_string(j, "premise");
    c.hypothesis = optional_string(j, "hypothesis");
    c.premise_entity = optional_string(j, "premise_entity");
    c.hypothesis_entity = optional_string(j, "hypothesis_entity");
    if (auto img = optional_string(j, "image"); !img.empty()) {
        c.image = img;
    }
    if (c.id.empty()) {
        throw InvalidArgument("case has no id");
    }
    if (c.premise.empty()) {
        throw InvalidArgument("case " + c.id + " has an empty premise");
    }
    if (c.hypothesis.empty()) {
        throw InvalidArgument("case " + c.id + " has an empty hypothesis");
    }
    if (c.premise_entity.empty()) {
        const auto found = prompts::extract_entities(c.premise, true, lexicon);
        if (!found.empty()) {
            c.premise_entity = found.front();
        }
    }
    if (c.hypothesis_entity.empty()) {
        const auto found = prompts::extract_entities(c.hypothesis, false, lexicon);
        if (!found.empty()) {
            c.hypothesis_entity = found.front();
        }
    }
    c.entity_extraction_failed = c.premise_entity.empty() || c.hypothesis_entity.empty();
    return c;
}

Corpus load_corpus(const std::filesystem::path& dir, const prompts::Lexicon& lexicon) {
    if (!std::filesystem::is_directory(dir)) {
        throw InvalidArgument("corpus directory " + dir.string() + " does not exist");
    }
    const auto root = std::filesystem::is_directory(dir / "cases") ? dir / "cases" : dir;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    Corpus corpus;
    std::set<std::string> seen;
    for (const auto& f : files) {
        try {
            const auto bytes = imaging::read_file_bytes(f);
            EvalCase c = parse_eval_case(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), lexicon);
            if (!seen.insert(c.id).second) {
                throw InvalidArgument("duplicate case id " + c.id);
            }
            corpus.cases.push_back(std::move(c));
        } catch (const Error& e) {
            corpus.errors.push_back({f.filename().string(), e.what()});
        }
    }
    std::sort(corpus.cases.begin(), corpus.cases.end(), [](const EvalCase& a, const EvalCase& b) { return a.id < b.id; });
    return corpus;
}

ReviewIngest parse_expert_reviews(std::string_view text) {
    ReviewIngest out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t number = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') {
            continue;
        }
        const char delim = t.find('\t') != std::string::npos ? '\t' : (t.find(';') != std::string::npos ? ';' : ',');
        const auto fields = split(t, delim);
        const bool header = first_data_line && fields.size() >= 2 && !parse_int(fields[1]);
        first_data_line = false;
        if (header) {
            continue;
        }
        if (fields.size() != 4) {
            out.errors.push_back({number, "expected 4 fields, found " + std::to_string(fields.size())});
            continue;
        }
        if (fields[0].empty()) {
            out.errors.push_back({number, "empty case id"});
            continue;
        }
        if (fields[3].empty()) {
            out.errors.push_back({number, "empty reviewer"});
            continue;
        }
        const auto a = parse_int(fields[1]);
        const auto b = parse_int(fields[2]);
        bool ok = true;
        for (const auto& [value, raw, name] : {std::tuple{a, fields[1], "symptom/image score"}, std::tuple{b, fields[2], "diagnostic reasoning score"}}) {
            if (!value) {
                out.errors.push_back({number, std::string(name) + " '" + raw + "' is not an integer"});
                ok = false;
            } else if (*value < 1 || *value > 5) {
                out.errors.push_back({number, std::string(name) + " " + raw + " is outside 1..5"});
                ok = false;
            }
        }
        if (ok) {
            out.reviews.push_back({fields[0], *a, *b, fields[3]});
        }
    }
    return out;
}

ReviewIngest ingest_expert_reviews(const std::filesystem::path& path) {
    const auto bytes = imaging::read_file_bytes(path);
    return parse_expert_reviews(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

CapabilityReport run_evaluation(const std::vector<EvalCase>& cases, const std::vector<ExpertReview>& reviews,
                                const providers::ProviderSet& ps, const RunOptions& options) {
    options.weights.validate();
    if (cases.empty()) {
        throw InvalidArgument("evaluation corpus is empty");
    }
    std::vector<std::optional<ScoreRecord>> results(cases.size());
    std::size_t next = 0;
    std::size_t done = 0;
    std::exception_ptr failure;
    std::mutex mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = 0;
            {
                std::lock_guard lock(mutex);
                if (failure || next == cases.size()) {
                    return;
                }
                i = next++;
            }
            try {
                ScoreRecord r = score_case(cases[i], ps, options.scoring);
                std::lock_guard lock(mutex);
                results[i] = std::move(r);
                ++done;
                if (options.progress) {
                    options.progress(done, cases.size(), *results[i]);
                }
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    };
    const int n = std::clamp(options.workers, 1, static_cast<int>(cases.size()));
    std::vector<std::jthread> pool;
    for (int k = 1; k < n; ++k) {
        pool.emplace_back(worker);
    }
    worker();
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
    std::vector<ScoreRecord> records;
    records.reserve(results.size());
    for (auto& r : results) {
        records.push_back(std::move(*r));
    }
    return aggregate(std::move(records), reviews, options.weights);
}

}  // namespace dermflow::evaluation
