#include "dermflow/evaluation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace dermflow::evaluation {

using nlohmann::json;

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string counted(std::size_t count, double v) {
    return "(" + std::to_string(count) + ") " + fixed(v, 3);
}

std::string average(const WeightedRow& r) {
    std::string s = fixed(r.value, 2);
    if (r.raw != r.value) {
        s += " *";
    }
    return s;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string table_line(const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    std::string line = pad(a, 20) + pad(b, 16) + pad(c, 16) + d;
    while (!line.empty() && line.back() == ' ') {
        line.pop_back();
    }
    return line + "\n";
}

json row_json(const WeightedRow& r) {
    return json{{"context", r.context}, {"entity", r.entity}, {"average", r.value}, {"average_raw", r.raw}};
}

json nli_json(const NliRow& r) {
    json j = row_json(r.row);
    j["context_count"] = r.context_count;
    j["entity_count"] = r.entity_count;
    return j;
}

json nli_result_json(const NliResult& r) {
    return json{{"label", to_string(r.label)},
                {"probability", r.probability},
                {"scores", {{"contradiction", r.scores.contradiction}, {"neutral", r.scores.neutral}, {"entailment", r.scores.entailment}}}};
}

json histogram(const std::vector<double>& values, int bins) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        const int k = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
        ++counts[static_cast<std::size_t>(k)];
    }
    std::vector<double> edges;
    for (int k = 0; k <= bins; ++k) {
        edges.push_back(static_cast<double>(k) / bins);
    }
    return json{{"edges", edges}, {"counts", counts}};
}

}  // namespace

std::string render_table(const CapabilityReport& r) {
    std::string out;
    out += "Dermatology evaluation scores (" + std::to_string(r.case_count) + " cases, weights context " +
           fixed(r.weights.context, 2) + " / entities " + fixed(r.weights.entities, 2) + ")\n\n";
    out += table_line("", "Context", "Entities", "Average");
    out += std::string(68, '=') + "\n";
    out += table_line("Textual Similarity", fixed(r.textual_similarity.context, 2), fixed(r.textual_similarity.entity, 2),
                      average(r.textual_similarity));
    for (const auto& [name, row] : {std::pair{"NLI_N", &r.nli_neutral}, std::pair{"NLI_C", &r.nli_contradiction},
                                    std::pair{"NLI_E", &r.nli_entailment}}) {
        out += table_line(name, counted(row->context_count, row->row.context), counted(row->entity_count, row->row.entity),
                          average(row->row));
    }
    if (r.expert) {
        const ExpertRow& e = *r.expert;
        out += table_line("Expert Review", "(" + fixed(e.symptom_mean, 2) + ") " + fixed(e.symptom_normalized, 3),
                          "(" + fixed(e.reasoning_mean, 2) + ") " + fixed(e.reasoning_normalized, 3), fixed(e.mean, 2));
    } else {
        out += table_line("Expert Review", "-", "-", "-");
    }
    out += std::string(68, '=') + "\n";
    out += table_line("Capability", "", "", fixed(r.capability, 2));
    out += std::string(68, '=') + "\n";
    out += table_line("BERT Score", "Precision", "Recall", "F1");
    out += std::string(68, '-') + "\n";
    out += table_line("", fixed(r.bert.precision, 2), fixed(r.bert.recall, 2), fixed(r.bert.f1, 2));
    const bool clamped = r.textual_similarity.raw != r.textual_similarity.value || r.nli_entailment.row.raw != r.nli_entailment.row.value ||
                         r.nli_neutral.row.raw != r.nli_neutral.row.value || r.nli_contradiction.row.raw != r.nli_contradiction.row.value;
    if (clamped) {
        out += "\n* clamped to [0, 1]; unclamped values are in the JSON report\n";
    }
    if (r.entity_case_count != r.case_count) {
        out += "\nEntity track covers " + std::to_string(r.entity_case_count) + " of " + std::to_string(r.case_count) + " cases\n";
    }
    return out;
}

std::string report_to_json(const CapabilityReport& r) {
    json records = json::array();
    std::vector<double> p;
    std::vector<double> rc;
    std::vector<double> f;
    std::vector<double> ts;
    json bars = json::array();
    for (const ScoreRecord& s : r.records) {
        json rec{{"case_id", s.case_id},
                 {"ts_context", s.ts_context},
                 {"ts_entity", s.ts_entity ? json(*s.ts_entity) : json(nullptr)},
                 {"bert", {{"precision", s.bert.precision}, {"recall", s.bert.recall}, {"f1", s.bert.f1}}},
                 {"nli_context", nli_result_json(s.nli_context)},
                 {"nli_entity", s.nli_entity ? nli_result_json(*s.nli_entity) : json(nullptr)},
                 {"flags", s.flags}};
        records.push_back(std::move(rec));
        p.push_back(s.bert.precision);
        rc.push_back(s.bert.recall);
        f.push_back(s.bert.f1);
        ts.push_back(s.ts_context);
        bars.push_back({{"case_id", s.case_id}, {"precision", s.bert.precision}, {"recall", s.bert.recall}, {"f1", s.bert.f1}});
    }
    json expert = nullptr;
    if (r.expert) {
        const ExpertRow& e = *r.expert;
        expert = {{"symptom_mean", e.symptom_mean},
                  {"reasoning_mean", e.reasoning_mean},
                  {"context", e.symptom_normalized},
                  {"entity", e.reasoning_normalized},
                  {"average", e.mean},
                  {"review_count", e.review_count}};
    }
    json j{
        {"case_count", r.case_count},
        {"entity_case_count", r.entity_case_count},
        {"weights", {{"context", r.weights.context}, {"entities", r.weights.entities}}},
        {"rows",
         {{"textual_similarity", row_json(r.textual_similarity)},
          {"nli_neutral", nli_json(r.nli_neutral)},
          {"nli_contradiction", nli_json(r.nli_contradiction)},
          {"nli_entailment", nli_json(r.nli_entailment)},
          {"expert_review", expert}}},
        {"capability", r.capability},
        {"capability_raw", r.capability_raw},
        {"bert", {{"precision", r.bert.precision}, {"recall", r.bert.recall}, {"f1", r.bert.f1}}},
        {"plots",
         {{"bert_scores", bars},
          {"distributions",
           {{"precision", histogram(p, 10)}, {"recall", histogram(rc, 10)}, {"f1", histogram(f, 10)}, {"ts_context", histogram(ts, 10)}}}}},
        {"records", records},
    };
    return j.dump(2);
}

}  // namespace dermflow::evaluation
