#include "dermflow/evaluation.hpp"

#include <algorithm>

namespace dermflow::evaluation {

namespace {

double clamp01(double v) {
    return std::clamp(v, 0.0, 1.0);
}

WeightedRow make_row(double context, double entity, const Weights& w) {
    WeightedRow r;
    r.context = context;
    r.entity = entity;
    r.raw = weighted_row(context, entity, w);
    r.value = clamp01(r.raw);
    return r;
}

}  // namespace

CapabilityReport aggregate(std::vector<ScoreRecord> records, const std::vector<ExpertReview>& reviews, const Weights& weights) {
    weights.validate();
    if (records.empty()) {
        throw InvalidArgument("aggregate needs at least one score record");
    }
    // Fixed summation order keeps the result independent of input order.
    std::stable_sort(records.begin(), records.end(), [](const ScoreRecord& a, const ScoreRecord& b) { return a.case_id < b.case_id; });

    CapabilityReport rep;
    rep.weights = weights;
    rep.case_count = records.size();

    double ts_context = 0.0;
    double ts_entity = 0.0;
    std::size_t context_counts[3] = {0, 0, 0};
    std::size_t entity_counts[3] = {0, 0, 0};
    for (const ScoreRecord& r : records) {
        ts_context += r.ts_context;
        rep.bert.precision += r.bert.precision;
        rep.bert.recall += r.bert.recall;
        rep.bert.f1 += r.bert.f1;
        ++context_counts[static_cast<int>(r.nli_context.label)];
        if (r.ts_entity && r.nli_entity) {
            ++rep.entity_case_count;
            ts_entity += *r.ts_entity;
            ++entity_counts[static_cast<int>(r.nli_entity->label)];
        }
    }
    const double n = static_cast<double>(rep.case_count);
    const double ne = static_cast<double>(rep.entity_case_count);
    ts_context /= n;
    ts_entity = rep.entity_case_count > 0 ? ts_entity / ne : 0.0;
    rep.bert.precision /= n;
    rep.bert.recall /= n;
    rep.bert.f1 /= n;
    rep.textual_similarity = make_row(ts_context, ts_entity, weights);

    auto nli_row = [&](NliLabel label) {
        const int k = static_cast<int>(label);
        NliRow row;
        row.context_count = context_counts[k];
        row.entity_count = entity_counts[k];
        const double c = static_cast<double>(row.context_count) / n;
        const double e = rep.entity_case_count > 0 ? static_cast<double>(row.entity_count) / ne : 0.0;
        row.row = make_row(c, e, weights);
        return row;
    };
    rep.nli_contradiction = nli_row(NliLabel::Contradiction);
    rep.nli_neutral = nli_row(NliLabel::Neutral);
    rep.nli_entailment = nli_row(NliLabel::Entailment);

    if (!reviews.empty()) {
        long long symptom = 0;
        long long reasoning = 0;
        for (const ExpertReview& r : reviews) {
            symptom += r.symptom_image_score;
            reasoning += r.diagnostic_reasoning_score;
        }
        ExpertRow ex;
        ex.review_count = reviews.size();
        const double m = static_cast<double>(reviews.size());
        ex.symptom_mean = static_cast<double>(symptom) / m;
        ex.reasoning_mean = static_cast<double>(reasoning) / m;
        ex.symptom_normalized = static_cast<double>(symptom) / (5.0 * m);
        ex.reasoning_normalized = static_cast<double>(reasoning) / (5.0 * m);
        ex.mean = (ex.symptom_normalized + ex.reasoning_normalized) / 2.0;
        rep.expert = ex;
    }

    if (rep.expert) {
        rep.capability_raw = (rep.textual_similarity.raw + rep.nli_entailment.row.raw + rep.expert->mean) / 3.0;
        rep.capability = clamp01((rep.textual_similarity.value + rep.nli_entailment.row.value + rep.expert->mean) / 3.0);
    } else {
        rep.capability_raw = (rep.textual_similarity.raw + rep.nli_entailment.row.raw) / 2.0;
        rep.capability = clamp01((rep.textual_similarity.value + rep.nli_entailment.row.value) / 2.0);
    }
    rep.records = std::move(records);
    return rep;
}

}  // namespace dermflow::evaluation
