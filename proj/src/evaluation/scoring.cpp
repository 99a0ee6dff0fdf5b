#include "dermflow/evaluation.hpp"

#include <algorithm>
#include <cmath>

namespace dermflow::evaluation {

namespace {

std::string fill_template(const std::string& tmpl, const std::string& entity) {
    std::string out = tmpl;
    const std::string key = "{entity}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + entity.size())) {
        out.replace(pos, key.size(), entity);
    }
    return out;
}

void require_text(std::string_view text, const char* what) {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw InvalidArgument(std::string(what) + " is empty");
    }
}

}  // namespace

std::string_view to_string(NliLabel label) noexcept {
    switch (label) {
        case NliLabel::Contradiction:
            return "contradiction";
        case NliLabel::Neutral:
            return "neutral";
        case NliLabel::Entailment:
            return "entailment";
    }
    return "neutral";
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    if (a.empty()) {
        throw InvalidArgument("cosine of empty vectors");
    }
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw InvalidArgument("cosine with a zero vector");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double textual_similarity(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& ps) {
    require_text(premise, "premise");
    require_text(hypothesis, "hypothesis");
    if (!ps.embedding) {
        throw ProviderError("no embedding provider configured", false);
    }
    auto embed = [&](std::string_view text) {
        const std::vector<std::string> texts{std::string(text)};
        auto v = providers::call_with_retry_value(ps.retry, [&] { return ps.embedding->embed_sentences(texts); });
        return std::move(v.at(0));
    };
    const Vector p = embed(premise);
    const Vector h = embed(hypothesis);
    return cosine_similarity(p, h);
}

BertScore bert_score(const std::vector<TokenVector>& premise, const std::vector<TokenVector>& hypothesis) {
    if (premise.empty() || hypothesis.empty()) {
        throw InvalidArgument("BERTScore needs at least one token on each side");
    }
    std::vector<double> best_p(hypothesis.size(), -2.0);
    std::vector<double> best_r(premise.size(), -2.0);
    for (std::size_t i = 0; i < hypothesis.size(); ++i) {
        for (std::size_t j = 0; j < premise.size(); ++j) {
            const double s = cosine_similarity(hypothesis[i].vector, premise[j].vector);
            best_p[i] = std::max(best_p[i], s);
            best_r[j] = std::max(best_r[j], s);
        }
    }
    BertScore out;
    for (double v : best_p) {
        out.precision += v;
    }
    for (double v : best_r) {
        out.recall += v;
    }
    out.precision /= static_cast<double>(best_p.size());
    out.recall /= static_cast<double>(best_r.size());
    const double sum = out.precision + out.recall;
    out.f1 = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
    return out;
}

BertScore bert_score_texts(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& ps) {
    require_text(premise, "premise");
    require_text(hypothesis, "hypothesis");
    if (!ps.embedding) {
        throw ProviderError("no embedding provider configured", false);
    }
    auto tokens = [&](std::string_view text) {
        const std::vector<std::string> texts{std::string(text)};
        auto v = providers::call_with_retry_value(ps.retry, [&] { return ps.embedding->embed_tokens(texts); });
        return std::move(v.at(0));
    };
    return bert_score(tokens(premise), tokens(hypothesis));
}

NliResult nli_label(const providers::NliScores& s) {
    NliResult r;
    r.scores = s;
    r.label = NliLabel::Neutral;
    r.probability = s.neutral;
    if (s.contradiction > r.probability) {
        r.label = NliLabel::Contradiction;
        r.probability = s.contradiction;
    }
    if (s.entailment > r.probability) {
        r.label = NliLabel::Entailment;
        r.probability = s.entailment;
    }
    return r;
}

NliResult nli_assess(std::string_view premise, std::string_view hypothesis, const providers::ProviderSet& ps) {
    require_text(premise, "premise");
    require_text(hypothesis, "hypothesis");
    if (!ps.nli) {
        throw ProviderError("no NLI provider configured", false);
    }
    return nli_label(providers::call_with_retry_value(ps.retry, [&] { return ps.nli->infer(premise, hypothesis); }));
}

double weighted_row(double context, double entity, const Weights& w) {
    w.validate();
    return (w.context * context + w.entities * entity) / 2.0;
}

void Weights::validate() const {
    if (!(context > 0.0 && std::isfinite(context) && entities > 0.0 && std::isfinite(entities))) {
        throw InvalidArgument("weights must be positive and finite");
    }
}

ScoreRecord score_case(const EvalCase& c, const providers::ProviderSet& ps, const ScoringOptions& options) {
    ScoreRecord r;
    r.case_id = c.id;
    r.ts_context = textual_similarity(c.premise, c.hypothesis, ps);
    r.bert = bert_score_texts(c.premise, c.hypothesis, ps);
    r.nli_context = nli_assess(c.premise, c.hypothesis, ps);
    if (c.premise_entity.empty() || c.hypothesis_entity.empty()) {
        r.flags.push_back(c.entity_extraction_failed ? "entity extraction failed; entity track skipped" : "entity track skipped: entity missing");
        return r;
    }
    r.ts_entity = textual_similarity(c.premise_entity, c.hypothesis_entity, ps);
    r.nli_entity = nli_assess(fill_template(options.entity_template, c.premise_entity),
                              fill_template(options.entity_template, c.hypothesis_entity), ps);
    return r;
}

}  // namespace dermflow::evaluation
