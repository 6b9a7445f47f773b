#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrceval/core.hpp"
#include "mrceval/text.hpp"

namespace mrceval {

struct NormalizedText {
    std::string text;
};

// lowercase -> punctuation strip -> article removal -> whitespace collapse
inline NormalizedText normalize(std::string_view input) {
    std::string s = text::to_lower(input);
    std::string no_punct;
    no_punct.reserve(s.size());
    for (char c : s) {
        if (std::ispunct(static_cast<unsigned char>(c)))
            no_punct.push_back(' ');
        else
            no_punct.push_back(c);
    }
    std::string joined;
    for (auto w : text::words(no_punct)) {
        if (w == "a" || w == "an" || w == "the") continue;
        if (!joined.empty()) joined.push_back(' ');
        joined.append(w);
    }
    return NormalizedText{std::move(joined)};
}

struct MatchPolicy {
    enum class Mode { strict, lenient };
    Mode mode = Mode::strict;
    // Lenient mode: acronym <-> expansion equivalences, keyed and valued in
    // normalized form. Headline scores always use strict.
    std::map<std::string, std::string> aliases;

    std::string canonical(const std::string& normalized) const {
        if (mode == Mode::lenient) {
            auto it = aliases.find(normalized);
            if (it != aliases.end()) return it->second;
        }
        return normalized;
    }
    bool equivalent(const std::string& norm_a, const std::string& norm_b) const {
        return canonical(norm_a) == canonical(norm_b);
    }
};

struct ParsedAnswer {
    std::string answer;
    bool fallback = false;  // no Answer: marker; last non-empty line used
};

inline ParsedAnswer parse_final_answer(const std::string& raw_output) {
    if (text::trim(raw_output).empty())
        throw std::invalid_argument("empty raw output");
    constexpr std::string_view marker = "Answer:";
    std::string last_marker_line;
    bool found = false;
    std::string last_nonempty;
    for (auto line : text::split_lines(raw_output)) {
        std::string t = text::trim(line);
        if (t.empty()) continue;
        last_nonempty = t;
        if (t.rfind(marker, 0) == 0) {
            last_marker_line = text::trim(t.substr(marker.size()));
            found = true;
        }
    }
    if (found) return {last_marker_line, false};
    return {last_nonempty, true};
}

struct OptionMatch {
    std::optional<std::string> candidate_id;
    bool ambiguous = false;  // >= 2 distinct candidate ids matched
};

inline OptionMatch match_option(const std::string& pred, const std::vector<Candidate>& candidates,
                                const MatchPolicy& policy = {}) {
    if (candidates.empty())
        throw std::invalid_argument("match_option: empty candidate list");
    const std::string norm_pred = normalize(pred).text;
    const std::string lower_pred = text::to_lower(text::trim(pred));
    // Equivalence on empty normalized text is meaningless ("A" and "the" both
    // normalize to ""), so empty strings never match through normalization.
    auto norm_eq = [&](const std::string& surface) {
        const std::string n = normalize(surface).text;
        return !norm_pred.empty() && !n.empty() && policy.equivalent(norm_pred, n);
    };
    OptionMatch m;
    for (const auto& c : candidates) {
        bool hit = false;
        // The id itself counts as an answer, so "A" selects the lettered option.
        if (!lower_pred.empty() && lower_pred == text::to_lower(c.id)) hit = true;
        if (norm_eq(c.id)) hit = true;
        for (const auto& s : c.surface_forms)
            if (norm_eq(s)) hit = true;
        if (!hit) continue;
        if (m.candidate_id && *m.candidate_id != c.id) {
            m.ambiguous = true;
            m.candidate_id.reset();
            return m;
        }
        m.candidate_id = c.id;
    }
    return m;
}

inline int exact_match(const std::string& pred, const std::vector<std::string>& gold_variants,
                       const MatchPolicy& policy = {}) {
    if (gold_variants.empty())
        throw std::invalid_argument("exact_match: empty gold set");
    const std::string norm_pred = normalize(pred).text;
    for (const auto& v : gold_variants)
        if (policy.equivalent(norm_pred, normalize(v).text)) return 1;
    return 0;
}

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

namespace detail {

inline Prf prf_single(const std::vector<std::string_view>& pred_tokens,
                      const std::vector<std::string_view>& gold_tokens) {
    if (pred_tokens.empty() && gold_tokens.empty()) return {1.0, 1.0, 1.0};
    if (pred_tokens.empty() || gold_tokens.empty()) return {0.0, 0.0, 0.0};
    std::map<std::string_view, size_t> gold_counts;
    for (auto t : gold_tokens) ++gold_counts[t];
    size_t overlap = 0;
    for (auto t : pred_tokens) {
        auto it = gold_counts.find(t);
        if (it != gold_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    Prf r;
    r.precision = static_cast<double>(overlap) / static_cast<double>(pred_tokens.size());
    r.recall = static_cast<double>(overlap) / static_cast<double>(gold_tokens.size());
    r.f1 = f1_of(r.precision, r.recall);
    return r;
}

}  // namespace detail

// Token-multiset P/R/F1 against the best gold variant (max F1, ties broken by
// higher recall).
inline Prf token_prf(const std::string& pred, const std::vector<std::string>& gold_variants) {
    if (gold_variants.empty())
        throw std::invalid_argument("token_prf: empty gold set");
    const std::string norm_pred = normalize(pred).text;
    const auto pred_tokens = text::words(norm_pred);
    Prf best;
    bool have = false;
    for (const auto& v : gold_variants) {
        const std::string norm_gold = normalize(v).text;
        Prf r = detail::prf_single(pred_tokens, text::words(norm_gold));
        if (!have || r.f1 > best.f1 || (r.f1 == best.f1 && r.recall > best.recall)) {
            best = r;
            have = true;
        }
    }
    return best;
}

// Gold text for token metrics on MASH-QA: in-order concatenation of the gold
// span sentences.
inline std::string mashqa_gold_text(const MrcInstance& inst) {
    std::string out;
    for (size_t idx : inst.gold.span_set) {
        if (!out.empty()) out.push_back(' ');
        out += inst.context.sentence(idx);
    }
    return out;
}

inline ScoreSet score_instance(const Prediction& pred, const MrcInstance& inst,
                               const MatchPolicy& policy = {}) {
    if (pred.instance_id != inst.id)
        throw std::invalid_argument("prediction/instance id mismatch: " + pred.instance_id +
                                    " vs " + inst.id);
    ScoreSet s;
    switch (inst.dataset) {
        case DatasetTag::processbank:
        case DatasetTag::biomrc: {
            auto m = match_option(pred.parsed_answer, inst.candidates, policy);
            s.accuracy = (m.candidate_id && *m.candidate_id == inst.gold.option_ref) ? 1.0 : 0.0;
            break;
        }
        case DatasetTag::clicr: {
            s.em = exact_match(pred.parsed_answer, inst.gold.text_variants, policy);
            Prf r = token_prf(pred.parsed_answer, inst.gold.text_variants);
            s.precision = r.precision;
            s.recall = r.recall;
            s.f1 = r.f1;
            break;
        }
        case DatasetTag::mashqa: {
            std::vector<std::string> gold{mashqa_gold_text(inst)};
            s.em = exact_match(pred.parsed_answer, gold, policy);
            Prf r = token_prf(pred.parsed_answer, gold);
            s.precision = r.precision;
            s.recall = r.recall;
            s.f1 = r.f1;
            break;
        }
    }
    return s;
}

// Macro average over instances; F1 averaged per instance, not recomputed from
// averaged P and R.
inline ScoreSet aggregate(const std::vector<ScoreSet>& scores) {
    if (scores.empty()) throw std::invalid_argument("aggregate: empty input");
    auto present = [](const ScoreSet& s) {
        return std::array<bool, 5>{s.accuracy.has_value(), s.em.has_value(),
                                   s.precision.has_value(), s.recall.has_value(),
                                   s.f1.has_value()};
    };
    const auto shape = present(scores.front());
    for (const auto& s : scores)
        if (present(s) != shape)
            throw std::invalid_argument("aggregate: heterogeneous metric presence");
    auto mean = [&](std::optional<double> ScoreSet::* field) -> std::optional<double> {
        if (!(scores.front().*field)) return std::nullopt;
        double sum = 0.0;
        for (const auto& s : scores) sum += *(s.*field);
        return sum / static_cast<double>(scores.size());
    };
    ScoreSet out;
    out.accuracy = mean(&ScoreSet::accuracy);
    out.em = mean(&ScoreSet::em);
    out.precision = mean(&ScoreSet::precision);
    out.recall = mean(&ScoreSet::recall);
    out.f1 = mean(&ScoreSet::f1);
    return out;
}

}  // namespace mrceval
