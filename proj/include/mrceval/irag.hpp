#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrceval/backend.hpp"
#include "mrceval/core.hpp"
#include "mrceval/eval.hpp"
#include "mrceval/prompt.hpp"
#include "mrceval/text.hpp"

namespace mrceval {

struct ChunkPlan {
    size_t chunk_word_budget = 0;
    size_t overlap_words = 0;
    std::vector<std::pair<size_t, size_t>> chunks;  // [start_word, end_word)
};

inline ChunkPlan chunk_context(const Context& ctx, size_t budget, size_t overlap) {
    if (budget == 0 || overlap >= budget)
        throw std::invalid_argument("chunk_context: need budget > overlap >= 0");
    ChunkPlan plan;
    plan.chunk_word_budget = budget;
    plan.overlap_words = overlap;
    const size_t n = ctx.word_count;
    if (n <= budget) {
        plan.chunks.emplace_back(0, n);
        return plan;
    }
    size_t start = 0;
    for (;;) {
        size_t end = std::min(start + budget, n);
        plan.chunks.emplace_back(start, end);
        if (end == n) break;
        start = end - overlap;
    }
    return plan;
}

inline std::string chunk_text(const Context& ctx, std::pair<size_t, size_t> chunk) {
    auto ws = text::words(ctx.text);
    std::string out;
    for (size_t i = chunk.first; i < chunk.second && i < ws.size(); ++i) {
        if (i > chunk.first) out.push_back(' ');
        out.append(ws[i]);
    }
    return out;
}

struct SectionParse {
    std::vector<RetrievedSection> sections;
    size_t extra_count = 0;      // parseable sections beyond the expected count
    bool deviation = false;      // parsed count != expected
};

// Extracts "Section <k>: ..." lines and computes grounded / within_limits
// against the originating context and the configured word limits. Count
// mismatches are recorded, never fatal.
inline SectionParse parse_sections(const std::string& raw_output, size_t expected,
                                   const std::string& context_text, size_t lower_words,
                                   size_t upper_words) {
    SectionParse out;
    constexpr std::string_view marker = "Section ";
    std::vector<RetrievedSection> all;
    for (auto line : text::split_lines(raw_output)) {
        std::string t = text::trim(line);
        if (t.rfind(marker, 0) != 0) continue;
        size_t pos = marker.size();
        size_t digits = 0;
        while (pos + digits < t.size() && std::isdigit(static_cast<unsigned char>(t[pos + digits])))
            ++digits;
        if (digits == 0 || pos + digits >= t.size() || t[pos + digits] != ':') continue;
        RetrievedSection s;
        s.index = std::stoul(t.substr(pos, digits));
        s.text = text::trim(t.substr(pos + digits + 1));
        s.word_count = text::word_count(s.text);
        s.grounded = text::contains_normalized(context_text, s.text);
        s.within_limits = s.word_count >= lower_words && s.word_count <= upper_words;
        all.push_back(std::move(s));
    }
    if (all.size() > expected) {
        out.extra_count = all.size() - expected;
        all.resize(expected);
    }
    out.deviation = all.size() != expected || out.extra_count > 0;
    out.sections = std::move(all);
    return out;
}

// Pairwise Jaccard similarity over word multisets; pairs at or above the
// threshold are flagged as insufficiently distinct.
struct DistinctnessPair {
    size_t first = 0;
    size_t second = 0;
    double similarity = 0.0;
    bool flagged = false;
};

inline std::vector<DistinctnessPair> section_distinctness(
    const std::vector<RetrievedSection>& sections, double flag_threshold = 0.8) {
    if (sections.size() < 2)
        throw std::invalid_argument("section_distinctness: need at least 2 sections");
    auto counts = [](const RetrievedSection& s) {
        std::map<std::string, size_t> m;
        for (auto w : text::words(text::to_lower(s.text))) ++m[std::string(w)];
        return m;
    };
    std::vector<std::map<std::string, size_t>> ms;
    ms.reserve(sections.size());
    for (const auto& s : sections) ms.push_back(counts(s));

    std::vector<DistinctnessPair> out;
    for (size_t i = 0; i < sections.size(); ++i) {
        for (size_t j = i + 1; j < sections.size(); ++j) {
            size_t inter = 0, uni = 0;
            for (const auto& [w, ca] : ms[i]) {
                auto it = ms[j].find(w);
                size_t cb = it == ms[j].end() ? 0 : it->second;
                inter += std::min(ca, cb);
                uni += std::max(ca, cb);
            }
            for (const auto& [w, cb] : ms[j])
                if (!ms[i].count(w)) uni += cb;
            DistinctnessPair p;
            p.first = i;
            p.second = j;
            p.similarity = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
            p.flagged = p.similarity >= flag_threshold;
            out.push_back(p);
        }
    }
    return out;
}

// Single call when the context fits the word budget, otherwise one retrieval
// call per chunk followed by one answer call over the pooled sections.
inline Prediction run_implicit_rag(const MrcInstance& inst, const PlaceholderProfile& profile,
                                   const StrategyConfig& cfg, Backend& backend,
                                   const TemplateSet& templates, size_t context_word_budget,
                                   size_t chunk_overlap = 50) {
    if (cfg.strategy != Strategy::implicit_rag)
        throw std::invalid_argument("run_implicit_rag: config strategy mismatch");

    Prediction pred;
    pred.instance_id = inst.id;
    pred.strategy = Strategy::implicit_rag;
    DecodingParams params;

    auto call = [&](const PromptText& prompt, size_t call_index) {
        CompletionRequest req;
        req.prompt = prompt;
        req.params = params;
        req.request_tag = inst.id + "|implicit_rag|" + std::to_string(call_index);
        try {
            CompletionResponse resp = backend.complete(req);
            pred.usage.prompt_words += resp.prompt_words;
            pred.usage.completion_words += resp.completion_words;
            pred.latency_ms += resp.latency_ms;
            return resp;
        } catch (const BackendError& e) {
            throw BackendError("call " + std::to_string(call_index) + ": " + e.what(),
                               e.transient);
        }
    };

    const size_t lower = static_cast<size_t>(cfg.irag_lower_words);
    const size_t upper = static_cast<size_t>(cfg.irag_upper_words);
    const size_t expected = static_cast<size_t>(cfg.irag_num_sections);

    if (inst.context.word_count <= context_word_budget) {
        auto resp = call(render_irag(inst, profile, cfg, templates), 0);
        pred.raw_output = resp.text;
        pred.call_count = 1;
        pred.sections =
            parse_sections(resp.text, expected, inst.context.text, lower, upper).sections;
    } else {
        ChunkPlan plan = chunk_context(inst.context, context_word_budget, chunk_overlap);
        std::vector<RetrievedSection> pooled;
        std::set<std::string> seen;  // lowercased, whitespace-collapsed text
        size_t call_index = 0;
        for (auto chunk : plan.chunks) {
            const std::string body = chunk_text(inst.context, chunk);
            auto resp = call(render_irag_retrieve(body, inst, profile, cfg, templates),
                             call_index++);
            for (auto& s : parse_sections(resp.text, expected, inst.context.text, lower, upper)
                               .sections) {
                std::string dedup_key = text::to_lower(text::collapse_ws(s.text));
                if (seen.insert(dedup_key).second) {
                    s.index = pooled.size() + 1;
                    pooled.push_back(std::move(s));
                }
            }
        }
        CompletionResponse final_resp;
        if (pooled.empty()) {
            // No parseable sections anywhere; fall back to the single-call
            // prompt over the full context and record the deviation.
            final_resp = call(render_irag(inst, profile, cfg, templates), call_index++);
        } else {
            final_resp =
                call(render_irag_final(pooled, inst, profile, templates), call_index++);
        }
        pred.raw_output = final_resp.text;
        pred.call_count = call_index;
        pred.sections = std::move(pooled);
    }

    ParsedAnswer parsed = parse_final_answer(pred.raw_output);
    pred.parsed_answer = parsed.answer;
    pred.parse_fallback = parsed.fallback;
    return pred;
}

}  // namespace mrceval
