#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mrceval/text.hpp"

namespace mrceval {

enum class DatasetTag { processbank, biomrc, mashqa, clicr };

inline std::string to_string(DatasetTag t) {
    switch (t) {
        case DatasetTag::processbank: return "processbank";
        case DatasetTag::biomrc: return "biomrc";
        case DatasetTag::mashqa: return "mashqa";
        case DatasetTag::clicr: return "clicr";
    }
    throw std::logic_error("bad DatasetTag");
}

inline DatasetTag dataset_from_string(const std::string& s) {
    if (s == "processbank") return DatasetTag::processbank;
    if (s == "biomrc") return DatasetTag::biomrc;
    if (s == "mashqa") return DatasetTag::mashqa;
    if (s == "clicr") return DatasetTag::clicr;
    throw std::invalid_argument("unknown dataset tag: " + s);
}

enum class Strategy { basic, cot, ar, implicit_rag };

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::basic: return "basic";
        case Strategy::cot: return "cot";
        case Strategy::ar: return "ar";
        case Strategy::implicit_rag: return "implicit_rag";
    }
    throw std::logic_error("bad Strategy");
}

inline Strategy strategy_from_string(const std::string& s) {
    if (s == "basic") return Strategy::basic;
    if (s == "cot") return Strategy::cot;
    if (s == "ar") return Strategy::ar;
    if (s == "implicit_rag") return Strategy::implicit_rag;
    throw std::invalid_argument("unknown strategy: " + s);
}

struct Context {
    std::string id;
    std::string text;
    // Present only when the dataset is sentence-indexed (MASH-QA).
    std::optional<std::vector<std::pair<size_t, size_t>>> sentence_spans;
    size_t word_count = 0;

    static Context make(std::string id, std::string text,
                        std::optional<std::vector<std::pair<size_t, size_t>>> spans = std::nullopt) {
        Context c;
        c.id = std::move(id);
        c.text = std::move(text);
        c.sentence_spans = std::move(spans);
        c.word_count = text::word_count(c.text);
        return c;
    }

    std::string sentence(size_t idx) const {
        const auto& spans = sentence_spans.value();
        auto [b, e] = spans.at(idx);
        return text.substr(b, e - b);
    }
};

struct Candidate {
    std::string id;  // entity pseudo-id (BioMRC) or option letter (ProcessBank)
    std::vector<std::string> surface_forms;
};

struct GoldAnswer {
    enum class Kind { option_ref, text_variants, span_set };
    Kind kind = Kind::option_ref;
    std::string option_ref;
    std::vector<std::string> text_variants;
    std::vector<size_t> span_set;

    static GoldAnswer option(std::string id) {
        GoldAnswer g;
        g.kind = Kind::option_ref;
        g.option_ref = std::move(id);
        return g;
    }
    static GoldAnswer variants(std::vector<std::string> v) {
        GoldAnswer g;
        g.kind = Kind::text_variants;
        g.text_variants = std::move(v);
        return g;
    }
    static GoldAnswer spans(std::vector<size_t> s) {
        GoldAnswer g;
        g.kind = Kind::span_set;
        g.span_set = std::move(s);
        return g;
    }
};

struct MrcInstance {
    std::string id;
    DatasetTag dataset = DatasetTag::processbank;
    Context context;
    std::string query_text;
    std::vector<Candidate> candidates;
    GoldAnswer gold;
};

struct RetrievedSection {
    size_t index = 0;  // 1-based marker index
    std::string text;
    size_t word_count = 0;
    bool grounded = false;       // whitespace-normalized substring of the context
    bool within_limits = false;  // word count inside the configured limits
};

struct Usage {
    size_t prompt_words = 0;
    size_t completion_words = 0;
};

struct Prediction {
    std::string instance_id;
    Strategy strategy = Strategy::basic;
    std::string raw_output;
    std::string parsed_answer;
    std::vector<RetrievedSection> sections;            // implicit_rag only
    std::vector<std::pair<std::string, std::string>> qa_pairs;  // ar only
    size_t call_count = 1;
    Usage usage;
    int64_t latency_ms = 0;
    bool parse_fallback = false;  // no Answer: marker in raw output
};

struct ScoreSet {
    std::optional<double> accuracy;
    std::optional<double> em;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

inline double f1_of(double p, double r) {
    return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

// Checks every type invariant; violations are returned, never thrown.
inline std::vector<std::string> validate_instance(const MrcInstance& inst) {
    std::vector<std::string> v;
    if (inst.id.empty()) v.push_back("id must be non-empty");
    const auto& ctx = inst.context;
    if (ctx.text.empty()) v.push_back("context.text must be non-empty");
    if (ctx.word_count < 1) v.push_back("context.word_count must be >= 1");
    if (ctx.word_count != text::word_count(ctx.text))
        v.push_back("context.word_count must equal whitespace word count of text");
    if (ctx.sentence_spans) {
        size_t prev_end = 0;
        bool first = true;
        for (auto [b, e] : *ctx.sentence_spans) {
            if (b >= e || e > ctx.text.size())
                v.push_back("context.sentence_spans entry out of bounds");
            if (!first && b < prev_end)
                v.push_back("context.sentence_spans must be ordered and non-overlapping");
            prev_end = e;
            first = false;
        }
    }
    if (inst.query_text.empty()) v.push_back("query_text must be non-empty");

    std::set<std::string> cand_ids;
    for (const auto& c : inst.candidates) {
        if (!cand_ids.insert(c.id).second)
            v.push_back("candidate ids must be unique: " + c.id);
        if (c.surface_forms.empty())
            v.push_back("candidate " + c.id + " must have surface forms");
        for (const auto& s : c.surface_forms)
            if (text::trim(s).empty())
                v.push_back("candidate " + c.id + " has an empty surface form");
    }

    bool option_dataset =
        inst.dataset == DatasetTag::processbank || inst.dataset == DatasetTag::biomrc;
    if (option_dataset && inst.candidates.empty())
        v.push_back("candidates must be non-empty for " + to_string(inst.dataset));
    if (!option_dataset && !inst.candidates.empty())
        v.push_back("candidates must be empty for " + to_string(inst.dataset));

    GoldAnswer::Kind want = option_dataset ? GoldAnswer::Kind::option_ref
                          : inst.dataset == DatasetTag::mashqa ? GoldAnswer::Kind::span_set
                                                               : GoldAnswer::Kind::text_variants;
    if (inst.gold.kind != want) {
        v.push_back("gold variant mismatch for " + to_string(inst.dataset));
    } else {
        switch (inst.gold.kind) {
            case GoldAnswer::Kind::option_ref:
                if (!cand_ids.count(inst.gold.option_ref))
                    v.push_back("gold option_ref names no candidate: " + inst.gold.option_ref);
                break;
            case GoldAnswer::Kind::text_variants:
                if (inst.gold.text_variants.empty())
                    v.push_back("gold text_variants must be non-empty");
                for (const auto& t : inst.gold.text_variants)
                    if (text::trim(t).empty()) v.push_back("gold text variant is empty");
                break;
            case GoldAnswer::Kind::span_set:
                if (inst.gold.span_set.empty())
                    v.push_back("gold span_set must be non-empty");
                if (!ctx.sentence_spans) {
                    v.push_back("span_set gold requires context.sentence_spans");
                } else {
                    for (size_t s : inst.gold.span_set)
                        if (s >= ctx.sentence_spans->size())
                            v.push_back("gold span index out of range");
                }
                break;
        }
    }
    return v;
}

}  // namespace mrceval
