#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrceval/core.hpp"
#include "mrceval/json_io.hpp"

namespace mrceval {

struct CorpusStats {
    size_t qa_pairs = 0;
    double avg_context_words = 0.0;
    size_t max_context_words = 0;
};

struct SampleSpec {
    size_t size = 0;
    uint64_t seed = 0;
};

struct ConvertResult {
    std::vector<MrcInstance> records;
    std::vector<std::string> warnings;
};

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline json load_source(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IngestError(path + ": invalid JSON: " + std::string(e.what()));
    }
    return j;
}

inline const json& record_array(const json& j, const std::string& path) {
    const json& arr = j.is_array() ? j : j.contains("data") ? j.at("data") : j;
    if (!arr.is_array() || arr.empty()) throw IngestError(path + ": no records");
    return arr;
}

template <typename F>
void each_record(const json& arr, const std::string& path, F&& f) {
    for (size_t i = 0; i < arr.size(); ++i) {
        try {
            f(arr[i], i);
        } catch (const IngestError&) {
            throw;
        } catch (const std::exception& e) {
            throw IngestError(path + ": record " + std::to_string(i) +
                              ": schema mismatch: " + e.what());
        }
    }
}

// Sentence boundaries: terminal punctuation followed by whitespace. Used only
// when the source provides no sentence list.
inline std::vector<std::pair<size_t, size_t>> split_sentences(const std::string& s) {
    std::vector<std::pair<size_t, size_t>> spans;
    size_t start = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        bool terminal = (c == '.' || c == '!' || c == '?');
        if (terminal && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1])))) {
            size_t b = start, e = i + 1;
            while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
            if (b < e) spans.emplace_back(b, e);
            start = i + 1;
        }
    }
    size_t b = start;
    while (b < s.size() && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    if (b < s.size()) spans.emplace_back(b, s.size());
    return spans;
}

// Locates each listed sentence in order within the context.
inline std::vector<std::pair<size_t, size_t>> spans_from_sentence_list(
    const std::string& context, const std::vector<std::string>& sentences) {
    std::vector<std::pair<size_t, size_t>> spans;
    size_t cursor = 0;
    for (const auto& sent : sentences) {
        size_t pos = context.find(sent, cursor);
        if (pos == std::string::npos)
            throw std::invalid_argument("sentence not found in context: " + sent.substr(0, 40));
        spans.emplace_back(pos, pos + sent.size());
        cursor = pos + sent.size();
    }
    return spans;
}

inline std::string option_letter(size_t idx) {
    std::string s;
    do {
        s.insert(s.begin(), static_cast<char>('A' + idx % 26));
        idx = idx / 26;
    } while (idx-- > 0);
    return s;
}

}  // namespace detail

// Assumed layout (documented in the README): array of objects with
// id, context, question, options (list of strings), answer (index or letter).
inline ConvertResult convert_processbank(const std::string& path) {
    ConvertResult result;
    const json src = detail::load_source(path);
    detail::each_record(detail::record_array(src, path), path, [&](const json& r, size_t i) {
        MrcInstance inst;
        inst.dataset = DatasetTag::processbank;
        inst.id = r.contains("id") ? r.at("id").get<std::string>()
                                   : "processbank-" + std::to_string(i);
        inst.context = Context::make(inst.id + "-ctx", r.at("context").get<std::string>());
        inst.query_text = r.at("question").get<std::string>();
        const auto options = r.at("options").get<std::vector<std::string>>();
        if (options.empty()) throw std::invalid_argument("options must be non-empty");
        for (size_t k = 0; k < options.size(); ++k)
            inst.candidates.push_back({detail::option_letter(k), {options[k]}});
        const json& ans = r.at("answer");
        std::string gold_id;
        if (ans.is_number_unsigned() || ans.is_number_integer()) {
            size_t idx = ans.get<size_t>();
            if (idx >= options.size()) throw std::invalid_argument("answer index out of range");
            gold_id = detail::option_letter(idx);
        } else {
            gold_id = ans.get<std::string>();
        }
        inst.gold = GoldAnswer::option(gold_id);
        result.records.push_back(std::move(inst));
    });
    return result;
}

// Assumed layout: array of objects with abstract, title, entities_list
// (strings "@entityN :: surface"), answer (same format). Duplicate ids merge
// their surface forms into one candidate.
inline ConvertResult convert_biomrc(const std::string& path) {
    ConvertResult result;
    const json src = detail::load_source(path);

    auto parse_entity = [](const std::string& s) -> std::pair<std::string, std::string> {
        size_t sep = s.find(" :: ");
        if (sep == std::string::npos)
            throw std::invalid_argument("entity entry missing ' :: ' separator: " + s);
        return {text::trim(s.substr(0, sep)), text::trim(s.substr(sep + 4))};
    };

    detail::each_record(detail::record_array(src, path), path, [&](const json& r, size_t i) {
        MrcInstance inst;
        inst.dataset = DatasetTag::biomrc;
        inst.id = r.contains("id") ? r.at("id").get<std::string>()
                                   : "biomrc-" + std::to_string(i);
        inst.context = Context::make(inst.id + "-ctx", r.at("abstract").get<std::string>());
        inst.query_text = r.at("title").get<std::string>();

        std::map<std::string, size_t> by_id;
        for (const auto& e : r.at("entities_list")) {
            auto [id, surface] = parse_entity(e.get<std::string>());
            auto it = by_id.find(id);
            if (it == by_id.end()) {
                by_id.emplace(id, inst.candidates.size());
                inst.candidates.push_back({id, {surface}});
            } else {
                auto& forms = inst.candidates[it->second].surface_forms;
                if (std::find(forms.begin(), forms.end(), surface) == forms.end())
                    forms.push_back(surface);
            }
        }
        auto [gold_id, gold_surface] = parse_entity(r.at("answer").get<std::string>());
        if (!by_id.count(gold_id)) {
            // The source claims candidates always contain the answer; it does not
            // always hold. Keep the instance and register the gold entity.
            result.warnings.push_back(inst.id + ": gold entity " + gold_id +
                                      " absent from candidate list");
            inst.candidates.push_back({gold_id, {gold_surface}});
        }
        inst.gold = GoldAnswer::option(gold_id);
        result.records.push_back(std::move(inst));
    });
    return result;
}

// Assumed layout: array of objects with context, optional sentences (list of
// strings in context order), qas (id, question, answer_sents: sentence indices).
inline ConvertResult convert_mashqa(const std::string& path) {
    ConvertResult result;
    const json src = detail::load_source(path);
    size_t article = 0;
    detail::each_record(detail::record_array(src, path), path, [&](const json& r, size_t i) {
        const std::string ctx_text = r.at("context").get<std::string>();
        std::vector<std::pair<size_t, size_t>> spans;
        if (r.contains("sentences"))
            spans = detail::spans_from_sentence_list(
                ctx_text, r.at("sentences").get<std::vector<std::string>>());
        else
            spans = detail::split_sentences(ctx_text);
        if (spans.empty()) throw std::invalid_argument("context has no sentences");
        Context ctx = Context::make("mashqa-ctx-" + std::to_string(article), ctx_text, spans);
        for (const auto& qa : r.at("qas")) {
            MrcInstance inst;
            inst.dataset = DatasetTag::mashqa;
            inst.id = qa.contains("id")
                          ? qa.at("id").get<std::string>()
                          : "mashqa-" + std::to_string(i) + "-" + std::to_string(result.records.size());
            inst.context = ctx;
            inst.query_text = qa.at("question").get<std::string>();
            auto sents = qa.at("answer_sents").get<std::vector<size_t>>();
            if (sents.empty()) throw std::invalid_argument("answer_sents must be non-empty");
            for (size_t s : sents)
                if (s >= spans.size())
                    throw std::invalid_argument("gold sentence index out of range: " +
                                                std::to_string(s));
            inst.gold = GoldAnswer::spans(std::move(sents));
            result.records.push_back(std::move(inst));
        }
        ++article;
    });
    if (result.records.empty()) throw IngestError(path + ": no records");
    return result;
}

// Assumed layout: array of objects with context, qas (id, query, answers:
// strings or {"text": ...} objects). One instance per query.
inline ConvertResult convert_clicr(const std::string& path) {
    ConvertResult result;
    const json src = detail::load_source(path);
    size_t report = 0;
    detail::each_record(detail::record_array(src, path), path, [&](const json& r, size_t i) {
        Context ctx = Context::make("clicr-ctx-" + std::to_string(report),
                                    r.at("context").get<std::string>());
        for (const auto& qa : r.at("qas")) {
            MrcInstance inst;
            inst.dataset = DatasetTag::clicr;
            inst.id = qa.contains("id")
                          ? qa.at("id").get<std::string>()
                          : "clicr-" + std::to_string(i) + "-" + std::to_string(result.records.size());
            inst.context = ctx;
            inst.query_text = qa.at("query").get<std::string>();
            std::vector<std::string> variants;
            for (const auto& a : qa.at("answers"))
                variants.push_back(a.is_string() ? a.get<std::string>()
                                                 : a.at("text").get<std::string>());
            if (variants.empty()) throw std::invalid_argument("answers must be non-empty");
            for (const auto& v : variants)
                if (text::trim(v).empty())
                    throw std::invalid_argument("answer variant is empty");
            inst.gold = GoldAnswer::variants(std::move(variants));
            result.records.push_back(std::move(inst));
        }
        ++report;
    });
    if (result.records.empty()) throw IngestError(path + ": no records");
    return result;
}

inline ConvertResult convert_dataset(DatasetTag tag, const std::string& path) {
    switch (tag) {
        case DatasetTag::processbank: return convert_processbank(path);
        case DatasetTag::biomrc: return convert_biomrc(path);
        case DatasetTag::mashqa: return convert_mashqa(path);
        case DatasetTag::clicr: return convert_clicr(path);
    }
    throw std::logic_error("bad DatasetTag");
}

inline CorpusStats corpus_stats(const std::vector<MrcInstance>& records) {
    if (records.empty()) throw std::invalid_argument("corpus_stats: empty input");
    CorpusStats s;
    s.qa_pairs = records.size();
    size_t total = 0;
    for (const auto& r : records) {
        total += r.context.word_count;
        s.max_context_words = std::max(s.max_context_words, r.context.word_count);
    }
    s.avg_context_words = static_cast<double>(total) / static_cast<double>(records.size());
    return s;
}

// Seeded sample without replacement. Generator pinned to mt19937_64 with a
// partial Fisher-Yates shuffle over id-sorted records ("mt19937_64-fy-v1" in
// run snapshots); output ordered by instance id.
inline std::vector<MrcInstance> sample_subset(const std::vector<MrcInstance>& records,
                                              const SampleSpec& spec) {
    if (spec.size > records.size())
        throw std::invalid_argument("sample size " + std::to_string(spec.size) +
                                    " exceeds corpus size " + std::to_string(records.size()));
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return records[a].id < records[b].id; });

    std::mt19937_64 gen(spec.seed);
    for (size_t i = 0; i < spec.size; ++i) {
        size_t j = i + static_cast<size_t>(gen() % (order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::vector<MrcInstance> out;
    out.reserve(spec.size);
    for (size_t i = 0; i < spec.size; ++i) out.push_back(records[order[i]]);
    std::sort(out.begin(), out.end(),
              [](const MrcInstance& a, const MrcInstance& b) { return a.id < b.id; });
    return out;
}

}  // namespace mrceval
