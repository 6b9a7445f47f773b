#pragma once

// Canonical record format: newline-delimited JSON, one MrcInstance per line.
// Gold is a tagged object {"kind": ..., "value": ...}.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrceval/core.hpp"

namespace mrceval {

using json = nlohmann::ordered_json;

inline json to_json(const Context& c) {
    json j{{"id", c.id}, {"text", c.text}};
    if (c.sentence_spans) {
        json spans = json::array();
        for (auto [b, e] : *c.sentence_spans) spans.push_back(json::array({b, e}));
        j["sentence_spans"] = spans;
    }
    j["word_count"] = c.word_count;
    return j;
}

inline json to_json(const GoldAnswer& g) {
    switch (g.kind) {
        case GoldAnswer::Kind::option_ref:
            return json{{"kind", "option_ref"}, {"value", g.option_ref}};
        case GoldAnswer::Kind::text_variants:
            return json{{"kind", "text_variants"}, {"value", g.text_variants}};
        case GoldAnswer::Kind::span_set:
            return json{{"kind", "span_set"}, {"value", g.span_set}};
    }
    throw std::logic_error("bad gold kind");
}

inline json to_json(const MrcInstance& inst) {
    json cands = json::array();
    for (const auto& c : inst.candidates)
        cands.push_back(json{{"id", c.id}, {"surface_forms", c.surface_forms}});
    return json{{"id", inst.id},
                {"dataset", to_string(inst.dataset)},
                {"context", to_json(inst.context)},
                {"query_text", inst.query_text},
                {"candidates", cands},
                {"gold", to_json(inst.gold)}};
}

inline MrcInstance instance_from_json(const json& j) {
    MrcInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    const json& jc = j.at("context");
    inst.context.id = jc.at("id").get<std::string>();
    inst.context.text = jc.at("text").get<std::string>();
    if (jc.contains("sentence_spans")) {
        std::vector<std::pair<size_t, size_t>> spans;
        for (const auto& s : jc.at("sentence_spans"))
            spans.emplace_back(s.at(0).get<size_t>(), s.at(1).get<size_t>());
        inst.context.sentence_spans = std::move(spans);
    }
    inst.context.word_count = jc.at("word_count").get<size_t>();
    inst.query_text = j.at("query_text").get<std::string>();
    for (const auto& c : j.at("candidates")) {
        Candidate cand;
        cand.id = c.at("id").get<std::string>();
        cand.surface_forms = c.at("surface_forms").get<std::vector<std::string>>();
        inst.candidates.push_back(std::move(cand));
    }
    const json& g = j.at("gold");
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "option_ref")
        inst.gold = GoldAnswer::option(g.at("value").get<std::string>());
    else if (kind == "text_variants")
        inst.gold = GoldAnswer::variants(g.at("value").get<std::vector<std::string>>());
    else if (kind == "span_set")
        inst.gold = GoldAnswer::spans(g.at("value").get<std::vector<size_t>>());
    else
        throw std::invalid_argument("unknown gold kind: " + kind);
    return inst;
}

inline json to_json(const Prediction& p) {
    json secs = json::array();
    for (const auto& s : p.sections)
        secs.push_back(json{{"index", s.index},
                            {"text", s.text},
                            {"word_count", s.word_count},
                            {"grounded", s.grounded},
                            {"within_limits", s.within_limits}});
    json pairs = json::array();
    for (const auto& [q, a] : p.qa_pairs) pairs.push_back(json::array({q, a}));
    return json{{"instance_id", p.instance_id},
                {"strategy", to_string(p.strategy)},
                {"raw_output", p.raw_output},
                {"parsed_answer", p.parsed_answer},
                {"sections", secs},
                {"qa_pairs", pairs},
                {"call_count", p.call_count},
                {"usage", {{"prompt_words", p.usage.prompt_words},
                           {"completion_words", p.usage.completion_words}}},
                {"latency_ms", p.latency_ms},
                {"parse_fallback", p.parse_fallback}};
}

inline Prediction prediction_from_json(const json& j) {
    Prediction p;
    p.instance_id = j.at("instance_id").get<std::string>();
    p.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    p.raw_output = j.at("raw_output").get<std::string>();
    p.parsed_answer = j.at("parsed_answer").get<std::string>();
    for (const auto& s : j.at("sections")) {
        RetrievedSection sec;
        sec.index = s.at("index").get<size_t>();
        sec.text = s.at("text").get<std::string>();
        sec.word_count = s.at("word_count").get<size_t>();
        sec.grounded = s.at("grounded").get<bool>();
        sec.within_limits = s.at("within_limits").get<bool>();
        p.sections.push_back(std::move(sec));
    }
    for (const auto& q : j.at("qa_pairs"))
        p.qa_pairs.emplace_back(q.at(0).get<std::string>(), q.at(1).get<std::string>());
    p.call_count = j.at("call_count").get<size_t>();
    p.usage.prompt_words = j.at("usage").at("prompt_words").get<size_t>();
    p.usage.completion_words = j.at("usage").at("completion_words").get<size_t>();
    p.latency_ms = j.at("latency_ms").get<int64_t>();
    p.parse_fallback = j.value("parse_fallback", false);
    return p;
}

inline json to_json(const ScoreSet& s) {
    json j = json::object();
    if (s.accuracy) j["accuracy"] = *s.accuracy;
    if (s.em) j["em"] = *s.em;
    if (s.precision) j["precision"] = *s.precision;
    if (s.recall) j["recall"] = *s.recall;
    if (s.f1) j["f1"] = *s.f1;
    return j;
}

inline ScoreSet scoreset_from_json(const json& j) {
    ScoreSet s;
    if (j.contains("accuracy")) s.accuracy = j.at("accuracy").get<double>();
    if (j.contains("em")) s.em = j.at("em").get<double>();
    if (j.contains("precision")) s.precision = j.at("precision").get<double>();
    if (j.contains("recall")) s.recall = j.at("recall").get<double>();
    if (j.contains("f1")) s.f1 = j.at("f1").get<double>();
    return s;
}

inline std::vector<MrcInstance> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<MrcInstance> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(instance_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline void write_jsonl(const std::string& path, const std::vector<MrcInstance>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace mrceval
