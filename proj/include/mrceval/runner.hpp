#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mrceval/backend.hpp"
#include "mrceval/eval.hpp"
#include "mrceval/ingest.hpp"
#include "mrceval/irag.hpp"
#include "mrceval/json_io.hpp"
#include "mrceval/live_backend.hpp"
#include "mrceval/prompt.hpp"

namespace mrceval {

struct BackendConfig {
    std::string type = "scripted";  // scripted | oracle | live
    std::map<std::string, std::string> script;  // digest or prompt -> text
    bool script_fallback = true;
    LiveEndpointConfig endpoint;
    RetryPolicy retry;
};

struct ExperimentConfig {
    DatasetTag dataset = DatasetTag::processbank;
    std::string corpus_path;
    StrategyConfig strategy;
    std::optional<SampleSpec> sample;  // absent = full test set
    BackendConfig backend;
    DecodingParams decoding;
    MatchPolicy::Mode match_mode = MatchPolicy::Mode::strict;
    std::map<std::string, std::string> aliases;
    std::string output_dir;
    std::string cache_dir;  // default: <output_dir>/cache
    std::string templates_dir = "templates";
    size_t parallelism = 4;
    size_t context_word_budget = 24000;  // ~ a 32k-token window, in words
    size_t chunk_overlap = 50;
    std::string label;  // report row label; default "<Strategy> (<size>|Full)"
};

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.dataset = dataset_from_string(j.at("dataset").get<std::string>());
    cfg.corpus_path = j.at("corpus").get<std::string>();
    cfg.strategy = StrategyConfig::defaults_for(
        strategy_from_string(j.at("strategy").get<std::string>()), cfg.dataset);
    if (j.contains("strategy_overrides")) {
        const json& o = j.at("strategy_overrides");
        if (o.contains("ar_num_pairs")) cfg.strategy.ar_num_pairs = o.at("ar_num_pairs");
        if (o.contains("irag_num_sections"))
            cfg.strategy.irag_num_sections = o.at("irag_num_sections");
        if (o.contains("irag_lower_words"))
            cfg.strategy.irag_lower_words = o.at("irag_lower_words");
        if (o.contains("irag_upper_words"))
            cfg.strategy.irag_upper_words = o.at("irag_upper_words");
    }
    if (j.contains("sample"))
        cfg.sample = SampleSpec{j.at("sample").at("size").get<size_t>(),
                                j.at("sample").at("seed").get<uint64_t>()};
    if (j.contains("backend")) {
        const json& b = j.at("backend");
        cfg.backend.type = b.value("type", "scripted");
        if (b.contains("script"))
            cfg.backend.script = b.at("script").get<std::map<std::string, std::string>>();
        cfg.backend.script_fallback = b.value("script_fallback", true);
        if (b.contains("endpoint")) {
            const json& e = b.at("endpoint");
            cfg.backend.endpoint.base_url = e.value("base_url", cfg.backend.endpoint.base_url);
            cfg.backend.endpoint.path = e.value("path", cfg.backend.endpoint.path);
            cfg.backend.endpoint.api_key_env =
                e.value("api_key_env", cfg.backend.endpoint.api_key_env);
            cfg.backend.endpoint.timeout_seconds =
                e.value("timeout_seconds", cfg.backend.endpoint.timeout_seconds);
        }
        if (b.contains("retry")) {
            cfg.backend.retry.max_attempts = b.at("retry").value("max_attempts", 4);
            cfg.backend.retry.base_delay_ms = b.at("retry").value("base_delay_ms", 250);
        }
    }
    if (j.contains("decoding")) {
        const json& d = j.at("decoding");
        cfg.decoding.model_id = d.value("model_id", cfg.decoding.model_id);
        cfg.decoding.temperature = d.value("temperature", cfg.decoding.temperature);
        cfg.decoding.frequency_penalty =
            d.value("frequency_penalty", cfg.decoding.frequency_penalty);
        cfg.decoding.presence_penalty =
            d.value("presence_penalty", cfg.decoding.presence_penalty);
        cfg.decoding.max_tokens = d.value("max_tokens", cfg.decoding.max_tokens);
    }
    if (j.contains("match_mode"))
        cfg.match_mode = j.at("match_mode") == "lenient" ? MatchPolicy::Mode::lenient
                                                         : MatchPolicy::Mode::strict;
    if (j.contains("aliases"))
        cfg.aliases = j.at("aliases").get<std::map<std::string, std::string>>();
    cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.cache_dir = j.value("cache_dir", cfg.output_dir + "/cache");
    cfg.templates_dir = j.value("templates_dir", cfg.templates_dir);
    cfg.parallelism = j.value("parallelism", cfg.parallelism);
    cfg.context_word_budget = j.value("context_word_budget", cfg.context_word_budget);
    cfg.chunk_overlap = j.value("chunk_overlap", cfg.chunk_overlap);
    cfg.label = j.value("label", std::string());
    return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
    json j{{"dataset", to_string(cfg.dataset)},
           {"corpus", cfg.corpus_path},
           {"strategy", to_string(cfg.strategy.strategy)},
           {"strategy_overrides",
            {{"ar_num_pairs", cfg.strategy.ar_num_pairs},
             {"irag_num_sections", cfg.strategy.irag_num_sections},
             {"irag_lower_words", cfg.strategy.irag_lower_words},
             {"irag_upper_words", cfg.strategy.irag_upper_words}}},
           {"backend",
            {{"type", cfg.backend.type},
             {"script_fallback", cfg.backend.script_fallback},
             {"retry",
              {{"max_attempts", cfg.backend.retry.max_attempts},
               {"base_delay_ms", cfg.backend.retry.base_delay_ms}}}}},
           {"decoding",
            {{"model_id", cfg.decoding.model_id},
             {"temperature", cfg.decoding.temperature},
             {"frequency_penalty", cfg.decoding.frequency_penalty},
             {"presence_penalty", cfg.decoding.presence_penalty},
             {"max_tokens", cfg.decoding.max_tokens}}},
           {"match_mode", cfg.match_mode == MatchPolicy::Mode::lenient ? "lenient" : "strict"},
           {"output_dir", cfg.output_dir},
           {"cache_dir", cfg.cache_dir},
           {"templates_dir", cfg.templates_dir},
           {"parallelism", cfg.parallelism},
           {"context_word_budget", cfg.context_word_budget},
           {"chunk_overlap", cfg.chunk_overlap},
           {"sampler", "mt19937_64-fy-v1"},
           {"label", cfg.label}};
    if (cfg.sample)
        j["sample"] = {{"size", cfg.sample->size}, {"seed", cfg.sample->seed}};
    return j;
}

struct DeviationCounters {
    size_t parse_fallbacks = 0;
    size_t limit_violations = 0;
    size_t ungrounded_sections = 0;
    size_t ambiguity_flags = 0;
};

struct RunReport {
    std::vector<Prediction> predictions;  // sorted by instance id
    std::vector<ScoreSet> scores;         // parallel to predictions
    ScoreSet aggregate_scores;
    DeviationCounters deviations;
    Usage usage_totals;
    std::vector<std::string> failed_instances;
    json config_snapshot;
    std::string label;
};

namespace detail {

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::vector<std::pair<std::string, std::string>> parse_qa_pairs(
    const std::string& raw) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::optional<std::string> pending_q;
    for (auto line : text::split_lines(raw)) {
        std::string t = text::trim(line);
        if (t.rfind("Q:", 0) == 0) {
            pending_q = text::trim(t.substr(2));
        } else if (t.rfind("A:", 0) == 0 && pending_q) {
            pairs.emplace_back(*pending_q, text::trim(t.substr(2)));
            pending_q.reset();
        }
    }
    return pairs;
}

inline std::shared_ptr<Backend> make_backend(const ExperimentConfig& cfg,
                                             const std::vector<MrcInstance>& corpus) {
    std::shared_ptr<Backend> inner;
    if (cfg.backend.type == "oracle")
        inner = std::make_shared<OracleBackend>(corpus);
    else if (cfg.backend.type == "scripted")
        inner = std::make_shared<ScriptedBackend>(cfg.backend.script,
                                                  cfg.backend.script_fallback);
    else if (cfg.backend.type == "live")
        inner = std::make_shared<LiveBackend>(cfg.backend.endpoint);
    else
        throw std::invalid_argument("unknown backend type: " + cfg.backend.type);
    auto cache = std::make_shared<ResponseCache>(cfg.cache_dir);
    return std::make_shared<CachingBackend>(inner, cache, cfg.backend.retry);
}

}  // namespace detail

inline Prediction run_single_call_strategy(const MrcInstance& inst,
                                           const PlaceholderProfile& profile,
                                           const StrategyConfig& cfg,
                                           const DecodingParams& params, Backend& backend,
                                           const TemplateSet& templates) {
    PromptText prompt;
    switch (cfg.strategy) {
        case Strategy::basic: prompt = render_basic(inst, profile, templates); break;
        case Strategy::cot: prompt = render_cot(inst, profile, templates); break;
        case Strategy::ar: prompt = render_ar(inst, profile, cfg, templates); break;
        case Strategy::implicit_rag:
            throw std::logic_error("implicit_rag goes through run_implicit_rag");
    }
    CompletionRequest req;
    req.prompt = prompt;
    req.params = params;
    req.request_tag = inst.id + "|" + to_string(cfg.strategy) + "|0";
    CompletionResponse resp = backend.complete(req);

    Prediction pred;
    pred.instance_id = inst.id;
    pred.strategy = cfg.strategy;
    pred.raw_output = resp.text;
    pred.call_count = 1;
    pred.usage = {resp.prompt_words, resp.completion_words};
    pred.latency_ms = resp.latency_ms;
    if (cfg.strategy == Strategy::ar) pred.qa_pairs = detail::parse_qa_pairs(resp.text);
    ParsedAnswer parsed = parse_final_answer(resp.text);
    pred.parsed_answer = parsed.answer;
    pred.parse_fallback = parsed.fallback;
    return pred;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
    if (!std::filesystem::exists(cfg.corpus_path))
        throw std::invalid_argument("corpus path does not exist: " + cfg.corpus_path);
    const TemplateSet templates = TemplateSet::load(cfg.templates_dir);
    std::filesystem::create_directories(cfg.output_dir);

    std::vector<MrcInstance> corpus = read_jsonl(cfg.corpus_path);
    for (const auto& inst : corpus) {
        auto violations = validate_instance(inst);
        if (!violations.empty())
            throw std::invalid_argument("invalid instance " + inst.id + ": " +
                                        violations.front());
        if (inst.dataset != cfg.dataset)
            throw std::invalid_argument("instance " + inst.id + " has dataset " +
                                        to_string(inst.dataset) + ", expected " +
                                        to_string(cfg.dataset));
    }
    std::vector<MrcInstance> instances =
        cfg.sample ? sample_subset(corpus, *cfg.sample) : corpus;
    std::sort(instances.begin(), instances.end(),
              [](const MrcInstance& a, const MrcInstance& b) { return a.id < b.id; });

    auto backend = detail::make_backend(cfg, corpus);
    const PlaceholderProfile profile = profile_for(cfg.dataset);
    const MatchPolicy policy{cfg.match_mode, cfg.aliases};

    std::vector<std::optional<Prediction>> preds(instances.size());
    std::vector<std::string> failures(instances.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= instances.size()) return;
            const MrcInstance& inst = instances[i];
            try {
                if (cfg.strategy.strategy == Strategy::implicit_rag)
                    preds[i] = run_implicit_rag(inst, profile, cfg.strategy, *backend,
                                                templates, cfg.context_word_budget,
                                                cfg.chunk_overlap);
                else
                    preds[i] = run_single_call_strategy(inst, profile, cfg.strategy,
                                                        cfg.decoding, *backend, templates);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    {
        std::vector<std::thread> pool;
        size_t n = std::max<size_t>(1, cfg.parallelism);
        for (size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunReport report;
    report.config_snapshot = config_to_json(cfg);
    report.label = cfg.label.empty()
                       ? to_string(cfg.strategy.strategy) + " (" +
                             (cfg.sample ? std::to_string(cfg.sample->size) : "Full") + ")"
                       : cfg.label;
    for (size_t i = 0; i < instances.size(); ++i) {
        if (!preds[i]) {
            report.failed_instances.push_back(instances[i].id + ": " + failures[i]);
            continue;
        }
        Prediction& p = *preds[i];
        report.deviations.parse_fallbacks += p.parse_fallback ? 1 : 0;
        for (const auto& s : p.sections) {
            report.deviations.limit_violations += s.within_limits ? 0 : 1;
            report.deviations.ungrounded_sections += s.grounded ? 0 : 1;
        }
        if (cfg.dataset == DatasetTag::processbank || cfg.dataset == DatasetTag::biomrc) {
            auto m = match_option(p.parsed_answer, instances[i].candidates, policy);
            report.deviations.ambiguity_flags += m.ambiguous ? 1 : 0;
        }
        report.usage_totals.prompt_words += p.usage.prompt_words;
        report.usage_totals.completion_words += p.usage.completion_words;
        report.scores.push_back(score_instance(p, instances[i], policy));
        report.predictions.push_back(std::move(p));
    }
    if (!report.scores.empty()) report.aggregate_scores = aggregate(report.scores);
    return report;
}

inline std::string format_score_row(const std::string& label, const ScoreSet& s);

inline void write_run_report(const RunReport& report, const std::filesystem::path& outdir) {
    std::filesystem::create_directories(outdir);
    {
        std::ostringstream buf;
        for (const auto& p : report.predictions) buf << to_json(p).dump() << '\n';
        detail::atomic_write(outdir / "predictions.jsonl", buf.str());
    }
    {
        std::ostringstream buf;
        for (size_t i = 0; i < report.scores.size(); ++i) {
            json j = to_json(report.scores[i]);
            j["instance_id"] = report.predictions[i].instance_id;
            buf << j.dump() << '\n';
        }
        detail::atomic_write(outdir / "scores.jsonl", buf.str());
    }
    {
        json j{{"label", report.label},
               {"aggregate", to_json(report.aggregate_scores)},
               {"instances_scored", report.predictions.size()},
               {"instances_failed", report.failed_instances.size()},
               {"failed", report.failed_instances},
               {"deviations",
                {{"parse_fallbacks", report.deviations.parse_fallbacks},
                 {"limit_violations", report.deviations.limit_violations},
                 {"ungrounded_sections", report.deviations.ungrounded_sections},
                 {"ambiguity_flags", report.deviations.ambiguity_flags}}},
               {"usage",
                {{"prompt_words", report.usage_totals.prompt_words},
                 {"completion_words", report.usage_totals.completion_words}}},
               {"config", report.config_snapshot}};
        detail::atomic_write(outdir / "aggregate.json", j.dump(2) + "\n");
    }
    detail::atomic_write(outdir / "report.txt",
                         format_score_row(report.label, report.aggregate_scores) + "\n");
}

// --- report tables -----------------------------------------------------------

struct LabeledScores {
    std::string label;
    ScoreSet scores;
};

inline std::string emit_report_table(const std::vector<LabeledScores>& rows) {
    if (rows.empty()) throw std::invalid_argument("emit_report_table: no reports");
    struct Col {
        const char* header;
        std::optional<double> ScoreSet::* field;
    };
    static const Col all_cols[] = {{"Accuracy", &ScoreSet::accuracy},
                                   {"EM", &ScoreSet::em},
                                   {"F1", &ScoreSet::f1},
                                   {"P", &ScoreSet::precision},
                                   {"R", &ScoreSet::recall}};
    std::vector<Col> cols;
    for (const auto& c : all_cols) {
        bool first_has = (rows.front().scores.*(c.field)).has_value();
        for (const auto& r : rows)
            if ((r.scores.*(c.field)).has_value() != first_has)
                throw std::invalid_argument("emit_report_table: heterogeneous metrics");
        if (first_has) cols.push_back(c);
    }
    size_t label_w = 6;
    for (const auto& r : rows) label_w = std::max(label_w, r.label.size());

    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_w + 2)) << "Method";
    for (const auto& c : cols) out << std::setw(10) << c.header;
    out << '\n';
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(label_w + 2)) << r.label;
        for (const auto& c : cols) {
            std::ostringstream v;
            v << std::fixed << std::setprecision(2) << *(r.scores.*(c.field));
            out << std::setw(10) << v.str();
        }
        out << '\n';
    }
    return out.str();
}

inline std::string format_score_row(const std::string& label, const ScoreSet& s) {
    return emit_report_table({{label, s}});
}

// --- qualitative workflow (annotation export and tally) ----------------------

namespace detail {
inline std::string tsv_safe(std::string_view s) {
    std::string out = text::collapse_ws(s);
    for (char& c : out)
        if (c == '\t') c = ' ';
    return out;
}
}  // namespace detail

// Seeded worksheet of n instances from an implicit-RAG run: query, sections,
// model answer, gold answer, and empty judgment columns.
inline std::string export_qualitative_sample(const RunReport& report,
                                             const std::vector<MrcInstance>& corpus, size_t n,
                                             uint64_t seed) {
    std::vector<const Prediction*> with_sections;
    for (const auto& p : report.predictions)
        if (!p.sections.empty()) with_sections.push_back(&p);
    if (with_sections.empty())
        throw std::invalid_argument("run has no stored sections (not an implicit_rag run?)");
    if (n > with_sections.size())
        throw std::invalid_argument("sample size exceeds run size");

    std::map<std::string, const MrcInstance*> by_id;
    for (const auto& inst : corpus) by_id.emplace(inst.id, &inst);

    std::mt19937_64 gen(seed);
    for (size_t i = 0; i < n; ++i) {
        size_t j = i + static_cast<size_t>(gen() % (with_sections.size() - i));
        std::swap(with_sections[i], with_sections[j]);
    }
    with_sections.resize(n);
    std::sort(with_sections.begin(), with_sections.end(),
              [](const Prediction* a, const Prediction* b) {
                  return a->instance_id < b->instance_id;
              });

    std::ostringstream out;
    out << "instance_id\tquery\tgold_answer\tmodel_answer\tfinal_answer_correct";
    size_t max_secs = 0;
    for (const auto* p : with_sections) max_secs = std::max(max_secs, p->sections.size());
    for (size_t k = 1; k <= max_secs; ++k)
        out << "\tsection_" << k << "\tsection_" << k << "_relevance";
    out << '\n';
    for (const auto* p : with_sections) {
        auto it = by_id.find(p->instance_id);
        if (it == by_id.end())
            throw std::invalid_argument("prediction for unknown instance " + p->instance_id);
        const MrcInstance& inst = *it->second;
        out << p->instance_id << '\t' << detail::tsv_safe(inst.query_text) << '\t'
            << detail::tsv_safe(OracleBackend::gold_text(inst)) << '\t'
            << detail::tsv_safe(p->parsed_answer) << '\t';
        for (const auto& s : p->sections) out << '\t' << detail::tsv_safe(s.text) << '\t';
        out << '\n';
    }
    return out.str();
}

struct QualTally {
    size_t correct_total = 0;
    size_t incorrect_total = 0;
    size_t correct_with_right_section = 0;
    size_t incorrect_with_right_section = 0;
};

inline int percent_of(size_t num, size_t den) {
    return static_cast<int>(
        std::lround(100.0 * static_cast<double>(num) / static_cast<double>(den)));
}

// Table layout matching the qualitative-analysis summary: per correctness
// split, the share of instances with at least one relevant section and its
// complement, at integer precision. Empty splits render as em-dash cells.
inline std::string format_qual_tally(const QualTally& t) {
    auto cell = [](size_t num, std::optional<size_t> den) {
        if (!den || *den == 0) return std::string("—");
        return std::to_string(percent_of(num, *den)) + "%";
    };
    std::ostringstream out;
    out << "Pattern        ✓ (" << t.correct_total << ")  ✗ (" << t.incorrect_total << ")\n";
    out << "Right Section  " << cell(t.correct_with_right_section, t.correct_total) << "  "
        << cell(t.incorrect_with_right_section, t.incorrect_total) << "\n";
    out << "Wrong Section  "
        << cell(t.correct_total - t.correct_with_right_section, t.correct_total) << "  "
        << cell(t.incorrect_total - t.incorrect_with_right_section, t.incorrect_total)
        << "\n";
    return out.str();
}

inline bool parse_bool_cell(const std::string& raw, const std::string& what,
                            const std::string& row_id) {
    std::string v = text::to_lower(text::trim(raw));
    if (v == "1" || v == "true" || v == "y" || v == "yes" || v == "right" || v == "correct")
        return true;
    if (v == "0" || v == "false" || v == "n" || v == "no" || v == "wrong" || v == "incorrect")
        return false;
    throw std::invalid_argument("unjudged or unreadable " + what + " for row " + row_id +
                                ": '" + raw + "'");
}

// Tallies a fully judged worksheet. Unjudged rows are reported by id.
inline QualTally tally_qualitative(const std::string& worksheet_tsv) {
    auto lines = text::split_lines(worksheet_tsv);
    if (lines.empty() || text::trim(lines.front()).empty())
        throw std::invalid_argument("empty worksheet");
    auto split_tabs = [](std::string_view line) {
        std::vector<std::string> cells;
        size_t start = 0;
        for (;;) {
            size_t tab = line.find('\t', start);
            if (tab == std::string_view::npos) {
                cells.emplace_back(line.substr(start));
                break;
            }
            cells.emplace_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        return cells;
    };
    const auto header = split_tabs(lines.front());
    std::map<std::string, size_t> col;
    for (size_t i = 0; i < header.size(); ++i) col[text::trim(header[i])] = i;
    if (!col.count("instance_id") || !col.count("final_answer_correct"))
        throw std::invalid_argument("worksheet missing required columns");

    QualTally tally;
    std::vector<std::string> unjudged;
    for (size_t li = 1; li < lines.size(); ++li) {
        if (text::trim(lines[li]).empty()) continue;
        auto cells = split_tabs(lines[li]);
        auto get = [&](const std::string& name) -> std::string {
            auto it = col.find(name);
            if (it == col.end() || it->second >= cells.size()) return "";
            return cells[it->second];
        };
        const std::string id = get("instance_id");
        try {
            bool correct = parse_bool_cell(get("final_answer_correct"),
                                           "final_answer_correct", id);
            bool any_right = false, any_section = false;
            for (size_t k = 1;; ++k) {
                std::string sec = get("section_" + std::to_string(k));
                if (text::trim(sec).empty()) break;
                any_section = true;
                if (parse_bool_cell(get("section_" + std::to_string(k) + "_relevance"),
                                    "section relevance", id))
                    any_right = true;
            }
            if (!any_section)
                throw std::invalid_argument("row " + id + " has no sections");
            if (correct) {
                ++tally.correct_total;
                tally.correct_with_right_section += any_right ? 1 : 0;
            } else {
                ++tally.incorrect_total;
                tally.incorrect_with_right_section += any_right ? 1 : 0;
            }
        } catch (const std::invalid_argument&) {
            unjudged.push_back(id);
        }
    }
    if (!unjudged.empty()) {
        std::string msg = "unjudged rows:";
        for (const auto& id : unjudged) msg += " " + id;
        throw std::invalid_argument(msg);
    }
    return tally;
}

}  // namespace mrceval
