#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrceval/eval.hpp"
#include "mrceval/ingest.hpp"
#include "mrceval/irag.hpp"
#include "mrceval/json_io.hpp"
#include "mrceval/prompt.hpp"
#include "mrceval/runner.hpp"

using namespace mrceval;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int cmd_convert(const std::string& dataset, const std::string& in, const std::string& out) {
    auto result = convert_dataset(dataset_from_string(dataset), in);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    write_jsonl(out, result.records);
    std::cout << "wrote " << result.records.size() << " records to " << out << '\n';
    return 0;
}

int cmd_stats(const std::string& in) {
    auto records = read_jsonl(in);
    auto s = corpus_stats(records);
    std::cout << "# QA Pairs          " << s.qa_pairs << '\n'
              << "Avg Context Length  " << std::fixed << std::setprecision(1)
              << s.avg_context_words << '\n'
              << "Max Context Length  " << s.max_context_words << '\n';
    return 0;
}

int cmd_sample(const std::string& in, size_t size, uint64_t seed, const std::string& out) {
    auto records = read_jsonl(in);
    auto subset = sample_subset(records, SampleSpec{size, seed});
    write_jsonl(out, subset);
    std::cout << "wrote " << subset.size() << " records to " << out << '\n';
    return 0;
}

int cmd_run(const std::string& config_path) {
    ExperimentConfig cfg = config_from_json(json::parse(read_file(config_path)));
    RunReport report = run_experiment(cfg);
    write_run_report(report, cfg.output_dir);
    std::cout << format_score_row(report.label, report.aggregate_scores);
    std::cout << "scored " << report.predictions.size() << " instance(s), "
              << report.failed_instances.size() << " failed\n";
    for (const auto& f : report.failed_instances) std::cerr << "failed: " << f << '\n';
    return report.failed_instances.empty() ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& aggregate_paths) {
    std::vector<LabeledScores> rows;
    for (const auto& p : aggregate_paths) {
        json j = json::parse(read_file(p));
        rows.push_back({j.at("label").get<std::string>(),
                        scoreset_from_json(j.at("aggregate"))});
    }
    std::cout << emit_report_table(rows);
    return 0;
}

int cmd_qual_export(const std::string& run_dir, const std::string& corpus_path, size_t n,
                    uint64_t seed, const std::string& out) {
    RunReport report;
    std::ifstream in(run_dir + "/predictions.jsonl");
    if (!in) throw std::runtime_error("cannot open " + run_dir + "/predictions.jsonl");
    std::string line;
    while (std::getline(in, line))
        if (!text::trim(line).empty())
            report.predictions.push_back(prediction_from_json(json::parse(line)));
    auto corpus = read_jsonl(corpus_path);
    std::string worksheet = export_qualitative_sample(report, corpus, n, seed);
    std::ofstream o(out);
    if (!o) throw std::runtime_error("cannot write " + out);
    o << worksheet;
    std::cout << "wrote " << n << " rows to " << out << '\n';
    return 0;
}

int cmd_qual_tally(const std::string& in) {
    QualTally tally = tally_qualitative(read_file(in));
    std::cout << format_qual_tally(tally);
    return 0;
}

int cmd_prompt_preview(const std::string& corpus_path, const std::string& instance_id,
                       const std::string& strategy_name, const std::string& templates_dir) {
    auto corpus = read_jsonl(corpus_path);
    const MrcInstance* inst = nullptr;
    for (const auto& r : corpus)
        if (r.id == instance_id) inst = &r;
    if (!inst) throw std::runtime_error("no instance with id " + instance_id);
    const TemplateSet templates = TemplateSet::load(templates_dir);
    const PlaceholderProfile profile = profile_for(inst->dataset);
    const StrategyConfig cfg =
        StrategyConfig::defaults_for(strategy_from_string(strategy_name), inst->dataset);
    PromptText prompt;
    switch (cfg.strategy) {
        case Strategy::basic: prompt = render_basic(*inst, profile, templates); break;
        case Strategy::cot: prompt = render_cot(*inst, profile, templates); break;
        case Strategy::ar: prompt = render_ar(*inst, profile, cfg, templates); break;
        case Strategy::implicit_rag: prompt = render_irag(*inst, profile, cfg, templates); break;
    }
    std::cout << prompt.text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual biomedical MRC prompting evaluation harness"};
    app.require_subcommand(1);

    std::string dataset, in_path, out_path, config_path, run_dir, corpus_path, instance_id;
    std::string strategy_name = "basic", templates_dir = "templates";
    std::vector<std::string> aggregate_paths;
    size_t size = 0, n = 50;
    uint64_t seed = 0;

    auto* convert = app.add_subcommand("convert", "Convert a source dataset to canonical JSONL");
    convert->add_option("--dataset", dataset, "processbank|biomrc|mashqa|clicr")->required();
    convert->add_option("--in", in_path, "source file")->required();
    convert->add_option("--out", out_path, "canonical JSONL output")->required();

    auto* stats = app.add_subcommand("stats", "Corpus statistics for a canonical JSONL file");
    stats->add_option("--in", in_path)->required();

    auto* sample = app.add_subcommand("sample", "Seeded subset of a canonical JSONL file");
    sample->add_option("--in", in_path)->required();
    sample->add_option("--size", size)->required();
    sample->add_option("--seed", seed)->required();
    sample->add_option("--out", out_path)->required();

    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("--config", config_path)->required();

    auto* report = app.add_subcommand("report", "Combine aggregate.json files into one table");
    report->add_option("--in", aggregate_paths)->required();

    auto* qual_export =
        app.add_subcommand("qual-export", "Export an annotation worksheet from a run");
    qual_export->add_option("--run", run_dir, "run output directory")->required();
    qual_export->add_option("--corpus", corpus_path)->required();
    qual_export->add_option("--n", n);
    qual_export->add_option("--seed", seed);
    qual_export->add_option("--out", out_path)->required();

    auto* qual_tally = app.add_subcommand("qual-tally", "Tally a judged worksheet");
    qual_tally->add_option("--in", in_path)->required();

    auto* prompt = app.add_subcommand("prompt", "Prompt utilities");
    auto* preview = prompt->add_subcommand("preview", "Render a prompt for one instance");
    preview->add_option("--corpus", corpus_path)->required();
    preview->add_option("--id", instance_id)->required();
    preview->add_option("--strategy", strategy_name);
    preview->add_option("--templates", templates_dir);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*convert) return cmd_convert(dataset, in_path, out_path);
        if (*stats) return cmd_stats(in_path);
        if (*sample) return cmd_sample(in_path, size, seed, out_path);
        if (*run) return cmd_run(config_path);
        if (*report) return cmd_report(aggregate_paths);
        if (*qual_export) return cmd_qual_export(run_dir, corpus_path, n, seed, out_path);
        if (*qual_tally) return cmd_qual_tally(in_path);
        if (*prompt && *preview)
            return cmd_prompt_preview(corpus_path, instance_id, strategy_name, templates_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
