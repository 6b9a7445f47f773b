#pragma once

// Shared test helpers: synthetic instances for each dataset shape and scratch
// directory management.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mrceval/core.hpp"
#include "mrceval/prompt.hpp"

namespace testsupport {

using namespace mrceval;

inline std::filesystem::path scratch_dir(const std::string& name) {
    std::filesystem::path p = std::filesystem::path(MRCEVAL_SCRATCH_DIR) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::filesystem::path fixtures_dir() { return MRCEVAL_FIXTURES_DIR; }

inline TemplateSet load_templates() { return TemplateSet::load(MRCEVAL_TEMPLATES_DIR); }

inline MrcInstance make_processbank(const std::string& id = "pb-0001") {
    MrcInstance inst;
    inst.id = id;
    inst.dataset = DatasetTag::processbank;
    inst.context = Context::make(
        id + "-ctx",
        "During mitosis the cell divides its copied chromosomes into two identical nuclei. "
        "Meiosis instead halves the chromosome number to form gametes.");
    inst.query_text = "Which process produces two identical nuclei?";
    inst.candidates = {{"A", {"mitosis"}}, {"B", {"meiosis"}}};
    inst.gold = GoldAnswer::option("A");
    return inst;
}

inline MrcInstance make_biomrc(const std::string& id = "bm-0001") {
    MrcInstance inst;
    inst.id = id;
    inst.dataset = DatasetTag::biomrc;
    inst.context = Context::make(
        id + "-ctx",
        "We measured serum levels of @entity1 in patients with @entity2. Levels of @entity1 "
        "were elevated, suggesting a role for the amino acid in disease progression.");
    inst.query_text = "XXXX is elevated in patients with @entity2";
    inst.candidates = {{"@entity1", {"amino acid", "aminoacid"}}, {"@entity2", {"sepsis"}}};
    inst.gold = GoldAnswer::option("@entity1");
    return inst;
}

inline MrcInstance make_mashqa(const std::string& id = "mq-0001") {
    MrcInstance inst;
    inst.id = id;
    inst.dataset = DatasetTag::mashqa;
    std::string s0 = "Drink plenty of water every day.";
    std::string s1 = "Regular sleep also supports recovery.";
    std::string s2 = "Avoid caffeine late in the evening.";
    std::string ctx = s0 + " " + s1 + " " + s2;
    std::vector<std::pair<size_t, size_t>> spans = {
        {0, s0.size()},
        {s0.size() + 1, s0.size() + 1 + s1.size()},
        {s0.size() + s1.size() + 2, ctx.size()}};
    inst.context = Context::make(id + "-ctx", ctx, spans);
    inst.query_text = "How can I sleep better?";
    inst.gold = GoldAnswer::spans({1, 2});
    return inst;
}

inline MrcInstance make_clicr(const std::string& id = "cl-0001") {
    MrcInstance inst;
    inst.id = id;
    inst.dataset = DatasetTag::clicr;
    inst.context = Context::make(
        id + "-ctx",
        "A 63 year old man presented with chest pain. Electrocardiography confirmed "
        "myocardial infarction and treatment was started immediately.");
    inst.query_text = "The final diagnosis was XXXX.";
    inst.gold = GoldAnswer::variants({"myocardial infarction", "heart attack"});
    return inst;
}

// n instances per dataset shape with distinct ids and mildly varied contexts.
inline std::vector<MrcInstance> synthetic_corpus(DatasetTag tag, size_t n) {
    std::vector<MrcInstance> out;
    for (size_t i = 0; i < n; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%04zu", i);
        MrcInstance inst;
        switch (tag) {
            case DatasetTag::processbank: inst = make_processbank(std::string("pb-") + buf); break;
            case DatasetTag::biomrc: inst = make_biomrc(std::string("bm-") + buf); break;
            case DatasetTag::mashqa: inst = make_mashqa(std::string("mq-") + buf); break;
            case DatasetTag::clicr: inst = make_clicr(std::string("cl-") + buf); break;
        }
        // distinct context text so prompts (and cache keys) differ per instance
        inst.context = Context::make(inst.context.id,
                                     inst.context.text + " Case record " + inst.id + ".",
                                     inst.context.sentence_spans);
        out.push_back(std::move(inst));
    }
    return out;
}

inline std::string random_words(std::mt19937_64& gen, size_t max_words) {
    static const char* pool[] = {"amino", "acid",  "serum", "cell",  "dose",
                                 "gene",  "tumor", "blood", "brain", "lipid"};
    std::uniform_int_distribution<size_t> count(0, max_words);
    std::uniform_int_distribution<size_t> pick(0, std::size(pool) - 1);
    size_t n = count(gen);
    std::string out;
    for (size_t i = 0; i < n; ++i) {
        if (i) out.push_back(' ');
        out += pool[pick(gen)];
    }
    return out;
}

}  // namespace testsupport
