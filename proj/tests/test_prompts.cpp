#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "mrceval/prompt.hpp"
#include "mrceval/text.hpp"
#include "support.hpp"

using namespace mrceval;

namespace {

const TemplateSet& templates() {
    static TemplateSet t = testsupport::load_templates();
    return t;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<MrcInstance> fixture_instances() {
    return {testsupport::make_processbank(), testsupport::make_biomrc(),
            testsupport::make_mashqa(), testsupport::make_clicr()};
}

size_t count_occurrences(const std::string& hay, const std::string& needle) {
    size_t n = 0;
    for (size_t pos = hay.find(needle); pos != std::string::npos;
         pos = hay.find(needle, pos + needle.size()))
        ++n;
    return n;
}

std::string render_for(Strategy s, const MrcInstance& inst) {
    const auto profile = profile_for(inst.dataset);
    const auto cfg = StrategyConfig::defaults_for(s, inst.dataset);
    switch (s) {
        case Strategy::basic: return render_basic(inst, profile, templates()).text;
        case Strategy::cot: return render_cot(inst, profile, templates()).text;
        case Strategy::ar: return render_ar(inst, profile, cfg, templates()).text;
        case Strategy::implicit_rag: return render_irag(inst, profile, cfg, templates()).text;
    }
    throw std::logic_error("bad strategy");
}

}  // namespace

TEST_CASE("basic prompt opens with the dataset role line") {
    auto text = render_for(Strategy::basic, testsupport::make_processbank());
    CHECK(text.rfind("You are a biologist who is given a paragraph and a corresponding query.",
                     0) == 0);
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("###"));
}

TEST_CASE("empty context errors before rendering") {
    auto inst = testsupport::make_processbank();
    inst.context.text.clear();
    inst.context.word_count = 0;
    CHECK_THROWS_AS(render_basic(inst, profile_for(inst.dataset), templates()), RenderError);
}

TEST_CASE("golden prompt fixtures byte-match") {
    auto dir = testsupport::fixtures_dir() / "golden_prompts";
    for (const auto& inst : fixture_instances()) {
        const auto profile = profile_for(inst.dataset);
        const auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
        const std::string ds = to_string(inst.dataset);
        CHECK(render_for(Strategy::basic, inst) == read_file(dir / ("basic_" + ds + ".txt")));
        CHECK(render_for(Strategy::cot, inst) == read_file(dir / ("cot_" + ds + ".txt")));
        CHECK(render_for(Strategy::ar, inst) == read_file(dir / ("ar_" + ds + ".txt")));
        CHECK(render_for(Strategy::implicit_rag, inst) ==
              read_file(dir / ("implicit_rag_" + ds + ".txt")));
        CHECK(render_irag_retrieve(inst.context.text, inst, profile, cfg, templates()).text ==
              read_file(dir / ("implicit_rag_retrieve_" + ds + ".txt")));
        RetrievedSection sec;
        sec.index = 1;
        sec.text = text::collapse_ws(inst.context.text.substr(0, 60));
        sec.word_count = text::word_count(sec.text);
        CHECK(render_irag_final({sec}, inst, profile, templates()).text ==
              read_file(dir / ("implicit_rag_final_" + ds + ".txt")));
    }
}

TEST_CASE("template assets are hash-pinned") {
    std::istringstream pins(read_file(testsupport::fixtures_dir() / "template_hashes.txt"));
    std::string rel, want;
    size_t checked = 0;
    while (pins >> rel >> want) {
        std::string got = text::sha256_hex(
            read_file(std::filesystem::path(MRCEVAL_TEMPLATES_DIR) / rel));
        INFO(rel);
        CHECK(got == want);
        ++checked;
    }
    CHECK(checked == 24);
}

TEST_CASE("cot equals basic plus exactly the step-by-step line") {
    for (const auto& inst : fixture_instances()) {
        const std::string basic = render_for(Strategy::basic, inst);
        const std::string cot = render_for(Strategy::cot, inst);
        CHECK(cot == basic + "Think step by step.\n");
        CHECK(count_occurrences(cot, "Think step by step") == 1);
    }
}

TEST_CASE("ar prompt carries the pair count and rejects zero") {
    auto inst = testsupport::make_clicr();
    auto cfg = StrategyConfig::defaults_for(Strategy::ar, inst.dataset);
    REQUIRE(cfg.ar_num_pairs == 3);
    auto text = render_ar(inst, profile_for(inst.dataset), cfg, templates()).text;
    CHECK_THAT(text, Catch::Matchers::ContainsSubstring("generate 3 question-answer pairs"));
    cfg.ar_num_pairs = 0;
    CHECK_THROWS_AS(render_ar(inst, profile_for(inst.dataset), cfg, templates()), RenderError);
}

TEST_CASE("implicit rag hyperparameters per dataset") {
    auto bm = render_for(Strategy::implicit_rag, testsupport::make_biomrc());
    CHECK_THAT(bm, Catch::Matchers::ContainsSubstring("Identify 3 most relevant sections"));
    CHECK_THAT(bm, Catch::Matchers::ContainsSubstring("between 50 to 200 words long"));

    auto mq = render_for(Strategy::implicit_rag, testsupport::make_mashqa());
    CHECK_THAT(mq, Catch::Matchers::ContainsSubstring("Identify 1"));
    CHECK_THAT(mq, Catch::Matchers::ContainsSubstring("between 0 to 300 words long"));

    auto pb = render_for(Strategy::implicit_rag, testsupport::make_processbank());
    CHECK_THAT(pb, Catch::Matchers::ContainsSubstring("Identify 2"));
}

TEST_CASE("no unresolved placeholders in any strategy or dataset") {
    for (const auto& inst : fixture_instances()) {
        for (auto s : {Strategy::basic, Strategy::cot, Strategy::ar, Strategy::implicit_rag}) {
            INFO(to_string(inst.dataset) << "/" << to_string(s));
            CHECK(render_for(s, inst).find('{') == std::string::npos);
        }
        const auto profile = profile_for(inst.dataset);
        const auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
        CHECK(render_irag_retrieve(inst.context.text, inst, profile, cfg, templates())
                  .text.find('{') == std::string::npos);
        RetrievedSection sec;
        sec.text = "some extract";
        CHECK(render_irag_final({sec}, inst, profile, templates()).text.find('{') ==
              std::string::npos);
    }
}

TEST_CASE("options line present only for option datasets, in every strategy") {
    for (const auto& inst : fixture_instances()) {
        bool option_ds =
            inst.dataset == DatasetTag::processbank || inst.dataset == DatasetTag::biomrc;
        for (auto s : {Strategy::basic, Strategy::cot, Strategy::ar, Strategy::implicit_rag}) {
            INFO(to_string(inst.dataset) << "/" << to_string(s));
            CHECK((render_for(s, inst).find("List of options:") != std::string::npos) ==
                  option_ds);
        }
    }
}

TEST_CASE("rendering is deterministic") {
    for (const auto& inst : fixture_instances())
        for (auto s : {Strategy::basic, Strategy::cot, Strategy::ar, Strategy::implicit_rag})
            CHECK(render_for(s, inst) == render_for(s, inst));
}

TEST_CASE("retrieve and final prompt preconditions") {
    auto inst = testsupport::make_clicr();
    const auto profile = profile_for(inst.dataset);
    const auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
    CHECK_THROWS_AS(render_irag_retrieve("   ", inst, profile, cfg, templates()), RenderError);
    CHECK_THROWS_AS(render_irag_final({}, inst, profile, templates()), RenderError);
    auto retrieve = render_irag_retrieve("few words only", inst, profile, cfg, templates());
    CHECK_THAT(retrieve.text, Catch::Matchers::ContainsSubstring("Identify 3"));
    CHECK_THAT(retrieve.text, !Catch::Matchers::ContainsSubstring("Answer:"));
}
