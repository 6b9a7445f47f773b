#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "mrceval/irag.hpp"
#include "support.hpp"

using namespace mrceval;

namespace {

Context words_context(size_t n) {
    std::string s;
    for (size_t i = 0; i < n; ++i) {
        if (i) s.push_back(' ');
        s += "w" + std::to_string(i);
    }
    return Context::make("ctx", s);
}

}  // namespace

TEST_CASE("chunk_context examples") {
    auto plan = chunk_context(words_context(10), 4, 0);
    REQUIRE(plan.chunks.size() == 3);
    CHECK(plan.chunks[0] == std::make_pair<size_t, size_t>(0, 4));
    CHECK(plan.chunks[1] == std::make_pair<size_t, size_t>(4, 8));
    CHECK(plan.chunks[2] == std::make_pair<size_t, size_t>(8, 10));

    plan = chunk_context(words_context(10), 100, 0);
    REQUIRE(plan.chunks.size() == 1);
    CHECK(plan.chunks[0] == std::make_pair<size_t, size_t>(0, 10));

    CHECK_THROWS_AS(chunk_context(words_context(10), 4, 4), std::invalid_argument);
}

TEST_CASE("chunk_context covers every word for random triples") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 1 + gen() % 400;
        size_t budget = 1 + gen() % 80;
        size_t overlap = gen() % budget;
        auto ctx = words_context(n);
        auto plan = chunk_context(ctx, budget, overlap);
        std::vector<bool> covered(n, false);
        size_t prev_end = 0;
        for (size_t i = 0; i < plan.chunks.size(); ++i) {
            auto [b, e] = plan.chunks[i];
            REQUIRE(b < e);
            REQUIRE(e <= n);
            for (size_t w = b; w < e; ++w) covered[w] = true;
            // consecutive chunks overlap by exactly `overlap`, except possibly the last
            if (i > 0 && i + 1 < plan.chunks.size()) CHECK(prev_end - b == overlap);
            if (i > 0) CHECK((b < prev_end || overlap == 0));
            prev_end = e;
        }
        for (size_t w = 0; w < n; ++w) CHECK(covered[w]);
        CHECK((plan.chunks.size() == 1) == (n <= budget));
    }
}

TEST_CASE("boundary word_count == budget takes the single chunk branch") {
    auto plan = chunk_context(words_context(64), 64, 8);
    CHECK(plan.chunks.size() == 1);
}

TEST_CASE("parse_sections examples") {
    const std::string ctx = "foo bar baz qux more words here";
    auto parsed = parse_sections("Section 1: foo bar\nSection 2: baz qux\nAnswer: A", 2, ctx,
                                 50, 200);
    REQUIRE(parsed.sections.size() == 2);
    CHECK(parsed.sections[0].text == "foo bar");
    CHECK(parsed.sections[1].text == "baz qux");
    // 2 words sits below the (50, 200) limits
    CHECK_FALSE(parsed.sections[0].within_limits);
    // verbatim copy from the context is grounded
    CHECK(parsed.sections[0].grounded);
    CHECK_FALSE(parsed.deviation);

    auto loose = parse_sections("Section 1: invented text nowhere", 2, ctx, 1, 200);
    REQUIRE(loose.sections.size() == 1);
    CHECK_FALSE(loose.sections[0].grounded);
    CHECK(loose.sections[0].within_limits);
    CHECK(loose.deviation);  // got 1, expected 2

    auto none = parse_sections("no markers at all", 3, ctx, 1, 10);
    CHECK(none.sections.empty());
    CHECK(none.deviation);

    auto extra = parse_sections("Section 1: foo\nSection 2: bar\nSection 3: baz", 2, ctx, 1, 10);
    CHECK(extra.sections.size() == 2);
    CHECK(extra.extra_count == 1);
}

TEST_CASE("grounding survives whitespace reflow") {
    const std::string ctx = "alpha   beta\n gamma delta";
    auto parsed = parse_sections("Section 1: alpha beta gamma", 1, ctx, 1, 10);
    REQUIRE(parsed.sections.size() == 1);
    CHECK(parsed.sections[0].grounded);
}

TEST_CASE("section_distinctness values") {
    auto sec = [](const std::string& t) {
        RetrievedSection s;
        s.text = t;
        s.word_count = text::word_count(t);
        return s;
    };
    auto pairs = section_distinctness({sec("a b c"), sec("a b c")});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].similarity == 1.0);
    CHECK(pairs[0].flagged);

    pairs = section_distinctness({sec("a b"), sec("x y")});
    CHECK(pairs[0].similarity == 0.0);
    CHECK_FALSE(pairs[0].flagged);

    pairs = section_distinctness({sec("a b c"), sec("b c d")});
    CHECK(pairs[0].similarity == 0.5);

    CHECK_THROWS_AS(section_distinctness({sec("only one")}), std::invalid_argument);
}

TEST_CASE("run_implicit_rag single call when the context fits") {
    auto inst = testsupport::make_biomrc();
    OracleBackend backend({inst});
    auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
    auto pred = run_implicit_rag(inst, profile_for(inst.dataset), cfg, backend,
                                 testsupport::load_templates(), 24000);
    CHECK(pred.call_count == 1);
    CHECK(pred.parsed_answer == "amino acid");
    CHECK(backend.calls() == 1);
}

TEST_CASE("run_implicit_rag chunked mode makes chunks + 1 calls") {
    auto inst = testsupport::make_clicr();
    REQUIRE(inst.context.word_count > 8);
    OracleBackend backend({inst});
    auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
    auto pred = run_implicit_rag(inst, profile_for(inst.dataset), cfg, backend,
                                 testsupport::load_templates(), 8, 2);
    auto plan = chunk_context(inst.context, 8, 2);
    CHECK(pred.call_count == plan.chunks.size() + 1);
    CHECK(backend.calls() == pred.call_count);
    CHECK(pred.parsed_answer == "myocardial infarction");
    CHECK_FALSE(pred.sections.empty());
    // pooled sections are dedup'd on normalized text
    std::set<std::string> keys;
    for (const auto& s : pred.sections)
        CHECK(keys.insert(text::to_lower(text::collapse_ws(s.text))).second);
    // every retrieved section is grounded in the full context
    for (const auto& s : pred.sections) CHECK(s.grounded);
}

TEST_CASE("chunked and single-call branches agree at the boundary") {
    auto inst = testsupport::make_clicr();
    OracleBackend a({inst}), b({inst});
    auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
    auto tpl = testsupport::load_templates();
    auto at_budget = run_implicit_rag(inst, profile_for(inst.dataset), cfg, a, tpl,
                                      inst.context.word_count, 2);
    CHECK(at_budget.call_count == 1);
    auto below = run_implicit_rag(inst, profile_for(inst.dataset), cfg, b, tpl,
                                  inst.context.word_count - 1, 2);
    CHECK(below.call_count > 1);
}

TEST_CASE("backend failures carry the call index") {
    auto inst = testsupport::make_clicr();
    ScriptedBackend backend({}, /*digest_fallback=*/false);
    auto cfg = StrategyConfig::defaults_for(Strategy::implicit_rag, inst.dataset);
    try {
        run_implicit_rag(inst, profile_for(inst.dataset), cfg, backend,
                         testsupport::load_templates(), 24000);
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("call 0"));
    }
}
