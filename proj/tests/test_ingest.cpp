#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "mrceval/ingest.hpp"
#include "support.hpp"

using namespace mrceval;

namespace {
std::string src(const std::string& name) {
    return (testsupport::fixtures_dir() / "sources" / name).string();
}
}  // namespace

TEST_CASE("convert_processbank maps options and gold letter") {
    auto result = convert_processbank(src("processbank.json"));
    REQUIRE(result.records.size() == 2);
    const auto& r = result.records[0];
    CHECK(r.dataset == DatasetTag::processbank);
    REQUIRE(r.candidates.size() == 2);
    CHECK(r.candidates[0].id == "A");
    CHECK(r.candidates[1].surface_forms[0] == "meiosis");
    CHECK(r.gold.option_ref == "B");
    CHECK(result.records[1].gold.option_ref == "A");
    for (const auto& rec : result.records) CHECK(validate_instance(rec).empty());
}

TEST_CASE("empty source fails with no records") {
    CHECK_THROWS_WITH(convert_processbank(src("processbank_empty.json")),
                      Catch::Matchers::ContainsSubstring("no records"));
}

TEST_CASE("missing question names the offending record") {
    CHECK_THROWS_WITH(convert_processbank(src("processbank_bad.json")),
                      Catch::Matchers::ContainsSubstring("record 0"));
}

TEST_CASE("convert_biomrc merges duplicate entity ids and keeps absent-gold records") {
    auto result = convert_biomrc(src("biomrc.json"));
    REQUIRE(result.records.size() == 2);
    const auto& r = result.records[0];
    // two spellings of @entity1 collapse into one candidate
    auto it = std::find_if(r.candidates.begin(), r.candidates.end(),
                           [](const Candidate& c) { return c.id == "@entity1"; });
    REQUIRE(it != r.candidates.end());
    CHECK(it->surface_forms == std::vector<std::string>{"amino acid", "aminoacid"});
    CHECK(r.gold.option_ref == "@entity1");

    // gold entity missing from the candidate list: warning, instance kept
    REQUIRE(result.warnings.size() == 1);
    CHECK_THAT(result.warnings[0], Catch::Matchers::ContainsSubstring("@entity6"));
    CHECK(result.records[1].gold.option_ref == "@entity6");
    for (const auto& rec : result.records) CHECK(validate_instance(rec).empty());
}

TEST_CASE("convert_mashqa builds sentence spans and span_set gold") {
    auto result = convert_mashqa(src("mashqa.json"));
    REQUIRE(result.records.size() == 2);
    const auto& r = result.records[0];
    REQUIRE(r.context.sentence_spans.has_value());
    CHECK(r.context.sentence_spans->size() == 3);
    CHECK(r.context.sentence(1) == "Sleep helps recovery.");
    CHECK(r.gold.span_set == std::vector<size_t>{1, 2});
    // single-sentence answer
    CHECK(result.records[1].gold.span_set == std::vector<size_t>{0});
    for (const auto& rec : result.records) CHECK(validate_instance(rec).empty());
}

TEST_CASE("mashqa gold index out of range is a schema error") {
    CHECK_THROWS_WITH(convert_mashqa(src("mashqa_bad.json")),
                      Catch::Matchers::ContainsSubstring("out of range"));
}

TEST_CASE("convert_clicr keeps the full variant set and no candidates") {
    auto result = convert_clicr(src("clicr.json"));
    REQUIRE(result.records.size() == 1);
    const auto& r = result.records[0];
    CHECK(r.candidates.empty());
    CHECK(r.gold.text_variants ==
          std::vector<std::string>{"myocardial infarction", "heart attack", "MI"});
    CHECK(validate_instance(r).empty());
}

TEST_CASE("clicr all-empty variants is a schema error") {
    CHECK_THROWS_WITH(convert_clicr(src("clicr_bad.json")),
                      Catch::Matchers::ContainsSubstring("empty"));
}

TEST_CASE("corpus_stats arithmetic") {
    std::vector<MrcInstance> two = {testsupport::make_clicr("a"), testsupport::make_clicr("b")};
    two[0].context = Context::make("c0", "one two three four");
    two[1].context = Context::make("c1", "one two three four five six");
    auto s = corpus_stats(two);
    CHECK(s.qa_pairs == 2);
    CHECK(s.avg_context_words == 5.0);
    CHECK(s.max_context_words == 6);

    std::vector<MrcInstance> one = {testsupport::make_clicr("x")};
    one[0].context = Context::make("c", "single");
    s = corpus_stats(one);
    CHECK(s.qa_pairs == 1);
    CHECK(s.avg_context_words == 1.0);
    CHECK(s.max_context_words == 1);

    CHECK_THROWS_AS(corpus_stats({}), std::invalid_argument);
}

TEST_CASE("corpus_stats is permutation invariant") {
    auto corpus = testsupport::synthetic_corpus(DatasetTag::clicr, 20);
    std::mt19937_64 words_gen(4);
    for (auto& inst : corpus)
        inst.context =
            Context::make("c", testsupport::random_words(words_gen, 30) + " tail");
    auto base = corpus_stats(corpus);
    std::mt19937_64 gen(5);
    std::shuffle(corpus.begin(), corpus.end(), gen);
    auto shuffled = corpus_stats(corpus);
    CHECK(base.qa_pairs == shuffled.qa_pairs);
    CHECK(base.avg_context_words == shuffled.avg_context_words);
    CHECK(base.max_context_words == shuffled.max_context_words);
}

TEST_CASE("sample_subset is deterministic, exhaustive at n, and seed sensitive") {
    auto corpus = testsupport::synthetic_corpus(DatasetTag::biomrc, 50);
    auto a = sample_subset(corpus, {10, 7});
    auto b = sample_subset(corpus, {10, 7});
    REQUIRE(a.size() == 10);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    // ordered by id
    CHECK(std::is_sorted(a.begin(), a.end(), [](const MrcInstance& x, const MrcInstance& y) {
        return x.id < y.id;
    }));
    // subset of the corpus
    for (const auto& inst : a)
        CHECK(std::any_of(corpus.begin(), corpus.end(),
                          [&](const MrcInstance& c) { return c.id == inst.id; }));

    auto all = sample_subset(corpus, {50, 999});
    CHECK(all.size() == 50);

    auto s1 = sample_subset(corpus, {10, 1});
    auto s2 = sample_subset(corpus, {10, 2});
    std::vector<std::string> ids1, ids2;
    for (const auto& r : s1) ids1.push_back(r.id);
    for (const auto& r : s2) ids2.push_back(r.id);
    CHECK(ids1 != ids2);

    CHECK_THROWS_AS(sample_subset(corpus, {51, 0}), std::invalid_argument);
}

TEST_CASE("sample_subset golden fixture pins the generator") {
    // Frozen from one run of the pinned mt19937_64 partial Fisher-Yates sampler;
    // a change here means the sampler is no longer reproducible.
    auto corpus = testsupport::synthetic_corpus(DatasetTag::processbank, 10);
    auto s = sample_subset(corpus, {3, 1});
    std::vector<std::string> ids;
    for (const auto& r : s) ids.push_back(r.id);
    CHECK(ids == std::vector<std::string>{"pb-0004", "pb-0007", "pb-0008"});
}

TEST_CASE("sample input independence from input order") {
    auto corpus = testsupport::synthetic_corpus(DatasetTag::mashqa, 30);
    auto sorted_sample = sample_subset(corpus, {5, 11});
    std::mt19937_64 gen(2);
    std::shuffle(corpus.begin(), corpus.end(), gen);
    auto shuffled_sample = sample_subset(corpus, {5, 11});
    REQUIRE(sorted_sample.size() == shuffled_sample.size());
    for (size_t i = 0; i < sorted_sample.size(); ++i)
        CHECK(sorted_sample[i].id == shuffled_sample[i].id);
}
