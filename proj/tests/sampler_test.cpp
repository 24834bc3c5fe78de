#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "nvsm/corpus.hpp"
#include "nvsm/rng.hpp"
#include "nvsm/sampler.hpp"

using namespace nvsm;

namespace {

// Store whose documents are runs of a private token so windows are easy to
// trace back: document i repeats term "di" length_i times.
DocumentStore run_length_store(const std::vector<std::size_t>& lengths) {
    std::vector<RawDocument> raw;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        std::string text;
        for (std::size_t t = 0; t < lengths[i]; ++t) text += "d" + std::to_string(i) + " ";
        raw.push_back({"doc" + std::to_string(i), text});
    }
    return ingest_corpus(raw, {}, 1000);
}

// Store with distinct positional tokens: document i is p<i>x0 p<i>x1 ...
DocumentStore positional_store(const std::vector<std::size_t>& lengths) {
    std::vector<RawDocument> raw;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        std::string text;
        for (std::size_t t = 0; t < lengths[i]; ++t) {
            text += "p" + std::to_string(i) + "x" + std::to_string(t) + " ";
        }
        raw.push_back({"doc" + std::to_string(i), text});
    }
    return ingest_corpus(raw, {}, 100000);
}

}  // namespace

TEST_CASE("eligibility requires at least one full window") {
    auto store = run_length_store({3, 9, 10, 11, 0});
    auto eligible = eligible_documents(store, 10);
    CHECK(eligible == std::vector<DocId>{2, 3});
    CHECK(eligible_documents(store, 1).size() == 4);  // empty doc never eligible
    CHECK(eligible_documents(store, 100).empty());
}

TEST_CASE("a document of exactly window length yields only its full window") {
    auto store = positional_store({6});
    Rng rng = rng_for_stream(1, 1);
    auto batch = sample_batch(store, 32, 6, rng);
    REQUIRE(batch.size() == 32);
    const auto& doc = store.document(0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        CHECK(batch.source_doc_ids[i] == 0);
        auto window = batch.ngram(i);
        REQUIRE(window.size() == 6);
        for (std::size_t t = 0; t < 6; ++t) CHECK(window[t] == doc.tokens[t]);
    }
}

TEST_CASE("short documents are never sampled as positives") {
    auto store = run_length_store({3, 50});
    Rng rng = rng_for_stream(2, 1);
    auto batch = sample_batch(store, 1000, 10, rng);
    for (DocId id : batch.source_doc_ids) CHECK(id == 1);
}

TEST_CASE("every sampled window is a contiguous slice of its source document") {
    Rng seed_rng = rng_for_stream(3, 0);
    for (int round = 0; round < 10; ++round) {
        std::vector<std::size_t> lengths;
        const std::size_t docs = 2 + uniform_index(seed_rng, 6);
        for (std::size_t d = 0; d < docs; ++d) lengths.push_back(uniform_index(seed_rng, 30));
        const std::size_t n = 1 + uniform_index(seed_rng, 8);
        auto store = positional_store(lengths);
        if (eligible_documents(store, n).empty()) continue;

        Rng rng = rng_for_stream(3, 1 + round);
        auto batch = sample_batch(store, 64, n, rng);
        CHECK(batch.ngram_width == n);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto& doc = store.document(batch.source_doc_ids[i]);
            REQUIRE(doc.length() >= n);
            auto window = batch.ngram(i);
            // locate the offset via the first token, then demand contiguity
            bool found = false;
            for (std::size_t off = 0; off + n <= doc.length(); ++off) {
                bool match = true;
                for (std::size_t t = 0; t < n; ++t) {
                    if (doc.tokens[off + t] != window[t]) { match = false; break; }
                }
                if (match) { found = true; break; }
            }
            CHECK(found);
        }
    }
}

TEST_CASE("sampling is a pure function of the engine state") {
    auto store = positional_store({20, 30, 15});
    Rng a = rng_for_stream(9, 5);
    Rng b = rng_for_stream(9, 5);
    auto batch_a = sample_batch(store, 100, 4, a);
    auto batch_b = sample_batch(store, 100, 4, b);
    CHECK(batch_a.ngram_token_ids == batch_b.ngram_token_ids);
    CHECK(batch_a.source_doc_ids == batch_b.source_doc_ids);

    Rng c = rng_for_stream(9, 6);
    auto batch_c = sample_batch(store, 100, 4, c);
    CHECK(batch_a.ngram_token_ids != batch_c.ngram_token_ids);
}

TEST_CASE("document draws are uniform over the eligible set") {
    auto store = run_length_store({20, 20, 3});
    Rng rng = rng_for_stream(4, 1);
    const std::size_t draws = 100000;
    auto batch = sample_batch(store, draws, 10, rng);
    std::size_t count0 = 0;
    for (DocId id : batch.source_doc_ids) count0 += (id == 0);
    // binomial(1e5, 1/2): sd ~ 158, allow 4 sigma
    const double sd = std::sqrt(draws * 0.25);
    CHECK(std::abs(static_cast<double>(count0) - draws / 2.0) < 4 * sd);
}

TEST_CASE("window offsets are uniform") {
    auto store = positional_store({12});  // n = 10 leaves offsets {0, 1, 2}
    Rng rng = rng_for_stream(5, 1);
    const std::size_t draws = 30000;
    auto batch = sample_batch(store, draws, 10, rng);
    std::map<TermId, std::size_t> first_token_count;
    for (std::size_t i = 0; i < draws; ++i) ++first_token_count[batch.ngram(i)[0]];
    REQUIRE(first_token_count.size() == 3);
    for (const auto& [token, count] : first_token_count) {
        const double expected = draws / 3.0;
        const double sd = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
        CHECK(std::abs(static_cast<double>(count) - expected) < 4 * sd);
    }
}

TEST_CASE("negative sampling runs with replacement over all documents") {
    Rng rng = rng_for_stream(6, 1);
    auto single = sample_negatives(10, 1, rng);
    CHECK(single == std::vector<DocId>(10, 0));

    auto negs = sample_negatives(100000, 4, rng);
    REQUIRE(negs.size() == 100000);
    std::size_t counts[4] = {0, 0, 0, 0};
    for (DocId id : negs) {
        REQUIRE(id < 4);
        ++counts[id];
    }
    const double expected = 25000.0;
    const double sd = std::sqrt(100000 * 0.25 * 0.75);
    for (std::size_t c : counts) {
        CHECK(std::abs(static_cast<double>(c) - expected) < 4 * sd);
    }

    CHECK_THROWS_AS(sample_negatives(0, 4, rng), UsageError);
    CHECK_THROWS_AS(sample_negatives(4, 0, rng), UsageError);
}

TEST_CASE("batch count covers the window census") {
    auto store = run_length_store({10, 5});
    // n=4: windows = (10-4+1) + (5-4+1) = 9; m=4 -> ceil(9/4) = 3
    CHECK(batches_per_epoch(store, 4, 4) == 3);
    CHECK(batches_per_epoch(store, 9, 4) == 1);
    CHECK(batches_per_epoch(store, 2, 4) == 5);

    auto tiny = run_length_store({3});
    CHECK(batches_per_epoch(tiny, 4, 4) == 0);

    auto exact = run_length_store({16});
    CHECK(batches_per_epoch(exact, 1, 16) == 1);

    CHECK_THROWS_AS(batches_per_epoch(store, 0, 4), UsageError);
}

TEST_CASE("degenerate sampling requests are rejected") {
    auto store = run_length_store({3, 2});
    Rng rng = rng_for_stream(7, 1);
    CHECK_THROWS_AS(sample_batch(store, 4, 10, rng), DataError);  // nothing eligible
    CHECK_THROWS_AS(sample_batch(store, 0, 2, rng), UsageError);
    CHECK_THROWS_AS(sample_batch(store, 4, 0, rng), UsageError);
}

TEST_CASE("weight hook concentrates draws without changing windows") {
    auto store = positional_store({8, 8, 8});
    std::vector<double> weights{0.0, 1.0, 0.0};
    auto eligible = eligible_documents(store, 4);
    Rng rng = rng_for_stream(8, 1);
    auto batch = sample_batch(store, 200, 4, rng, eligible, weights);
    for (DocId id : batch.source_doc_ids) CHECK(id == 1);

    std::vector<double> zeros{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(sample_batch(store, 4, 4, rng, eligible, zeros), DataError);
}
