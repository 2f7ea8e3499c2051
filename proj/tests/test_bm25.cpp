#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "structrank/analyzer.hpp"
#include "structrank/bm25.hpp"

using namespace structrank;

TEST_CASE("analyzer lowercases and splits on non-word bytes") {
    REQUIRE(analyze("Don't STOP!") == std::vector<std::string>{"don", "t", "stop"});
    REQUIRE(analyze("5,075 tokens") == std::vector<std::string>{"5", "075", "tokens"});
    REQUIRE(analyze("  ") == std::vector<std::string>{});
    REQUIRE(analyze("caf\xc3\xa9 time") == std::vector<std::string>{"caf\xc3\xa9", "time"});
    AnalyzerConfig keep_case;
    keep_case.lowercase = false;
    REQUIRE(analyze("Joey", keep_case) == std::vector<std::string>{"Joey"});
}

TEST_CASE("bm25_term_score matches the closed form") {
    SECTION("hand-computed value") {
        // idf = ln(1 + 1.5/1.5) = ln 2, weight = 1*2.2/(1 + 1.2*1) = 1
        double s = bm25_term_score(1, 1, 2, 3, 3.0, 1.2, 0.75);
        REQUIRE_THAT(s, Catch::Matchers::WithinAbs(std::log(2.0), 1e-12));
    }
    SECTION("precondition violations raise domain errors") {
        REQUIRE_THROWS_AS(bm25_term_score(0, 1, 2, 3, 3.0, 1.2, 0.75), DomainError);
        REQUIRE_THROWS_AS(bm25_term_score(1, 0, 2, 3, 3.0, 1.2, 0.75), DomainError);
        REQUIRE_THROWS_AS(bm25_term_score(1, 3, 2, 3, 3.0, 1.2, 0.75), DomainError);
        REQUIRE_THROWS_AS(bm25_term_score(1, 1, 2, 0, 3.0, 1.2, 0.75), DomainError);
        REQUIRE_THROWS_AS(bm25_term_score(1, 1, 2, 3, 0.0, 1.2, 0.75), DomainError);
    }
    SECTION("df == N stays positive even for large N") {
        double s = bm25_term_score(5, 1000000, 1000000, 100, 100.0, 1.2, 0.75);
        REQUIRE(s > 0.0);
        REQUIRE(s < 1e-5);
    }
}

TEST_CASE("build_index statistics") {
    SECTION("single document arithmetic") {
        auto index = build_index_from_terms({{"d", {"a", "a", "b"}}});
        REQUIRE(index.doc_count() == 1);
        REQUIRE(index.avg_doc_length() == 3.0);
        const auto& postings = index.postings();
        REQUIRE(postings.at("a").size() == 1);
        REQUIRE(postings.at("a")[0].tf == 2);
        REQUIRE(postings.at("b")[0].tf == 1);
    }
    SECTION("document frequencies on a three-document fixture") {
        auto index = build_index_from_terms({
            {"d1", {"red", "blue", "red"}},
            {"d2", {"blue", "green"}},
            {"d3", {"red", "green", "green", "green"}},
        });
        REQUIRE(index.postings().at("red").size() == 2);
        REQUIRE(index.postings().at("blue").size() == 2);
        REQUIRE(index.postings().at("green").size() == 2);
        REQUIRE(index.avg_doc_length() == 3.0);
    }
    SECTION("empty corpus is rejected") {
        REQUIRE_THROWS_AS(build_index_from_terms({}), DomainError);
        REQUIRE_THROWS_AS(build_index(Corpus{}), DomainError);
    }
    SECTION("episodes index their analyzed token forms and speakers") {
        auto fx = testing::make_pipeline_fixture();
        auto index = build_index(fx.corpus);
        REQUIRE(index.doc_count() == 10);
        REQUIRE(index.postings().count("monroe") == 1);
        REQUIRE(index.postings().count("paints") == 1);
        AnalyzerConfig no_speakers;
        no_speakers.index_speakers = false;
        auto index2 = build_index(fx.corpus, no_speakers);
        REQUIRE(index2.postings().count("monroe") == 0);
    }
}

TEST_CASE("retrieve") {
    auto index = build_index_from_terms({
        {"d1", {"red", "blue", "red"}},
        {"d2", {"blue", "green"}},
        {"d3", {"red", "green", "green", "green"}},
    });

    SECTION("query with no indexed terms returns an empty list") {
        REQUIRE(index.retrieve({"purple"}, 5).empty());
    }
    SECTION("two-term query equals the exhaustive-scoring oracle") {
        auto got = index.retrieve({"red", "green"}, 3);
        auto expected = testing::brute_force_bm25(
            {{"d1", {"red", "blue", "red"}}, {"d2", {"blue", "green"}},
             {"d3", {"red", "green", "green", "green"}}},
            {"red", "green"}, 3, {});
        REQUIRE(got.size() == expected.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            REQUIRE(got[i].doc_id == expected[i].doc_id);
            REQUIRE_THAT(got[i].score, Catch::Matchers::WithinAbs(expected[i].score, 1e-9));
        }
    }
    SECTION("k bounds the result and k < 1 is rejected") {
        REQUIRE(index.retrieve({"red", "blue", "green"}, 2).size() == 2);
        REQUIRE_THROWS_AS(index.retrieve({"red"}, 0), DomainError);
    }
    SECTION("adding a query term that occurs in a document never lowers its score") {
        std::mt19937_64 gen(21);
        for (int round = 0; round < 50; ++round) {
            auto docs = testing::random_term_docs(gen, 10, 15);
            auto idx = build_index_from_terms(docs);
            std::vector<std::string> query;
            const auto qlen = 1 + rng::uniform_below(gen, 5);
            for (std::size_t t = 0; t < qlen; ++t) query.push_back(testing::random_word(gen, 15));

            const auto& target = docs[rng::uniform_below(gen, docs.size())];
            if (target.second.empty()) continue;
            const auto& extra = target.second[rng::uniform_below(gen, target.second.size())];

            auto score_of = [&](const RankedList& list) {
                for (const auto& entry : list)
                    if (entry.doc_id == target.first) return entry.score;
                return 0.0;
            };
            auto before = score_of(idx.retrieve(query, docs.size()));
            query.push_back(extra);
            auto after = score_of(idx.retrieve(query, docs.size()));
            REQUIRE(after >= before);
            REQUIRE(after >= 0.0);
        }
    }
}

TEST_CASE("randomized oracle equivalence for retrieval") {
    std::mt19937_64 gen(4242);
    for (int round = 0; round < 20; ++round) {
        auto docs = testing::random_term_docs(gen, 20, 50);
        auto index = build_index_from_terms(docs);
        for (int q = 0; q < 4; ++q) {
            std::vector<std::string> query;
            const auto qlen = 1 + rng::uniform_below(gen, 6);
            for (std::size_t t = 0; t < qlen; ++t) query.push_back(testing::random_word(gen, 60));
            const auto k = 1 + rng::uniform_below(gen, docs.size() + 3);

            auto got = index.retrieve(query, k);
            auto expected = testing::brute_force_bm25(docs, query, k, {});
            REQUIRE(got.size() == expected.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                REQUIRE(got[i].doc_id == expected[i].doc_id);
                REQUIRE_THAT(got[i].score, Catch::Matchers::WithinAbs(expected[i].score, 1e-9));
            }
        }
    }
}

TEST_CASE("index persistence round-trips losslessly") {
    std::mt19937_64 gen(99);
    auto docs = testing::random_term_docs(gen, 12, 30);
    auto index = build_index_from_terms(docs, {1.6, 0.4});

    std::ostringstream out;
    save_bm25_index(index, out, {"config deadbeef"});
    std::istringstream in(out.str());
    auto loaded = load_bm25_index(in);

    REQUIRE(loaded.doc_ids() == index.doc_ids());
    REQUIRE(loaded.doc_lengths() == index.doc_lengths());
    REQUIRE(loaded.avg_doc_length() == index.avg_doc_length());
    REQUIRE(loaded.params().k1 == index.params().k1);
    REQUIRE(loaded.postings().size() == index.postings().size());

    std::ostringstream out2;
    save_bm25_index(loaded, out2, {"config deadbeef"});
    REQUIRE(out2.str() == out.str());

    auto q = std::vector<std::string>{testing::random_word(gen, 30), testing::random_word(gen, 30)};
    auto a = index.retrieve(q, 5);
    auto b = loaded.retrieve(q, 5);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].doc_id == b[i].doc_id);
        REQUIRE(a[i].score == b[i].score);
    }

    std::istringstream bad("not an index\n");
    REQUIRE_THROWS_AS(load_bm25_index(bad), FormatError);
}
