#pragma once

// Shared test fixtures and independent oracles.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "structrank/structrank.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace structrank;

// --- Scratch directories ------------------------------------------------------

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        auto stamp = std::to_string(::getpid()) + "_" + std::to_string(counter.fetch_add(1));
        path_ = fs::temp_directory_path() / ("structrank_test_" + stamp);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// --- Sentence construction ------------------------------------------------------

inline Token tok(int index, std::string form, std::string lemma, std::string pos, int head,
                 std::string deprel, std::string ner = "O", std::string pred = "") {
    Token t;
    t.index = index;
    t.form = std::move(form);
    t.lemma = std::move(lemma);
    t.pos = std::move(pos);
    t.ner = std::move(ner);
    t.head = head;
    t.deprel = std::move(deprel);
    t.pred = std::move(pred);
    return t;
}

inline void arc(AnnotatedSentence& s, int argument, int predicate, std::string role) {
    s.tokens[static_cast<std::size_t>(argument) - 1].srl.push_back({predicate, std::move(role)});
}

// "Joey compares women to ice cream." with a hand-built parse: the canonical
// one-relation sentence used across the extraction tests.
inline AnnotatedSentence compare_sentence() {
    AnnotatedSentence s;
    s.tokens = {
        tok(1, "Joey", "joey", "NNP", 2, "nsubj", "PERSON"),
        tok(2, "compares", "compare", "VBZ", 0, "root", "O", "compare.01"),
        tok(3, "women", "woman", "NNS", 2, "dobj"),
        tok(4, "to", "to", "TO", 2, "prep"),
        tok(5, "ice", "ice", "NN", 6, "nn"),
        tok(6, "cream", "cream", "NN", 4, "pobj"),
        tok(7, ".", ".", ".", 2, "punct"),
    };
    arc(s, 1, 2, "A0");
    arc(s, 3, 2, "A1");
    arc(s, 4, 2, "A2");
    return s;
}

// Inline annotation field for a query TSV row.
inline std::string inline_annotation(const AnnotatedSentence& sentence) {
    std::vector<int> predicates;
    for (const auto& t : sentence.tokens)
        if (!t.pred.empty()) predicates.push_back(t.index);
    std::string out;
    for (const auto& t : sentence.tokens) {
        if (!out.empty()) out += ' ';
        out += std::to_string(t.index) + "|" + t.form + "|" + t.lemma + "|" + t.pos + "|" + t.ner +
               "|" + std::to_string(t.head) + "|" + t.deprel + "|" + (t.pred.empty() ? "_" : t.pred);
        for (int p : predicates) {
            const SrlArc* found = nullptr;
            for (const auto& a : t.srl)
                if (a.predicate_index == p) found = &a;
            out += "|";
            out += found ? found->role : "_";
        }
    }
    return out;
}

// --- Synthetic end-to-end fixture -------------------------------------------------
//
// Ten episodes, each built around one unique relation sentence
// "<Name> <verb>s <nounA> <nounB> ." spoken by a unique speaker, plus filler.
// Ten "construction" queries, one per episode, share that sentence's words.
// Queries 1-4 additionally get a decoy episode that repeats their surface
// words three times in a no-predicate utterance, so the baseline ranks the
// decoy first while only the gold episode carries matching relation evidence.
// Outcome, by construction: baseline P@1 = 60, unit-weight rerank P@1 = 100.

struct PipelineFixture {
    Corpus corpus;
    std::vector<Query> construction_queries;
    std::vector<Query> easy_queries; // relation-free extras; mixed labels for classifier training
    EmbeddingStore embeddings;
    std::vector<std::string> embedding_words;
    int failure_count = 4;
};

namespace fixture_detail {

inline const std::vector<std::string>& names() {
    static const std::vector<std::string> v{"amara", "boris", "clara", "dmitri", "elena",
                                            "felix", "greta", "hugo", "iris", "jonas"};
    return v;
}
inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v{"paint", "juggle", "bake", "climb", "whistle",
                                            "carve", "sail", "garden", "sketch", "brew"};
    return v;
}
inline const std::vector<std::string>& nouns_a() {
    static const std::vector<std::string> v{"fence", "torch", "bagel", "ladder", "melody",
                                            "statue", "dinghy", "tulip", "portrait", "kettle"};
    return v;
}
inline const std::vector<std::string>& nouns_b() {
    static const std::vector<std::string> v{"ribbon", "lantern", "poppy", "harness", "flute",
                                            "chisel", "anchor", "trowel", "easel", "teapot"};
    return v;
}
inline const std::vector<std::string>& speakers() {
    static const std::vector<std::string> v{"Monroe", "Casey", "Darby", "Ellis", "Flynn",
                                            "Gray", "Harper", "Indigo", "Jules", "Kerr"};
    return v;
}

inline std::string capitalize(const std::string& s) {
    std::string out = s;
    if (!out.empty() && out[0] >= 'a' && out[0] <= 'z')
        out[0] = static_cast<char>(out[0] - 'a' + 'A');
    return out;
}

inline AnnotatedSentence relation_sentence(std::size_t i) {
    AnnotatedSentence s;
    s.tokens = {
        tok(1, capitalize(names()[i]), names()[i], "NNP", 2, "nsubj", "PERSON"),
        tok(2, verbs()[i] + "s", verbs()[i], "VBZ", 0, "root", "O", verbs()[i] + ".01"),
        tok(3, nouns_a()[i], nouns_a()[i], "NN", 2, "dobj"),
        tok(4, nouns_b()[i], nouns_b()[i], "NN", 3, "nn"),
        tok(5, ".", ".", ".", 2, "punct"),
    };
    arc(s, 1, 2, "A0");
    arc(s, 3, 2, "A1");
    return s;
}

// No predicates, so no relations: pure lexical padding.
inline AnnotatedSentence plain_sentence(const std::vector<std::string>& forms) {
    AnnotatedSentence s;
    for (std::size_t t = 0; t < forms.size(); ++t)
        s.tokens.push_back(tok(static_cast<int>(t + 1), forms[t], forms[t], "NN",
                               t == 0 ? 0 : 1, t == 0 ? "root" : "dep"));
    return s;
}

} // namespace fixture_detail

inline PipelineFixture make_pipeline_fixture() {
    using namespace fixture_detail;
    PipelineFixture fx;

    std::vector<Episode> episodes;
    for (std::size_t i = 0; i < 10; ++i) {
        Episode ep;
        ep.episode_id = "e" + std::string(i + 1 < 10 ? "0" : "") + std::to_string(i + 1);
        Scene scene;
        scene.scene_id = "s1";

        Utterance main_utt;
        main_utt.speaker = speakers()[i];
        main_utt.sentences.push_back(relation_sentence(i));
        scene.utterances.push_back(main_utt);

        Utterance filler;
        filler.speaker = speakers()[i];
        std::vector<std::string> pads;
        for (std::size_t p = 0; p < 5 + i; ++p)
            pads.push_back("pad" + std::to_string(i) + "x" + std::to_string(p));
        filler.sentences.push_back(plain_sentence(pads));
        scene.utterances.push_back(filler);

        // Decoy utterance for construction query j on episode j+5: the query's
        // surface words three times, without any predicate.
        if (i >= 5 && i <= 8) {
            const std::size_t j = i - 5;
            std::vector<std::string> words;
            for (int rep = 0; rep < 3; ++rep) {
                words.push_back(capitalize(names()[j]));
                words.push_back(verbs()[j] + "s");
                words.push_back(nouns_a()[j]);
                words.push_back(nouns_b()[j]);
            }
            Utterance decoy;
            decoy.speaker = speakers()[i];
            decoy.sentences.push_back(plain_sentence(words));
            scene.utterances.push_back(decoy);
        }

        ep.scenes.push_back(std::move(scene));
        episodes.push_back(std::move(ep));
    }
    fx.corpus = Corpus(std::move(episodes));

    for (std::size_t i = 0; i < 10; ++i) {
        Query q;
        q.query_id = "q" + std::to_string(i + 1);
        q.source = i % 2 == 0 ? QuerySource::Summary : QuerySource::Plot;
        q.gold_episode = fx.corpus.episodes()[i].episode_id;
        q.text = capitalize(names()[i]) + " " + verbs()[i] + "s " + nouns_a()[i] + " " +
                 nouns_b()[i] + ".";
        q.sentence = relation_sentence(i);
        fx.construction_queries.push_back(std::move(q));

        Query easy;
        easy.query_id = "r" + std::to_string(i + 1);
        easy.source = i % 2 == 0 ? QuerySource::Plot : QuerySource::Summary;
        easy.gold_episode = fx.corpus.episodes()[i].episode_id;
        easy.text = capitalize(names()[i]) + " " + nouns_a()[i] + ".";
        easy.sentence = fixture_detail::plain_sentence({capitalize(names()[i]), nouns_a()[i]});
        fx.easy_queries.push_back(std::move(easy));
    }

    // One-hot embeddings for every relation content word; speakers stay out
    // of vocabulary, so gold sum vectors equal the query sum vectors exactly.
    for (std::size_t i = 0; i < 10; ++i) {
        fx.embedding_words.push_back(names()[i]);
        fx.embedding_words.push_back(verbs()[i]);
        fx.embedding_words.push_back(nouns_a()[i]);
        fx.embedding_words.push_back(nouns_b()[i]);
    }
    fx.embeddings = EmbeddingStore(fx.embedding_words.size());
    for (std::size_t w = 0; w < fx.embedding_words.size(); ++w) {
        std::vector<double> vec(fx.embedding_words.size(), 0.0);
        vec[w] = 1.0;
        fx.embeddings.insert(fx.embedding_words[w], std::move(vec));
    }
    return fx;
}

struct PipelineFixturePaths {
    fs::path corpus_dir;
    fs::path query_file;
    fs::path embeddings_file;
};

inline PipelineFixturePaths write_pipeline_fixture(const PipelineFixture& fx, const fs::path& root) {
    PipelineFixturePaths paths{root / "corpus", root / "queries.tsv", root / "embeddings.txt"};
    fs::create_directories(paths.corpus_dir);
    for (const auto& ep : fx.corpus.episodes()) {
        std::ofstream out(paths.corpus_dir / (ep.episode_id + ".tsv"), std::ios::binary);
        write_episode(ep, out);
    }

    std::ofstream queries(paths.query_file, std::ios::binary);
    queries << "# fixture queries\n";
    auto write_query = [&](const Query& q) {
        queries << q.query_id << '\t' << (q.source == QuerySource::Summary ? "S" : "P") << '\t'
                << q.gold_episode << '\t' << q.text << '\t' << inline_annotation(q.sentence) << '\n';
    };
    for (const auto& q : fx.construction_queries) write_query(q);
    for (const auto& q : fx.easy_queries) write_query(q);

    std::ofstream emb(paths.embeddings_file, std::ios::binary);
    for (std::size_t w = 0; w < fx.embedding_words.size(); ++w) {
        emb << fx.embedding_words[w];
        for (std::size_t d = 0; d < fx.embedding_words.size(); ++d)
            emb << ' ' << (d == w ? 1 : 0);
        emb << '\n';
    }
    return paths;
}

// --- Independent oracles -----------------------------------------------------------

// Exhaustive BM25 scoring of every document, formula written out from
// scratch; ties broken by ascending doc id, zero scores dropped.
inline RankedList brute_force_bm25(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
                                   const std::vector<std::string>& query_terms, std::size_t k,
                                   Bm25Params params) {
    const auto n_docs = docs.size();
    double total_len = 0.0;
    for (const auto& [id, terms] : docs) total_len += static_cast<double>(terms.size());
    const double avgdl = total_len / static_cast<double>(n_docs);

    auto doc_tf = [](const std::vector<std::string>& terms, const std::string& t) {
        std::size_t tf = 0;
        for (const auto& term : terms)
            if (term == t) ++tf;
        return tf;
    };
    auto df_of = [&](const std::string& t) {
        std::size_t df = 0;
        for (const auto& [id, terms] : docs)
            if (doc_tf(terms, t) > 0) ++df;
        return df;
    };

    std::vector<std::pair<std::string, double>> scored;
    for (const auto& [id, terms] : docs) {
        double score = 0.0;
        for (const auto& t : query_terms) {
            const std::size_t tf = doc_tf(terms, t);
            if (tf == 0) continue;
            const std::size_t df = df_of(t);
            const double idf = std::log(1.0 + (static_cast<double>(n_docs - df) + 0.5) /
                                                  (static_cast<double>(df) + 0.5));
            const double tfd = static_cast<double>(tf);
            score += idf * tfd * (params.k1 + 1.0) /
                     (tfd + params.k1 * (1.0 - params.b +
                                         params.b * static_cast<double>(terms.size()) / avgdl));
        }
        if (score > 0.0) scored.emplace_back(id, score);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > k) scored.resize(k);
    RankedList out;
    for (const auto& [id, score] : scored) out.push_back({id, score});
    return out;
}

// The matching algorithm written as its definition: triple nested loop with
// the candidate filter applied by scanning.
inline std::vector<double> brute_force_structure_match(
    const std::vector<std::vector<Relation>>& docs_relations, const std::vector<Relation>& query_rels,
    const Comparator& comparator) {
    std::vector<double> scores(docs_relations.size(), 0.0);
    for (std::size_t d = 0; d < docs_relations.size(); ++d) {
        double total = 0.0;
        for (const auto& qrel : query_rels) {
            double best = 0.0;
            for (const auto& drel : docs_relations[d])
                if (overlap_count(drel.lemma_keys, qrel.lemma_keys) >= 1)
                    best = std::max(best, comparator.score(drel, qrel));
            total += best;
        }
        scores[d] = total;
    }
    return scores;
}

// --- Random generators ---------------------------------------------------------------

inline std::string random_word(std::mt19937_64& gen, std::size_t vocab) {
    return "w" + std::to_string(rng::uniform_below(gen, vocab));
}

inline std::vector<std::pair<std::string, std::vector<std::string>>> random_term_docs(
    std::mt19937_64& gen, std::size_t max_docs, std::size_t vocab) {
    const auto n_docs = 1 + rng::uniform_below(gen, max_docs);
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    for (std::size_t d = 0; d < n_docs; ++d) {
        std::vector<std::string> terms;
        const auto len = 1 + rng::uniform_below(gen, 60);
        for (std::size_t t = 0; t < len; ++t) terms.push_back(random_word(gen, vocab));
        docs.emplace_back("d" + std::to_string(100 + d), std::move(terms));
    }
    return docs;
}

inline Relation random_relation(std::mt19937_64& gen, const std::string& origin_id,
                                const std::string& locator, std::size_t vocab, bool with_speaker) {
    std::vector<WordPair> args;
    const auto n_args = rng::uniform_below(gen, 5);
    for (std::size_t a = 0; a < n_args; ++a) {
        std::string surface = random_word(gen, vocab);
        std::string lemma = rng::uniform_unit(gen) < 0.5 ? surface : random_word(gen, vocab);
        args.push_back({surface, lemma});
    }
    std::optional<std::string> speaker;
    if (with_speaker) speaker = "spk" + std::to_string(rng::uniform_below(gen, 4));
    return make_relation(random_word(gen, vocab), std::move(args), std::move(speaker), origin_id,
                         locator, 1 + static_cast<int>(rng::uniform_below(gen, 20)));
}

inline EmbeddingStore random_embeddings(std::mt19937_64& gen, std::size_t vocab, std::size_t dim) {
    EmbeddingStore store(dim);
    for (std::size_t w = 0; w < vocab; ++w) {
        if (rng::uniform_unit(gen) < 0.3) continue; // keep some words out of vocabulary
        std::vector<double> vec(dim);
        for (auto& v : vec) v = rng::uniform_range(gen, -1.0, 1.0);
        store.insert("w" + std::to_string(w), std::move(vec));
    }
    return store;
}

// Random bundle with a strictly descending positive baseline column.
inline ScoreBundle random_bundle(std::mt19937_64& gen, std::size_t k) {
    const auto real = 1 + rng::uniform_below(gen, k);
    std::vector<double> e_scores;
    for (std::size_t i = 0; i < real; ++i) e_scores.push_back(rng::uniform_range(gen, 0.01, 10.0));
    std::sort(e_scores.rbegin(), e_scores.rend());
    RankedList baseline;
    std::vector<double> w, l, m;
    for (std::size_t i = 0; i < real; ++i) {
        baseline.push_back({"d" + std::to_string(i), e_scores[i]});
        w.push_back(rng::uniform_unit(gen));
        l.push_back(rng::uniform_unit(gen));
        m.push_back(rng::uniform_range(gen, -1.0, 1.0));
    }
    return make_bundle(baseline, w, l, m, k);
}

} // namespace testing
