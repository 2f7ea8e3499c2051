#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "structrank/corpus.hpp"
#include "structrank/util.hpp"

// A relation is a predicate plus the content words of its semantic-role
// arguments; relations from dialogue additionally carry the speaker name.
// Matching operates on a relation's word set: predicate + argument words
// + speaker. Keys are lowercased; the lemma keys drive candidate filtering
// and the lemma comparator, the surface keys the word comparator.

namespace structrank {

struct WordPair {
    std::string surface;
    std::string lemma;

    bool operator==(const WordPair&) const = default;
};

struct Relation {
    std::string predicate_lemma;
    std::vector<WordPair> argument_words; // deduped, first-occurrence order
    std::optional<std::string> speaker;   // present iff extracted from dialogue
    std::string origin_id;                // episode id or query id
    std::string locator;                  // e.g. "sc0:u1:s0", "q" for queries
    int origin_length = 0;                // token count of the source sentence

    std::vector<std::string> surface_keys; // sorted unique lowercase
    std::vector<std::string> lemma_keys;   // sorted unique lowercase

    bool operator==(const Relation&) const = default;

    void finalize() {
        surface_keys.clear();
        lemma_keys.clear();
        auto push = [](std::vector<std::string>& v, const std::string& w) {
            if (!w.empty()) v.push_back(str::to_lower_ascii(w));
        };
        push(surface_keys, predicate_lemma);
        push(lemma_keys, predicate_lemma);
        for (const auto& wp : argument_words) {
            push(surface_keys, wp.surface);
            push(lemma_keys, wp.lemma.empty() ? wp.surface : wp.lemma);
        }
        if (speaker) {
            push(surface_keys, *speaker);
            push(lemma_keys, *speaker);
        }
        auto dedup = [](std::vector<std::string>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        dedup(surface_keys);
        dedup(lemma_keys);
    }
};

inline Relation make_relation(std::string predicate_lemma, std::vector<WordPair> argument_words,
                              std::optional<std::string> speaker, std::string origin_id,
                              std::string locator, int origin_length) {
    Relation r;
    r.predicate_lemma = std::move(predicate_lemma);
    r.argument_words = std::move(argument_words);
    r.speaker = std::move(speaker);
    r.origin_id = std::move(origin_id);
    r.locator = std::move(locator);
    r.origin_length = origin_length;
    r.finalize();
    return r;
}

// Count of shared words between two sorted unique key vectors.
inline std::size_t overlap_count(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t count = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        int cmp = a[i].compare(b[j]);
        if (cmp == 0) {
            ++count;
            ++i;
            ++j;
        } else if (cmp < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    return count;
}

// --- Content-word heuristic ---------------------------------------------------

namespace detail {

// Light verbs and near-empty adverbs that survive the POS filter.
inline const std::unordered_set<std::string>& argument_stopwords() {
    static const std::unordered_set<std::string> words = {
        "be", "have", "do", "not", "n't", "no", "so", "too", "very", "just",
        "then", "there", "here", "now", "also", "well", "yes", "yeah", "okay", "ok"};
    return words;
}

inline bool content_pos(const std::string& pos) {
    return pos.starts_with("NN") || pos.starts_with("VB") || pos.starts_with("JJ") ||
           pos.starts_with("RB") || pos == "CD";
}

inline const std::string& lemma_or_form(const Token& tok) {
    return (tok.lemma.empty() || tok.lemma == "_") ? tok.form : tok.lemma;
}

// Keep nouns, verbs, adjectives, adverbs and numbers, plus anything inside a
// named-entity span; auxiliaries and the stopword list are pruned as noise.
inline bool is_content_token(const Token& tok) {
    if (tok.ner != "O") return true;
    if (tok.pos == "MD" || tok.deprel == "aux" || tok.deprel == "auxpass") return false;
    if (!content_pos(tok.pos)) return false;
    return argument_stopwords().count(str::to_lower_ascii(lemma_or_form(tok))) == 0;
}

} // namespace detail

// One relation per predicate that governs at least one semantic-role
// argument. Each argument contributes the content words of its dependency
// subtree; the predicate token itself is never collected as an argument word.
inline std::vector<Relation> extract_relations(const AnnotatedSentence& sentence,
                                               const std::optional<std::string>& speaker,
                                               const std::string& origin_id = "",
                                               const std::string& locator = "") {
    const auto& tokens = sentence.tokens;
    const int n = static_cast<int>(tokens.size());

    std::vector<std::vector<int>> children(static_cast<std::size_t>(n) + 1);
    for (const auto& tok : tokens)
        if (tok.head >= 0 && tok.head <= n) children[static_cast<std::size_t>(tok.head)].push_back(tok.index);

    // predicate index -> argument head indices, in token order
    std::map<int, std::vector<int>> args_by_predicate;
    for (const auto& tok : tokens)
        for (const auto& arc : tok.srl)
            if (arc.predicate_index >= 1 && arc.predicate_index <= n)
                args_by_predicate[arc.predicate_index].push_back(tok.index);

    std::vector<Relation> relations;
    for (const auto& [pred_idx, arg_heads] : args_by_predicate) {
        Relation rel;
        rel.predicate_lemma = detail::lemma_or_form(tokens[static_cast<std::size_t>(pred_idx) - 1]);
        rel.speaker = speaker;
        rel.origin_id = origin_id;
        rel.locator = locator;
        rel.origin_length = n;

        std::vector<bool> in_subtree(static_cast<std::size_t>(n) + 1, false);
        for (int head : arg_heads) {
            std::vector<int> stack{head};
            while (!stack.empty()) {
                int cur = stack.back();
                stack.pop_back();
                if (cur == pred_idx || in_subtree[static_cast<std::size_t>(cur)]) continue;
                in_subtree[static_cast<std::size_t>(cur)] = true;
                for (int child : children[static_cast<std::size_t>(cur)]) stack.push_back(child);
            }
        }

        std::unordered_set<std::string> seen;
        for (int i = 1; i <= n; ++i) {
            if (!in_subtree[static_cast<std::size_t>(i)]) continue;
            const Token& tok = tokens[static_cast<std::size_t>(i) - 1];
            if (!detail::is_content_token(tok)) continue;
            WordPair wp{tok.form, detail::lemma_or_form(tok)};
            std::string key = str::to_lower_ascii(wp.surface) + "\t" + str::to_lower_ascii(wp.lemma);
            if (seen.insert(key).second) rel.argument_words.push_back(std::move(wp));
        }
        rel.finalize();
        relations.push_back(std::move(rel));
    }
    return relations;
}

inline std::vector<Relation> query_relations(const Query& query) {
    return extract_relations(query.sentence, std::nullopt, query.query_id, "q");
}

// --- Relation inverted index ---------------------------------------------------

struct RelationRef {
    std::uint32_t relation = 0;
    std::uint32_t doc = 0;
};

// Words of every dialogue relation (lemma keys) -> (relation, episode)
// postings, plus per-episode relation lists. Immutable once built.
class RelationIndex {
public:
    RelationIndex() = default;

    RelationIndex(std::vector<std::string> doc_ids, std::vector<Relation> relations)
        : doc_ids_(std::move(doc_ids)), relations_(std::move(relations)) {
        for (std::uint32_t d = 0; d < doc_ids_.size(); ++d) doc_ordinals_.emplace(doc_ids_[d], d);
        by_doc_.resize(doc_ids_.size());
        for (std::uint32_t r = 0; r < relations_.size(); ++r) {
            auto it = doc_ordinals_.find(relations_[r].origin_id);
            if (it == doc_ordinals_.end())
                throw IntegrityError("relation references unknown document: " + relations_[r].origin_id);
            by_doc_[it->second].push_back(r);
            for (const auto& word : relations_[r].lemma_keys)
                postings_[word].push_back({r, it->second});
        }
        // relation ids are assigned in document order, so postings arrive
        // already sorted by (doc, relation); candidate lookup binary-searches
        // the doc range.
        for (auto& [word, plist] : postings_)
            std::sort(plist.begin(), plist.end(), [](const RelationRef& a, const RelationRef& b) {
                return a.doc != b.doc ? a.doc < b.doc : a.relation < b.relation;
            });
    }

    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<Relation>& relations() const { return relations_; }
    const Relation& relation(std::uint32_t id) const { return relations_[id]; }
    std::size_t size() const { return relations_.size(); }

    std::optional<std::uint32_t> doc_ordinal(const std::string& doc_id) const {
        auto it = doc_ordinals_.find(doc_id);
        if (it == doc_ordinals_.end()) return std::nullopt;
        return it->second;
    }

    const std::vector<std::uint32_t>& relations_in_doc(std::uint32_t doc) const { return by_doc_[doc]; }

    const std::vector<RelationRef>* lookup(const std::string& word) const {
        auto it = postings_.find(word);
        return it == postings_.end() ? nullptr : &it->second;
    }

    // Relations of `doc` sharing at least one lemma key with the query
    // relation: the candidate set of the matching algorithm. Sorted unique.
    std::vector<std::uint32_t> candidates(std::uint32_t doc, const Relation& query_relation) const {
        std::vector<std::uint32_t> out;
        for (const auto& word : query_relation.lemma_keys) {
            auto it = postings_.find(word);
            if (it == postings_.end()) continue;
            const auto& plist = it->second;
            auto lo = std::lower_bound(plist.begin(), plist.end(), doc,
                                       [](const RelationRef& r, std::uint32_t d) { return r.doc < d; });
            for (; lo != plist.end() && lo->doc == doc; ++lo) out.push_back(lo->relation);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    std::vector<std::string> doc_ids_;
    std::vector<Relation> relations_;
    std::unordered_map<std::string, std::uint32_t> doc_ordinals_;
    std::vector<std::vector<std::uint32_t>> by_doc_;
    std::unordered_map<std::string, std::vector<RelationRef>> postings_;
};

// Document relations sharing at least one lemma key with the query relation,
// in input order. The scan counterpart of RelationIndex::candidates.
inline std::vector<Relation> candidate_relations(const std::vector<Relation>& doc_relations,
                                                 const Relation& query_relation) {
    std::vector<Relation> out;
    for (const auto& rel : doc_relations)
        if (overlap_count(rel.lemma_keys, query_relation.lemma_keys) >= 1) out.push_back(rel);
    return out;
}

inline RelationIndex build_relation_index(const Corpus& corpus) {
    std::vector<std::string> doc_ids;
    std::vector<Relation> relations;
    for (const auto& ep : corpus.episodes()) {
        doc_ids.push_back(ep.episode_id);
        for (std::size_t si = 0; si < ep.scenes.size(); ++si) {
            const auto& scene = ep.scenes[si];
            for (std::size_t ui = 0; ui < scene.utterances.size(); ++ui) {
                const auto& utt = scene.utterances[ui];
                for (std::size_t ti = 0; ti < utt.sentences.size(); ++ti) {
                    std::string locator = "sc" + std::to_string(si) + ":u" + std::to_string(ui) +
                                          ":s" + std::to_string(ti);
                    for (auto& rel : extract_relations(utt.sentences[ti], utt.speaker,
                                                       ep.episode_id, locator))
                        relations.push_back(std::move(rel));
                }
            }
        }
    }
    return RelationIndex(std::move(doc_ids), std::move(relations));
}

// Debug dump format: predicate(speaker; arg words...).
inline std::string format_relation(const Relation& rel) {
    std::string out = rel.predicate_lemma + "(";
    if (rel.speaker) out += *rel.speaker;
    out += ";";
    for (const auto& wp : rel.argument_words) out += " " + wp.surface;
    out += ")";
    return out;
}

// --- Persistence ----------------------------------------------------------------

inline void save_relation_index(const RelationIndex& index, std::ostream& out,
                                const std::vector<std::string>& metadata = {}) {
    out << "structrank.relidx\tv1\n";
    for (const auto& line : metadata) out << "# " << line << '\n';
    out << "docs\t" << index.doc_ids().size() << '\n';
    for (const auto& id : index.doc_ids()) out << "doc\t" << id << '\n';
    out << "rels\t" << index.size() << '\n';
    for (const auto& rel : index.relations()) {
        out << "rel\t" << rel.origin_id << '\t' << rel.locator << '\t' << rel.origin_length << '\t'
            << (rel.speaker ? *rel.speaker : "_") << '\t' << rel.predicate_lemma << '\t'
            << rel.argument_words.size();
        for (const auto& wp : rel.argument_words) out << '\t' << wp.surface << '\t' << wp.lemma;
        out << '\n';
    }
    out << "end\n";
}

inline RelationIndex load_relation_index(std::istream& in, const std::string& filename = "<relation index>") {
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_line() || line != "structrank.relidx\tv1")
        throw FormatError(filename + ": not a structrank.relidx v1 file");

    if (!next_line()) throw FormatError(filename + ": truncated (docs)");
    auto fields = str::split(line, '\t');
    if (fields.size() != 2 || fields[0] != "docs") throw FormatError(filename + ": expected docs line");
    const auto n_docs = static_cast<std::size_t>(num::parse_int(fields[1], "doc count"));

    std::vector<std::string> doc_ids;
    for (std::size_t i = 0; i < n_docs; ++i) {
        if (!next_line()) throw FormatError(filename + ": truncated (doc records)");
        fields = str::split(line, '\t');
        if (fields.size() != 2 || fields[0] != "doc") throw FormatError(filename + ": expected doc line");
        doc_ids.push_back(fields[1]);
    }

    if (!next_line()) throw FormatError(filename + ": truncated (rels)");
    fields = str::split(line, '\t');
    if (fields.size() != 2 || fields[0] != "rels") throw FormatError(filename + ": expected rels line");
    const auto n_rels = static_cast<std::size_t>(num::parse_int(fields[1], "relation count"));

    std::vector<Relation> relations;
    relations.reserve(n_rels);
    for (std::size_t i = 0; i < n_rels; ++i) {
        if (!next_line()) throw FormatError(filename + ": truncated (rel records)");
        fields = str::split(line, '\t');
        if (fields.size() < 7 || fields[0] != "rel") throw FormatError(filename + ": expected rel line");
        Relation rel;
        rel.origin_id = fields[1];
        rel.locator = fields[2];
        rel.origin_length = static_cast<int>(num::parse_int(fields[3], "origin length"));
        if (fields[4] != "_") rel.speaker = fields[4];
        rel.predicate_lemma = fields[5];
        const auto n_args = static_cast<std::size_t>(num::parse_int(fields[6], "argument count"));
        if (fields.size() != 7 + 2 * n_args)
            throw FormatError(filename + ": rel record arity mismatch");
        for (std::size_t a = 0; a < n_args; ++a)
            rel.argument_words.push_back({fields[7 + 2 * a], fields[8 + 2 * a]});
        rel.finalize();
        relations.push_back(std::move(rel));
    }
    if (!next_line() || line != "end") throw FormatError(filename + ": missing end marker");
    return RelationIndex(std::move(doc_ids), std::move(relations));
}

} // namespace structrank
