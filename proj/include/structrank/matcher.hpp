#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "structrank/relations.hpp"
#include "structrank/util.hpp"

// Structure matching: a document's score against a query is, per query
// relation, the best comparator score among the document relations that
// share at least one word with it, summed over all query relations.

namespace structrank {

enum class OverlapKey { Surface, Lemma };

// Harmonic mean of the overlap count normalized by utterance length and by
// query length.
inline double compare_overlap(const Relation& doc_rel, const Relation& query_rel, OverlapKey key) {
    if (doc_rel.origin_length <= 0 || query_rel.origin_length <= 0)
        throw DomainError("compare_overlap: origin_length must be positive");
    const auto& doc_words = key == OverlapKey::Surface ? doc_rel.surface_keys : doc_rel.lemma_keys;
    const auto& query_words = key == OverlapKey::Surface ? query_rel.surface_keys : query_rel.lemma_keys;
    const double c = static_cast<double>(overlap_count(doc_words, query_words));
    const double a = c / static_cast<double>(doc_rel.origin_length);
    const double b = c / static_cast<double>(query_rel.origin_length);
    if (a + b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

class EmbeddingStore {
public:
    EmbeddingStore() = default;

    explicit EmbeddingStore(std::size_t dimension) : dimension_(dimension) {}

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return vectors_.size(); }

    // Last write wins; returns false when the word was already present.
    bool insert(const std::string& word, std::vector<double> vec) {
        if (dimension_ == 0) dimension_ = vec.size();
        if (vec.size() != dimension_)
            throw FormatError("embedding dimension mismatch for '" + word + "'");
        auto [it, inserted] = vectors_.insert_or_assign(word, std::move(vec));
        (void)it;
        return inserted;
    }

    // Unknown words read as the zero vector.
    const std::vector<double>* find(const std::string& word) const {
        auto it = vectors_.find(word);
        return it == vectors_.end() ? nullptr : &it->second;
    }

    std::vector<double> sum_vector(const std::vector<std::string>& words) const {
        std::vector<double> sum(dimension_, 0.0);
        for (const auto& word : words) {
            if (const auto* vec = find(word))
                for (std::size_t i = 0; i < dimension_; ++i) sum[i] += (*vec)[i];
        }
        return sum;
    }

private:
    std::size_t dimension_ = 0;
    std::unordered_map<std::string, std::vector<double>> vectors_;
};

// Cosine of the two sum vectors over each relation's word set (surface keys,
// each distinct word once). Zero when either sum vector vanishes.
inline double compare_embedding(const Relation& doc_rel, const Relation& query_rel,
                                const EmbeddingStore& store) {
    const auto a = store.sum_vector(doc_rel.surface_keys);
    const auto b = store.sum_vector(query_rel.surface_keys);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

enum class ComparatorKind { Word, Lemma, Embedding };

inline const char* to_string(ComparatorKind kind) {
    switch (kind) {
        case ComparatorKind::Word: return "word";
        case ComparatorKind::Lemma: return "lemma";
        default: return "embedding";
    }
}

struct Comparator {
    ComparatorKind kind = ComparatorKind::Lemma;
    const EmbeddingStore* store = nullptr; // required for Embedding

    double score(const Relation& doc_rel, const Relation& query_rel) const {
        switch (kind) {
            case ComparatorKind::Word:
                return compare_overlap(doc_rel, query_rel, OverlapKey::Surface);
            case ComparatorKind::Lemma:
                return compare_overlap(doc_rel, query_rel, OverlapKey::Lemma);
            case ComparatorKind::Embedding:
                if (!store) throw DomainError("embedding comparator requires an embedding store");
                return compare_embedding(doc_rel, query_rel, *store);
        }
        throw DomainError("unknown comparator");
    }
};

// Per-document matching scores, aligned with `docs`. For each query relation
// the best candidate score is accumulated; the per-relation maximum starts at
// zero, so negative cosines never reduce a document's score. Documents absent
// from the index score 0.
inline std::vector<double> structure_match(const std::vector<std::string>& docs,
                                           const std::vector<Relation>& query_rels,
                                           const RelationIndex& index, const Comparator& comparator) {
    std::vector<double> scores(docs.size(), 0.0);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        auto doc = index.doc_ordinal(docs[i]);
        if (!doc) continue;
        double total = 0.0;
        for (const auto& query_rel : query_rels) {
            double best = 0.0;
            for (auto rel_id : index.candidates(*doc, query_rel))
                best = std::max(best, comparator.score(index.relation(rel_id), query_rel));
            total += best;
        }
        scores[i] = total;
    }
    return scores;
}

// --- Embedding file loading -------------------------------------------------
//
// Text format, one entry per line: the word followed by its components,
// space-separated. The first line fixes the dimension.

inline EmbeddingStore load_embeddings(const std::filesystem::path& path,
                                      std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open embedding file: " + path.string());

    EmbeddingStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = str::split_ws(line);
        if (fields.empty()) continue;
        if (store.dimension() != 0 && fields.size() != store.dimension() + 1)
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(store.dimension() + 1) + " fields, found " +
                              std::to_string(fields.size()));
        if (store.dimension() == 0 && fields.size() < 2)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": embedding line needs a word and at least one component");
        std::vector<double> vec;
        vec.reserve(fields.size() - 1);
        for (std::size_t i = 1; i < fields.size(); ++i)
            vec.push_back(num::parse_double(fields[i], "embedding component"));
        if (!store.insert(fields[0], std::move(vec)) && warnings)
            warnings->push_back(path.string() + ":" + std::to_string(lineno) +
                                ": duplicate embedding for '" + fields[0] + "', keeping the last");
    }
    return store;
}

} // namespace structrank
