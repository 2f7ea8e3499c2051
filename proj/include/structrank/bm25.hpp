#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "structrank/analyzer.hpp"
#include "structrank/corpus.hpp"
#include "structrank/util.hpp"

// Document-level inverted index scored with Okapi BM25, standing in for the
// external search engine the ranking pipeline is built on. A built index is
// immutable; retrieve() is const and safe to call concurrently.

namespace structrank {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    std::uint32_t doc = 0; // ordinal into doc_ids()
    std::uint32_t tf = 0;
};

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;

    bool operator==(const RankedEntry&) const = default;
};

using RankedList = std::vector<RankedEntry>;

// idf uses the +1 form, so scores are strictly positive even at df == N.
inline double bm25_term_score(std::uint64_t tf, std::uint64_t df, std::uint64_t n_docs,
                              std::uint64_t doc_len, double avgdl, double k1, double b) {
    if (tf < 1) throw DomainError("bm25_term_score: tf must be >= 1");
    if (df < 1 || df > n_docs) throw DomainError("bm25_term_score: need N >= df >= 1");
    if (doc_len < 1) throw DomainError("bm25_term_score: doc_len must be >= 1");
    if (!(avgdl > 0.0)) throw DomainError("bm25_term_score: avgdl must be positive");

    const double idf = std::log(1.0 + (static_cast<double>(n_docs - df) + 0.5) /
                                          (static_cast<double>(df) + 0.5));
    const double tfd = static_cast<double>(tf);
    const double norm = 1.0 - b + b * static_cast<double>(doc_len) / avgdl;
    return idf * tfd * (k1 + 1.0) / (tfd + k1 * norm);
}

class Bm25Index {
public:
    Bm25Index(std::vector<std::string> doc_ids, std::vector<std::uint64_t> doc_lengths,
              std::map<std::string, std::vector<Posting>> postings, Bm25Params params)
        : doc_ids_(std::move(doc_ids)),
          doc_lengths_(std::move(doc_lengths)),
          postings_(std::move(postings)),
          params_(params) {
        if (doc_ids_.size() != doc_lengths_.size())
            throw DomainError("Bm25Index: doc id / length arity mismatch");
        double total = 0.0;
        for (auto len : doc_lengths_) total += static_cast<double>(len);
        avg_doc_length_ = doc_ids_.empty() ? 0.0 : total / static_cast<double>(doc_ids_.size());
        for (const auto& [term, plist] : postings_)
            for (const auto& p : plist)
                if (p.doc >= doc_ids_.size())
                    throw DomainError("Bm25Index: posting for unknown document in term '" + term + "'");
    }

    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const std::vector<std::uint64_t>& doc_lengths() const { return doc_lengths_; }
    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    std::uint64_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    const Bm25Params& params() const { return params_; }

    RankedList retrieve(const std::vector<std::string>& query_terms, std::size_t k) const {
        if (k < 1) throw DomainError("retrieve: k must be >= 1");
        std::vector<double> scores(doc_ids_.size(), 0.0);
        std::vector<bool> touched(doc_ids_.size(), false);
        for (const auto& term : query_terms) {
            auto it = postings_.find(term);
            if (it == postings_.end()) continue;
            const auto df = static_cast<std::uint64_t>(it->second.size());
            for (const auto& p : it->second) {
                scores[p.doc] += bm25_term_score(p.tf, df, doc_count(), doc_lengths_[p.doc],
                                                 avg_doc_length_, params_.k1, params_.b);
                touched[p.doc] = true;
            }
        }

        std::vector<std::uint32_t> hit_docs;
        for (std::uint32_t d = 0; d < scores.size(); ++d)
            if (touched[d] && scores[d] > 0.0) hit_docs.push_back(d);
        std::sort(hit_docs.begin(), hit_docs.end(), [&](std::uint32_t a, std::uint32_t b2) {
            if (scores[a] != scores[b2]) return scores[a] > scores[b2];
            return doc_ids_[a] < doc_ids_[b2];
        });
        if (hit_docs.size() > k) hit_docs.resize(k);

        RankedList out;
        out.reserve(hit_docs.size());
        for (auto d : hit_docs) out.push_back({doc_ids_[d], scores[d]});
        return out;
    }

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint64_t> doc_lengths_;
    std::map<std::string, std::vector<Posting>> postings_;
    Bm25Params params_;
    double avg_doc_length_ = 0.0;
};

// Index arbitrary pre-analyzed documents, in the given order.
inline Bm25Index build_index_from_terms(const std::vector<std::pair<std::string, std::vector<std::string>>>& docs,
                                        Bm25Params params = {}) {
    if (docs.empty()) throw DomainError("build_index: corpus is empty");
    std::vector<std::string> doc_ids;
    std::vector<std::uint64_t> doc_lengths;
    std::map<std::string, std::vector<Posting>> postings;
    for (std::uint32_t d = 0; d < docs.size(); ++d) {
        const auto& [id, terms] = docs[d];
        if (id.find('\t') != std::string::npos || id.find('\n') != std::string::npos)
            throw FormatError("document id contains tab or newline: " + id);
        doc_ids.push_back(id);
        doc_lengths.push_back(terms.size());
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : terms) ++tf[t];
        for (const auto& [term, count] : tf) postings[term].push_back({d, count});
    }
    return Bm25Index(std::move(doc_ids), std::move(doc_lengths), std::move(postings), params);
}

inline std::vector<std::string> analyze_episode(const Episode& episode, const AnalyzerConfig& config = {}) {
    std::vector<std::string> terms;
    for (const auto& scene : episode.scenes) {
        for (const auto& utt : scene.utterances) {
            if (config.index_speakers)
                for (auto& t : analyze(utt.speaker, config)) terms.push_back(std::move(t));
            for (const auto& sentence : utt.sentences)
                for (const auto& tok : sentence.tokens)
                    for (auto& t : analyze(tok.form, config)) terms.push_back(std::move(t));
        }
    }
    return terms;
}

inline Bm25Index build_index(const Corpus& corpus, const AnalyzerConfig& config = {},
                             Bm25Params params = {}) {
    if (corpus.empty()) throw DomainError("build_index: corpus is empty");
    std::vector<std::pair<std::string, std::vector<std::string>>> docs;
    docs.reserve(corpus.size());
    for (const auto& ep : corpus.episodes())
        docs.emplace_back(ep.episode_id, analyze_episode(ep, config));
    return build_index_from_terms(docs, params);
}

// --- Persistence -------------------------------------------------------------
//
// Line-oriented, versioned, lossless:
//   structrank.bm25<TAB>v1
//   # <metadata>
//   params<TAB>k1<TAB>b
//   docs<TAB>N
//   doc<TAB>id<TAB>length          (one per document, ordinal order)
//   term<TAB>term<TAB>d:tf,d:tf,...
//   end

inline void save_bm25_index(const Bm25Index& index, std::ostream& out,
                            const std::vector<std::string>& metadata = {}) {
    out << "structrank.bm25\tv1\n";
    for (const auto& line : metadata) out << "# " << line << '\n';
    out << "params\t" << num::fmt_double(index.params().k1) << '\t'
        << num::fmt_double(index.params().b) << '\n';
    out << "docs\t" << index.doc_count() << '\n';
    for (std::size_t d = 0; d < index.doc_count(); ++d)
        out << "doc\t" << index.doc_ids()[d] << '\t' << index.doc_lengths()[d] << '\n';
    for (const auto& [term, plist] : index.postings()) {
        out << "term\t" << term << '\t';
        for (std::size_t i = 0; i < plist.size(); ++i) {
            if (i) out << ',';
            out << plist[i].doc << ':' << plist[i].tf;
        }
        out << '\n';
    }
    out << "end\n";
}

inline Bm25Index load_bm25_index(std::istream& in, const std::string& filename = "<bm25 index>") {
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.front() == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_line() || line != "structrank.bm25\tv1")
        throw FormatError(filename + ": not a structrank.bm25 v1 file");

    if (!next_line()) throw FormatError(filename + ": truncated (params)");
    auto fields = str::split(line, '\t');
    if (fields.size() != 3 || fields[0] != "params")
        throw FormatError(filename + ": expected params line");
    Bm25Params params{num::parse_double(fields[1], "k1"), num::parse_double(fields[2], "b")};

    if (!next_line()) throw FormatError(filename + ": truncated (docs)");
    fields = str::split(line, '\t');
    if (fields.size() != 2 || fields[0] != "docs")
        throw FormatError(filename + ": expected docs line");
    const auto n_docs = static_cast<std::size_t>(num::parse_int(fields[1], "doc count"));

    std::vector<std::string> doc_ids;
    std::vector<std::uint64_t> doc_lengths;
    for (std::size_t i = 0; i < n_docs; ++i) {
        if (!next_line()) throw FormatError(filename + ": truncated (doc records)");
        fields = str::split(line, '\t');
        if (fields.size() != 3 || fields[0] != "doc")
            throw FormatError(filename + ": expected doc line");
        doc_ids.push_back(fields[1]);
        doc_lengths.push_back(static_cast<std::uint64_t>(num::parse_int(fields[2], "doc length")));
    }

    std::map<std::string, std::vector<Posting>> postings;
    while (next_line() && line != "end") {
        fields = str::split(line, '\t');
        if (fields.size() != 3 || fields[0] != "term")
            throw FormatError(filename + ": expected term line, got '" + line + "'");
        std::vector<Posting> plist;
        for (const auto& pair : str::split(fields[2], ',')) {
            if (pair.empty()) continue;
            auto parts = str::split(pair, ':');
            if (parts.size() != 2) throw FormatError(filename + ": malformed posting '" + pair + "'");
            plist.push_back({static_cast<std::uint32_t>(num::parse_int(parts[0], "posting doc")),
                             static_cast<std::uint32_t>(num::parse_int(parts[1], "posting tf"))});
        }
        postings.emplace(fields[1], std::move(plist));
    }
    if (line != "end") throw FormatError(filename + ": missing end marker");
    return Bm25Index(std::move(doc_ids), std::move(doc_lengths), std::move(postings), params);
}

} // namespace structrank
