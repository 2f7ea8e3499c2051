#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "structrank/util.hpp"

// Documents are TV-show episodes: episode -> scenes -> utterances, each
// utterance a list of annotated sentences. One transcript file per episode.
//
// Token rows are tab-separated with one column per annotation layer:
//   index  form  lemma  pos  ner  head  deprel  pred  [one role column per predicate]
// "_" marks an empty cell ("O" or "_" in the ner column means no entity).
// A row whose pred cell is non-empty is a predicate; the j-th role column
// holds this token's role for the j-th predicate of the sentence, in token
// order. Sentences are separated by blank lines. Structure directives:
//   #episode <id>    optional, overrides the path-derived episode id
//   #scene <id>      starts a scene
//   #speaker <name>  starts an utterance in the current scene
// Any other line starting with '#' is a comment.

namespace structrank {

struct SrlArc {
    int predicate_index = 0; // 1-based token index of the predicate
    std::string role;

    bool operator==(const SrlArc&) const = default;
};

struct Token {
    int index = 0; // 1-based
    std::string form;
    std::string lemma;
    std::string pos;
    std::string ner;  // "O" when outside any entity span
    int head = 0;     // 0 = root
    std::string deprel;
    std::string pred;         // predicate sense, empty when not a predicate
    std::vector<SrlArc> srl;  // roles this token fills, one per governing predicate

    bool operator==(const Token&) const = default;
};

struct AnnotatedSentence {
    std::vector<Token> tokens;

    bool operator==(const AnnotatedSentence&) const = default;
};

struct Utterance {
    std::string speaker;
    std::vector<AnnotatedSentence> sentences;

    bool operator==(const Utterance&) const = default;
};

struct Scene {
    std::string scene_id;
    std::vector<Utterance> utterances;

    bool operator==(const Scene&) const = default;
};

struct Episode {
    std::string episode_id;
    std::vector<Scene> scenes;

    bool operator==(const Episode&) const = default;
};

class Corpus {
public:
    Corpus() = default;

    explicit Corpus(std::vector<Episode> episodes) : episodes_(std::move(episodes)) {
        for (std::size_t i = 0; i < episodes_.size(); ++i) {
            auto [it, inserted] = by_id_.emplace(episodes_[i].episode_id, i);
            if (!inserted)
                throw IntegrityError("duplicate episode id: " + episodes_[i].episode_id);
        }
    }

    const std::vector<Episode>& episodes() const { return episodes_; }
    std::size_t size() const { return episodes_.size(); }
    bool empty() const { return episodes_.empty(); }

    const Episode* find(const std::string& episode_id) const {
        auto it = by_id_.find(episode_id);
        return it == by_id_.end() ? nullptr : &episodes_[it->second];
    }

    bool operator==(const Corpus& other) const { return episodes_ == other.episodes_; }

private:
    std::vector<Episode> episodes_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

enum class QuerySource { Summary, Plot };

inline const char* to_string(QuerySource s) {
    return s == QuerySource::Summary ? "Summary" : "Plot";
}

struct Query {
    std::string query_id;
    std::string text;
    AnnotatedSentence sentence;
    QuerySource source = QuerySource::Summary;
    std::string gold_episode;

    bool operator==(const Query&) const = default;
};

struct SplitRatios {
    double train = 0.0;
    double dev = 0.0;
    double eval = 0.0;
};

struct DataSplit {
    std::vector<Query> train;
    std::vector<Query> dev;
    std::vector<Query> eval;
};

namespace detail {

struct RawRow {
    std::vector<std::string> fields;
    std::size_t offset = 0; // byte offset of the row start, for error messages
};

inline const char* kLayerNames[] = {"index", "form", "lemma", "pos", "ner", "head", "deprel", "pred"};
constexpr std::size_t kBaseColumns = 8;

inline void walk_to_root_or_throw(const std::vector<Token>& tokens, const std::string& where) {
    const std::size_t n = tokens.size();
    for (std::size_t start = 0; start < n; ++start) {
        int cur = tokens[start].index;
        std::size_t steps = 0;
        while (cur != 0) {
            cur = tokens[static_cast<std::size_t>(cur) - 1].head;
            if (++steps > n)
                throw ParseError(where + ": dependency cycle involving token " +
                                 std::to_string(tokens[start].index));
        }
    }
}

// One sentence from its raw token rows. `where` prefixes every error.
inline AnnotatedSentence parse_sentence(const std::vector<RawRow>& rows, const std::string& where) {
    AnnotatedSentence sentence;
    sentence.tokens.reserve(rows.size());

    std::vector<int> predicate_indices;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& fields = rows[i].fields;
        if (fields.size() < kBaseColumns)
            throw SchemaError(where + ": missing annotation layer '" +
                              kLayerNames[fields.size()] + "' at offset " +
                              std::to_string(rows[i].offset));
        Token tok;
        tok.index = static_cast<int>(num::parse_int(fields[0], "token index"));
        if (tok.index != static_cast<int>(i) + 1)
            throw ParseError(where + ": token index " + fields[0] + " out of sequence at offset " +
                             std::to_string(rows[i].offset));
        tok.form = fields[1];
        tok.lemma = fields[2];
        tok.pos = fields[3];
        tok.ner = (fields[4] == "_" || fields[4].empty()) ? "O" : fields[4];
        tok.head = static_cast<int>(num::parse_int(fields[5], "head index"));
        tok.deprel = fields[6];
        tok.pred = fields[7] == "_" ? "" : fields[7];
        if (!tok.pred.empty()) predicate_indices.push_back(tok.index);
        sentence.tokens.push_back(std::move(tok));
    }

    const std::size_t expected = kBaseColumns + predicate_indices.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& fields = rows[i].fields;
        if (fields.size() != expected)
            throw ParseError(where + ": expected " + std::to_string(expected) + " columns, found " +
                             std::to_string(fields.size()) + " at offset " +
                             std::to_string(rows[i].offset));
        for (std::size_t p = 0; p < predicate_indices.size(); ++p) {
            const std::string& cell = fields[kBaseColumns + p];
            if (cell != "_" && !cell.empty())
                sentence.tokens[i].srl.push_back({predicate_indices[p], cell});
        }
    }

    const int n = static_cast<int>(sentence.tokens.size());
    for (const auto& tok : sentence.tokens) {
        if (tok.head < 0 || tok.head > n)
            throw ParseError(where + ": head index " + std::to_string(tok.head) +
                             " outside [0, " + std::to_string(n) + "]");
        if (tok.head == tok.index)
            throw ParseError(where + ": token " + std::to_string(tok.index) + " is its own head");
    }
    walk_to_root_or_throw(sentence.tokens, where);
    return sentence;
}

inline std::vector<std::string> split_tabs(std::string_view line) {
    auto fields = str::split(line, '\t');
    for (auto& f : fields) f = std::string(str::trim(f));
    return fields;
}

} // namespace detail

// --- Episode files ---------------------------------------------------------

inline Episode parse_episode(const std::string& content, const std::string& default_id,
                             const std::string& filename) {
    Episode episode;
    episode.episode_id = default_id;

    std::vector<detail::RawRow> pending_rows;
    bool saw_scene_directive = false;

    auto flush_sentence = [&]() {
        if (pending_rows.empty()) return;
        if (episode.scenes.empty() || episode.scenes.back().utterances.empty())
            throw ParseError(filename + ": token row outside an utterance at offset " +
                             std::to_string(pending_rows.front().offset));
        auto& utt = episode.scenes.back().utterances.back();
        utt.sentences.push_back(detail::parse_sentence(pending_rows, filename));
        pending_rows.clear();
    };

    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = str::trim(std::string_view(content).substr(pos, eol - pos));
        const std::size_t offset = pos;
        pos = eol + 1;

        if (line.empty()) {
            flush_sentence();
            if (eol == content.size()) break;
            continue;
        }
        if (line.front() == '#') {
            if (line.starts_with("#episode")) {
                flush_sentence();
                if (saw_scene_directive)
                    throw ParseError(filename + ": #episode after #scene at offset " +
                                     std::to_string(offset));
                auto id = str::trim(line.substr(8));
                if (id.empty())
                    throw ParseError(filename + ": empty #episode id at offset " + std::to_string(offset));
                episode.episode_id = std::string(id);
            } else if (line.starts_with("#scene")) {
                flush_sentence();
                saw_scene_directive = true;
                auto id = str::trim(line.substr(6));
                if (id.empty())
                    throw ParseError(filename + ": empty #scene id at offset " + std::to_string(offset));
                episode.scenes.push_back(Scene{std::string(id), {}});
            } else if (line.starts_with("#speaker")) {
                flush_sentence();
                auto name = str::trim(line.substr(8));
                if (name.empty())
                    throw ParseError(filename + ": empty #speaker name at offset " + std::to_string(offset));
                if (episode.scenes.empty())
                    throw ParseError(filename + ": #speaker outside a scene at offset " +
                                     std::to_string(offset));
                episode.scenes.back().utterances.push_back(Utterance{std::string(name), {}});
            }
            // other '#' lines are comments
            continue;
        }
        pending_rows.push_back({detail::split_tabs(line), offset});
    }
    flush_sentence();

    if (episode.scenes.empty())
        throw ParseError(filename + ": episode has no scenes");
    for (const auto& scene : episode.scenes) {
        if (scene.utterances.empty())
            throw ParseError(filename + ": scene '" + scene.scene_id + "' has no utterances");
        for (const auto& utt : scene.utterances)
            if (utt.sentences.empty())
                throw ParseError(filename + ": utterance by '" + utt.speaker + "' in scene '" +
                                 scene.scene_id + "' has no sentences");
    }
    return episode;
}

inline Episode load_episode_file(const std::filesystem::path& path, const std::string& default_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open transcript file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_episode(buf.str(), default_id, path.string());
}

// Episode id from the path relative to the corpus root: directory components
// and the file stem concatenated, so both s01/e03.tsv and s01e03.tsv load as
// "s01e03".
inline std::string episode_id_from_path(const std::filesystem::path& relative) {
    std::string id;
    auto parent = relative.parent_path();
    for (const auto& part : parent) id += part.string();
    id += relative.stem().string();
    return id;
}

inline Corpus load_corpus(const std::filesystem::path& transcript_dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(transcript_dir) || !fs::is_directory(transcript_dir))
        throw ConfigError("transcript path is not a directory: " + transcript_dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(transcript_dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename().string().starts_with(".")) continue;
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
        return a.lexically_relative(transcript_dir).generic_string() <
               b.lexically_relative(transcript_dir).generic_string();
    });

    std::vector<Episode> episodes;
    episodes.reserve(files.size());
    for (const auto& file : files)
        episodes.push_back(load_episode_file(file, episode_id_from_path(file.lexically_relative(transcript_dir))));
    return Corpus(std::move(episodes));
}

// --- Canonical serialization (inverse of parse_episode) --------------------

inline void write_sentence(const AnnotatedSentence& sentence, std::ostream& out) {
    std::vector<int> predicate_indices;
    for (const auto& tok : sentence.tokens)
        if (!tok.pred.empty()) predicate_indices.push_back(tok.index);

    for (const auto& tok : sentence.tokens) {
        out << tok.index << '\t' << tok.form << '\t' << tok.lemma << '\t' << tok.pos << '\t'
            << tok.ner << '\t' << tok.head << '\t' << tok.deprel << '\t'
            << (tok.pred.empty() ? "_" : tok.pred);
        for (int p : predicate_indices) {
            const SrlArc* arc = nullptr;
            for (const auto& a : tok.srl)
                if (a.predicate_index == p) arc = &a;
            out << '\t' << (arc ? arc->role : "_");
        }
        out << '\n';
    }
    out << '\n';
}

inline void write_episode(const Episode& episode, std::ostream& out) {
    out << "#episode " << episode.episode_id << '\n';
    for (const auto& scene : episode.scenes) {
        out << "#scene " << scene.scene_id << '\n';
        for (const auto& utt : scene.utterances) {
            out << "#speaker " << utt.speaker << '\n';
            for (const auto& sentence : utt.sentences) write_sentence(sentence, out);
        }
    }
}

// --- Corpus statistics ------------------------------------------------------

inline std::size_t episode_token_count(const Episode& episode) {
    std::size_t n = 0;
    for (const auto& scene : episode.scenes)
        for (const auto& utt : scene.utterances)
            for (const auto& sentence : utt.sentences) n += sentence.tokens.size();
    return n;
}

inline std::size_t corpus_token_count(const Corpus& corpus) {
    std::size_t n = 0;
    for (const auto& ep : corpus.episodes()) n += episode_token_count(ep);
    return n;
}

inline std::size_t queries_token_count(const std::vector<Query>& queries) {
    std::size_t n = 0;
    for (const auto& q : queries) n += q.sentence.tokens.size();
    return n;
}

// --- Query files ------------------------------------------------------------

namespace detail {

inline QuerySource parse_source(std::string_view field, const std::string& where) {
    std::string s = str::to_lower_ascii(field);
    if (s == "s" || s == "summary") return QuerySource::Summary;
    if (s == "p" || s == "plot") return QuerySource::Plot;
    throw ParseError(where + ": unknown query source '" + std::string(field) + "' (expected S or P)");
}

// Inline annotations pack the token table into one TSV field: tokens are
// space-separated, columns within a token pipe-separated.
inline AnnotatedSentence parse_inline_annotation(std::string_view field, const std::string& where) {
    std::vector<RawRow> rows;
    for (const auto& tok_spec : str::split_ws(field)) {
        RawRow row;
        row.fields = str::split(tok_spec, '|');
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(where + ": empty annotation");
    return parse_sentence(rows, where);
}

inline AnnotatedSentence load_sidecar_annotation(const std::filesystem::path& path, const std::string& where) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(where + ": cannot open annotation file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    std::vector<RawRow> rows;
    bool sentence_closed = false;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t eol = content.find('\n', pos);
        if (eol == std::string::npos) eol = content.size();
        std::string_view line = str::trim(std::string_view(content).substr(pos, eol - pos));
        const std::size_t offset = pos;
        pos = eol + 1;
        if (eol == content.size() && line.empty()) break;
        if (line.empty()) {
            if (!rows.empty()) sentence_closed = true;
            continue;
        }
        if (line.front() == '#') continue;
        if (sentence_closed)
            throw ParseError(path.string() + ": query annotation must contain exactly one sentence" +
                             " (second sentence at offset " + std::to_string(offset) + ")");
        rows.push_back({split_tabs(line), offset});
    }
    if (rows.empty()) throw ParseError(path.string() + ": empty annotation file");
    return parse_sentence(rows, path.string());
}

} // namespace detail

// Query records: query_id, source (S/P), gold episode id, raw text, and the
// annotation as either "@relative/path" to a sidecar token table or the
// inline form. '#' lines are comments.
inline std::vector<Query> load_queries(const std::filesystem::path& path, const Corpus& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open query file: " + path.string());

    std::vector<Query> queries;
    std::unordered_set<std::string> seen_ids;
    std::vector<std::string> unknown_gold;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view trimmed = str::trim(line);
        if (trimmed.empty() || trimmed.front() == '#') continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);

        auto fields = str::split(line, '\t');
        if (fields.size() != 5)
            throw ParseError(where + ": expected 5 tab-separated fields, found " +
                             std::to_string(fields.size()));

        Query q;
        q.query_id = std::string(str::trim(fields[0]));
        if (q.query_id.empty()) throw ParseError(where + ": empty query id");
        if (!seen_ids.insert(q.query_id).second)
            throw IntegrityError(where + ": duplicate query id '" + q.query_id + "'");
        q.source = detail::parse_source(str::trim(fields[1]), where);
        q.gold_episode = std::string(str::trim(fields[2]));
        q.text = std::string(str::trim(fields[3]));

        std::string_view ann = str::trim(fields[4]);
        if (ann.empty()) throw ParseError(where + ": empty annotation field");
        if (ann.front() == '@') {
            auto sidecar = path.parent_path() / std::string(ann.substr(1));
            q.sentence = detail::load_sidecar_annotation(sidecar, where);
        } else {
            q.sentence = detail::parse_inline_annotation(ann, where);
        }
        if (q.sentence.tokens.empty()) throw ParseError(where + ": annotation has no tokens");

        if (corpus.find(q.gold_episode) == nullptr)
            unknown_gold.push_back(q.query_id + " -> " + q.gold_episode);
        queries.push_back(std::move(q));
    }

    if (!unknown_gold.empty()) {
        std::string msg = path.string() + ": queries reference unknown episodes:";
        for (const auto& item : unknown_gold) msg += " [" + item + "]";
        throw IntegrityError(msg);
    }
    return queries;
}

// --- Train/dev/eval split ---------------------------------------------------

namespace detail {

inline void split_indices(const std::vector<std::size_t>& group, const SplitRatios& ratios,
                          std::mt19937_64& gen, std::vector<std::size_t>& train,
                          std::vector<std::size_t>& dev, std::vector<std::size_t>& eval) {
    std::vector<std::size_t> order = group;
    rng::shuffle(order, gen);
    const auto n = static_cast<long long>(order.size());
    long long n_train = std::llround(ratios.train * static_cast<double>(n));
    n_train = std::clamp<long long>(n_train, 0, n);
    long long n_dev = std::llround(ratios.dev * static_cast<double>(n));
    n_dev = std::clamp<long long>(n_dev, 0, n - n_train);
    for (long long i = 0; i < n; ++i) {
        if (i < n_train)
            train.push_back(order[static_cast<std::size_t>(i)]);
        else if (i < n_train + n_dev)
            dev.push_back(order[static_cast<std::size_t>(i)]);
        else
            eval.push_back(order[static_cast<std::size_t>(i)]);
    }
}

} // namespace detail

// Queries are assigned by a seeded uniform shuffle; bucket sizes are the
// rounded ratio shares, so the same (queries, ratios, seed) always yields the
// identical partition. With `stratified` the split runs per source so both
// sources keep their proportions.
inline DataSplit split_queries(const std::vector<Query>& queries, const SplitRatios& ratios,
                               std::uint64_t seed, bool stratified = false) {
    if (ratios.train < 0 || ratios.dev < 0 || ratios.eval < 0)
        throw DomainError("split ratios must be non-negative");
    if (std::abs(ratios.train + ratios.dev + ratios.eval - 1.0) > 1e-9)
        throw DomainError("split ratios must sum to 1");

    std::mt19937_64 gen(seed);
    std::vector<std::size_t> train_idx, dev_idx, eval_idx;
    if (stratified) {
        std::vector<std::size_t> summary, plot;
        for (std::size_t i = 0; i < queries.size(); ++i)
            (queries[i].source == QuerySource::Summary ? summary : plot).push_back(i);
        detail::split_indices(summary, ratios, gen, train_idx, dev_idx, eval_idx);
        detail::split_indices(plot, ratios, gen, train_idx, dev_idx, eval_idx);
    } else {
        std::vector<std::size_t> all(queries.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        detail::split_indices(all, ratios, gen, train_idx, dev_idx, eval_idx);
    }

    auto collect = [&](std::vector<std::size_t>& idx) {
        std::sort(idx.begin(), idx.end());
        std::vector<Query> out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(queries[i]);
        return out;
    };
    DataSplit split;
    split.train = collect(train_idx);
    split.dev = collect(dev_idx);
    split.eval = collect(eval_idx);
    return split;
}

} // namespace structrank
