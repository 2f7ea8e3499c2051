#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "structrank/bm25.hpp"
#include "structrank/classifier.hpp"
#include "structrank/corpus.hpp"
#include "structrank/eval.hpp"
#include "structrank/matcher.hpp"
#include "structrank/relations.hpp"
#include "structrank/reranker.hpp"
#include "structrank/util.hpp"

// End-to-end experiment driver: load corpus and queries, split, build or
// load the two indexes, score every query, train the accept classifier and
// the rerank weights, and emit the report tables. Every step is a pure
// function of (inputs, config, seed), so reruns are byte-identical.

namespace structrank {

struct ExperimentConfig {
    std::filesystem::path corpus_dir;
    std::filesystem::path query_file;
    std::filesystem::path embeddings_file; // optional; absent = all words out of vocabulary
    std::filesystem::path index_dir;       // optional; loads indexes when both files exist
    std::filesystem::path model_dir;       // optional; trained artifacts live here
    std::filesystem::path output_dir;      // optional; report files written here

    std::size_t k = 10;
    Bm25Params bm25{};
    AnalyzerConfig analyzer{};
    SplitRatios ratios{0.7848, 0.0985, 0.1167};
    std::uint64_t seed = 1;
    double grid_step = 0.1;
    double accept_threshold = 0.5;
    bool stratified_split = false;
    bool raw_score_rerank = false;
    double learning_rate = 1.0;
    int epochs = 500;
};

inline std::string config_fingerprint(const ExperimentConfig& c) {
    std::string s;
    auto kv = [&s](const char* key, const std::string& value) {
        s += key;
        s += '=';
        s += value;
        s += '\n';
    };
    kv("corpus", c.corpus_dir.generic_string());
    kv("queries", c.query_file.generic_string());
    kv("embeddings", c.embeddings_file.generic_string());
    kv("index_dir", c.index_dir.generic_string());
    kv("model_dir", c.model_dir.generic_string());
    kv("k", std::to_string(c.k));
    kv("bm25_k1", num::fmt_double(c.bm25.k1));
    kv("bm25_b", num::fmt_double(c.bm25.b));
    kv("lowercase", c.analyzer.lowercase ? "1" : "0");
    kv("index_speakers", c.analyzer.index_speakers ? "1" : "0");
    kv("ratios", num::fmt_double(c.ratios.train) + "," + num::fmt_double(c.ratios.dev) + "," +
                     num::fmt_double(c.ratios.eval));
    kv("seed", std::to_string(c.seed));
    kv("grid_step", num::fmt_double(c.grid_step));
    kv("accept_threshold", num::fmt_double(c.accept_threshold));
    kv("stratified_split", c.stratified_split ? "1" : "0");
    kv("raw_score_rerank", c.raw_score_rerank ? "1" : "0");
    kv("learning_rate", num::fmt_double(c.learning_rate));
    kv("epochs", std::to_string(c.epochs));
    return hash::to_hex(hash::fnv1a64(s));
}

// Write to <path>.tmp, then rename: a failed run never leaves a truncated file.
template <typename Fn>
void atomic_write(const std::filesystem::path& path, Fn&& fn) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write file: " + tmp.string());
        fn(out);
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// --- Pipeline artifacts -----------------------------------------------------------

constexpr const char* kBm25IndexFile = "bm25.idx";
constexpr const char* kRelationIndexFile = "relations.idx";
constexpr const char* kClassifierFile = "classifier.txt";
constexpr const char* kWeightsFile = "weights.txt";

struct PipelineArtifacts {
    Bm25Index bm25;
    RelationIndex relations;
    EmbeddingStore embeddings;
    std::string provenance;
};

inline bool indexes_exist(const std::filesystem::path& index_dir) {
    namespace fs = std::filesystem;
    return !index_dir.empty() && fs::exists(index_dir / kBm25IndexFile) &&
           fs::exists(index_dir / kRelationIndexFile);
}

inline PipelineArtifacts prepare_artifacts(const ExperimentConfig& config, const Corpus& corpus) {
    EmbeddingStore embeddings;
    if (!config.embeddings_file.empty()) embeddings = load_embeddings(config.embeddings_file);

    if (indexes_exist(config.index_dir)) {
        auto bm25_path = config.index_dir / kBm25IndexFile;
        auto rel_path = config.index_dir / kRelationIndexFile;
        std::ifstream bm25_in(bm25_path, std::ios::binary);
        std::ifstream rel_in(rel_path, std::ios::binary);
        return {load_bm25_index(bm25_in, bm25_path.string()),
                load_relation_index(rel_in, rel_path.string()), std::move(embeddings),
                "loaded from " + config.index_dir.generic_string()};
    }
    return {build_index(corpus, config.analyzer, config.bm25), build_relation_index(corpus),
            std::move(embeddings), "built from corpus"};
}

// --- Per-query pipeline state ------------------------------------------------------

struct QueryRun {
    LabeledBundle labeled;
    RankedList baseline_full; // deep enough for the baseline P@k table
};

inline constexpr std::size_t kBaselineDepth = 40;

inline QueryRun build_query_run(const Query& query, const PipelineArtifacts& artifacts,
                                const ExperimentConfig& config) {
    const auto depth = std::max(config.k, kBaselineDepth);
    RankedList full = artifacts.bm25.retrieve(analyze(query.text, config.analyzer), depth);
    RankedList top(full.begin(), full.begin() + std::min(config.k, full.size()));

    std::vector<std::string> docs;
    docs.reserve(top.size());
    for (const auto& entry : top) docs.push_back(entry.doc_id);

    const auto qrels = query_relations(query);
    const auto w = structure_match(docs, qrels, artifacts.relations, {ComparatorKind::Word, nullptr});
    const auto l = structure_match(docs, qrels, artifacts.relations, {ComparatorKind::Lemma, nullptr});
    const auto m = structure_match(docs, qrels, artifacts.relations,
                                   {ComparatorKind::Embedding, &artifacts.embeddings});

    QueryRun run{{make_bundle(top, w, l, m, config.k), query.gold_episode, query.query_id, query.source},
                 std::move(full)};
    return run;
}

inline std::vector<QueryRun> build_query_runs(const std::vector<Query>& queries,
                                              const PipelineArtifacts& artifacts,
                                              const ExperimentConfig& config) {
    std::vector<QueryRun> runs;
    runs.reserve(queries.size());
    for (const auto& q : queries) runs.push_back(build_query_run(q, artifacts, config));
    return runs;
}

struct ExperimentData {
    Corpus corpus;
    std::vector<Query> queries;
    DataSplit split;
    PipelineArtifacts artifacts;
    std::vector<QueryRun> train_runs, dev_runs, eval_runs;
};

inline ExperimentData make_experiment_data(const ExperimentConfig& config) {
    Corpus corpus = load_corpus(config.corpus_dir);
    std::vector<Query> queries = load_queries(config.query_file, corpus);
    DataSplit split = split_queries(queries, config.ratios, config.seed, config.stratified_split);
    PipelineArtifacts artifacts = prepare_artifacts(config, corpus);
    ExperimentData data{std::move(corpus), std::move(queries), {}, std::move(artifacts), {}, {}, {}};
    data.split = std::move(split);
    data.train_runs = build_query_runs(data.split.train, data.artifacts, config);
    data.dev_runs = build_query_runs(data.split.dev, data.artifacts, config);
    data.eval_runs = build_query_runs(data.split.eval, data.artifacts, config);
    return data;
}

// --- Training --------------------------------------------------------------------

struct TrainedModel {
    AcceptClassifier classifier;
    WeightVector weights;
};

inline TrainedModel train_model(const ExperimentConfig& config, const ExperimentData& data) {
    std::vector<LabeledFeatures> train_set;
    train_set.reserve(data.train_runs.size());
    for (const auto& run : data.train_runs)
        train_set.push_back({assemble_features(run.labeled.bundle), baseline_top1_correct(run.labeled)});

    ClassifierHyperparams hyper{config.learning_rate, config.epochs, config.seed};
    AcceptClassifier classifier = train_accept_classifier(train_set, hyper);

    std::vector<LabeledBundle> dev_bundles;
    dev_bundles.reserve(data.dev_runs.size());
    for (const auto& run : data.dev_runs) dev_bundles.push_back(run.labeled);
    WeightVector weights = grid_search_weights(dev_bundles, config.grid_step, config.raw_score_rerank);
    return {std::move(classifier), weights};
}

inline bool model_exists(const std::filesystem::path& model_dir) {
    namespace fs = std::filesystem;
    return !model_dir.empty() && fs::exists(model_dir / kClassifierFile) &&
           fs::exists(model_dir / kWeightsFile);
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& model_dir,
                       const std::vector<std::string>& metadata = {}) {
    atomic_write(model_dir / kClassifierFile,
                 [&](std::ostream& out) { save_classifier(model.classifier, out, metadata); });
    atomic_write(model_dir / kWeightsFile,
                 [&](std::ostream& out) { save_weights(model.weights, out, metadata); });
}

inline TrainedModel load_model(const std::filesystem::path& model_dir) {
    auto clf_path = model_dir / kClassifierFile;
    auto weights_path = model_dir / kWeightsFile;
    std::ifstream clf_in(clf_path, std::ios::binary);
    if (!clf_in)
        throw ConfigError("no trained classifier at " + clf_path.string() +
                          "; run the train command first");
    std::ifstream weights_in(weights_path, std::ios::binary);
    if (!weights_in)
        throw ConfigError("no rerank weights at " + weights_path.string() +
                          "; run the train command first");
    return {load_classifier(clf_in, clf_path.string()), load_weights(weights_in, weights_path.string())};
}

// --- Report tables -----------------------------------------------------------------

struct ExperimentResult {
    ResultTable main_table;     // model x split x source
    ResultTable baseline_table; // baseline P@k at several depths
    ResultTable failed_table;   // queries the baseline failed
    WeightVector weights;
    std::string config_hash;
    std::vector<std::string> metadata;
};

namespace detail {

inline std::vector<const QueryRun*> filter_runs(const std::vector<QueryRun>& runs,
                                                std::optional<QuerySource> source) {
    std::vector<const QueryRun*> out;
    for (const auto& run : runs)
        if (!source || run.labeled.source == *source) out.push_back(&run);
    return out;
}

template <typename MakeList>
std::vector<QueryResult> results_of(const std::vector<const QueryRun*>& runs, MakeList&& make_list) {
    std::vector<QueryResult> out;
    out.reserve(runs.size());
    for (const auto* run : runs)
        out.push_back({run->labeled.query_id, make_list(*run), run->labeled.gold});
    return out;
}

} // namespace detail

inline void add_main_rows(ResultTable& table, const std::string& split_label,
                          const std::vector<QueryRun>& runs, const TrainedModel& model,
                          const ExperimentConfig& config) {
    const std::string baseline_label = "Elastic_" + std::to_string(config.k);
    const WeightVector unit{1.0, 1.0, 1.0, 1.0};

    struct ModelRow {
        std::string label;
        std::function<std::vector<std::string>(const QueryRun&)> list;
    };
    const std::vector<ModelRow> model_rows = {
        {baseline_label, [](const QueryRun& r) { return baseline_list(r.labeled.bundle); }},
        {"Struct_w", [](const QueryRun& r) { return struct_ranked_list(r.labeled.bundle, &BundleRow::w); }},
        {"Struct_l", [](const QueryRun& r) { return struct_ranked_list(r.labeled.bundle, &BundleRow::l); }},
        {"Struct_m", [](const QueryRun& r) { return struct_ranked_list(r.labeled.bundle, &BundleRow::m); }},
        {"Rerank_1",
         [&](const QueryRun& r) {
             return predict_and_rerank_list(r.labeled.bundle, model.classifier, unit,
                                            config.accept_threshold, config.raw_score_rerank);
         }},
        {"Rerank_lambda",
         [&](const QueryRun& r) {
             return predict_and_rerank_list(r.labeled.bundle, model.classifier, model.weights,
                                            config.accept_threshold, config.raw_score_rerank);
         }},
    };

    const std::vector<std::pair<std::string, std::optional<QuerySource>>> sources = {
        {"Summary", QuerySource::Summary}, {"Plot", QuerySource::Plot}, {"All", std::nullopt}};

    for (const auto& row : model_rows) {
        for (const auto& [source_label, source] : sources) {
            auto subset = detail::filter_runs(runs, source);
            if (subset.empty()) continue;
            auto results = detail::results_of(subset, [&](const QueryRun& r) { return row.list(r); });
            table.add(row.label, split_label, source_label, "P@1", precision_at_k(results, 1));
            table.add(row.label, split_label, source_label, "MRR", mrr(results));
        }
    }
}

inline void add_baseline_rows(ResultTable& table, const std::string& split_label,
                              const std::vector<QueryRun>& runs, const ExperimentConfig& config) {
    if (runs.empty()) return;
    std::set<std::size_t> depths{1, 5, 10, 20, 40};
    depths.insert(config.k);
    auto all = detail::filter_runs(runs, std::nullopt);
    for (std::size_t depth : depths) {
        auto results = detail::results_of(all, [&](const QueryRun& r) {
            std::vector<std::string> docs;
            const std::size_t limit = std::min(depth, r.baseline_full.size());
            for (std::size_t i = 0; i < limit; ++i) docs.push_back(r.baseline_full[i].doc_id);
            return docs;
        });
        const std::string label = "Elastic_" + std::to_string(depth);
        table.add(label, split_label, "All", "P@k", precision_at_k(results, depth));
        table.add(label, split_label, "All", "MRR", mrr(results));
    }
}

inline ExperimentResult evaluate_model(const ExperimentConfig& config, const ExperimentData& data,
                                       const TrainedModel& model) {
    ExperimentResult result{{}, {}, {}, model.weights, config_fingerprint(config), {}};

    add_main_rows(result.main_table, "dev", data.dev_runs, model, config);
    add_main_rows(result.main_table, "eval", data.eval_runs, model, config);
    add_baseline_rows(result.baseline_table, "dev", data.dev_runs, config);
    add_baseline_rows(result.baseline_table, "eval", data.eval_runs, config);

    const std::string baseline_label = "Elastic_" + std::to_string(config.k);
    auto to_bundles = [](const std::vector<QueryRun>& runs) {
        std::vector<LabeledBundle> out;
        out.reserve(runs.size());
        for (const auto& run : runs) out.push_back(run.labeled);
        return out;
    };
    result.failed_table.merge(failed_query_analysis(to_bundles(data.dev_runs), "dev", baseline_label));
    result.failed_table.merge(failed_query_analysis(to_bundles(data.eval_runs), "eval", baseline_label));

    auto split_ids_hash = [&]() {
        std::string ids;
        for (const auto& q : data.split.train) ids += q.query_id + "\n";
        ids += "|";
        for (const auto& q : data.split.dev) ids += q.query_id + "\n";
        ids += "|";
        for (const auto& q : data.split.eval) ids += q.query_id + "\n";
        return hash::to_hex(hash::fnv1a64(ids));
    };
    result.metadata = {
        "config " + result.config_hash,
        "seed " + std::to_string(config.seed),
        "split train=" + std::to_string(data.split.train.size()) +
            " dev=" + std::to_string(data.split.dev.size()) +
            " eval=" + std::to_string(data.split.eval.size()),
        "split_hash " + split_ids_hash(),
        "indexes " + data.artifacts.provenance,
        "lambda " + num::fmt_double(model.weights.e) + " " + num::fmt_double(model.weights.w) + " " +
            num::fmt_double(model.weights.l) + " " + num::fmt_double(model.weights.m),
    };
    return result;
}

inline void write_experiment_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    if (config.output_dir.empty()) return;
    atomic_write(config.output_dir / "results.tsv",
                 [&](std::ostream& out) { result.main_table.write_tsv(out, result.metadata); });
    atomic_write(config.output_dir / "results.txt",
                 [&](std::ostream& out) { result.main_table.write_text(out, result.metadata); });
    atomic_write(config.output_dir / "baseline.tsv",
                 [&](std::ostream& out) { result.baseline_table.write_tsv(out, result.metadata); });
    atomic_write(config.output_dir / "baseline.txt",
                 [&](std::ostream& out) { result.baseline_table.write_text(out, result.metadata); });
    atomic_write(config.output_dir / "failed.tsv",
                 [&](std::ostream& out) { result.failed_table.write_tsv(out, result.metadata); });
    atomic_write(config.output_dir / "failed.txt",
                 [&](std::ostream& out) { result.failed_table.write_text(out, result.metadata); });
    atomic_write(config.output_dir / "metadata.txt", [&](std::ostream& out) {
        for (const auto& line : result.metadata) out << line << '\n';
    });
}

// Full pipeline: uses the persisted model when one exists, otherwise trains
// in memory (and persists when a model dir is configured). With
// train_if_missing = false a missing model is a configuration error.
inline ExperimentResult run_experiment(const ExperimentConfig& config, bool train_if_missing = true) {
    ExperimentData data = make_experiment_data(config);

    std::optional<TrainedModel> model;
    if (model_exists(config.model_dir)) {
        model = load_model(config.model_dir);
    } else if (train_if_missing) {
        model = train_model(config, data);
        if (!config.model_dir.empty())
            save_model(*model, config.model_dir, {"config " + config_fingerprint(config)});
    } else {
        throw ConfigError("no trained model in '" + config.model_dir.generic_string() +
                          "'; run the train command first");
    }

    ExperimentResult result = evaluate_model(config, data, *model);
    write_experiment_outputs(config, result);
    return result;
}

} // namespace structrank
