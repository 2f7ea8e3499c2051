// Command-line front end: index construction, ad-hoc querying, structure
// matching, training and evaluation, all driven by one config file plus flag
// overrides. Exit codes: 0 success, 1 runtime failure, 2 configuration or
// usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "structrank/structrank.hpp"

namespace fs = std::filesystem;
using namespace structrank;

namespace {

void require_path(const fs::path& value, const char* option) {
    if (value.empty())
        throw ConfigError(std::string("missing required option --") + option);
}

std::string fmt_score(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

Comparator comparator_from_name(const std::string& name, const EmbeddingStore& store) {
    if (name == "word") return {ComparatorKind::Word, nullptr};
    if (name == "lemma") return {ComparatorKind::Lemma, nullptr};
    if (name == "embedding") return {ComparatorKind::Embedding, &store};
    throw ConfigError("unknown comparator '" + name + "' (expected word, lemma or embedding)");
}

// Synthetic query for raw text: analyzer terms with no syntactic or semantic
// layers, so structure scores are zero and ranking falls back to the
// baseline.
Query query_from_text(const std::string& text) {
    Query q;
    q.query_id = "text";
    q.text = text;
    auto terms = analyze(text);
    if (terms.empty()) throw ConfigError("empty query text");
    int index = 1;
    for (const auto& term : terms) {
        Token tok;
        tok.index = index++;
        tok.form = term;
        tok.lemma = term;
        tok.pos = "XX";
        tok.ner = "O";
        tok.head = 0;
        tok.deprel = "dep";
        q.sentence.tokens.push_back(std::move(tok));
    }
    return q;
}

int cmd_index(const ExperimentConfig& config) {
    require_path(config.corpus_dir, "corpus");
    require_path(config.index_dir, "index-dir");
    Corpus corpus = load_corpus(config.corpus_dir);

    Bm25Index bm25 = build_index(corpus, config.analyzer, config.bm25);
    RelationIndex relations = build_relation_index(corpus);
    const std::vector<std::string> metadata{"config " + config_fingerprint(config)};
    atomic_write(config.index_dir / kBm25IndexFile,
                 [&](std::ostream& out) { save_bm25_index(bm25, out, metadata); });
    atomic_write(config.index_dir / kRelationIndexFile,
                 [&](std::ostream& out) { save_relation_index(relations, out, metadata); });
    std::cout << "indexed " << bm25.doc_count() << " documents, " << relations.size()
              << " relations -> " << config.index_dir.generic_string() << "\n";
    return 0;
}

int cmd_query(const ExperimentConfig& config, const std::string& query_file, const std::string& text) {
    require_path(config.corpus_dir, "corpus");
    if (query_file.empty() && text.empty())
        throw ConfigError("query: provide a query file or --text");

    Corpus corpus = load_corpus(config.corpus_dir);
    PipelineArtifacts artifacts = prepare_artifacts(config, corpus);

    std::vector<Query> queries;
    if (!text.empty()) queries.push_back(query_from_text(text));
    if (!query_file.empty()) {
        auto from_file = load_queries(query_file, corpus);
        queries.insert(queries.end(), from_file.begin(), from_file.end());
    }

    std::optional<TrainedModel> model;
    if (model_exists(config.model_dir)) model = load_model(config.model_dir);
    const WeightVector unit{1.0, 1.0, 1.0, 1.0};

    for (const auto& query : queries) {
        QueryRun run = build_query_run(query, artifacts, config);
        std::cout << "query\t" << query.query_id << '\t' << query.text << '\n';
        std::cout << "rank\tdoc\te\tw\tl\tm\n";
        const auto& bundle = run.labeled.bundle;
        for (std::size_t i = 0; i < bundle.real_count; ++i) {
            const auto& row = bundle.rows[i];
            std::cout << (i + 1) << '\t' << row.doc_id << '\t' << fmt_score(row.e) << '\t'
                      << fmt_score(row.w) << '\t' << fmt_score(row.l) << '\t' << fmt_score(row.m)
                      << '\n';
        }
        std::string final_doc;
        if (model)
            final_doc = predict_and_rerank(bundle, model->classifier, model->weights,
                                           config.accept_threshold, config.raw_score_rerank);
        else
            final_doc = rerank(bundle, unit, config.raw_score_rerank);
        std::cout << "final\t" << final_doc << '\n';
    }
    return 0;
}

int cmd_match(const ExperimentConfig& config, const std::string& query_file,
              const std::string& query_id, const std::string& comparator_name) {
    require_path(config.corpus_dir, "corpus");
    if (query_file.empty()) throw ConfigError("match: provide a query file");

    Corpus corpus = load_corpus(config.corpus_dir);
    PipelineArtifacts artifacts = prepare_artifacts(config, corpus);
    Comparator comparator = comparator_from_name(comparator_name, artifacts.embeddings);

    auto queries = load_queries(query_file, corpus);
    const Query* query = nullptr;
    if (query_id.empty()) {
        if (queries.empty()) throw ConfigError("match: query file is empty");
        query = &queries.front();
    } else {
        for (const auto& q : queries)
            if (q.query_id == query_id) query = &q;
        if (!query) throw Error("match: no query with id '" + query_id + "'");
    }

    RankedList baseline = artifacts.bm25.retrieve(analyze(query->text, config.analyzer), config.k);
    std::vector<std::string> docs;
    for (const auto& entry : baseline) docs.push_back(entry.doc_id);
    auto scores = structure_match(docs, query_relations(*query), artifacts.relations, comparator);

    std::cout << "query\t" << query->query_id << '\t' << query->text << '\n';
    std::cout << "comparator\t" << comparator_name << '\n';
    for (std::size_t i = 0; i < docs.size(); ++i)
        std::cout << docs[i] << '\t' << fmt_score(scores[i]) << '\n';
    return 0;
}

int cmd_train(const ExperimentConfig& config) {
    require_path(config.corpus_dir, "corpus");
    require_path(config.query_file, "queries");
    require_path(config.model_dir, "model-dir");

    ExperimentData data = make_experiment_data(config);
    TrainedModel model = train_model(config, data);
    save_model(model, config.model_dir, {"config " + config_fingerprint(config)});
    std::cout << "trained on " << data.split.train.size() << " queries (dev " << data.split.dev.size()
              << ", eval " << data.split.eval.size() << ")\n";
    std::cout << "lambda\t" << num::fmt_double(model.weights.e) << '\t'
              << num::fmt_double(model.weights.w) << '\t' << num::fmt_double(model.weights.l) << '\t'
              << num::fmt_double(model.weights.m) << '\n';
    std::cout << "model -> " << config.model_dir.generic_string() << '\n';
    return 0;
}

int cmd_evaluate(const ExperimentConfig& config) {
    require_path(config.corpus_dir, "corpus");
    require_path(config.query_file, "queries");
    require_path(config.model_dir, "model-dir");
    require_path(config.output_dir, "output-dir");

    ExperimentResult result = run_experiment(config, /*train_if_missing=*/false);
    result.main_table.write_text(std::cout, result.metadata);
    std::cout << "reports -> " << config.output_dir.generic_string() << '\n';
    return 0;
}

int cmd_dump_relations(const ExperimentConfig& config, const std::string& episode_id) {
    if (indexes_exist(config.index_dir)) {
        auto rel_path = config.index_dir / kRelationIndexFile;
        std::ifstream in(rel_path, std::ios::binary);
        RelationIndex index = load_relation_index(in, rel_path.string());
        auto doc = index.doc_ordinal(episode_id);
        if (!doc) throw Error("unknown episode '" + episode_id + "'");
        for (auto rel_id : index.relations_in_doc(*doc))
            std::cout << format_relation(index.relation(rel_id)) << '\n';
        return 0;
    }
    require_path(config.corpus_dir, "corpus");
    Corpus corpus = load_corpus(config.corpus_dir);
    const Episode* episode = corpus.find(episode_id);
    if (!episode) throw Error("unknown episode '" + episode_id + "'");
    RelationIndex index = build_relation_index(Corpus({*episode}));
    for (auto rel_id : index.relations_in_doc(0))
        std::cout << format_relation(index.relation(rel_id)) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structrank: cross-genre episode retrieval with structure reranking"};
    app.set_config("--config", "", "TOML-style configuration file");
    app.require_subcommand(1);

    ExperimentConfig config;
    std::string corpus_dir, query_path, embeddings, index_dir, model_dir, output_dir;
    std::vector<double> ratios;
    std::string comparator_name = "lemma";
    bool stratified = false, raw_rerank = false, index_speakers = true, lowercase = true;

    app.add_option("--corpus", corpus_dir, "Transcript directory, one file per episode");
    app.add_option("--queries", query_path, "Query TSV file");
    app.add_option("--embeddings", embeddings, "Word embedding file (word + components per line)");
    app.add_option("--index-dir", index_dir, "Directory for the persisted indexes");
    app.add_option("--model-dir", model_dir, "Directory for the trained classifier and weights");
    app.add_option("--output-dir", output_dir, "Directory for evaluation reports");
    app.add_option("--k", config.k, "Baseline retrieval depth")->check(CLI::PositiveNumber);
    app.add_option("--bm25-k1", config.bm25.k1, "BM25 k1");
    app.add_option("--bm25-b", config.bm25.b, "BM25 b");
    app.add_option("--ratios", ratios, "Train/dev/eval split ratios")->expected(3);
    app.add_option("--seed", config.seed, "Seed for the split and classifier init");
    app.add_option("--grid-step", config.grid_step, "Grid search step over [0, 1]");
    app.add_option("--accept-threshold", config.accept_threshold, "Classifier accept threshold");
    app.add_option("--learning-rate", config.learning_rate, "Classifier learning rate");
    app.add_option("--epochs", config.epochs, "Classifier training epochs");
    app.add_option("--comparator", comparator_name, "Comparator for the match command")
        ->check(CLI::IsMember({"word", "lemma", "embedding"}));
    app.add_flag("--stratified,!--no-stratified", stratified, "Split each query source separately");
    app.add_flag("--raw-rerank,!--no-raw-rerank", raw_rerank, "Rerank on raw instead of normalized scores");
    app.add_flag("--index-speakers,!--no-index-speakers", index_speakers,
                 "Include speaker names in the baseline index");
    app.add_flag("--lowercase,!--no-lowercase", lowercase, "Lowercase analyzer output");

    auto* index_cmd = app.add_subcommand("index", "Build and persist the BM25 and relation indexes");
    auto* query_cmd = app.add_subcommand("query", "Rank documents for queries and print all scores");
    std::string query_file_arg, query_text;
    query_cmd->add_option("file", query_file_arg, "Query TSV file");
    query_cmd->add_option("--text", query_text, "Raw query text (baseline scores only)");
    auto* match_cmd = app.add_subcommand("match", "Print per-document structure scores for one query");
    std::string match_file_arg, match_query_id;
    match_cmd->add_option("file", match_file_arg, "Query TSV file")->required();
    match_cmd->add_option("--query-id", match_query_id, "Query id (default: first query)");
    auto* train_cmd = app.add_subcommand("train", "Train the accept classifier and rerank weights");
    auto* eval_cmd = app.add_subcommand("evaluate", "Run the experiment matrix and write reports");
    auto* dump_cmd = app.add_subcommand("dump-relations", "Print the relations of one episode");
    std::string dump_episode;
    dump_cmd->add_option("episode", dump_episode, "Episode id")->required();

    for (auto* cmd : {index_cmd, query_cmd, match_cmd, train_cmd, eval_cmd, dump_cmd})
        cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    config.corpus_dir = corpus_dir;
    config.query_file = query_path;
    config.embeddings_file = embeddings;
    config.index_dir = index_dir;
    config.model_dir = model_dir;
    config.output_dir = output_dir;
    config.stratified_split = stratified;
    config.raw_score_rerank = raw_rerank;
    config.analyzer.index_speakers = index_speakers;
    config.analyzer.lowercase = lowercase;
    if (!ratios.empty()) config.ratios = {ratios[0], ratios[1], ratios[2]};

    try {
        if (index_cmd->parsed()) return cmd_index(config);
        if (query_cmd->parsed()) return cmd_query(config, query_file_arg, query_text);
        if (match_cmd->parsed()) return cmd_match(config, match_file_arg, match_query_id, comparator_name);
        if (train_cmd->parsed()) return cmd_train(config);
        if (eval_cmd->parsed()) return cmd_evaluate(config);
        if (dump_cmd->parsed()) return cmd_dump_relations(config, dump_episode);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
