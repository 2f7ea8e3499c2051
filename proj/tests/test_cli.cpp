#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <sys/wait.h>

#include "helpers.hpp"

using namespace structrank;
using testing::TempDir;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

CliResult run_cli(const std::string& args, const testing::fs::path& scratch) {
    static int counter = 0;
    auto capture = scratch / ("cli_out_" + std::to_string(counter++) + ".txt");
    std::string command = std::string(STRUCTRANK_CLI_PATH) + " " + args + " > '" +
                          capture.string() + "' 2>&1";
    int status = std::system(command.c_str());
    CliResult result;
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    result.output = testing::read_file(capture);
    return result;
}

struct CliFixture {
    TempDir dir;
    testing::PipelineFixturePaths paths;
    std::string common;

    CliFixture() {
        auto fx = testing::make_pipeline_fixture();
        paths = write_pipeline_fixture(fx, dir.path());
        common = "--corpus '" + paths.corpus_dir.string() + "' --queries '" +
                 paths.query_file.string() + "' --embeddings '" + paths.embeddings_file.string() +
                 "' --index-dir '" + (dir.path() / "index").string() + "' --model-dir '" +
                 (dir.path() / "model").string() + "' --output-dir '" +
                 (dir.path() / "out").string() +
                 "' --ratios 0.5 0.25 0.25 --stratified --seed 3 --epochs 150";
    }
};

} // namespace

TEST_CASE("cli usage and config errors exit with code 2") {
    TempDir dir;
    REQUIRE(run_cli("--help", dir.path()).exit_code == 0);
    REQUIRE(run_cli("", dir.path()).exit_code == 2);
    REQUIRE(run_cli("--bogus-flag index", dir.path()).exit_code == 2);

    auto missing = run_cli("index --corpus /nonexistent/path --index-dir '" +
                               (dir.path() / "ix").string() + "'",
                           dir.path());
    REQUIRE(missing.exit_code == 2);

    auto no_index_dir = run_cli("index", dir.path());
    REQUIRE(no_index_dir.exit_code == 2);
}

TEST_CASE("cli end to end on the synthetic fixture") {
    CliFixture fx;
    const auto& scratch = fx.dir.path();

    SECTION("index builds both files idempotently") {
        auto first = run_cli("index " + fx.common, scratch);
        INFO(first.output);
        REQUIRE(first.exit_code == 0);
        REQUIRE(testing::fs::exists(scratch / "index" / kBm25IndexFile));
        REQUIRE(testing::fs::exists(scratch / "index" / kRelationIndexFile));

        auto bm25_bytes = testing::read_file(scratch / "index" / kBm25IndexFile);
        auto rel_bytes = testing::read_file(scratch / "index" / kRelationIndexFile);
        REQUIRE(run_cli("index " + fx.common, scratch).exit_code == 0);
        REQUIRE(testing::read_file(scratch / "index" / kBm25IndexFile) == bm25_bytes);
        REQUIRE(testing::read_file(scratch / "index" / kRelationIndexFile) == rel_bytes);
        REQUIRE(bm25_bytes.find("# config ") != std::string::npos);
    }

    SECTION("dump-relations prints the episode's relations") {
        REQUIRE(run_cli("index " + fx.common, scratch).exit_code == 0);
        auto dump = run_cli("dump-relations e01 " + fx.common, scratch);
        REQUIRE(dump.exit_code == 0);
        REQUIRE(dump.output == "paint(Monroe; Amara fence ribbon)\n");
        REQUIRE(run_cli("dump-relations nope " + fx.common, scratch).exit_code == 1);
    }

    SECTION("query prints scores and reranks the decoyed query to its episode") {
        auto out = run_cli("query '" + fx.paths.query_file.string() + "' " + fx.common, scratch);
        INFO(out.output);
        REQUIRE(out.exit_code == 0);
        // q1: decoy e06 at rank 1, gold e01 reranked to the final slot
        REQUIRE(out.output.find("query\tq1\t") != std::string::npos);
        auto q1_pos = out.output.find("query\tq1\t");
        auto final_pos = out.output.find("final\t", q1_pos);
        REQUIRE(out.output.substr(final_pos, 10) == "final\te01\n");
        REQUIRE(out.output.find("1\te06\t") != std::string::npos);
    }

    SECTION("query accepts raw text and rejects empty text") {
        auto out = run_cli("query --text 'Amara paints' " + fx.common, scratch);
        REQUIRE(out.exit_code == 0);
        REQUIRE(out.output.find("final\t") != std::string::npos);
        REQUIRE(run_cli("query --text '...' " + fx.common, scratch).exit_code == 2);
        REQUIRE(run_cli("query " + fx.common, scratch).exit_code == 2);
    }

    SECTION("k larger than the corpus is not an error") {
        auto out = run_cli("query --k 100 '" + fx.paths.query_file.string() + "' " + fx.common, scratch);
        REQUIRE(out.exit_code == 0);
    }

    SECTION("match prints per-document comparator scores") {
        auto out = run_cli("match '" + fx.paths.query_file.string() + "' --query-id q1 --comparator lemma " +
                               fx.common,
                           scratch);
        INFO(out.output);
        REQUIRE(out.exit_code == 0);
        REQUIRE(out.output.find("comparator\tlemma") != std::string::npos);
        REQUIRE(out.output.find("e01\t0.8000") != std::string::npos);
        REQUIRE(out.output.find("e06\t0.0000") != std::string::npos);
    }

    SECTION("train then evaluate produces reports; evaluate first is an error") {
        auto premature = run_cli("evaluate " + fx.common, scratch);
        REQUIRE(premature.exit_code == 2);
        REQUIRE(premature.output.find("train") != std::string::npos);

        auto train = run_cli("train " + fx.common, scratch);
        INFO(train.output);
        REQUIRE(train.exit_code == 0);
        REQUIRE(testing::fs::exists(scratch / "model" / kClassifierFile));
        REQUIRE(testing::fs::exists(scratch / "model" / kWeightsFile));
        REQUIRE(train.output.find("lambda\t") != std::string::npos);

        auto eval1 = run_cli("evaluate " + fx.common, scratch);
        INFO(eval1.output);
        REQUIRE(eval1.exit_code == 0);
        REQUIRE(testing::fs::exists(scratch / "out" / "results.tsv"));
        auto results = testing::read_file(scratch / "out" / "results.tsv");
        REQUIRE(results.find("# config ") != std::string::npos);
        REQUIRE(results.find("Elastic_10\tdev") != std::string::npos);
        REQUIRE(results.find("Rerank_lambda\teval") != std::string::npos);

        REQUIRE(run_cli("evaluate " + fx.common, scratch).exit_code == 0);
        REQUIRE(testing::read_file(scratch / "out" / "results.tsv") == results);

        auto metadata = testing::read_file(scratch / "out" / "metadata.txt");
        REQUIRE(metadata.find("seed 3") != std::string::npos);
    }
}

TEST_CASE("cli reads options from a config file") {
    CliFixture fx;
    const auto& scratch = fx.dir.path();
    std::string config_text;
    config_text += "corpus = \"" + fx.paths.corpus_dir.string() + "\"\n";
    config_text += "queries = \"" + fx.paths.query_file.string() + "\"\n";
    config_text += "embeddings = \"" + fx.paths.embeddings_file.string() + "\"\n";
    config_text += "index-dir = \"" + (scratch / "index2").string() + "\"\n";
    config_text += "k = 5\n";
    testing::write_file(scratch / "run.toml", config_text);

    auto out = run_cli("--config '" + (scratch / "run.toml").string() + "' index", scratch);
    INFO(out.output);
    REQUIRE(out.exit_code == 0);
    REQUIRE(testing::fs::exists(scratch / "index2" / kBm25IndexFile));

    auto bad = run_cli("--config '" + (scratch / "missing.toml").string() + "' index", scratch);
    REQUIRE(bad.exit_code == 2);
}
