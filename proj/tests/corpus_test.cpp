#include "rankdebias/corpus.hpp"

#include <vector>

#include "doctest.h"
#include "test_util.hpp"

using namespace rankdebias;

namespace {

QueryCodePair make_pair(std::string id, std::string query, std::string code,
                        Split split = Split::train) {
    QueryCodePair p;
    p.pair_id = std::move(id);
    p.query_text = std::move(query);
    p.code_text = std::move(code);
    p.split = split;
    return p;
}

}  // namespace

TEST_CASE("canonical code id hashes normalized content") {
    // sha256 of "x = 1", frozen from an independent implementation
    CHECK(canonical_code_id("x = 1") ==
          "8ff436def1451285599a1b1ad70800493b8dcafde2912e1a38345633054e4c26");
    CHECK(canonical_code_id("x = 1 \t\n") == canonical_code_id("x = 1\n"));
    CHECK(canonical_code_id("x = 1\r\ny = 2\r\n") == canonical_code_id("x = 1\ny = 2\n"));
    CHECK(canonical_code_id("x = 1\ry = 2") == canonical_code_id("x = 1\ny = 2"));
    CHECK(canonical_code_id("x = 1") != canonical_code_id("x = 2"));
    CHECK(canonical_code_id("x = 1").size() == 64);
}

TEST_CASE("corpus construction validates and fills code ids") {
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "sort an array", "def sort(a): pass"));
    pairs.push_back(make_pair("p2", "read a file", "def read(p): pass", Split::test));
    Corpus corpus{pairs};

    CHECK(corpus.size() == 2);
    CHECK(corpus.find("p1") != nullptr);
    CHECK(corpus.find("nope") == nullptr);
    CHECK(corpus.find("p1")->code_id == canonical_code_id("def sort(a): pass"));
    CHECK(corpus.split_pairs(Split::train).size() == 1);
    CHECK(corpus.split_pairs(Split::test).size() == 1);
    CHECK(corpus.pool(Split::train).count(corpus.find("p1")->code_id) == 1);
    REQUIRE(corpus.code_text(corpus.find("p2")->code_id) != nullptr);
    CHECK(*corpus.code_text(corpus.find("p2")->code_id) == "def read(p): pass");

    SUBCASE("duplicate pair id") {
        pairs.push_back(make_pair("p1", "again", "x = 1"));
        CHECK_THROWS_AS(Corpus{pairs}, DataError);
    }
    SUBCASE("empty query") {
        pairs.push_back(make_pair("p3", "", "x = 1"));
        CHECK_THROWS_AS(Corpus{pairs}, DataError);
    }
    SUBCASE("one code id bound to two different texts") {
        QueryCodePair a = make_pair("p3", "q", "x = 1");
        a.code_id = "shared";
        QueryCodePair b = make_pair("p4", "q", "x = 2");
        b.code_id = "shared";
        pairs.push_back(a);
        pairs.push_back(b);
        CHECK_THROWS_AS(Corpus{pairs}, DataError);
    }
    SUBCASE("same id for identical text is fine") {
        QueryCodePair a = make_pair("p3", "q", "x = 1");
        a.code_id = "shared";
        QueryCodePair b = make_pair("p4", "q", "x = 1");
        b.code_id = "shared";
        pairs.push_back(a);
        pairs.push_back(b);
        CHECK_NOTHROW(Corpus{pairs});
    }
}

TEST_CASE("dataset round trip is lossless and stable") {
    TempDir tmp;
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "sort an array", "def sort(a):\n    return a\n"));
    QueryCodePair with_overrides = make_pair("p2", "read a file", "def read(p): pass", Split::test);
    with_overrides.code_len_override = 42;
    with_overrides.query_len_override = 3;
    pairs.push_back(with_overrides);
    Corpus corpus{pairs};

    auto path = tmp.file("data.jsonl");
    save_dataset(corpus, path);
    Corpus loaded = load_dataset(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.find("p1")->query_text == "sort an array");
    CHECK(loaded.find("p1")->code_text == "def sort(a):\n    return a\n");
    CHECK(loaded.find("p1")->code_id == corpus.find("p1")->code_id);
    CHECK(loaded.find("p2")->split == Split::test);
    CHECK(loaded.find("p2")->code_len_override == 42);
    CHECK(loaded.find("p2")->query_len_override == 3);

    auto path2 = tmp.file("data2.jsonl");
    save_dataset(loaded, path2);
    CHECK(read_file(path) == read_file(path2));
}

TEST_CASE("dataset loader rejects malformed lines") {
    TempDir tmp;
    auto path = tmp.file("bad.jsonl");

    SUBCASE("not json") {
        write_file(path, "not json at all\n");
        CHECK_THROWS_AS(load_dataset(path), DataError);
    }
    SUBCASE("missing query") {
        write_file(path, R"({"pair_id":"p1","code":"x = 1","split":"train"})" "\n");
        CHECK_THROWS_AS(load_dataset(path), DataError);
    }
    SUBCASE("bad split") {
        write_file(path,
                   R"({"pair_id":"p1","query":"q","code":"x = 1","split":"dev"})" "\n");
        CHECK_THROWS_AS(load_dataset(path), DataError);
    }
    SUBCASE("negative token override") {
        write_file(path,
                   R"({"pair_id":"p1","query":"q","code":"x = 1","split":"train","code_len":-1})"
                   "\n");
        CHECK_THROWS_AS(load_dataset(path), DataError);
    }
    SUBCASE("duplicate pair id across lines") {
        write_file(path,
                   R"({"pair_id":"p1","query":"q","code":"x = 1","split":"train"})" "\n"
                   R"({"pair_id":"p1","query":"r","code":"y = 2","split":"train"})" "\n");
        CHECK_THROWS_AS(load_dataset(path), DataError);
    }
}

TEST_CASE("ranking run keeps candidates in canonical order") {
    std::map<std::string, RankingRun::CandidateList> entries;
    entries["p1"] = {{"b", 1.0}, {"a", 1.0}, {"c", 2.0}};
    RankingRun run{entries};
    const auto* list = run.find("p1");
    REQUIRE(list != nullptr);
    REQUIRE(list->size() == 3);
    CHECK((*list)[0].code_id == "c");
    CHECK((*list)[1].code_id == "a");  // tie with b, id decides
    CHECK((*list)[2].code_id == "b");

    SUBCASE("duplicate candidate rejected") {
        entries["p2"] = {{"a", 1.0}, {"a", 0.5}};
        CHECK_THROWS_AS(RankingRun{entries}, DataError);
    }
    SUBCASE("empty candidate list rejected") {
        entries["p2"] = {};
        CHECK_THROWS_AS(RankingRun{entries}, DataError);
    }
}

TEST_CASE("run file round trip against a corpus") {
    TempDir tmp;
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "q one", "x = 1"));
    pairs.push_back(make_pair("p2", "q two", "y = 2"));
    Corpus corpus{pairs};
    const std::string id1 = corpus.find("p1")->code_id;
    const std::string id2 = corpus.find("p2")->code_id;

    std::map<std::string, RankingRun::CandidateList> entries;
    entries["p1"] = {{id1, 0.25}, {id2, 1.0 / 3.0}};
    entries["p2"] = {{id2, 0.5}};
    RankingRun run{entries};

    auto path = tmp.file("run.tsv");
    save_run(run, path);
    RankingRun loaded = load_run(path, corpus, Split::train);
    REQUIRE(loaded.size() == 2);
    CHECK((*loaded.find("p1"))[0].score == 1.0 / 3.0);  // exact through the file
    CHECK((*loaded.find("p1"))[1].score == 0.25);

    auto path2 = tmp.file("run2.tsv");
    save_run(loaded, path2);
    CHECK(read_file(path) == read_file(path2));

    SUBCASE("unknown pair id") {
        write_file(path, "ghost\t" + id1 + "\t0.5\n");
        CHECK_THROWS_AS(load_run(path, corpus, Split::train), DataError);
    }
    SUBCASE("pair from the other split") {
        CHECK_THROWS_AS(load_run(path, corpus, Split::test), DataError);
    }
    SUBCASE("unknown code ids are counted, not fatal") {
        write_file(path, "p1\t" + id1 + "\t0.5\np1\tmystery\t0.25\n");
        RunLoadSummary summary;
        RankingRun r = load_run(path, corpus, Split::train, &summary);
        CHECK(summary.rows == 2);
        CHECK(summary.queries == 1);
        CHECK(summary.unknown_codes == 1);
        CHECK(r.find("p1")->size() == 2);
    }
    SUBCASE("malformed rows") {
        write_file(path, "p1\t" + id1 + "\n");
        CHECK_THROWS_AS(load_run(path, corpus, Split::train), DataError);
        write_file(path, "p1\t" + id1 + "\tnot_a_number\n");
        CHECK_THROWS_AS(load_run(path, corpus, Split::train), DataError);
        write_file(path, "p1\t" + id1 + "\tnan\n");
        CHECK_THROWS_AS(load_run(path, corpus, Split::train), DataError);
    }
}

TEST_CASE("embedding table round trip") {
    TempDir tmp;
    EmbeddingTable table;
    table.dim = 3;
    table.vectors["p1"] = {0.1, 0.2, 0.3};
    table.vectors["p2"] = {1.0 / 3.0, 0.0, -1.5};

    auto path = tmp.file("emb.tsv");
    save_embeddings(table, path);
    EmbeddingTable loaded = load_embeddings(path);
    CHECK(loaded.dim == 3);
    CHECK(loaded.vectors == table.vectors);  // exact doubles through the file

    auto path2 = tmp.file("emb2.tsv");
    save_embeddings(loaded, path2);
    CHECK(read_file(path) == read_file(path2));

    SUBCASE("inconsistent dimensions rejected") {
        write_file(path, "p1\t0.5\np2\t0.5\t0.5\n");
        CHECK_THROWS_AS(load_embeddings(path), DataError);
    }
    SUBCASE("duplicate id rejected") {
        write_file(path, "p1\t0.5\np1\t0.25\n");
        CHECK_THROWS_AS(load_embeddings(path), DataError);
    }
}

TEST_CASE("split names round trip") {
    CHECK(split_from_string("train") == Split::train);
    CHECK(split_from_string("test") == Split::test);
    CHECK(std::string(to_string(Split::train)) == "train");
    CHECK(std::string(to_string(Split::test)) == "test");
    CHECK_THROWS_AS(split_from_string("dev"), DataError);
}
