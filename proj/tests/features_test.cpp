#include "rankdebias/features.hpp"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"

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

TEST_CASE("query tokenization lowercases and splits on non-alphanumerics") {
    CHECK(tokenize_query("sort an array") ==
          std::vector<std::string>{"sort", "an", "array"});
    CHECK(tokenize_query("How to read-file?") ==
          std::vector<std::string>{"how", "to", "read", "file"});
    CHECK(tokenize_query("") == std::vector<std::string>{});
    CHECK(tokenize_query("  ?!  ") == std::vector<std::string>{});
    CHECK(tokenize_query("utf8 to utf-8") ==
          std::vector<std::string>{"utf8", "to", "utf", "8"});
    CHECK(tokenize_query("A+B_c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("identifier splitting") {
    CHECK(split_identifier("readFile") == std::vector<std::string>{"read", "file"});
    CHECK(split_identifier("HTTPServer") == std::vector<std::string>{"http", "server"});
    CHECK(split_identifier("sort_array") == std::vector<std::string>{"sort", "array"});
    CHECK(split_identifier("parseHTTPResponse2") ==
          std::vector<std::string>{"parse", "http", "response2"});
    CHECK(split_identifier("x") == std::vector<std::string>{"x"});
    CHECK(split_identifier("_x_") == std::vector<std::string>{"x"});
}

TEST_CASE("code word set splits identifiers and keeps keywords") {
    CHECK(code_word_set("def sort_array(arr): pass") ==
          std::set<std::string>{"def", "sort", "array", "arr", "pass"});
    CHECK(code_word_set("readFile()") == std::set<std::string>{"read", "file"});
    CHECK(code_word_set("x = 1") == std::set<std::string>{"x"});
    // unlexable code degrades to whatever the tolerant pass salvages
    CHECK(code_word_set("x = $y") == std::set<std::string>{});
}

TEST_CASE("idf table") {
    std::vector<std::vector<std::string>> docs = {{"sort", "an", "array"},
                                                  {"sort", "a", "list"}};
    IdfTable table = IdfTable::fit(docs);
    CHECK(table.doc_count() == 2);
    CHECK(table.idf("sort") == 0.0);
    CHECK(table.idf("array") == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(table.idf("unseen") == 0.0);

    CHECK_THROWS_AS(IdfTable::fit({}), DataError);

    SUBCASE("single document makes every idf zero") {
        IdfTable one = IdfTable::fit({{"sort", "an", "array"}});
        for (const auto& [word, idf] : one.values()) CHECK(idf == 0.0);
    }
    SUBCASE("duplicating every document changes nothing") {
        std::vector<std::vector<std::string>> doubled = docs;
        doubled.insert(doubled.end(), docs.begin(), docs.end());
        IdfTable twice = IdfTable::fit(doubled);
        CHECK(twice.values() == table.values());
    }
}

TEST_CASE("max tf idf uses raw term frequency") {
    IdfTable table = IdfTable::fit({{"sort", "an", "array"}, {"sort", "a", "list"}});
    CHECK(max_tfidf({"sort", "an", "array"}, table) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(max_tfidf({"totally", "unseen"}, table) == 0.0);
    CHECK(max_tfidf({}, table) == 0.0);

    IdfTable go_table = IdfTable::fit({{"go"}, {"stop"}});
    CHECK(max_tfidf({"go", "go"}, go_table) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("reserved word counting ignores identifiers and strings") {
    CHECK(count_reserved("for i in u:\n    if i:\n        pass") == 2);
    CHECK(count_reserved("my_for = 'if'") == 0);
    CHECK(count_reserved("try:\n    pass\nexcept E:\n    pass") == 2);
    CHECK(count_reserved("xs = [x for x in y if x]") == 2);
    CHECK(count_reserved("import os") == 0);  // not one of the six words

    std::string code = "while a:\n    pass";
    long base = count_reserved(code);
    CHECK(count_reserved(code + "\n# if for while\ns = 'try except'\n") == base);
}

TEST_CASE("code token counting") {
    CHECK(count_code_tokens("x = 1") == 3);
    CHECK(count_code_tokens("def f():\n    pass") == 6);
    CHECK(count_code_tokens("") == 0);
}

TEST_CASE("bias plumbing") {
    CHECK(default_interval_width(1) == 4.0);
    CHECK(default_interval_width(2) == 1.0);
    CHECK(default_interval_width(3) == 4.0);
    CHECK(default_interval_width(4) == 1.0);
    CHECK(default_interval_width(5) == 1.0);
    CHECK(default_interval_width(6) == 0.15);
    CHECK(default_interval_width(7) == 1.0);
    CHECK_THROWS_AS(default_interval_width(0), DataError);
    CHECK_THROWS_AS(default_interval_width(8), DataError);

    BiasFeatures f;
    f.code_len = 10;
    f.query_len = 4;
    f.ast_node_count = 7;
    f.ast_depth = 3;
    f.reserved_count = 2;
    f.max_tfidf = 0.25;
    f.overlap = 1;
    CHECK(bias_value(f, 1) == 10.0);
    CHECK(bias_value(f, 2) == 4.0);
    CHECK(bias_value(f, 3) == 7.0);
    CHECK(bias_value(f, 4) == 3.0);
    CHECK(bias_value(f, 5) == 2.0);
    CHECK(bias_value(f, 6) == 0.25);
    CHECK(bias_value(f, 7) == 1.0);
}

TEST_CASE("feature store computes the documented example features") {
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "sort an array", "def sort_array(arr): pass"));
    pairs.push_back(make_pair("p2", "sort a list", "x = 1"));
    Corpus corpus{pairs};
    FeatureStore store = FeatureStore::build(corpus);

    const BiasFeatures& f1 = store.pair_features(*corpus.find("p1"));
    CHECK(f1.query_len == 3);
    CHECK(f1.overlap == 2);  // sort, array
    CHECK(f1.ast_exact);
    CHECK(f1.reserved_count == 0);
    CHECK(f1.max_tfidf == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    const BiasFeatures& f2 = store.pair_features(*corpus.find("p2"));
    CHECK(f2.code_len == 3);  // NAME, OP, NUMBER
    CHECK(f2.ast_node_count == 4);
    CHECK(f2.ast_depth == 3);
    CHECK(f2.overlap == 0);
    CHECK(f2.reserved_count == 0);
}

TEST_CASE("feature store honors dataset overrides") {
    QueryCodePair p = make_pair("p1", "sort an array", "x = 1");
    p.code_len_override = 99;
    p.query_len_override = 7;
    Corpus corpus{{p}};
    FeatureStore store = FeatureStore::build(corpus);
    const BiasFeatures& f = store.pair_features(*corpus.find("p1"));
    CHECK(f.code_len == 99);
    CHECK(f.query_len == 7);
    CHECK(f.ast_node_count == 4);  // unaffected by the overrides
}

TEST_CASE("feature store fits idf on the train split only") {
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("tr", "sort an array", "x = 1"));
    pairs.push_back(make_pair("te", "sort a list", "y = 2", Split::test));
    Corpus corpus{pairs};
    FeatureStore store = FeatureStore::build(corpus);
    // one training document, so every idf and hence every max_tfidf is 0
    CHECK(store.pair_features(*corpus.find("tr")).max_tfidf == 0.0);
    CHECK(store.pair_features(*corpus.find("te")).max_tfidf == 0.0);

    Corpus test_only{{make_pair("te", "q", "x = 1", Split::test)}};
    CHECK_THROWS_AS(FeatureStore::build(test_only), DataError);
}

TEST_CASE("candidate bias values come from the right side of the pair") {
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "sort an array", "def sort_array(arr): pass"));
    pairs.push_back(make_pair("p2", "other things entirely", "x = 1"));
    Corpus corpus{pairs};
    FeatureStore store = FeatureStore::build(corpus);
    const QueryCodePair& p1 = *corpus.find("p1");
    const std::string other = corpus.find("p2")->code_id;

    // code-side biases follow the candidate
    CHECK(store.candidate_bias_value(p1, other, 1) == 3.0);
    CHECK(store.candidate_bias_value(p1, other, 3) == 4.0);
    CHECK(store.candidate_bias_value(p1, other, 4) == 3.0);
    CHECK(store.candidate_bias_value(p1, other, 5) == 0.0);
    // query-side biases ignore the candidate
    CHECK(store.candidate_bias_value(p1, other, 2) == 3.0);
    // overlap pairs the query with the candidate code
    CHECK(store.candidate_bias_value(p1, other, 7) == 0.0);
    CHECK(store.candidate_bias_value(p1, p1.code_id, 7) == 2.0);

    CHECK(store.code_known(other));
    CHECK_FALSE(store.code_known("not a real id"));
}

TEST_CASE("overlap is bounded by both sides") {
    std::vector<QueryCodePair> pairs;
    pairs.push_back(make_pair("p1", "sort sort sort array file", "def sort_array(arr): pass"));
    Corpus corpus{pairs};
    FeatureStore store = FeatureStore::build(corpus);
    const BiasFeatures& f = store.pair_features(*corpus.find("p1"));
    // distinct query types: sort, array, file
    CHECK(f.overlap == 2);
    CHECK(f.overlap <= 3);
    CHECK(f.overlap <= static_cast<long>(code_word_set("def sort_array(arr): pass").size()));
}
