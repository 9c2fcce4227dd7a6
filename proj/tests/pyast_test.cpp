#include "rankdebias/pyast.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "doctest.h"
#include "parser_fixtures.hpp"

using namespace rankdebias;

namespace {

std::vector<TokKind> kinds_of(const std::string& source) {
    std::vector<TokKind> kinds;
    for (const PyToken& t : tokenize(source)) kinds.push_back(t.kind);
    return kinds;
}

// Indents every line of a statement so it can sit inside "if True:".
std::string indent_all(const std::string& source) {
    std::string out = "    ";
    for (char c : source) {
        out += c;
        if (c == '\n') out += "    ";
    }
    return out;
}

}  // namespace

TEST_CASE("tokenizer basics") {
    auto kinds = kinds_of("x = 1\n");
    REQUIRE(kinds.size() == 5);
    CHECK(kinds[0] == TokKind::Name);
    CHECK(kinds[1] == TokKind::Op);
    CHECK(kinds[2] == TokKind::Number);
    CHECK(kinds[3] == TokKind::Newline);
    CHECK(kinds[4] == TokKind::EndMarker);

    // stable under trailing-newline addition
    CHECK(kinds_of("x = 1") == kinds_of("x = 1\n"));
}

TEST_CASE("tokenizer indentation") {
    auto toks = tokenize("if a:\n    b\n");
    std::vector<TokKind> kinds;
    for (const auto& t : toks) kinds.push_back(t.kind);
    CHECK(kinds == std::vector<TokKind>{TokKind::Keyword, TokKind::Name, TokKind::Op,
                                        TokKind::Newline, TokKind::Indent, TokKind::Name,
                                        TokKind::Newline, TokKind::Dedent, TokKind::EndMarker});

    // a tab advances to the next multiple of 8, so these two agree
    CHECK(kinds_of("if a:\n\tb\n") == kinds_of("if a:\n        b\n"));

    // blank and comment-only lines produce no indentation changes
    CHECK(kinds_of("if a:\n    b\n\n    # note\n    c\n").size() ==
          kinds_of("if a:\n    b\n    c\n").size());

    CHECK_THROWS_AS(tokenize("if a:\n    b\n  c\n"), TokenizeError);
}

TEST_CASE("tokenizer line joining and strings") {
    // implicit joining inside brackets: no NEWLINE between a and b
    auto joined = kinds_of("f(a,\n  b)\n");
    CHECK(std::count(joined.begin(), joined.end(), TokKind::Newline) == 1);

    // backslash continuation
    auto continued = kinds_of("x = 1 + \\\n    2\n");
    CHECK(std::count(continued.begin(), continued.end(), TokKind::Newline) == 1);

    auto toks = tokenize("s = 'a # not comment'\n");
    REQUIRE(toks.size() >= 3);
    CHECK(toks[2].kind == TokKind::String);
    CHECK(toks[2].text == "'a # not comment'");

    auto triple = tokenize("s = '''one\ntwo'''\n");
    CHECK(triple[2].kind == TokKind::String);
    CHECK(triple[2].text == "'''one\ntwo'''");

    auto prefixed = tokenize("s = rb'raw'\n");
    CHECK(prefixed[2].kind == TokKind::String);

    CHECK_THROWS_AS(tokenize("s = 'abc\n"), TokenizeError);
    CHECK_THROWS_AS(tokenize("s = '''abc\n"), TokenizeError);
    CHECK_THROWS_AS(tokenize("f(a\n"), TokenizeError);
    CHECK_THROWS_AS(tokenize("f)a(\n"), TokenizeError);
}

TEST_CASE("keyword classification") {
    auto toks = tokenize("for x in y:\n    pass\n");
    CHECK(toks[0].kind == TokKind::Keyword);
    CHECK(toks[1].kind == TokKind::Name);
    CHECK(toks[2].kind == TokKind::Keyword);

    CHECK(is_python_keyword("while"));
    CHECK(is_python_keyword("except"));
    CHECK_FALSE(is_python_keyword("match"));
    CHECK_FALSE(is_python_keyword("case"));
    CHECK_FALSE(is_python_keyword("print"));
}

TEST_CASE("parser fixtures have hand-derived shapes") {
    for (const ParserFixture& fx : exact_fixtures()) {
        CAPTURE(fx.source);
        AstMetrics m = ast_metrics(fx.source);
        CHECK(m.exact);
        CHECK(m.node_count == fx.nodes);
        CHECK(m.depth == fx.depth);
    }
}

TEST_CASE("malformed sources use the fallback estimator") {
    for (const ParserFixture& fx : fallback_fixtures()) {
        CAPTURE(fx.source);
        AstMetrics m = ast_metrics(fx.source);
        CHECK_FALSE(m.exact);
        CHECK(m.node_count == fx.nodes);
        CHECK(m.depth == fx.depth);
    }
}

TEST_CASE("node count decomposes over subtrees") {
    for (const char* source : {"x = a + b * c", "def f(a):\n    return a + 1",
                               "for k, v in d.items():\n    print(k)"}) {
        AstNode root = parse_python_subset(tokenize(source));
        // recursive identity: count(node) = 1 + sum of child counts
        struct Checker {
            static long walk(const AstNode& node) {
                long total = 1;
                for (const AstNode& child : node.children) total += walk(child);
                return total;
            }
        };
        CHECK(Checker::walk(root) == count_nodes(root));
        CHECK(tree_depth(root) <= count_nodes(root));
    }
}

TEST_CASE("wrapping a statement in if True adds one level and two nodes") {
    for (const ParserFixture& fx : exact_fixtures()) {
        if (fx.source[0] == '\0') continue;  // empty module has no statement to wrap
        std::string wrapped = "if True:\n" + indent_all(fx.source);
        CAPTURE(wrapped);
        AstMetrics inner = ast_metrics(fx.source);
        AstMetrics outer = ast_metrics(wrapped);
        REQUIRE(outer.exact);
        CHECK(outer.depth == inner.depth + 1);
        CHECK(outer.node_count == inner.node_count + 2);
    }
}

TEST_CASE("deeply nested expressions trip the recursion guard") {
    std::string source = "x = ";
    for (int i = 0; i < 400; ++i) source += '(';
    source += '1';
    for (int i = 0; i < 400; ++i) source += ')';
    AstMetrics m = ast_metrics(source);
    CHECK_FALSE(m.exact);
    CHECK(m.node_count >= 1);
    CHECK(m.depth >= 1);
}

TEST_CASE("tolerant lexer reports nesting") {
    FallbackLex lex = lex_tolerant("if x\n    pass");
    REQUIRE(lex.tokens.size() == 3);
    CHECK(lex.nesting[0] == 0);  // if
    CHECK(lex.nesting[1] == 0);  // x
    CHECK(lex.nesting[2] == 1);  // pass, one indent level deep

    // a line that cannot lex is dropped wholesale
    FallbackLex dropped = lex_tolerant("good = 1\nbad $ line\nalso_good = 2\n");
    CHECK(dropped.tokens.size() == 6);
}

TEST_CASE("fallback metrics respect their clamps") {
    AstMetrics empty = ast_metrics("$");
    CHECK_FALSE(empty.exact);
    CHECK(empty.node_count == 1);
    CHECK(empty.depth == 1);
}
