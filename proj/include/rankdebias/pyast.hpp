#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rankdebias {

// Tokenizer and structural parser for a Python subset, built for measuring
// code shape (token counts, node counts, nesting depth) rather than for
// execution. Layout is significant: indentation produces INDENT/DEDENT
// tokens the same way CPython's tokenizer does, with tabs advancing to the
// next multiple of 8 columns.

enum class TokKind { Name, Keyword, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct PyToken {
    TokKind kind;
    std::string text;
    int line = 1;  // 1-based
    int col = 0;   // 0-based byte offset in the physical line
};

class TokenizeError : public std::runtime_error {
public:
    TokenizeError(const std::string& msg, int line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line(line) {}
    int line;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, int line, int col)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ", col " +
                             std::to_string(col) + ")"),
          line(line),
          col(col) {}
    int line;
    int col;
};

std::vector<PyToken> tokenize(std::string_view source);

const char* to_string(TokKind kind);
bool is_python_keyword(std::string_view word);

enum class NodeKind {
    Module,
    FunctionDef,
    ClassDef,
    If,
    For,
    While,
    With,
    Try,
    ExceptHandler,
    Return,
    Assign,
    AugAssign,
    ExprStmt,
    SimpleStmt,
    Import,
    Call,
    Attribute,
    Subscript,
    BinOp,
    UnaryOp,
    BoolOp,
    Compare,
    Lambda,
    Comprehension,
    ListDisplay,
    TupleDisplay,
    DictDisplay,
    SetDisplay,
    Name,
    Literal,
};

const char* to_string(NodeKind kind);

struct AstNode {
    NodeKind kind;
    std::string text;  // identifier / literal / operator spelling where useful
    std::vector<AstNode> children;
};

// Parses the token stream into a Module node. Constructs outside the subset
// (async, match statements, walrus, conditional expressions, ...) raise
// ParseError; callers fall back to the tolerant path below.
AstNode parse_python_subset(const std::vector<PyToken>& tokens);

std::size_t count_nodes(const AstNode& node);
std::size_t tree_depth(const AstNode& node);

// Line-oriented lexer that never throws. Lines it cannot make sense of are
// dropped wholesale; indentation mismatches settle to the nearest open
// level. nesting[i] is the indentation level plus bracket depth at token i,
// used to estimate structural depth when exact parsing fails.
struct FallbackLex {
    std::vector<PyToken> tokens;  // Name/Keyword/Number/String/Op only
    std::vector<int> nesting;
};

FallbackLex lex_tolerant(std::string_view source);

struct AstMetrics {
    std::size_t node_count = 1;
    std::size_t depth = 1;
    bool exact = true;
};

// Never throws: exact metrics when the subset parser accepts the code,
// token-based estimates otherwise.
AstMetrics ast_metrics(std::string_view code_text);

}  // namespace rankdebias
