#include "rankdebias/pyast.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <utility>

namespace rankdebias {

namespace {

bool is_name_start(char ch) {
    unsigned char c = static_cast<unsigned char>(ch);
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

bool is_name_char(char ch) {
    unsigned char c = static_cast<unsigned char>(ch);
    return is_name_start(ch) || (c >= '0' && c <= '9');
}

bool is_dec_digit(char c) {
    return c >= '0' && c <= '9';
}

bool is_hex_digit(char c) {
    return is_dec_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

std::string normalize_newlines(std::string_view source) {
    std::string out;
    out.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        char c = source[i];
        if (c == '\r') {
            if (i + 1 < source.size() && source[i + 1] == '\n') ++i;
            out.push_back('\n');
        } else {
            out.push_back(c);
        }
    }
    return out;
}

bool is_string_prefix(std::string_view word) {
    if (word.size() > 2) return false;
    std::string low;
    for (char c : word) low.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    static const char* prefixes[] = {"b", "br", "f", "fr", "r", "rb", "rf", "u"};
    for (const char* p : prefixes) {
        if (low == p) return true;
    }
    return false;
}

const std::array<const char*, 5> kThreeCharOps = {"**=", "//=", "<<=", ">>=", "..."};
const std::array<const char*, 19> kTwoCharOps = {"**", "//", "<<", ">>", "<=", ">=", "==",
                                                 "!=", "->", ":=", "+=", "-=", "*=", "/=",
                                                 "%=", "@=", "&=", "|=", "^="};
const char* kSingleCharOps = "+-*/%@&|^~<>()[]{},:.;=";

char matching_open(char close) {
    switch (close) {
        case ')': return '(';
        case ']': return '[';
        case '}': return '{';
    }
    return 0;
}

// Shared by the strict tokenizer and the tolerant lexer: scans one token
// starting at src[pos] (which must not be whitespace, comment, newline or
// backslash). Returns false when the character cannot start any token.
struct ScanState {
    std::string_view src;
    std::size_t pos = 0;
    int line = 1;
    int col = 0;
};

bool scan_operator(ScanState& st, PyToken& tok) {
    std::string_view rest = st.src.substr(st.pos);
    for (const char* op : kThreeCharOps) {
        if (rest.substr(0, 3) == op) {
            tok = PyToken{TokKind::Op, std::string(op), st.line, st.col};
            st.pos += 3;
            st.col += 3;
            return true;
        }
    }
    for (const char* op : kTwoCharOps) {
        if (rest.substr(0, 2) == op) {
            tok = PyToken{TokKind::Op, std::string(op), st.line, st.col};
            st.pos += 2;
            st.col += 2;
            return true;
        }
    }
    char c = rest.empty() ? '\0' : rest[0];
    for (const char* p = kSingleCharOps; *p != '\0'; ++p) {
        if (c == *p) {
            tok = PyToken{TokKind::Op, std::string(1, c), st.line, st.col};
            st.pos += 1;
            st.col += 1;
            return true;
        }
    }
    return false;
}

void scan_number(ScanState& st, PyToken& tok) {
    std::size_t start = st.pos;
    int tline = st.line, tcol = st.col;
    std::string_view src = st.src;
    std::size_t n = src.size();
    std::size_t i = st.pos;
    auto eat_digits = [&](bool hex) {
        while (i < n && ((hex ? is_hex_digit(src[i]) : is_dec_digit(src[i])) || src[i] == '_')) ++i;
    };
    if (src[i] == '0' && i + 1 < n &&
        (src[i + 1] == 'x' || src[i + 1] == 'X' || src[i + 1] == 'o' || src[i + 1] == 'O' ||
         src[i + 1] == 'b' || src[i + 1] == 'B')) {
        i += 2;
        eat_digits(true);
    } else {
        eat_digits(false);
        if (i < n && src[i] == '.') {
            ++i;
            eat_digits(false);
        }
        if (i < n && (src[i] == 'e' || src[i] == 'E')) {
            std::size_t mark = i;
            ++i;
            if (i < n && (src[i] == '+' || src[i] == '-')) ++i;
            if (i < n && is_dec_digit(src[i])) {
                eat_digits(false);
            } else {
                i = mark;  // not an exponent, leave for the next token
            }
        }
    }
    if (i < n && (src[i] == 'j' || src[i] == 'J')) ++i;
    tok = PyToken{TokKind::Number, std::string(src.substr(start, i - start)), tline, tcol};
    st.col += static_cast<int>(i - st.pos);
    st.pos = i;
}

// Scans a quoted literal whose prefix (if any) starts at prefix_start.
// st.pos sits on the opening quote. Throws TokenizeError when the literal
// never terminates.
void scan_string(ScanState& st, std::size_t prefix_start, int tline, int tcol, PyToken& tok) {
    std::string_view src = st.src;
    std::size_t n = src.size();
    char q = src[st.pos];
    bool triple = st.pos + 2 < n && src[st.pos + 1] == q && src[st.pos + 2] == q;
    std::size_t i = st.pos + (triple ? 3 : 1);
    int line = st.line;
    int col = st.col + (triple ? 3 : 1);
    if (triple) {
        const char closer[4] = {q, q, q, '\0'};
        while (true) {
            if (i >= n) throw TokenizeError("unterminated triple-quoted string literal", tline);
            if (src.substr(i, 3) == closer) {
                i += 3;
                col += 3;
                break;
            }
            if (src[i] == '\\' && i + 1 < n) {
                if (src[i + 1] == '\n') {
                    ++line;
                    col = 0;
                } else {
                    col += 2;
                }
                i += 2;
            } else if (src[i] == '\n') {
                ++line;
                col = 0;
                ++i;
            } else {
                ++i;
                ++col;
            }
        }
    } else {
        while (true) {
            if (i >= n || src[i] == '\n') {
                throw TokenizeError("unterminated string literal", line);
            }
            if (src[i] == q) {
                ++i;
                ++col;
                break;
            }
            if (src[i] == '\\' && i + 1 < n) {
                if (src[i + 1] == '\n') {
                    ++line;
                    col = 0;
                } else {
                    col += 2;
                }
                i += 2;
            } else {
                ++i;
                ++col;
            }
        }
    }
    tok = PyToken{TokKind::String, std::string(src.substr(prefix_start, i - prefix_start)), tline,
                  tcol};
    st.pos = i;
    st.line = line;
    st.col = col;
}

}  // namespace

const char* to_string(TokKind kind) {
    switch (kind) {
        case TokKind::Name: return "NAME";
        case TokKind::Keyword: return "KEYWORD";
        case TokKind::Number: return "NUMBER";
        case TokKind::String: return "STRING";
        case TokKind::Op: return "OP";
        case TokKind::Newline: return "NEWLINE";
        case TokKind::Indent: return "INDENT";
        case TokKind::Dedent: return "DEDENT";
        case TokKind::EndMarker: return "ENDMARKER";
    }
    return "?";
}

bool is_python_keyword(std::string_view word) {
    static const std::array<std::string_view, 35> kw = {
        "False",  "None",   "True",    "and",    "as",     "assert", "async",
        "await",  "break",  "class",   "continue", "def",  "del",    "elif",
        "else",   "except", "finally", "for",    "from",   "global", "if",
        "import", "in",     "is",      "lambda", "nonlocal", "not",  "or",
        "pass",   "raise",  "return",  "try",    "while",  "with",   "yield"};
    return std::binary_search(kw.begin(), kw.end(), word);
}

std::vector<PyToken> tokenize(std::string_view source) {
    std::string owned = normalize_newlines(source);
    std::string_view src = owned;
    std::size_t n = src.size();

    std::vector<PyToken> out;
    std::vector<int> indents{0};
    std::vector<std::pair<char, int>> brackets;  // open char, line
    ScanState st{src, 0, 1, 0};
    bool logical_started = false;
    bool at_line_start = true;

    while (st.pos < n) {
        if (at_line_start && brackets.empty()) {
            int width = 0;
            std::size_t ws_start = st.pos;
            while (st.pos < n) {
                char c = src[st.pos];
                if (c == ' ') {
                    width += 1;
                } else if (c == '\t') {
                    width = (width / 8 + 1) * 8;
                } else if (c == '\f') {
                    width = 0;
                } else {
                    break;
                }
                ++st.pos;
            }
            st.col = static_cast<int>(st.pos - ws_start);
            if (st.pos >= n) break;
            if (src[st.pos] == '\n') {
                ++st.pos;
                ++st.line;
                st.col = 0;
                continue;
            }
            if (src[st.pos] == '#') {
                while (st.pos < n && src[st.pos] != '\n') ++st.pos;
                continue;
            }
            if (width > indents.back()) {
                indents.push_back(width);
                out.push_back(PyToken{TokKind::Indent, "", st.line, st.col});
            } else {
                while (width < indents.back()) {
                    indents.pop_back();
                    out.push_back(PyToken{TokKind::Dedent, "", st.line, st.col});
                }
                if (width != indents.back()) {
                    throw TokenizeError("unindent does not match any outer indentation level",
                                        st.line);
                }
            }
            at_line_start = false;
            continue;
        }

        char c = src[st.pos];
        if (c == '\n') {
            if (brackets.empty()) {
                if (logical_started) {
                    out.push_back(PyToken{TokKind::Newline, "", st.line, st.col});
                    logical_started = false;
                }
                at_line_start = true;
            }
            ++st.pos;
            ++st.line;
            st.col = 0;
            continue;
        }
        if (c == ' ' || c == '\t' || c == '\f') {
            ++st.pos;
            ++st.col;
            continue;
        }
        if (c == '#') {
            while (st.pos < n && src[st.pos] != '\n') ++st.pos;
            continue;
        }
        if (c == '\\') {
            if (st.pos + 1 < n && src[st.pos + 1] == '\n') {
                st.pos += 2;
                ++st.line;
                st.col = 0;
                continue;
            }
            throw TokenizeError("unexpected character after line continuation character", st.line);
        }

        if (is_name_start(c)) {
            int tline = st.line, tcol = st.col;
            std::size_t start = st.pos;
            while (st.pos < n && is_name_char(src[st.pos])) {
                ++st.pos;
                ++st.col;
            }
            std::string word(src.substr(start, st.pos - start));
            if (st.pos < n && (src[st.pos] == '\'' || src[st.pos] == '"') &&
                is_string_prefix(word)) {
                PyToken tok;
                scan_string(st, start, tline, tcol, tok);
                out.push_back(std::move(tok));
            } else {
                out.push_back(PyToken{is_python_keyword(word) ? TokKind::Keyword : TokKind::Name,
                                      std::move(word), tline, tcol});
            }
            logical_started = true;
            continue;
        }
        if (is_dec_digit(c) ||
            (c == '.' && st.pos + 1 < n && is_dec_digit(src[st.pos + 1]))) {
            PyToken tok;
            scan_number(st, tok);
            out.push_back(std::move(tok));
            logical_started = true;
            continue;
        }
        if (c == '\'' || c == '"') {
            PyToken tok;
            scan_string(st, st.pos, st.line, st.col, tok);
            out.push_back(std::move(tok));
            logical_started = true;
            continue;
        }
        PyToken tok;
        if (scan_operator(st, tok)) {
            char oc = tok.text.size() == 1 ? tok.text[0] : '\0';
            if (oc == '(' || oc == '[' || oc == '{') {
                brackets.emplace_back(oc, tok.line);
            } else if (oc == ')' || oc == ']' || oc == '}') {
                if (brackets.empty()) {
                    throw TokenizeError("unmatched '" + tok.text + "'", tok.line);
                }
                if (brackets.back().first != matching_open(oc)) {
                    throw TokenizeError("closing bracket '" + tok.text +
                                            "' does not match opening bracket",
                                        tok.line);
                }
                brackets.pop_back();
            }
            out.push_back(std::move(tok));
            logical_started = true;
            continue;
        }
        throw TokenizeError(std::string("unexpected character '") + c + "'", st.line);
    }

    if (!brackets.empty()) {
        throw TokenizeError(std::string("'") + brackets.back().first + "' was never closed",
                            brackets.back().second);
    }
    if (logical_started) {
        out.push_back(PyToken{TokKind::Newline, "", st.line, st.col});
    }
    while (indents.size() > 1) {
        indents.pop_back();
        out.push_back(PyToken{TokKind::Dedent, "", st.line, st.col});
    }
    out.push_back(PyToken{TokKind::EndMarker, "", st.line, 0});
    return out;
}

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Module: return "Module";
        case NodeKind::FunctionDef: return "FunctionDef";
        case NodeKind::ClassDef: return "ClassDef";
        case NodeKind::If: return "If";
        case NodeKind::For: return "For";
        case NodeKind::While: return "While";
        case NodeKind::With: return "With";
        case NodeKind::Try: return "Try";
        case NodeKind::ExceptHandler: return "ExceptHandler";
        case NodeKind::Return: return "Return";
        case NodeKind::Assign: return "Assign";
        case NodeKind::AugAssign: return "AugAssign";
        case NodeKind::ExprStmt: return "ExprStmt";
        case NodeKind::SimpleStmt: return "SimpleStmt";
        case NodeKind::Import: return "Import";
        case NodeKind::Call: return "Call";
        case NodeKind::Attribute: return "Attribute";
        case NodeKind::Subscript: return "Subscript";
        case NodeKind::BinOp: return "BinOp";
        case NodeKind::UnaryOp: return "UnaryOp";
        case NodeKind::BoolOp: return "BoolOp";
        case NodeKind::Compare: return "Compare";
        case NodeKind::Lambda: return "Lambda";
        case NodeKind::Comprehension: return "Comprehension";
        case NodeKind::ListDisplay: return "ListDisplay";
        case NodeKind::TupleDisplay: return "TupleDisplay";
        case NodeKind::DictDisplay: return "DictDisplay";
        case NodeKind::SetDisplay: return "SetDisplay";
        case NodeKind::Name: return "Name";
        case NodeKind::Literal: return "Literal";
    }
    return "?";
}

namespace {

class Parser {
public:
    explicit Parser(const std::vector<PyToken>& toks) : toks_(toks) {}

    AstNode parse_module() {
        AstNode mod{NodeKind::Module, "", {}};
        while (!at(TokKind::EndMarker)) {
            if (at(TokKind::Newline)) {
                ++pos_;
                continue;
            }
            parse_statement(mod.children);
        }
        return mod;
    }

private:
    const std::vector<PyToken>& toks_;
    std::size_t pos_ = 0;
    int expr_depth_ = 0;

    struct DepthGuard {
        Parser& p;
        explicit DepthGuard(Parser& parser) : p(parser) {
            if (++p.expr_depth_ > 300) p.fail("expression nesting too deep");
        }
        ~DepthGuard() { --p.expr_depth_; }
    };

    const PyToken& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }

    [[noreturn]] void fail(const std::string& msg) const {
        const PyToken& t = peek();
        std::string ctx = t.text.empty() ? to_string(t.kind) : t.text;
        throw ParseError(msg + " near '" + ctx + "'", t.line, t.col);
    }

    bool at(TokKind k) const { return peek().kind == k; }
    bool at_op(std::string_view text) const {
        return peek().kind == TokKind::Op && peek().text == text;
    }
    bool at_kw(std::string_view text) const {
        return peek().kind == TokKind::Keyword && peek().text == text;
    }

    void expect_op(std::string_view text) {
        if (!at_op(text)) fail("expected '" + std::string(text) + "'");
        ++pos_;
    }
    void expect_kw(std::string_view text) {
        if (!at_kw(text)) fail("expected '" + std::string(text) + "'");
        ++pos_;
    }
    std::string expect_name() {
        if (!at(TokKind::Name)) fail("expected a name");
        return toks_[pos_++].text;
    }
    void expect_newline() {
        if (!at(TokKind::Newline)) fail("expected end of line");
        ++pos_;
    }

    bool at_stmt_end() const { return at(TokKind::Newline) || at_op(";"); }

    bool can_start_test() const {
        const PyToken& t = peek();
        switch (t.kind) {
            case TokKind::Name:
            case TokKind::Number:
            case TokKind::String:
                return true;
            case TokKind::Keyword:
                return t.text == "lambda" || t.text == "not" || t.text == "True" ||
                       t.text == "False" || t.text == "None";
            case TokKind::Op:
                return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "+" ||
                       t.text == "-" || t.text == "~" || t.text == "*" || t.text == "**";
            default:
                return false;
        }
    }

    // ---- statements ----

    void parse_statement(std::vector<AstNode>& out) {
        if (at_kw("if")) {
            ++pos_;
            out.push_back(parse_if_tail());
        } else if (at_kw("while")) {
            out.push_back(parse_while());
        } else if (at_kw("for")) {
            out.push_back(parse_for());
        } else if (at_kw("try")) {
            out.push_back(parse_try());
        } else if (at_kw("with")) {
            out.push_back(parse_with());
        } else if (at_kw("def")) {
            out.push_back(parse_funcdef({}));
        } else if (at_kw("class")) {
            out.push_back(parse_classdef({}));
        } else if (at_op("@")) {
            out.push_back(parse_decorated());
        } else {
            parse_simple_line(out);
        }
    }

    void parse_simple_line(std::vector<AstNode>& out) {
        while (true) {
            out.push_back(parse_small_stmt());
            if (at_op(";")) {
                ++pos_;
                if (at(TokKind::Newline)) break;
                continue;
            }
            break;
        }
        expect_newline();
    }

    AstNode parse_small_stmt() {
        if (at_kw("pass") || at_kw("break") || at_kw("continue")) {
            return AstNode{NodeKind::SimpleStmt, toks_[pos_++].text, {}};
        }
        if (at_kw("del")) {
            ++pos_;
            AstNode node{NodeKind::SimpleStmt, "del", {}};
            node.children.push_back(parse_test());
            while (at_op(",")) {
                ++pos_;
                if (!can_start_test()) break;
                node.children.push_back(parse_test());
            }
            return node;
        }
        if (at_kw("raise")) {
            ++pos_;
            AstNode node{NodeKind::SimpleStmt, "raise", {}};
            if (!at_stmt_end()) {
                node.children.push_back(parse_test());
                if (at_kw("from")) {
                    ++pos_;
                    node.children.push_back(parse_test());
                }
            }
            return node;
        }
        if (at_kw("global") || at_kw("nonlocal")) {
            AstNode node{NodeKind::SimpleStmt, toks_[pos_++].text, {}};
            node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            while (at_op(",")) {
                ++pos_;
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            }
            return node;
        }
        if (at_kw("assert")) {
            ++pos_;
            AstNode node{NodeKind::SimpleStmt, "assert", {}};
            node.children.push_back(parse_test());
            if (at_op(",")) {
                ++pos_;
                node.children.push_back(parse_test());
            }
            return node;
        }
        if (at_kw("import")) return parse_import();
        if (at_kw("from")) return parse_import_from();
        if (at_kw("return")) {
            ++pos_;
            AstNode node{NodeKind::Return, "", {}};
            if (!at_stmt_end()) node.children.push_back(parse_testlist());
            return node;
        }
        if (at_kw("yield")) {
            ++pos_;
            AstNode node{NodeKind::SimpleStmt, "yield", {}};
            if (at_kw("from")) {
                ++pos_;
                node.children.push_back(parse_test());
            } else if (!at_stmt_end()) {
                node.children.push_back(parse_testlist());
            }
            return node;
        }
        return parse_expr_stmt();
    }

    AstNode parse_import() {
        expect_kw("import");
        AstNode node{NodeKind::Import, "import", {}};
        while (true) {
            node.children.push_back(AstNode{NodeKind::Name, parse_dotted_name(), {}});
            if (at_kw("as")) {
                ++pos_;
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            }
            if (at_op(",")) {
                ++pos_;
                continue;
            }
            break;
        }
        return node;
    }

    AstNode parse_import_from() {
        expect_kw("from");
        AstNode node{NodeKind::Import, "from", {}};
        std::string module;
        while (at_op(".") || at_op("...")) {
            module += toks_[pos_++].text;
        }
        if (at(TokKind::Name)) module += parse_dotted_name();
        if (module.empty()) fail("expected a module name");
        node.children.push_back(AstNode{NodeKind::Name, module, {}});
        expect_kw("import");
        if (at_op("*")) {
            ++pos_;
            node.children.push_back(AstNode{NodeKind::Name, "*", {}});
            return node;
        }
        bool parens = at_op("(");
        if (parens) ++pos_;
        while (true) {
            node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            if (at_kw("as")) {
                ++pos_;
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            }
            if (at_op(",")) {
                ++pos_;
                if (parens && at_op(")")) break;
                continue;
            }
            break;
        }
        if (parens) expect_op(")");
        return node;
    }

    std::string parse_dotted_name() {
        std::string name = expect_name();
        while (at_op(".")) {
            ++pos_;
            name += "." + expect_name();
        }
        return name;
    }

    static bool is_augassign(const std::string& op) {
        static const std::array<std::string_view, 13> ops = {"+=", "-=", "*=", "/=", "//=",
                                                             "%=", "**=", ">>=", "<<=", "&=",
                                                             "|=", "^=", "@="};
        return std::find(ops.begin(), ops.end(), op) != ops.end();
    }

    AstNode parse_expr_stmt() {
        AstNode first = parse_testlist();
        if (at(TokKind::Op) && is_augassign(peek().text)) {
            AstNode node{NodeKind::AugAssign, toks_[pos_++].text, {}};
            node.children.push_back(std::move(first));
            node.children.push_back(parse_testlist());
            return node;
        }
        if (at_op("=")) {
            AstNode node{NodeKind::Assign, "", {}};
            node.children.push_back(std::move(first));
            while (at_op("=")) {
                ++pos_;
                node.children.push_back(parse_testlist());
            }
            return node;
        }
        AstNode node{NodeKind::ExprStmt, "", {}};
        node.children.push_back(std::move(first));
        return node;
    }

    // ---- suites and compound statements ----

    void parse_suite(std::vector<AstNode>& out) {
        expect_op(":");
        if (at(TokKind::Newline)) {
            ++pos_;
            if (!at(TokKind::Indent)) fail("expected an indented block");
            ++pos_;
            while (!at(TokKind::Dedent)) {
                if (at(TokKind::EndMarker)) fail("unexpected end of input in block");
                parse_statement(out);
            }
            ++pos_;
        } else {
            parse_simple_line(out);
        }
    }

    AstNode parse_if_tail() {  // 'if'/'elif' keyword already consumed
        AstNode node{NodeKind::If, "", {}};
        node.children.push_back(parse_test());
        parse_suite(node.children);
        if (at_kw("elif")) {
            ++pos_;
            node.children.push_back(parse_if_tail());
        } else if (at_kw("else")) {
            ++pos_;
            parse_suite(node.children);
        }
        return node;
    }

    AstNode parse_while() {
        expect_kw("while");
        AstNode node{NodeKind::While, "", {}};
        node.children.push_back(parse_test());
        parse_suite(node.children);
        if (at_kw("else")) {
            ++pos_;
            parse_suite(node.children);
        }
        return node;
    }

    AstNode parse_for() {
        expect_kw("for");
        AstNode node{NodeKind::For, "", {}};
        node.children.push_back(parse_target_list());
        expect_kw("in");
        node.children.push_back(parse_testlist());
        parse_suite(node.children);
        if (at_kw("else")) {
            ++pos_;
            parse_suite(node.children);
        }
        return node;
    }

    AstNode parse_with() {
        expect_kw("with");
        AstNode node{NodeKind::With, "", {}};
        while (true) {
            node.children.push_back(parse_test());
            if (at_kw("as")) {
                ++pos_;
                node.children.push_back(parse_target());
            }
            if (at_op(",")) {
                ++pos_;
                continue;
            }
            break;
        }
        parse_suite(node.children);
        return node;
    }

    AstNode parse_try() {
        expect_kw("try");
        AstNode node{NodeKind::Try, "", {}};
        parse_suite(node.children);
        bool has_handler = false;
        while (at_kw("except")) {
            has_handler = true;
            ++pos_;
            AstNode handler{NodeKind::ExceptHandler, "", {}};
            if (!at_op(":")) {
                handler.children.push_back(parse_test());
                if (at_kw("as")) {
                    ++pos_;
                    handler.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
                }
            }
            parse_suite(handler.children);
            node.children.push_back(std::move(handler));
        }
        if (at_kw("else")) {
            if (!has_handler) fail("'else' clause requires an 'except' clause");
            ++pos_;
            parse_suite(node.children);
        }
        bool has_finally = at_kw("finally");
        if (has_finally) {
            ++pos_;
            parse_suite(node.children);
        }
        if (!has_handler && !has_finally) fail("expected 'except' or 'finally'");
        return node;
    }

    AstNode parse_funcdef(std::vector<AstNode> decorators) {
        expect_kw("def");
        AstNode node{NodeKind::FunctionDef, expect_name(), std::move(decorators)};
        expect_op("(");
        while (!at_op(")")) {
            if (at_op("*")) {
                ++pos_;
                if (at(TokKind::Name)) {
                    node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
                }
            } else if (at_op("**")) {
                ++pos_;
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            } else if (at_op("/")) {
                ++pos_;
            } else {
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            }
            if (at_op(":")) {  // annotation, parsed and dropped
                ++pos_;
                parse_test();
            }
            if (at_op("=")) {  // default value, parsed and dropped
                ++pos_;
                parse_test();
            }
            if (at_op(",")) {
                ++pos_;
                continue;
            }
            break;
        }
        expect_op(")");
        if (at_op("->")) {  // return annotation, parsed and dropped
            ++pos_;
            parse_test();
        }
        parse_suite(node.children);
        return node;
    }

    AstNode parse_classdef(std::vector<AstNode> decorators) {
        expect_kw("class");
        AstNode node{NodeKind::ClassDef, expect_name(), std::move(decorators)};
        if (at_op("(")) {
            ++pos_;
            parse_call_args(node);
            expect_op(")");
        }
        parse_suite(node.children);
        return node;
    }

    AstNode parse_decorated() {
        std::vector<AstNode> decorators;
        while (at_op("@")) {
            ++pos_;
            AstNode expr{NodeKind::ExprStmt, "", {}};
            expr.children.push_back(parse_test());
            expect_newline();
            decorators.push_back(std::move(expr));
        }
        if (at_kw("def")) return parse_funcdef(std::move(decorators));
        if (at_kw("class")) return parse_classdef(std::move(decorators));
        fail("expected 'def' or 'class' after decorators");
    }

    // ---- expressions ----

    AstNode parse_testlist() {
        AstNode first = parse_test_or_star();
        if (!at_op(",")) return first;
        AstNode tup{NodeKind::TupleDisplay, "", {}};
        tup.children.push_back(std::move(first));
        while (at_op(",")) {
            ++pos_;
            if (!can_start_test()) break;
            tup.children.push_back(parse_test_or_star());
        }
        return tup;
    }

    AstNode parse_test_or_star() {
        if (at_op("*")) {
            ++pos_;
            return parse_test();
        }
        return parse_test();
    }

    AstNode parse_test() {
        if (at_kw("lambda")) return parse_lambda();
        AstNode node = parse_or_test();
        if (at_kw("if")) fail("conditional expressions are not supported");
        return node;
    }

    AstNode parse_lambda() {
        expect_kw("lambda");
        AstNode node{NodeKind::Lambda, "", {}};
        while (!at_op(":")) {
            if (at_op("*")) {
                ++pos_;
                if (at(TokKind::Name)) {
                    node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
                }
            } else if (at_op("**")) {
                ++pos_;
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            } else {
                node.children.push_back(AstNode{NodeKind::Name, expect_name(), {}});
            }
            if (at_op("=")) {
                ++pos_;
                parse_test();
            }
            if (at_op(",")) {
                ++pos_;
                continue;
            }
            break;
        }
        expect_op(":");
        node.children.push_back(parse_test());
        return node;
    }

    AstNode parse_or_test() {
        AstNode node = parse_and_test();
        if (!at_kw("or")) return node;
        AstNode op{NodeKind::BoolOp, "or", {}};
        op.children.push_back(std::move(node));
        while (at_kw("or")) {
            ++pos_;
            op.children.push_back(parse_and_test());
        }
        return op;
    }

    AstNode parse_and_test() {
        AstNode node = parse_not_test();
        if (!at_kw("and")) return node;
        AstNode op{NodeKind::BoolOp, "and", {}};
        op.children.push_back(std::move(node));
        while (at_kw("and")) {
            ++pos_;
            op.children.push_back(parse_not_test());
        }
        return op;
    }

    AstNode parse_not_test() {
        if (at_kw("not")) {
            ++pos_;
            AstNode node{NodeKind::UnaryOp, "not", {}};
            node.children.push_back(parse_not_test());
            return node;
        }
        return parse_comparison();
    }

    bool at_comparison_op() const {
        if (peek().kind == TokKind::Op) {
            const std::string& t = peek().text;
            return t == "<" || t == ">" || t == "<=" || t == ">=" || t == "==" || t == "!=";
        }
        return at_kw("in") || at_kw("is") || (at_kw("not") && peek(1).kind == TokKind::Keyword &&
                                              peek(1).text == "in");
    }

    AstNode parse_comparison() {
        AstNode first = parse_bitor();
        if (!at_comparison_op()) return first;
        AstNode node{NodeKind::Compare, "", {}};
        node.children.push_back(std::move(first));
        while (at_comparison_op()) {
            if (at_kw("not")) {
                pos_ += 2;  // not in
            } else if (at_kw("is")) {
                ++pos_;
                if (at_kw("not")) ++pos_;
            } else {
                ++pos_;
            }
            node.children.push_back(parse_bitor());
        }
        return node;
    }

    template <typename NextFn>
    AstNode parse_binop_level(std::initializer_list<std::string_view> ops, NextFn next) {
        AstNode node = next();
        while (peek().kind == TokKind::Op &&
               std::find(ops.begin(), ops.end(), peek().text) != ops.end()) {
            AstNode op{NodeKind::BinOp, toks_[pos_++].text, {}};
            op.children.push_back(std::move(node));
            op.children.push_back(next());
            node = std::move(op);
        }
        return node;
    }

    AstNode parse_bitor() {
        return parse_binop_level({"|"}, [this] { return parse_bitxor(); });
    }
    AstNode parse_bitxor() {
        return parse_binop_level({"^"}, [this] { return parse_bitand(); });
    }
    AstNode parse_bitand() {
        return parse_binop_level({"&"}, [this] { return parse_shift(); });
    }
    AstNode parse_shift() {
        return parse_binop_level({"<<", ">>"}, [this] { return parse_arith(); });
    }
    AstNode parse_arith() {
        return parse_binop_level({"+", "-"}, [this] { return parse_term(); });
    }
    AstNode parse_term() {
        return parse_binop_level({"*", "/", "//", "%", "@"}, [this] { return parse_factor(); });
    }

    AstNode parse_factor() {
        DepthGuard guard(*this);
        if (at_op("+") || at_op("-") || at_op("~")) {
            AstNode node{NodeKind::UnaryOp, toks_[pos_++].text, {}};
            node.children.push_back(parse_factor());
            return node;
        }
        return parse_power();
    }

    AstNode parse_power() {
        AstNode base = parse_postfix();
        if (at_op("**")) {
            ++pos_;
            AstNode node{NodeKind::BinOp, "**", {}};
            node.children.push_back(std::move(base));
            node.children.push_back(parse_factor());
            return node;
        }
        return base;
    }

    AstNode parse_postfix() {
        AstNode node = parse_atom();
        while (true) {
            if (at_op("(")) {
                ++pos_;
                AstNode call{NodeKind::Call, "", {}};
                call.children.push_back(std::move(node));
                parse_call_args(call);
                expect_op(")");
                node = std::move(call);
            } else if (at_op("[")) {
                ++pos_;
                AstNode sub{NodeKind::Subscript, "", {}};
                sub.children.push_back(std::move(node));
                while (!at_op("]")) {
                    if (at_op(":") || at_op(",")) {
                        ++pos_;
                        continue;
                    }
                    if (at(TokKind::EndMarker)) fail("unexpected end of input in subscript");
                    sub.children.push_back(parse_test());
                }
                ++pos_;
                node = std::move(sub);
            } else if (at_op(".")) {
                ++pos_;
                AstNode attr{NodeKind::Attribute, expect_name(), {}};
                attr.children.push_back(std::move(node));
                node = std::move(attr);
            } else {
                break;
            }
        }
        return node;
    }

    // Arguments of a call or class header, appended to `into`. Keyword
    // argument names produce no node; their values do.
    void parse_call_args(AstNode& into) {
        while (!at_op(")")) {
            if (at(TokKind::EndMarker)) fail("unexpected end of input in argument list");
            if (at_op("*") || at_op("**")) {
                ++pos_;
                into.children.push_back(parse_test());
            } else if (at(TokKind::Name) && peek(1).kind == TokKind::Op &&
                       peek(1).text == "=") {
                pos_ += 2;
                into.children.push_back(parse_test());
            } else {
                AstNode arg = parse_test();
                if (at_kw("for")) {
                    std::vector<AstNode> tail;
                    tail.push_back(std::move(arg));
                    arg = parse_comp_clauses(std::move(tail));
                }
                into.children.push_back(std::move(arg));
            }
            if (at_op(",")) {
                ++pos_;
                continue;
            }
            break;
        }
    }

    AstNode parse_target() {
        if (at_op("*")) {
            ++pos_;
            return parse_target();
        }
        return parse_postfix();
    }

    AstNode parse_target_list() {
        AstNode first = parse_target();
        if (!at_op(",")) return first;
        AstNode tup{NodeKind::TupleDisplay, "", {}};
        tup.children.push_back(std::move(first));
        while (at_op(",")) {
            ++pos_;
            if (!can_start_test()) break;
            tup.children.push_back(parse_target());
        }
        return tup;
    }

    AstNode parse_comp_clauses(std::vector<AstNode> tail) {
        AstNode node{NodeKind::Comprehension, "", {}};
        if (at_kw("for")) {
            ++pos_;
            node.text = "for";
            node.children.push_back(parse_target_list());
            expect_kw("in");
            node.children.push_back(parse_or_test());
        } else if (at_kw("if")) {
            ++pos_;
            node.text = "if";
            node.children.push_back(parse_or_test());
        } else {
            fail("expected 'for' or 'if' in comprehension");
        }
        if (at_kw("for") || at_kw("if")) {
            node.children.push_back(parse_comp_clauses(std::move(tail)));
        } else {
            for (AstNode& t : tail) node.children.push_back(std::move(t));
        }
        return node;
    }

    AstNode parse_atom() {
        DepthGuard guard(*this);
        const PyToken& t = peek();
        switch (t.kind) {
            case TokKind::Name: {
                AstNode node{NodeKind::Name, t.text, {}};
                ++pos_;
                return node;
            }
            case TokKind::Number: {
                AstNode node{NodeKind::Literal, t.text, {}};
                ++pos_;
                return node;
            }
            case TokKind::String: {
                std::string text = t.text;
                ++pos_;
                while (at(TokKind::String)) {  // adjacent literals concatenate
                    text += " " + peek().text;
                    ++pos_;
                }
                return AstNode{NodeKind::Literal, std::move(text), {}};
            }
            case TokKind::Keyword:
                if (t.text == "True" || t.text == "False" || t.text == "None") {
                    AstNode node{NodeKind::Literal, t.text, {}};
                    ++pos_;
                    return node;
                }
                if (t.text == "lambda") return parse_lambda();
                fail("unexpected keyword");
            case TokKind::Op:
                if (t.text == "(") return parse_paren_atom();
                if (t.text == "[") return parse_list_atom();
                if (t.text == "{") return parse_brace_atom();
                fail("unexpected token");
            default:
                fail("unexpected token");
        }
    }

    AstNode parse_paren_atom() {
        expect_op("(");
        if (at_op(")")) {
            ++pos_;
            return AstNode{NodeKind::TupleDisplay, "", {}};
        }
        AstNode first = parse_test_or_star();
        if (at_kw("for")) {
            std::vector<AstNode> tail;
            tail.push_back(std::move(first));
            AstNode comp = parse_comp_clauses(std::move(tail));
            expect_op(")");
            return comp;
        }
        if (at_op(",")) {
            AstNode tup{NodeKind::TupleDisplay, "", {}};
            tup.children.push_back(std::move(first));
            while (at_op(",")) {
                ++pos_;
                if (at_op(")")) break;
                tup.children.push_back(parse_test_or_star());
            }
            expect_op(")");
            return tup;
        }
        expect_op(")");
        return first;  // parentheses around a single expression are transparent
    }

    AstNode parse_list_atom() {
        expect_op("[");
        AstNode list{NodeKind::ListDisplay, "", {}};
        if (at_op("]")) {
            ++pos_;
            return list;
        }
        AstNode first = parse_test_or_star();
        if (at_kw("for")) {
            std::vector<AstNode> tail;
            tail.push_back(std::move(first));
            list.children.push_back(parse_comp_clauses(std::move(tail)));
            expect_op("]");
            return list;
        }
        list.children.push_back(std::move(first));
        while (at_op(",")) {
            ++pos_;
            if (at_op("]")) break;
            list.children.push_back(parse_test_or_star());
        }
        expect_op("]");
        return list;
    }

    AstNode parse_brace_atom() {
        expect_op("{");
        if (at_op("}")) {
            ++pos_;
            return AstNode{NodeKind::DictDisplay, "", {}};
        }
        if (at_op("**")) {
            ++pos_;
            AstNode dict{NodeKind::DictDisplay, "", {}};
            dict.children.push_back(parse_bitor());
            parse_dict_rest(dict);
            return dict;
        }
        AstNode first = parse_test();
        if (at_op(":")) {
            ++pos_;
            AstNode value = parse_test();
            AstNode dict{NodeKind::DictDisplay, "", {}};
            if (at_kw("for")) {
                std::vector<AstNode> tail;
                tail.push_back(std::move(first));
                tail.push_back(std::move(value));
                dict.children.push_back(parse_comp_clauses(std::move(tail)));
                expect_op("}");
                return dict;
            }
            dict.children.push_back(std::move(first));
            dict.children.push_back(std::move(value));
            parse_dict_rest(dict);
            return dict;
        }
        AstNode set{NodeKind::SetDisplay, "", {}};
        if (at_kw("for")) {
            std::vector<AstNode> tail;
            tail.push_back(std::move(first));
            set.children.push_back(parse_comp_clauses(std::move(tail)));
            expect_op("}");
            return set;
        }
        set.children.push_back(std::move(first));
        while (at_op(",")) {
            ++pos_;
            if (at_op("}")) break;
            set.children.push_back(parse_test_or_star());
        }
        expect_op("}");
        return set;
    }

    void parse_dict_rest(AstNode& dict) {
        while (at_op(",")) {
            ++pos_;
            if (at_op("}")) break;
            if (at_op("**")) {
                ++pos_;
                dict.children.push_back(parse_bitor());
                continue;
            }
            dict.children.push_back(parse_test());
            expect_op(":");
            dict.children.push_back(parse_test());
        }
        expect_op("}");
    }
};

}  // namespace

AstNode parse_python_subset(const std::vector<PyToken>& tokens) {
    if (tokens.empty() || tokens.back().kind != TokKind::EndMarker) {
        throw ParseError("token stream has no end marker", 0, 0);
    }
    Parser parser(tokens);
    return parser.parse_module();
}

std::size_t count_nodes(const AstNode& node) {
    std::size_t total = 1;
    for (const AstNode& c : node.children) total += count_nodes(c);
    return total;
}

std::size_t tree_depth(const AstNode& node) {
    std::size_t best = 0;
    for (const AstNode& c : node.children) best = std::max(best, tree_depth(c));
    return best + 1;
}

FallbackLex lex_tolerant(std::string_view source) {
    std::string owned = normalize_newlines(source);
    std::string_view src = owned;

    FallbackLex out;
    std::vector<int> indents{0};
    int bracket_depth = 0;
    int level = 0;
    bool continuation = false;
    bool in_triple = false;
    char triple_q = 0;

    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= src.size()) {
        if (pos == src.size() && line_no > 0) break;
        std::size_t eol = src.find('\n', pos);
        if (eol == std::string_view::npos) eol = src.size();
        std::string_view lext = src.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;

        std::size_t i = 0;
        if (in_triple) {
            const char closer[4] = {triple_q, triple_q, triple_q, '\0'};
            bool closed = false;
            while (i < lext.size()) {
                if (lext[i] == '\\') {
                    i += 2;
                } else if (lext.substr(i, 3) == closer) {
                    i += 3;
                    closed = true;
                    break;
                } else {
                    ++i;
                }
            }
            if (!closed) continue;
            in_triple = false;
        } else if (!continuation && bracket_depth == 0) {
            int width = 0;
            while (i < lext.size()) {
                char c = lext[i];
                if (c == ' ') {
                    width += 1;
                } else if (c == '\t') {
                    width = (width / 8 + 1) * 8;
                } else if (c == '\f') {
                    width = 0;
                } else {
                    break;
                }
                ++i;
            }
            if (i >= lext.size() || lext[i] == '#') continue;
            if (width > indents.back()) {
                indents.push_back(width);
            } else {
                while (width < indents.back()) indents.pop_back();
                // a level that matches nothing settles at the nearest
                // remaining one instead of erroring
            }
            level = static_cast<int>(indents.size()) - 1;
        }
        continuation = false;

        std::vector<PyToken> line_toks;
        std::vector<int> line_nest;
        int depth_at_start = bracket_depth;
        bool discard = false;

        // Attempts the string starting at lext[quote], token text from
        // text_start. Returns false when the line must stop here: either a
        // multi-line triple opened (token emitted) or the line is discarded.
        auto scan_line_string = [&](std::size_t text_start, std::size_t quote,
                                    std::size_t& next) -> bool {
            char q = lext[quote];
            bool triple =
                quote + 2 < lext.size() && lext[quote + 1] == q && lext[quote + 2] == q;
            ScanState st{lext, quote, line_no, static_cast<int>(quote)};
            try {
                PyToken tok;
                scan_string(st, text_start, line_no, static_cast<int>(text_start), tok);
                next = st.pos;
                line_toks.push_back(std::move(tok));
                line_nest.push_back(level + bracket_depth);
                return true;
            } catch (const TokenizeError&) {
                if (triple) {
                    in_triple = true;
                    triple_q = q;
                    line_toks.push_back(PyToken{TokKind::String,
                                                std::string(lext.substr(text_start)), line_no,
                                                static_cast<int>(text_start)});
                    line_nest.push_back(level + bracket_depth);
                } else {
                    discard = true;
                }
                return false;
            }
        };

        while (i < lext.size()) {
            char c = lext[i];
            if (c == ' ' || c == '\t' || c == '\f') {
                ++i;
                continue;
            }
            if (c == '#') break;
            if (c == '\\' && i + 1 == lext.size()) {
                continuation = true;
                break;
            }
            ScanState st{lext, i, line_no, static_cast<int>(i)};
            PyToken tok;
            if (is_name_start(c)) {
                std::size_t start = i;
                while (i < lext.size() && is_name_char(lext[i])) ++i;
                std::string word(lext.substr(start, i - start));
                if (i < lext.size() && (lext[i] == '\'' || lext[i] == '"') &&
                    is_string_prefix(word)) {
                    if (!scan_line_string(start, i, i)) break;
                    continue;
                }
                tok = PyToken{is_python_keyword(word) ? TokKind::Keyword : TokKind::Name,
                              std::move(word), line_no, static_cast<int>(start)};
                line_toks.push_back(std::move(tok));
                line_nest.push_back(level + bracket_depth);
                continue;
            }
            if (is_dec_digit(c) || (c == '.' && i + 1 < lext.size() && is_dec_digit(lext[i + 1]))) {
                scan_number(st, tok);
                i = st.pos;
                line_toks.push_back(std::move(tok));
                line_nest.push_back(level + bracket_depth);
                continue;
            }
            if (c == '\'' || c == '"') {
                if (!scan_line_string(i, i, i)) break;
                continue;
            }
            if (scan_operator(st, tok)) {
                int nest = level + bracket_depth;
                char oc = tok.text.size() == 1 ? tok.text[0] : '\0';
                if (oc == '(' || oc == '[' || oc == '{') {
                    ++bracket_depth;
                } else if (oc == ')' || oc == ']' || oc == '}') {
                    if (bracket_depth > 0) --bracket_depth;
                }
                i = st.pos;
                line_toks.push_back(std::move(tok));
                line_nest.push_back(nest);
                continue;
            }
            discard = true;
            break;
        }

        if (discard) {
            bracket_depth = depth_at_start;
            continuation = false;
            continue;
        }
        for (std::size_t k = 0; k < line_toks.size(); ++k) {
            out.tokens.push_back(std::move(line_toks[k]));
            out.nesting.push_back(line_nest[k]);
        }
    }
    return out;
}

AstMetrics ast_metrics(std::string_view code_text) {
    try {
        std::vector<PyToken> toks = tokenize(code_text);
        AstNode mod = parse_python_subset(toks);
        return AstMetrics{count_nodes(mod), tree_depth(mod), true};
    } catch (const TokenizeError&) {
    } catch (const ParseError&) {
    }
    FallbackLex lex = lex_tolerant(code_text);
    AstMetrics m;
    m.exact = false;
    int max_nest = -1;
    for (int v : lex.nesting) max_nest = std::max(max_nest, v);
    m.node_count = std::max<std::size_t>(lex.tokens.size(), 1);
    std::size_t depth = max_nest < 0 ? 1 : static_cast<std::size_t>(max_nest) + 1;
    m.depth = std::min(std::max<std::size_t>(depth, 1), m.node_count);
    return m;
}

}  // namespace rankdebias
