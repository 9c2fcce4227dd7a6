#include "rankdebias/features.hpp"

#include <cmath>

namespace rankdebias {

namespace {

bool is_alnum_ascii(char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

char to_lower_ascii(char c) {
    return c >= 'A' && c <= 'Z' ? static_cast<char>(c + 32) : c;
}

bool is_upper_ascii(char c) {
    return c >= 'A' && c <= 'Z';
}

std::string lowercased(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) out.push_back(to_lower_ascii(c));
    return out;
}

// Returns the counted token stream for code: the strict tokenizer when it
// accepts the text, the tolerant one otherwise.
std::vector<PyToken> lex_code(std::string_view code_text) {
    try {
        std::vector<PyToken> toks = tokenize(code_text);
        std::vector<PyToken> counted;
        for (PyToken& t : toks) {
            switch (t.kind) {
                case TokKind::Name:
                case TokKind::Keyword:
                case TokKind::Number:
                case TokKind::String:
                case TokKind::Op:
                    counted.push_back(std::move(t));
                    break;
                default:
                    break;
            }
        }
        return counted;
    } catch (const TokenizeError&) {
        return lex_tolerant(code_text).tokens;
    }
}

}  // namespace

std::vector<std::string> tokenize_query(std::string_view query) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : query) {
        if (is_alnum_ascii(c)) {
            cur.push_back(to_lower_ascii(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<std::string> split_identifier(std::string_view name) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    auto flush_chunk = [&](std::string_view chunk) {
        if (chunk.empty()) return;
        // camel boundaries: before an upper following non-upper, and before
        // the last upper of an upper run followed by a lower (HTTPServer)
        std::vector<bool> cut(chunk.size(), false);
        for (std::size_t i = 1; i < chunk.size(); ++i) {
            if (is_upper_ascii(chunk[i]) && !is_upper_ascii(chunk[i - 1])) cut[i] = true;
            if (!is_upper_ascii(chunk[i]) && is_alnum_ascii(chunk[i]) &&
                is_upper_ascii(chunk[i - 1]) && i >= 2 && is_upper_ascii(chunk[i - 2])) {
                cut[i - 1] = true;
            }
        }
        std::string cur;
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            if (cut[i] && !cur.empty()) {
                parts.push_back(cur);
                cur.clear();
            }
            cur.push_back(to_lower_ascii(chunk[i]));
        }
        if (!cur.empty()) parts.push_back(cur);
    };
    for (std::size_t i = 0; i <= name.size(); ++i) {
        if (i == name.size() || name[i] == '_') {
            flush_chunk(name.substr(start, i - start));
            start = i + 1;
        }
    }
    return parts;
}

std::set<std::string> code_word_set(std::string_view code_text) {
    std::set<std::string> words;
    for (const PyToken& t : lex_code(code_text)) {
        if (t.kind == TokKind::Name) {
            for (const std::string& part : split_identifier(t.text)) words.insert(part);
        } else if (t.kind == TokKind::Keyword) {
            words.insert(lowercased(t.text));
        }
    }
    return words;
}

const std::set<std::string>& reserved_words() {
    static const std::set<std::string> words = {"if", "for", "while", "with", "try", "except"};
    return words;
}

long count_reserved(std::string_view code_text) {
    long count = 0;
    for (const PyToken& t : lex_code(code_text)) {
        if (t.kind == TokKind::Keyword && reserved_words().count(t.text) > 0) ++count;
    }
    return count;
}

long count_code_tokens(std::string_view code_text) {
    return static_cast<long>(lex_code(code_text).size());
}

IdfTable IdfTable::fit(const std::vector<std::vector<std::string>>& documents) {
    if (documents.empty()) throw DataError("cannot fit idf on an empty document set");
    std::map<std::string, std::size_t> df;
    for (const auto& doc : documents) {
        std::set<std::string> distinct(doc.begin(), doc.end());
        for (const std::string& w : distinct) ++df[w];
    }
    IdfTable table;
    table.doc_count_ = documents.size();
    for (const auto& [word, count] : df) {
        table.idf_[word] =
            std::log(static_cast<double>(table.doc_count_) / static_cast<double>(count));
    }
    return table;
}

double IdfTable::idf(const std::string& word) const {
    auto it = idf_.find(word);
    return it == idf_.end() ? 0.0 : it->second;
}

double max_tfidf(const std::vector<std::string>& query_tokens, const IdfTable& idf) {
    std::map<std::string, std::size_t> tf;
    for (const std::string& w : query_tokens) ++tf[w];
    double best = 0.0;
    for (const auto& [word, count] : tf) {
        double v = static_cast<double>(count) * idf.idf(word);
        if (v > best) best = v;
    }
    return best;
}

double default_interval_width(int bias_id) {
    switch (bias_id) {
        case 1: return 4.0;   // code token length
        case 2: return 1.0;   // query token length
        case 3: return 4.0;   // syntax node count
        case 4: return 1.0;   // syntax tree depth
        case 5: return 1.0;   // reserved-word count
        case 6: return 0.15;  // max tf-idf of query words
        case 7: return 1.0;   // query/code overlapping words
    }
    throw DataError("bias_id must be between 1 and 7, got " + std::to_string(bias_id));
}

double bias_value(const BiasFeatures& f, int bias_id) {
    switch (bias_id) {
        case 1: return static_cast<double>(f.code_len);
        case 2: return static_cast<double>(f.query_len);
        case 3: return static_cast<double>(f.ast_node_count);
        case 4: return static_cast<double>(f.ast_depth);
        case 5: return static_cast<double>(f.reserved_count);
        case 6: return f.max_tfidf;
        case 7: return static_cast<double>(f.overlap);
    }
    throw DataError("bias_id must be between 1 and 7, got " + std::to_string(bias_id));
}

FeatureStore::FeatureStore(const Corpus& corpus, IdfTable idf)
    : corpus_(corpus), idf_(std::move(idf)) {}

FeatureStore FeatureStore::build(const Corpus& corpus) {
    std::vector<std::vector<std::string>> docs;
    for (const QueryCodePair* pair : corpus.split_pairs(Split::train)) {
        docs.push_back(tokenize_query(pair->query_text));
    }
    if (docs.empty()) {
        throw DataError("dataset has no train queries to fit the idf table on");
    }
    return FeatureStore(corpus, IdfTable::fit(docs));
}

const FeatureStore::CodeFeatures& FeatureStore::code_features(const std::string& code_id) {
    auto it = code_cache_.find(code_id);
    if (it != code_cache_.end()) return it->second;
    const std::string* text = corpus_.code_text(code_id);
    if (text == nullptr) throw DataError("code_id '" + code_id + "' not in dataset");
    CodeFeatures cf;
    cf.code_len = count_code_tokens(*text);
    AstMetrics m = ast_metrics(*text);
    cf.ast_node_count = static_cast<long>(m.node_count);
    cf.ast_depth = static_cast<long>(m.depth);
    cf.ast_exact = m.exact;
    cf.reserved_count = count_reserved(*text);
    cf.word_set = code_word_set(*text);
    return code_cache_.emplace(code_id, std::move(cf)).first->second;
}

const std::vector<std::string>& FeatureStore::query_tokens(const QueryCodePair& pair) {
    auto it = query_cache_.find(pair.pair_id);
    if (it != query_cache_.end()) return it->second;
    return query_cache_.emplace(pair.pair_id, tokenize_query(pair.query_text)).first->second;
}

const BiasFeatures& FeatureStore::pair_features(const QueryCodePair& pair) {
    auto it = pair_cache_.find(pair.pair_id);
    if (it != pair_cache_.end()) return it->second;
    const CodeFeatures& cf = code_features(pair.code_id);
    const std::vector<std::string>& qtokens = query_tokens(pair);
    BiasFeatures f;
    f.code_len = pair.code_len_override ? *pair.code_len_override : cf.code_len;
    f.query_len =
        pair.query_len_override ? *pair.query_len_override : static_cast<long>(qtokens.size());
    f.ast_node_count = cf.ast_node_count;
    f.ast_depth = cf.ast_depth;
    f.reserved_count = cf.reserved_count;
    f.max_tfidf = max_tfidf(qtokens, idf_);
    f.ast_exact = cf.ast_exact;
    long overlap = 0;
    std::set<std::string> distinct(qtokens.begin(), qtokens.end());
    for (const std::string& w : distinct) {
        if (cf.word_set.count(w) > 0) ++overlap;
    }
    f.overlap = overlap;
    return pair_cache_.emplace(pair.pair_id, std::move(f)).first->second;
}

std::map<std::string, BiasFeatures> FeatureStore::split_features(Split split) {
    std::map<std::string, BiasFeatures> out;
    for (const QueryCodePair* pair : corpus_.split_pairs(split)) {
        out.emplace(pair->pair_id, pair_features(*pair));
    }
    return out;
}

double FeatureStore::candidate_bias_value(const QueryCodePair& pair, const std::string& code_id,
                                          int bias_id) {
    switch (bias_id) {
        case 1:
            return static_cast<double>(code_features(code_id).code_len);
        case 2:
        case 6:
            return bias_value(pair_features(pair), bias_id);
        case 3:
            return static_cast<double>(code_features(code_id).ast_node_count);
        case 4:
            return static_cast<double>(code_features(code_id).ast_depth);
        case 5:
            return static_cast<double>(code_features(code_id).reserved_count);
        case 7: {
            const CodeFeatures& cf = code_features(code_id);
            const std::vector<std::string>& qtokens = query_tokens(pair);
            std::set<std::string> distinct(qtokens.begin(), qtokens.end());
            long overlap = 0;
            for (const std::string& w : distinct) {
                if (cf.word_set.count(w) > 0) ++overlap;
            }
            return static_cast<double>(overlap);
        }
    }
    throw DataError("bias_id must be between 1 and 7, got " + std::to_string(bias_id));
}

bool FeatureStore::code_known(const std::string& code_id) const {
    return corpus_.code_text(code_id) != nullptr;
}

}  // namespace rankdebias
