#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rankdebias/corpus.hpp"
#include "rankdebias/pyast.hpp"

namespace rankdebias {

// Lowercased alphanumeric runs; everything else separates.
std::vector<std::string> tokenize_query(std::string_view query);

// Splits an identifier on underscores and camel-case boundaries:
// "readFile" -> read, file; "HTTPServer" -> http, server.
std::vector<std::string> split_identifier(std::string_view name);

// Distinct lowercased words from NAME and KEYWORD tokens of the code,
// identifiers split as above. Uses the tolerant lexer when strict
// tokenization fails, so it never throws on bad code.
std::set<std::string> code_word_set(std::string_view code_text);

// Words whose presence in code usually marks control flow.
const std::set<std::string>& reserved_words();

// Number of reserved-word keyword tokens in the code.
long count_reserved(std::string_view code_text);

// Count of NAME/KEYWORD/NUMBER/STRING/OP tokens in the code.
long count_code_tokens(std::string_view code_text);

class IdfTable {
public:
    IdfTable() = default;

    // idf(w) = ln(doc_count / df(w)) over the given token lists, one list
    // per document. Empty input is an error.
    static IdfTable fit(const std::vector<std::vector<std::string>>& documents);

    double idf(const std::string& word) const;  // 0 when out of vocabulary
    std::size_t doc_count() const { return doc_count_; }
    const std::map<std::string, double>& values() const { return idf_; }

private:
    std::map<std::string, double> idf_;
    std::size_t doc_count_ = 0;
};

// max over distinct query words of raw term frequency times idf.
double max_tfidf(const std::vector<std::string>& query_tokens, const IdfTable& idf);

inline constexpr int kNumBiases = 7;

// Everything the bias audits look at, for one query/code pair.
struct BiasFeatures {
    long code_len = 0;
    long query_len = 0;
    long ast_node_count = 1;
    long ast_depth = 1;
    long reserved_count = 0;
    double max_tfidf = 0.0;
    long overlap = 0;
    bool ast_exact = true;
};

// Interval width used when bucketing each bias dimension.
double default_interval_width(int bias_id);

// The scalar a given bias measures, out of a feature record.
double bias_value(const BiasFeatures& f, int bias_id);

// Caches per-code and per-pair feature extraction over one corpus.
// The idf table is fitted once on the train split's queries.
class FeatureStore {
public:
    FeatureStore(const Corpus& corpus, IdfTable idf);
    static FeatureStore build(const Corpus& corpus);

    const Corpus& corpus() const { return corpus_; }
    const IdfTable& idf() const { return idf_; }

    const BiasFeatures& pair_features(const QueryCodePair& pair);

    // Feature map for every pair of a split, keyed by pair_id.
    std::map<std::string, BiasFeatures> split_features(Split split);

    // Bias value of a candidate code against a query pair. Biases 1/3/4/5
    // come from the candidate, 2/6 from the query, 7 from both.
    double candidate_bias_value(const QueryCodePair& pair, const std::string& code_id,
                                int bias_id);

    bool code_known(const std::string& code_id) const;

private:
    struct CodeFeatures {
        long code_len = 0;
        long ast_node_count = 1;
        long ast_depth = 1;
        long reserved_count = 0;
        bool ast_exact = true;
        std::set<std::string> word_set;
    };

    const CodeFeatures& code_features(const std::string& code_id);
    const std::vector<std::string>& query_tokens(const QueryCodePair& pair);

    const Corpus& corpus_;
    IdfTable idf_;
    std::map<std::string, CodeFeatures> code_cache_;
    std::map<std::string, BiasFeatures> pair_cache_;
    std::map<std::string, std::vector<std::string>> query_cache_;
};

}  // namespace rankdebias
