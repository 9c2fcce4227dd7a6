#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rankdebias {

// Raised for anything wrong with user-supplied data: malformed files,
// referential breakage between files, invalid field values.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Split { train, test };

const char* to_string(Split split);
Split split_from_string(const std::string& s);

struct QueryCodePair {
    std::string pair_id;
    std::string query_text;
    std::string code_text;
    std::string code_id;  // content digest unless the dataset pinned one
    Split split = Split::train;
    // Datasets may carry precomputed token counts; when present they win
    // over recomputation so published feature tables stay reproducible.
    std::optional<long> code_len_override;
    std::optional<long> query_len_override;
};

// Ordered collection of pairs with id lookup and per-split code pools.
// Construction validates: unique pair ids, non-empty queries, and a
// functional code_id -> content mapping across the whole corpus.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<QueryCodePair> pairs);

    const std::vector<QueryCodePair>& pairs() const { return pairs_; }
    bool empty() const { return pairs_.empty(); }
    std::size_t size() const { return pairs_.size(); }

    const QueryCodePair* find(const std::string& pair_id) const;
    std::vector<const QueryCodePair*> split_pairs(Split split) const;
    const std::set<std::string>& pool(Split split) const;

    // Corpus-wide content lookup, independent of split.
    const std::string* code_text(const std::string& code_id) const;

private:
    std::vector<QueryCodePair> pairs_;
    std::map<std::string, std::size_t> by_id_;
    std::set<std::string> pool_train_;
    std::set<std::string> pool_test_;
    std::map<std::string, std::size_t> code_by_id_;
};

struct ScoredCode {
    std::string code_id;
    double score = 0.0;
};

// A retrieval run: per query, candidates in canonical order
// (score descending, code_id ascending as the tie break).
class RankingRun {
public:
    using CandidateList = std::vector<ScoredCode>;

    RankingRun() = default;
    explicit RankingRun(std::map<std::string, CandidateList> entries);

    const std::map<std::string, CandidateList>& entries() const { return entries_; }
    const CandidateList* find(const std::string& pair_id) const;
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, CandidateList> entries_;
};

void sort_candidates(RankingRun::CandidateList& candidates);

struct EmbeddingTable {
    std::size_t dim = 0;
    std::map<std::string, std::vector<double>> vectors;
};

struct RunLoadSummary {
    std::size_t rows = 0;
    std::size_t queries = 0;
    std::size_t unknown_codes = 0;  // distinct candidate ids absent from the corpus
};

// Content digest of code text: line endings normalized to \n, horizontal
// trailing whitespace stripped per line, then SHA-256 in lowercase hex.
std::string canonical_code_id(std::string_view code_text);

Corpus load_dataset(const std::filesystem::path& path);
void save_dataset(const Corpus& corpus, const std::filesystem::path& path);

RankingRun load_run(const std::filesystem::path& path, const Corpus& corpus, Split split,
                    RunLoadSummary* summary = nullptr);
void save_run(const RankingRun& run, const std::filesystem::path& path);

EmbeddingTable load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);

}  // namespace rankdebias
