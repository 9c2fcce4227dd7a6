#pragma once

#include <map>
#include <string>
#include <vector>

#include "rankdebias/corpus.hpp"
#include "rankdebias/features.hpp"

namespace rankdebias {

using SparseVec = std::map<std::string, double>;

// Zero-norm input yields 0 rather than dividing by zero.
double cosine(const std::vector<double>& a, const std::vector<double>& b);
double cosine(const SparseVec& a, const SparseVec& b);

// word -> tf * idf, zero-weight words omitted.
SparseVec tfidf_embed(const std::vector<std::string>& tokens, const IdfTable& idf);

// Nearest-neighbour retrieval over query representations: dense vectors
// when an embedding table is supplied, tf-idf bags of the query text
// otherwise. Brute force; candidate universes here are small.
class QuerySimilarity {
public:
    QuerySimilarity(const Corpus& corpus, const EmbeddingTable& dense);
    QuerySimilarity(const Corpus& corpus, const IdfTable& idf);

    // Up to m pair ids from `universe`, ordered by cosine similarity to the
    // query of `pair` (descending, pair_id ascending among ties). Returns
    // fewer than m only when the universe is smaller.
    std::vector<std::string> top_m(const QueryCodePair& pair, std::size_t m,
                                   const std::vector<std::string>& universe) const;

    bool dense() const { return dense_ != nullptr; }

private:
    const std::vector<double>& dense_vector(const std::string& pair_id) const;
    const SparseVec& sparse_vector(const QueryCodePair& pair) const;

    const Corpus& corpus_;
    const EmbeddingTable* dense_ = nullptr;
    const IdfTable* idf_ = nullptr;
    mutable std::map<std::string, SparseVec> sparse_cache_;
};

}  // namespace rankdebias
