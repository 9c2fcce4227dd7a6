#include "rankdebias/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace rankdebias {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DataError("cosine of vectors with different dimensions (" +
                        std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

double cosine(const SparseVec& a, const SparseVec& b) {
    const SparseVec& small = a.size() <= b.size() ? a : b;
    const SparseVec& large = a.size() <= b.size() ? b : a;
    double dot = 0.0;
    for (const auto& [word, weight] : small) {
        auto it = large.find(word);
        if (it != large.end()) dot += weight * it->second;
    }
    double na = 0.0, nb = 0.0;
    for (const auto& [word, weight] : a) na += weight * weight;
    for (const auto& [word, weight] : b) nb += weight * weight;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

SparseVec tfidf_embed(const std::vector<std::string>& tokens, const IdfTable& idf) {
    std::map<std::string, std::size_t> tf;
    for (const std::string& w : tokens) ++tf[w];
    SparseVec vec;
    for (const auto& [word, count] : tf) {
        double weight = static_cast<double>(count) * idf.idf(word);
        if (weight != 0.0) vec[word] = weight;
    }
    return vec;
}

QuerySimilarity::QuerySimilarity(const Corpus& corpus, const EmbeddingTable& dense)
    : corpus_(corpus), dense_(&dense) {}

QuerySimilarity::QuerySimilarity(const Corpus& corpus, const IdfTable& idf)
    : corpus_(corpus), idf_(&idf) {}

const std::vector<double>& QuerySimilarity::dense_vector(const std::string& pair_id) const {
    auto it = dense_->vectors.find(pair_id);
    if (it == dense_->vectors.end()) {
        throw DataError("no embedding vector for pair '" + pair_id + "'");
    }
    return it->second;
}

const SparseVec& QuerySimilarity::sparse_vector(const QueryCodePair& pair) const {
    auto it = sparse_cache_.find(pair.pair_id);
    if (it != sparse_cache_.end()) return it->second;
    SparseVec vec = tfidf_embed(tokenize_query(pair.query_text), *idf_);
    return sparse_cache_.emplace(pair.pair_id, std::move(vec)).first->second;
}

std::vector<std::string> QuerySimilarity::top_m(const QueryCodePair& pair, std::size_t m,
                                                const std::vector<std::string>& universe) const {
    if (m == 0) throw DataError("similarity cutoff must be at least 1");
    std::vector<std::pair<double, std::string>> scored;
    scored.reserve(universe.size());
    if (dense_ != nullptr) {
        const std::vector<double>& q = dense_vector(pair.pair_id);
        for (const std::string& id : universe) {
            scored.emplace_back(cosine(q, dense_vector(id)), id);
        }
    } else {
        const SparseVec& q = sparse_vector(pair);
        for (const std::string& id : universe) {
            const QueryCodePair* other = corpus_.find(id);
            if (other == nullptr) throw DataError("pair '" + id + "' not in dataset");
            scored.emplace_back(cosine(q, sparse_vector(*other)), id);
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (scored.size() > m) scored.resize(m);
    std::vector<std::string> out;
    out.reserve(scored.size());
    for (auto& [score, id] : scored) out.push_back(std::move(id));
    return out;
}

}  // namespace rankdebias
