#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rankdebias/corpus.hpp"
#include "rankdebias/features.hpp"
#include "rankdebias/metrics.hpp"
#include "rankdebias/similarity.hpp"

namespace rankdebias {

enum class BoostScope { similar, all };
enum class ClusterSpace { mrr, feature_mrr };

const char* to_string(BoostScope scope);
const char* to_string(ClusterSpace space);
BoostScope boost_scope_from_string(const std::string& s);
ClusterSpace cluster_space_from_string(const std::string& s);

struct RerankerParams {
    std::size_t top_m = 1;        // similar train queries consulted per test query
    double top_n_percent = 10.0;  // share of best train cases that define trust bands
    std::size_t n_clusters = 1;   // bands are clusters of those cases
    double width = 0.0;           // bias bucket width; 0 picks the bias default
    std::size_t min_support = 5;  // buckets below this merge into a neighbour
    BoostScope scope = BoostScope::similar;
    ClusterSpace space = ClusterSpace::feature_mrr;
};

struct MrrBand {
    double lo = 0.0;
    double hi = 0.0;
};

struct RerankerModel {
    int format_version = 1;
    int bias_id = 0;
    double t_m = 0.0;    // mean reciprocal rank over the training cases
    double boost = 0.0;  // additive score boost: share of cases below t_m
    std::vector<MrrBand> bands;
    std::set<long> disadvantaged;  // bucket indices whose group mean sits below t_m
    RerankerParams params;         // width holds the resolved value
    std::map<std::string, double> train_mrr;      // pair_id -> reciprocal rank
    std::map<std::string, std::string> train_gt;  // pair_id -> ground-truth code_id
};

RerankerModel fit_reranker(const Corpus& corpus, const RankingRun& train_run,
                           FeatureStore& features, int bias_id, RerankerParams params);

void save_model(const RerankerModel& model, const std::filesystem::path& path);
RerankerModel load_model(const std::filesystem::path& path);

// True when the average train MRR of the query's neighbours falls inside
// any trusted band, meaning the query looks well served and is left alone.
bool gate_skips(const RerankerModel& model, double avg_similar_mrr);

// The additive intervention one model proposes for one run: a constant
// amount and the candidate set it applies to, per query.
struct BoostVector {
    int bias_id = 0;
    double amount = 0.0;
    std::map<std::string, std::set<std::string>> boosted;  // pair_id -> code ids
};

BoostVector compute_boosts(const RerankerModel& model, const Corpus& corpus,
                           const RankingRun& run, FeatureStore& features,
                           const QuerySimilarity& similarity);

// score + scale * sum of boost amounts hitting that candidate; candidates
// re-sorted canonically.
RankingRun apply_boosts(const RankingRun& run, const std::vector<BoostVector>& boosts,
                        double scale);

// Models applied one after another, each boost landing on the previous
// result. Final score: original plus the sum of the boosts.
RankingRun rerank_sequential(const std::vector<RerankerModel>& models, const Corpus& corpus,
                             const RankingRun& run, FeatureStore& features,
                             const QuerySimilarity& similarity,
                             std::vector<BoostVector>* boosts_out = nullptr);

// Every model judges the original run; final score: original plus the mean
// of the boosts.
RankingRun rerank_parallel(const std::vector<RerankerModel>& models, const Corpus& corpus,
                           const RankingRun& run, FeatureStore& features,
                           const QuerySimilarity& similarity,
                           std::vector<BoostVector>* boosts_out = nullptr);

}  // namespace rankdebias
