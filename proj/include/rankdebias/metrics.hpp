#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "rankdebias/corpus.hpp"

namespace rankdebias {

// The ground-truth code is not among a query's candidates.
class MissingTruth : public DataError {
public:
    using DataError::DataError;
};

// 1-based rank of the truth under the canonical order: higher score first,
// code_id ascending among equal scores. Does not require the candidate list
// to be pre-sorted.
std::size_t rank_of_truth(const RankingRun::CandidateList& candidates,
                          const std::string& truth_code_id);

double mean_reciprocal_rank(const std::vector<std::size_t>& ranks);
double hit_rate_at(const std::vector<std::size_t>& ranks, std::size_t k);

struct RankOutcome {
    std::size_t rank = 0;
    double reciprocal = 0.0;
};

struct PerCaseResult {
    std::map<std::string, RankOutcome> outcomes;  // pair_id -> outcome
    std::vector<std::string> excluded;            // pairs whose truth was absent
};

// Outcome for every pair of the split. Every split pair must have a run
// entry; pairs whose ground truth is missing from their candidate list are
// excluded, not errors.
PerCaseResult per_case_mrr(const RankingRun& run, const Corpus& corpus, Split split);

struct EvalSummary {
    double mrr = 0.0;
    std::map<long, double> hit_rate;  // k -> HR@k
    std::size_t n_queries = 0;
    std::vector<std::string> excluded;
};

EvalSummary evaluate(const RankingRun& run, const Corpus& corpus, Split split,
                     const std::vector<long>& ks);

}  // namespace rankdebias
