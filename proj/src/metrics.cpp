#include "rankdebias/metrics.hpp"

namespace rankdebias {

std::size_t rank_of_truth(const RankingRun::CandidateList& candidates,
                          const std::string& truth_code_id) {
    const ScoredCode* truth = nullptr;
    for (const ScoredCode& c : candidates) {
        if (c.code_id == truth_code_id) {
            truth = &c;
            break;
        }
    }
    if (truth == nullptr) {
        throw MissingTruth("ground-truth code '" + truth_code_id + "' not among candidates");
    }
    std::size_t rank = 1;
    for (const ScoredCode& c : candidates) {
        if (&c == truth) continue;
        if (c.score > truth->score ||
            (c.score == truth->score && c.code_id < truth->code_id)) {
            ++rank;
        }
    }
    return rank;
}

double mean_reciprocal_rank(const std::vector<std::size_t>& ranks) {
    if (ranks.empty()) throw DataError("cannot average reciprocal rank of zero queries");
    double sum = 0.0;
    for (std::size_t r : ranks) {
        if (r == 0) throw DataError("ranks are 1-based; got 0");
        sum += 1.0 / static_cast<double>(r);
    }
    return sum / static_cast<double>(ranks.size());
}

double hit_rate_at(const std::vector<std::size_t>& ranks, std::size_t k) {
    if (ranks.empty()) throw DataError("cannot compute hit rate of zero queries");
    if (k == 0) throw DataError("hit rate cutoff must be at least 1");
    std::size_t hits = 0;
    for (std::size_t r : ranks) {
        if (r <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

PerCaseResult per_case_mrr(const RankingRun& run, const Corpus& corpus, Split split) {
    PerCaseResult result;
    for (const QueryCodePair* pair : corpus.split_pairs(split)) {
        const RankingRun::CandidateList* candidates = run.find(pair->pair_id);
        if (candidates == nullptr) {
            throw DataError("run has no entry for " + std::string(to_string(split)) + " pair '" +
                            pair->pair_id + "'");
        }
        try {
            std::size_t rank = rank_of_truth(*candidates, pair->code_id);
            result.outcomes.emplace(pair->pair_id,
                                    RankOutcome{rank, 1.0 / static_cast<double>(rank)});
        } catch (const MissingTruth&) {
            result.excluded.push_back(pair->pair_id);
        }
    }
    return result;
}

EvalSummary evaluate(const RankingRun& run, const Corpus& corpus, Split split,
                     const std::vector<long>& ks) {
    PerCaseResult per_case = per_case_mrr(run, corpus, split);
    if (per_case.outcomes.empty()) {
        throw DataError("no evaluable queries: every ground truth is missing from the run");
    }
    EvalSummary summary;
    summary.n_queries = per_case.outcomes.size();
    summary.excluded = std::move(per_case.excluded);
    double sum = 0.0;
    for (const auto& [pair_id, outcome] : per_case.outcomes) sum += outcome.reciprocal;
    summary.mrr = sum / static_cast<double>(summary.n_queries);
    for (long k : ks) {
        if (k < 1) throw DataError("hit rate cutoff must be at least 1");
        std::size_t hits = 0;
        for (const auto& [pair_id, outcome] : per_case.outcomes) {
            if (outcome.rank <= static_cast<std::size_t>(k)) ++hits;
        }
        summary.hit_rate[k] = static_cast<double>(hits) / static_cast<double>(summary.n_queries);
    }
    return summary;
}

}  // namespace rankdebias
