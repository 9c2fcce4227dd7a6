#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "rankdebias/features.hpp"
#include "rankdebias/metrics.hpp"

namespace rankdebias {

// Bucket index of a value under a fixed interval width: floor(value/width).
long interval_index(double value, double width);

// Spearman rank correlation with average ranks for ties. Either input
// being constant makes the correlation undefined; this returns 0 there.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct IntervalRow {
    long index = 0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_mrr = 0.0;
    bool has_mean = false;
};

struct BiasReport {
    int bias_id = 0;
    double width = 0.0;
    // contiguous from the lowest to the highest populated interval;
    // gaps appear with count 0 and no mean
    std::vector<IntervalRow> rows;
    double severity = 0.0;  // rank correlation of bias value vs reciprocal rank
    std::size_t included = 0;
    std::size_t excluded = 0;
};

// Joins per-pair features with per-pair outcomes and buckets the bias
// value. Pairs lacking an outcome are excluded; for the syntax biases
// (3 and 4) pairs whose metrics came from the fallback estimator are
// excluded as well.
BiasReport build_report(int bias_id, double width,
                        const std::map<std::string, BiasFeatures>& features,
                        const std::map<std::string, RankOutcome>& outcomes);

// CSV with header interval_lo,interval_hi,count,mean_mrr; numbers use six
// decimals and a missing mean is an empty cell.
void write_report_csv(const BiasReport& report, const std::filesystem::path& path);

}  // namespace rankdebias
