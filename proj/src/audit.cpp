#include "rankdebias/audit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace rankdebias {

long interval_index(double value, double width) {
    if (!(width > 0.0)) throw DataError("interval width must be positive");
    if (!std::isfinite(value)) throw DataError("cannot bucket a non-finite value");
    return static_cast<long>(std::floor(value / width));
}

namespace {

// average ranks, 1-based, ties share the mean of their positions
std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b]) return values[a] < values[b];
        return a < b;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DataError("spearman inputs differ in length");
    if (x.empty()) throw DataError("spearman of empty input");
    std::vector<double> rx = average_ranks(x);
    std::vector<double> ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        double dx = rx[i] - mx;
        double dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / (std::sqrt(vx) * std::sqrt(vy));
}

BiasReport build_report(int bias_id, double width,
                        const std::map<std::string, BiasFeatures>& features,
                        const std::map<std::string, RankOutcome>& outcomes) {
    if (bias_id < 1 || bias_id > kNumBiases) {
        throw DataError("bias_id must be between 1 and 7, got " + std::to_string(bias_id));
    }
    if (features.empty()) throw DataError("cannot audit an empty feature set");
    if (!(width > 0.0)) throw DataError("interval width must be positive");

    BiasReport report;
    report.bias_id = bias_id;
    report.width = width;

    struct Bucket {
        std::size_t count = 0;
        double sum = 0.0;
    };
    std::map<long, Bucket> buckets;
    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& [pair_id, f] : features) {
        auto it = outcomes.find(pair_id);
        if (it == outcomes.end()) continue;
        if ((bias_id == 3 || bias_id == 4) && !f.ast_exact) continue;
        double value = bias_value(f, bias_id);
        Bucket& b = buckets[interval_index(value, width)];
        ++b.count;
        b.sum += it->second.reciprocal;
        xs.push_back(value);
        ys.push_back(it->second.reciprocal);
    }
    report.included = xs.size();
    report.excluded = features.size() - report.included;
    if (report.included == 0) {
        throw DataError("no evaluable pairs for bias " + std::to_string(bias_id));
    }

    long lo_idx = buckets.begin()->first;
    long hi_idx = buckets.rbegin()->first;
    for (long idx = lo_idx; idx <= hi_idx; ++idx) {
        IntervalRow row;
        row.index = idx;
        row.lo = static_cast<double>(idx) * width;
        row.hi = static_cast<double>(idx + 1) * width;
        auto it = buckets.find(idx);
        if (it != buckets.end()) {
            row.count = it->second.count;
            row.mean_mrr = it->second.sum / static_cast<double>(it->second.count);
            row.has_mean = true;
        }
        report.rows.push_back(row);
    }
    report.severity = spearman(xs, ys);
    return report;
}

void write_report_csv(const BiasReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "interval_lo,interval_hi,count,mean_mrr\n";
    char buf[128];
    for (const IntervalRow& row : report.rows) {
        if (row.has_mean) {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%zu,%.6f\n", row.lo, row.hi, row.count,
                          row.mean_mrr);
        } else {
            std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%zu,\n", row.lo, row.hi, row.count);
        }
        out << buf;
    }
    if (!out) throw DataError("failed while writing " + path.string());
}

}  // namespace rankdebias
