#pragma once

#include <cstddef>
#include <vector>

namespace rankdebias {

struct KmeansParams {
    std::size_t k = 1;
    std::size_t max_iter = 100;
    double tol = 1e-9;  // stop when total center movement falls to this
};

struct KmeansResult {
    std::vector<std::vector<double>> centers;
    std::vector<std::size_t> assignment;  // point index -> cluster index
    std::vector<double> sse_trace;        // within-cluster SSE after each assignment
    std::size_t iterations = 0;
};

// Lloyd's algorithm made fully deterministic: seeds are quantiles of the
// lexicographically sorted points, distance ties assign to the lower
// cluster index, and an emptied cluster is re-seeded with the point
// farthest from its current center.
KmeansResult kmeans(const std::vector<std::vector<double>>& points, const KmeansParams& params);

}  // namespace rankdebias
