#include "rankdebias/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rankdebias/corpus.hpp"

namespace rankdebias {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, const KmeansParams& params) {
    const std::size_t n = points.size();
    const std::size_t k = params.k;
    if (n == 0) throw DataError("kmeans needs at least one point");
    if (k == 0) throw DataError("kmeans needs at least one cluster");
    if (k > n) {
        throw DataError("kmeans with k=" + std::to_string(k) + " but only " + std::to_string(n) +
                        " points");
    }
    const std::size_t dim = points[0].size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DataError("kmeans points have inconsistent dimensions");
        for (double v : p) {
            if (!std::isfinite(v)) throw DataError("kmeans points must be finite");
        }
    }

    // quantile seeding over the sorted point order
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (points[a] != points[b]) return points[a] < points[b];
        return a < b;
    });
    KmeansResult result;
    result.centers.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t pick = order[(2 * j + 1) * n / (2 * k)];
        result.centers.push_back(points[pick]);
    }

    result.assignment.assign(n, 0);
    for (std::size_t iter = 0; iter < params.max_iter; ++iter) {
        result.iterations = iter + 1;

        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = sq_dist(points[i], result.centers[0]);
            for (std::size_t j = 1; j < k; ++j) {
                double d = sq_dist(points[i], result.centers[j]);
                if (d < best_d) {
                    best_d = d;
                    best = j;
                }
            }
            result.assignment[i] = best;
        }

        // re-seed emptied clusters with the point farthest from its center
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t a : result.assignment) ++counts[a];
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[result.assignment[i]] <= 1) continue;  // don't empty another
                double d = sq_dist(points[i], result.centers[result.assignment[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far == n) throw DataError("kmeans could not repopulate an empty cluster");
            --counts[result.assignment[far]];
            result.assignment[far] = j;
            ++counts[j];
            result.centers[j] = points[far];
        }

        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sse += sq_dist(points[i], result.centers[result.assignment[i]]);
        }
        result.sse_trace.push_back(sse);

        // center update
        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) next[result.assignment[i]][d] += points[i][d];
        }
        double movement = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t d = 0; d < dim; ++d) {
                next[j][d] /= static_cast<double>(counts[j]);
            }
            movement += std::sqrt(sq_dist(next[j], result.centers[j]));
        }
        result.centers = std::move(next);
        if (movement <= params.tol) break;
    }
    return result;
}

}  // namespace rankdebias
