#include "rankdebias/clustering.hpp"

#include <random>
#include <vector>

#include "doctest.h"
#include "rankdebias/corpus.hpp"

using namespace rankdebias;

TEST_CASE("two well separated groups split cleanly") {
    std::vector<std::vector<double>> points = {{1.0}, {2.0}, {10.0}, {11.0}};
    KmeansParams params;
    params.k = 2;
    KmeansResult result = kmeans(points, params);

    CHECK(result.assignment[0] == result.assignment[1]);
    CHECK(result.assignment[2] == result.assignment[3]);
    CHECK(result.assignment[0] != result.assignment[2]);

    std::vector<double> centers = {result.centers[result.assignment[0]][0],
                                   result.centers[result.assignment[2]][0]};
    CHECK(centers[0] == doctest::Approx(1.5));
    CHECK(centers[1] == doctest::Approx(10.5));
    REQUIRE(!result.sse_trace.empty());
    CHECK(result.sse_trace.back() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < result.sse_trace.size(); ++i) {
        CHECK(result.sse_trace[i] <= result.sse_trace[i - 1] + 1e-12);
    }
}

TEST_CASE("single cluster lands on the mean") {
    std::vector<std::vector<double>> points = {{1.0, 0.0}, {3.0, 4.0}, {5.0, 2.0}};
    KmeansParams params;
    params.k = 1;
    KmeansResult result = kmeans(points, params);
    CHECK(result.centers[0][0] == doctest::Approx(3.0));
    CHECK(result.centers[0][1] == doctest::Approx(2.0));
    CHECK(result.assignment == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("as many clusters as points gives zero error") {
    std::vector<std::vector<double>> points = {{1.0}, {5.0}, {9.0}};
    KmeansParams params;
    params.k = 3;
    KmeansResult result = kmeans(points, params);
    CHECK(result.sse_trace.back() == 0.0);
    std::vector<bool> used(3, false);
    for (std::size_t a : result.assignment) used[a] = true;
    CHECK(used == std::vector<bool>{true, true, true});
}

TEST_CASE("argument validation") {
    KmeansParams params;
    params.k = 2;
    CHECK_THROWS_AS(kmeans({}, params), DataError);
    CHECK_THROWS_AS(kmeans({{1.0}}, params), DataError);  // k > n
    params.k = 0;
    CHECK_THROWS_AS(kmeans({{1.0}}, params), DataError);
    params.k = 1;
    CHECK_THROWS_AS(kmeans({{1.0}, {1.0, 2.0}}, params), DataError);
}

TEST_CASE("duplicate-heavy input stays stable") {
    std::vector<std::vector<double>> points = {{0.0}, {0.0}, {0.0}, {0.0}, {10.0}};
    KmeansParams params;
    params.k = 3;
    KmeansResult result = kmeans(points, params);
    CHECK(result.assignment.size() == 5);
    for (double sse : result.sse_trace) CHECK(sse >= 0.0);
}

TEST_CASE("sse never increases and runs are bitwise deterministic") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> coord(-5.0, 5.0);
    std::uniform_int_distribution<int> n_points(4, 40);
    std::uniform_int_distribution<int> n_clusters(1, 4);
    for (int round = 0; round < 100; ++round) {
        int n = n_points(rng);
        std::vector<std::vector<double>> points;
        for (int i = 0; i < n; ++i) points.push_back({coord(rng), coord(rng)});
        KmeansParams params;
        params.k = static_cast<std::size_t>(std::min(n_clusters(rng), n));

        KmeansResult a = kmeans(points, params);
        for (std::size_t i = 1; i < a.sse_trace.size(); ++i) {
            CHECK(a.sse_trace[i] <= a.sse_trace[i - 1] + 1e-9);
        }
        KmeansResult b = kmeans(points, params);
        CHECK(a.assignment == b.assignment);
        CHECK(a.centers == b.centers);  // exact double equality
        CHECK(a.sse_trace == b.sse_trace);
    }
}
