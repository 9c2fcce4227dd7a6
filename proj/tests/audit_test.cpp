#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "rankdebias/audit.hpp"
#include "test_util.hpp"

using namespace rankdebias;

TEST_CASE("interval_index buckets by floor of value over width") {
    CHECK(interval_index(0.0, 1.0) == 0);
    CHECK(interval_index(7.0, 4.0) == 1);
    CHECK(interval_index(8.0, 4.0) == 2);
    CHECK(interval_index(3.99, 4.0) == 0);
    CHECK(interval_index(-0.5, 1.0) == -1);
    CHECK(interval_index(-4.0, 4.0) == -1);
    CHECK(interval_index(0.3, 0.15) == 2);
}

TEST_CASE("interval_index rejects bad arguments") {
    CHECK_THROWS_AS(interval_index(1.0, 0.0), DataError);
    CHECK_THROWS_AS(interval_index(1.0, -2.0), DataError);
    CHECK_THROWS_AS(interval_index(std::nan(""), 1.0), DataError);
    CHECK_THROWS_AS(interval_index(std::numeric_limits<double>::infinity(), 1.0), DataError);
}

TEST_CASE("spearman on monotone inputs") {
    std::vector<double> up{1.0, 2.0, 3.0, 4.0};
    std::vector<double> down{9.0, 7.0, 3.0, -1.0};
    CHECK(spearman(up, up) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman(up, down) == doctest::Approx(-1.0).epsilon(1e-12));
    // monotone transforms of the values leave rank correlation alone
    std::vector<double> squashed{0.1, 0.2, 0.21, 5000.0};
    CHECK(spearman(up, squashed) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spearman hand value on a permuted triple") {
    // ranks of y are [3,1,2]; cov = -1, var_x = var_y = 2 -> -0.5
    std::vector<double> x{1.0, 2.0, 3.0};
    std::vector<double> y{3.0, 1.0, 2.0};
    CHECK(spearman(x, y) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("spearman averages ranks across ties") {
    // x ranks [1.5, 1.5, 3], y ranks [1, 2, 3]
    // cov = 1.5, var_x = 1.5, var_y = 2 -> 1.5/sqrt(3)
    std::vector<double> x{1.0, 1.0, 2.0};
    std::vector<double> y{1.0, 2.0, 3.0};
    CHECK(spearman(x, y) == doctest::Approx(1.5 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("spearman returns zero when one side is constant") {
    std::vector<double> flat{2.0, 2.0, 2.0};
    std::vector<double> vary{1.0, 5.0, 3.0};
    CHECK(spearman(flat, vary) == 0.0);
    CHECK(spearman(vary, flat) == 0.0);
    CHECK(spearman(flat, flat) == 0.0);
}

TEST_CASE("spearman input validation") {
    std::vector<double> a{1.0, 2.0};
    std::vector<double> b{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(spearman(a, b), DataError);
    CHECK_THROWS_AS(spearman({}, {}), DataError);
}

namespace {

BiasFeatures with_code_len(long len) {
    BiasFeatures f;
    f.code_len = len;
    return f;
}

RankOutcome outcome(std::size_t rank) {
    RankOutcome o;
    o.rank = rank;
    o.reciprocal = 1.0 / static_cast<double>(rank);
    return o;
}

}  // namespace

TEST_CASE("build_report buckets pairs and fills interval gaps") {
    std::map<std::string, BiasFeatures> features{
        {"p1", with_code_len(2)},
        {"p2", with_code_len(3)},
        {"p3", with_code_len(9)},
    };
    std::map<std::string, RankOutcome> outcomes{
        {"p1", outcome(1)},
        {"p2", outcome(2)},
        {"p3", outcome(1)},
    };
    BiasReport report = build_report(1, 4.0, features, outcomes);
    CHECK(report.bias_id == 1);
    CHECK(report.width == 4.0);
    CHECK(report.included == 3);
    CHECK(report.excluded == 0);
    REQUIRE(report.rows.size() == 3);

    CHECK(report.rows[0].index == 0);
    CHECK(report.rows[0].lo == 0.0);
    CHECK(report.rows[0].hi == 4.0);
    CHECK(report.rows[0].count == 2);
    CHECK(report.rows[0].has_mean);
    CHECK(report.rows[0].mean_mrr == doctest::Approx(0.75).epsilon(1e-12));

    CHECK(report.rows[1].index == 1);
    CHECK(report.rows[1].count == 0);
    CHECK_FALSE(report.rows[1].has_mean);

    CHECK(report.rows[2].index == 2);
    CHECK(report.rows[2].lo == 8.0);
    CHECK(report.rows[2].hi == 12.0);
    CHECK(report.rows[2].count == 1);
    CHECK(report.rows[2].mean_mrr == doctest::Approx(1.0).epsilon(1e-12));

    // value order 2,3,9 against reciprocal 1.0,0.5,1.0 has zero rank correlation
    CHECK(report.severity == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("build_report count-weighted row means reproduce the included MRR") {
    std::map<std::string, BiasFeatures> features{
        {"p1", with_code_len(2)},  {"p2", with_code_len(3)}, {"p3", with_code_len(9)},
        {"p4", with_code_len(17)}, {"p5", with_code_len(0)},
    };
    std::map<std::string, RankOutcome> outcomes{
        {"p1", outcome(1)}, {"p2", outcome(2)}, {"p3", outcome(1)},
        {"p4", outcome(4)}, {"p5", outcome(3)},
    };
    BiasReport report = build_report(1, 4.0, features, outcomes);
    double weighted = 0.0;
    std::size_t total = 0;
    for (const IntervalRow& row : report.rows) {
        if (row.has_mean) weighted += static_cast<double>(row.count) * row.mean_mrr;
        total += row.count;
    }
    double direct = (1.0 + 0.5 + 1.0 + 0.25 + 1.0 / 3.0) / 5.0;
    CHECK(total == 5);
    CHECK(weighted / static_cast<double>(total) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("build_report drops pairs without an outcome") {
    std::map<std::string, BiasFeatures> features{
        {"p1", with_code_len(2)},
        {"p2", with_code_len(3)},
        {"p3", with_code_len(9)},
        {"p4", with_code_len(1)},
    };
    std::map<std::string, RankOutcome> outcomes{
        {"p1", outcome(1)},
        {"p2", outcome(2)},
        {"p3", outcome(1)},
    };
    BiasReport report = build_report(1, 4.0, features, outcomes);
    CHECK(report.included == 3);
    CHECK(report.excluded == 1);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.rows[0].count == 2);
}

TEST_CASE("syntax biases exclude pairs whose metrics came from the fallback") {
    BiasFeatures ok1;
    ok1.ast_node_count = 5;
    BiasFeatures ok2;
    ok2.ast_node_count = 6;
    BiasFeatures bad;
    bad.ast_node_count = 20;
    bad.ast_exact = false;
    std::map<std::string, BiasFeatures> features{{"p1", ok1}, {"p2", ok2}, {"p3", bad}};
    std::map<std::string, RankOutcome> outcomes{
        {"p1", outcome(1)},
        {"p2", outcome(2)},
        {"p3", outcome(1)},
    };

    SUBCASE("node count bias") {
        BiasReport report = build_report(3, 4.0, features, outcomes);
        CHECK(report.included == 2);
        CHECK(report.excluded == 1);
        REQUIRE(report.rows.size() == 1);
        CHECK(report.rows[0].index == 1);
        CHECK(report.rows[0].count == 2);
        CHECK(report.rows[0].mean_mrr == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(report.severity == doctest::Approx(-1.0).epsilon(1e-12));
    }

    SUBCASE("token length bias keeps the same pair") {
        BiasReport report = build_report(1, 4.0, features, outcomes);
        CHECK(report.included == 3);
        CHECK(report.excluded == 0);
    }

    SUBCASE("all pairs excluded is an error") {
        for (auto& [id, f] : features) f.ast_exact = false;
        CHECK_THROWS_AS(build_report(3, 4.0, features, outcomes), DataError);
        CHECK_THROWS_AS(build_report(4, 4.0, features, outcomes), DataError);
    }
}

TEST_CASE("build_report handles negative bias values") {
    BiasFeatures low;
    low.max_tfidf = -0.3;
    BiasFeatures high;
    high.max_tfidf = 0.2;
    std::map<std::string, BiasFeatures> features{{"p1", low}, {"p2", high}};
    std::map<std::string, RankOutcome> outcomes{{"p1", outcome(1)}, {"p2", outcome(2)}};
    BiasReport report = build_report(6, 0.15, features, outcomes);
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows.front().index == -2);
    CHECK(report.rows.back().index == 1);
    CHECK(report.rows[0].count == 1);
    CHECK(report.rows[1].count == 0);
    CHECK(report.rows[2].count == 0);
    CHECK(report.rows[3].count == 1);
}

TEST_CASE("build_report argument validation") {
    std::map<std::string, BiasFeatures> features{{"p1", with_code_len(2)}};
    std::map<std::string, RankOutcome> outcomes{{"p1", outcome(1)}};
    CHECK_THROWS_AS(build_report(0, 4.0, features, outcomes), DataError);
    CHECK_THROWS_AS(build_report(8, 4.0, features, outcomes), DataError);
    CHECK_THROWS_AS(build_report(1, 0.0, features, outcomes), DataError);
    CHECK_THROWS_AS(build_report(1, 4.0, {}, outcomes), DataError);
    CHECK_THROWS_AS(build_report(1, 4.0, features, {}), DataError);
}

TEST_CASE("write_report_csv emits six-decimal rows with empty missing means") {
    std::map<std::string, BiasFeatures> features{
        {"p1", with_code_len(2)},
        {"p2", with_code_len(3)},
        {"p3", with_code_len(9)},
    };
    std::map<std::string, RankOutcome> outcomes{
        {"p1", outcome(1)},
        {"p2", outcome(2)},
        {"p3", outcome(1)},
    };
    BiasReport report = build_report(1, 4.0, features, outcomes);
    TempDir dir;
    auto path = dir.file("bias1.csv");
    write_report_csv(report, path);
    std::string expected =
        "interval_lo,interval_hi,count,mean_mrr\n"
        "0.000000,4.000000,2,0.750000\n"
        "4.000000,8.000000,0,\n"
        "8.000000,12.000000,1,1.000000\n";
    CHECK(read_file(path) == expected);
}
