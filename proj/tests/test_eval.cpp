#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "trackmine/eval.hpp"
#include "trackmine/rng.hpp"

using namespace trackmine;

namespace {

std::vector<std::int64_t> random_labels(Rng& rng, std::size_t n, std::size_t classes) {
    std::vector<std::int64_t> out(n);
    for (auto& l : out) l = static_cast<std::int64_t>(rng.index(classes));
    return out;
}

// Monte-Carlo estimate of E[MI] under random permutations of v with fixed
// marginals; returns (mean, standard error).
std::pair<double, double> emi_monte_carlo(std::span<const std::int64_t> u,
                                          std::vector<std::int64_t> v, std::size_t reps,
                                          std::uint64_t seed) {
    Rng rng(seed);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
        double mi = mutual_information(ContingencyTable::from_labels(u, v));
        sum += mi;
        sum2 += mi * mi;
    }
    double mean = sum / static_cast<double>(reps);
    double var = std::max(0.0, sum2 / static_cast<double>(reps) - mean * mean);
    return {mean, std::sqrt(var / static_cast<double>(reps))};
}

}  // namespace

TEST_CASE("contingency table compacts labels and keeps marginals") {
    std::vector<std::int64_t> u{7, 7, -3, -3}, v{1, 2, 1, 2};
    auto t = ContingencyTable::from_labels(u, v);
    CHECK(t.rows == 2);
    CHECK(t.cols == 2);
    CHECK(t.total == 4);
    CHECK(t.at(0, 0) == 1);
    CHECK(t.at(0, 1) == 1);
    CHECK(t.row_marginals == std::vector<std::int64_t>{2, 2});
    CHECK(t.col_marginals == std::vector<std::int64_t>{2, 2});

    CHECK_THROWS_AS(ContingencyTable::from_labels(u, std::vector<std::int64_t>{1}), DataError);
    CHECK_THROWS_AS(ContingencyTable::from_labels(std::vector<std::int64_t>{},
                                                  std::vector<std::int64_t>{}),
                    DataError);
}

TEST_CASE("entropy and mutual information on a 2x2 example") {
    std::vector<std::int64_t> u{0, 0, 1, 1};
    auto t = ContingencyTable::from_labels(u, u);
    CHECK(entropy(t.row_marginals, t.total) == doctest::Approx(std::log(2.0)));
    CHECK(mutual_information(t) == doctest::Approx(std::log(2.0)));

    std::vector<std::int64_t> v{0, 1, 0, 1};  // independent of u
    CHECK(mutual_information(ContingencyTable::from_labels(u, v)) == doctest::Approx(0.0));
}

TEST_CASE("expected MI for n=2 with unit marginals is log 2") {
    // both labelings split {0,1}: every permutation gives MI = log 2, so the
    // expectation is exactly log 2
    std::vector<std::int64_t> u{0, 1};
    auto t = ContingencyTable::from_labels(u, u);
    CHECK(expected_mutual_information(t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("expected MI matches a permutation Monte-Carlo estimate") {
    Rng rng(404);
    for (int rep = 0; rep < 6; ++rep) {
        std::size_t n = 10 + rng.index(21);  // N <= 30
        auto u = random_labels(rng, n, 2 + rng.index(3));
        auto v = random_labels(rng, n, 2 + rng.index(3));
        auto t = ContingencyTable::from_labels(u, v);
        double emi = expected_mutual_information(t);
        auto [mc, se] = emi_monte_carlo(u, v, 100000, 1000 + static_cast<std::uint64_t>(rep));
        CHECK(std::abs(emi - mc) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("ami equals one for identical and relabeled clusterings") {
    std::vector<std::int64_t> u{0, 0, 1, 1, 2, 2, 2};
    CHECK(ami(u, u) == doctest::Approx(1.0).epsilon(1e-9));
    std::vector<std::int64_t> relabeled{5, 5, 0, 0, 9, 9, 9};
    CHECK(ami(u, relabeled) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ami degenerate cases") {
    std::vector<std::int64_t> ones{3, 3, 3, 3};
    CHECK(ami(ones, ones) == 1.0);  // both single-cluster

    std::vector<std::int64_t> split{0, 0, 1, 1};
    CHECK(ami(ones, split) == 0.0);  // one side uninformative
}

TEST_CASE("ami is negative for systematically opposed labelings") {
    std::vector<std::int64_t> u{0, 0, 1, 1}, v{0, 1, 0, 1};
    CHECK(ami(u, v) < 0.0);
}

TEST_CASE("ami is symmetric") {
    Rng rng(55);
    for (int rep = 0; rep < 10; ++rep) {
        auto u = random_labels(rng, 40, 4);
        auto v = random_labels(rng, 40, 3);
        CHECK(ami(u, v) == doctest::Approx(ami(v, u)).epsilon(1e-12));
    }
}

TEST_CASE("ami of independent labelings is near zero") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        auto u = random_labels(rng, 1000, 10);
        auto v = random_labels(rng, 1000, 10);
        CHECK(std::abs(ami(u, v)) < 0.05);
    }
}

TEST_CASE("max normalizer is no larger than mean on agreeing labelings") {
    std::vector<std::int64_t> u{0, 0, 0, 1, 1, 2}, v{0, 0, 1, 1, 1, 2};
    double mean = ami(u, v, AmiNormalizer::Mean);
    double mx = ami(u, v, AmiNormalizer::Max);
    CHECK(mean > 0.0);
    CHECK(mx <= mean + 1e-12);
}

TEST_CASE("outlier sweep on a hand-built assignment") {
    ClusterAssignment a;
    a.track_ids = {0, 1, 2, 3, 4, 5};
    a.cluster_ids = {0, 0, 1, 1, kNoise, kNoise};
    double inf = std::numeric_limits<double>::infinity();
    a.outlier_scores = {0.1, 0.2, 0.3, 0.4, inf, inf};
    std::vector<std::int64_t> gt{5, 5, 7, 7, 9, 9};

    std::vector<double> fractions{0.0, 0.34};
    auto curve = ami_outlier_sweep(a, gt, fractions);
    REQUIRE(curve.points.size() == 2);
    // at f=0 the two noise points form their own predicted cluster and the
    // partition matches the ground truth exactly
    CHECK(curve.points[0].fraction == 0.0);
    CHECK(curve.points[0].ami == doctest::Approx(1.0).epsilon(1e-9));
    // ceil(0.34*6) = 3 drops: both infinities plus the 0.4 score
    CHECK(curve.points[1].ami == doctest::Approx(1.0).epsilon(1e-9));

    REQUIRE(curve.automatic_point.has_value());
    CHECK(curve.automatic_point->fraction == doctest::Approx(2.0 / 6.0));
    CHECK(curve.automatic_point->ami == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(curve.automatic_point->is_automatic);
}

TEST_CASE("outlier sweep improves once contaminants are dropped") {
    ClusterAssignment a;
    double inf = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> gt;
    for (int i = 0; i < 10; ++i) {
        a.track_ids.push_back(i);
        a.cluster_ids.push_back(i < 5 ? 0 : 1);
        a.outlier_scores.push_back(0.5);
        gt.push_back(i < 5 ? 0 : 1);
    }
    // two contaminants assigned to noise but carrying mismatched labels
    for (int i = 10; i < 12; ++i) {
        a.track_ids.push_back(i);
        a.cluster_ids.push_back(kNoise);
        a.outlier_scores.push_back(inf);
        gt.push_back(i - 10);
    }
    std::vector<double> fractions{0.0, 0.2};
    auto curve = ami_outlier_sweep(a, gt, fractions);
    CHECK(curve.points[0].ami < 1.0);
    CHECK(curve.points[1].ami == doctest::Approx(1.0).epsilon(1e-9));  // ceil(0.2*12)=3 >= 2 contaminants
    CHECK(curve.points[1].ami > curve.points[0].ami);
    REQUIRE(curve.automatic_point.has_value());
    CHECK(curve.automatic_point->fraction == doctest::Approx(2.0 / 12.0));
    CHECK(curve.automatic_point->ami == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("outlier sweep score ties drop the lower track id first") {
    ClusterAssignment a;
    a.track_ids = {10, 20, 30, 40};
    a.cluster_ids = {0, 0, 1, 1};
    a.outlier_scores = {1.0, 1.0, 0.0, 0.0};
    std::vector<std::int64_t> gt{0, 1, 2, 2};
    std::vector<double> fractions{0.25};
    auto curve = ami_outlier_sweep(a, gt, fractions);
    // track 10 goes first; survivors are {20, 30, 40}
    std::vector<std::int64_t> su{0, 1, 1}, sv{1, 2, 2};
    CHECK(curve.points[0].ami == doctest::Approx(ami(su, sv)).epsilon(1e-12));
}

TEST_CASE("outlier sweep input validation") {
    ClusterAssignment a;
    a.track_ids = {0, 1};
    a.cluster_ids = {0, 0};
    a.outlier_scores = {0.0, 0.0};
    std::vector<std::int64_t> gt{0, 1};
    std::vector<double> bad{0.2, 0.2};
    CHECK_THROWS_AS(ami_outlier_sweep(a, gt, bad), UsageError);
    std::vector<double> all{1.0};
    CHECK_THROWS_AS(ami_outlier_sweep(a, gt, all), DataError);
    std::vector<std::int64_t> short_gt{0};
    std::vector<double> ok{0.0};
    CHECK_THROWS_AS(ami_outlier_sweep(a, short_gt, ok), DataError);
}

TEST_CASE("restrict_non_known keeps novel and unknown-valid tracks") {
    std::vector<std::string> gt{"car", "unknown_valid", "tracking_error", "moose", "person"};
    auto idx = restrict_non_known(gt, {"car", "person"});
    CHECK(idx == std::vector<std::size_t>{1, 3});
}

TEST_CASE("mining stats reproduce the published corpus summaries") {
    SUBCASE("dense-depth corpus") {
        MiningCounts c;
        c.frames = 42407;
        c.duration_hours = 2.5;
        c.proposals_total = 4240700;
        c.tracks_total = 8005;
        c.tracks_labeled = 8005;
        c.tracking_errors = 745;
        auto s = mining_stats(c);
        CHECK(s.proposals_per_frame == doctest::Approx(100.0));
        CHECK(percent_1dp(s.error_rate) == doctest::Approx(9.3));
        CHECK(s.compression_per_frame > 5.0);
    }
    SUBCASE("large depthless corpus") {
        MiningCounts c;
        c.frames = 521500;
        c.duration_hours = 14.5;
        c.proposals_total = 52150000;
        c.tracks_total = 12308;
        c.tracks_labeled = 12308;
        c.tracking_errors = 787;
        auto s = mining_stats(c);
        CHECK(s.proposals_per_frame == doctest::Approx(100.0));
        CHECK(percent_1dp(s.error_rate) == doctest::Approx(6.4));
    }
}

TEST_CASE("mining stats edge cases") {
    MiningCounts c;
    SUBCASE("all zeros: rates undefined but no throw") {
        auto s = mining_stats(c);
        CHECK(s.proposals_per_frame == 0.0);
        CHECK(!s.error_rate_defined);
    }
    SUBCASE("proposals without frames is inconsistent") {
        c.proposals_total = 10;
        CHECK_THROWS_AS(mining_stats(c), DataError);
    }
}

TEST_CASE("mining stats from tracks and annotations") {
    TrackCollection coll;
    for (int i = 0; i < 4; ++i) {
        Track t;
        t.track_id = i;
        t.sequence_id = "s";
        coll.tracks.push_back(t);
    }
    std::vector<AnnotationRecord> ann{{0, "car"}, {1, "tracking_error"}, {2, "unknown_valid"}};
    auto s = mining_stats(coll, ann, 100, 0.5, 400);
    CHECK(s.tracks_total == 4);
    CHECK(s.tracks_labeled == 3);
    CHECK(s.tracking_errors == 1);
    CHECK(s.tracks_unknown == 1);
    CHECK(s.proposals_per_frame == doctest::Approx(4.0));
    CHECK(s.error_rate == doctest::Approx(1.0 / 3.0));

    std::vector<AnnotationRecord> bad{{99, "car"}};
    CHECK_THROWS_AS(mining_stats(coll, bad, 100, 0.5, 400), DataError);
}

TEST_CASE("percent rounding to one decimal") {
    CHECK(percent_1dp(745.0 / 8005.0) == doctest::Approx(9.3));
    CHECK(percent_1dp(787.0 / 12308.0) == doctest::Approx(6.4));
    CHECK(percent_1dp(0.0) == 0.0);
    CHECK(percent_1dp(1.0) == 100.0);
    CHECK(percent_1dp(0.09349) == doctest::Approx(9.3));
    CHECK(percent_1dp(0.09351) == doctest::Approx(9.4));
}
