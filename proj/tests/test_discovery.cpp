#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hdbscan_reference.hpp"
#include "trackmine/discovery.hpp"
#include "trackmine/rng.hpp"

using namespace trackmine;
using trackmine::test::hdbscan_reference;
using trackmine::test::normalize_labels;

namespace {

Points from_rows(const std::vector<std::vector<double>>& rows) {
    Points p;
    p.count = rows.size();
    p.dim = rows.empty() ? 0 : rows[0].size();
    for (const auto& r : rows) p.values.insert(p.values.end(), r.begin(), r.end());
    return p;
}

Points gaussian_blobs(Rng& rng, const std::vector<std::vector<double>>& centers,
                      std::size_t per_blob, double sigma, std::vector<std::int64_t>* truth = nullptr) {
    Points p;
    p.dim = centers[0].size();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            for (std::size_t d = 0; d < p.dim; ++d)
                p.values.push_back(centers[c][d] + sigma * rng.normal());
            if (truth) truth->push_back(static_cast<std::int64_t>(c));
            ++p.count;
        }
    }
    return p;
}

// Exhaustive minimum-WCSS bipartition for tiny inputs.
double best_two_cluster_wcss(const Points& p) {
    const std::size_t n = p.count;
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
        double wcss = 0.0;
        for (int side = 0; side < 2; ++side) {
            std::vector<double> mean(p.dim, 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
                for (std::size_t d = 0; d < p.dim; ++d) mean[d] += p.row(i)[d];
                ++count;
            }
            for (double& m : mean) m /= static_cast<double>(count);
            for (std::size_t i = 0; i < n; ++i) {
                if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
                wcss += squared_euclidean(p.row(i), std::span<const double>(mean));
            }
        }
        best = std::min(best, wcss);
    }
    return best;
}

EmbeddingMatrix embeddings_2d(const std::vector<std::pair<float, float>>& rows) {
    EmbeddingMatrix m;
    m.count = static_cast<std::uint32_t>(rows.size());
    m.dim = 2;
    for (auto [a, b] : rows) {
        m.data.push_back(a);
        m.data.push_back(b);
    }
    return m;
}

Track track_over_embeddings(std::uint32_t first, std::uint32_t count) {
    Track t;
    t.track_id = 1;
    t.sequence_id = "s";
    for (std::uint32_t i = 0; i < count; ++i) {
        TrackElement el;
        el.frame = static_cast<int>(i);
        el.bbox = BBox{0, 0, 1, 1};
        el.embedding_index = first + i;
        t.elements.push_back(el);
    }
    return t;
}

}  // namespace

TEST_CASE("representative embedding picks the element nearest the mean") {
    auto emb = embeddings_2d({{0, 0}, {4, 0}, {1, 1}});
    auto rep = representative_embedding(track_over_embeddings(0, 3), emb);
    // mean is (5/3, 1/3); (1,1) is closest
    CHECK(rep.element_index == 2);
    CHECK(rep.frame == 2);
    CHECK(rep.vector == std::vector<float>{1.0f, 1.0f});
}

TEST_CASE("representative embedding ties resolve to the earliest frame") {
    auto emb = embeddings_2d({{1, 0}, {-1, 0}, {1, 0}, {-1, 0}});
    auto rep = representative_embedding(track_over_embeddings(0, 4), emb);
    CHECK(rep.element_index == 0);
    CHECK(rep.frame == 0);
}

TEST_CASE("representative embedding rejects empty tracks") {
    auto emb = embeddings_2d({{0, 0}});
    CHECK_THROWS_AS(representative_embedding(Track{}, emb), DataError);
}

TEST_CASE("kmeans recovers the optimal bipartition of two far pairs") {
    auto p = from_rows({{0.0}, {1.0}, {10.0}, {11.0}});
    double oracle = best_two_cluster_wcss(p);
    CHECK(oracle == doctest::Approx(1.0));
    auto r = kmeans(p, 2, 7);
    CHECK(r.wcss == doctest::Approx(oracle));
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[2] == r.labels[3]);
    CHECK(r.labels[0] != r.labels[2]);
}

TEST_CASE("kmeans matches the exhaustive bipartition oracle on random 4-point sets") {
    Rng rng(31);
    for (int rep = 0; rep < 25; ++rep) {
        std::vector<std::vector<double>> rows(4, std::vector<double>(2));
        for (auto& r : rows)
            for (auto& v : r) v = rng.uniform(-5, 5);
        auto p = from_rows(rows);
        double oracle = best_two_cluster_wcss(p);
        // best across a handful of seeds reaches the global optimum
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t seed = 0; seed < 8; ++seed) best = std::min(best, kmeans(p, 2, seed).wcss);
        CHECK(best >= oracle - 1e-9);
        CHECK(best == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("kmeans edge cases") {
    auto p = from_rows({{0.0, 0.0}, {2.0, 0.0}, {0.0, 2.0}});
    SUBCASE("k equals n") {
        auto r = kmeans(p, 3, 1);
        CHECK(r.wcss == doctest::Approx(0.0));
        std::set<std::int64_t> distinct(r.labels.begin(), r.labels.end());
        CHECK(distinct.size() == 3);
    }
    SUBCASE("k of one yields the mean and total scatter") {
        auto r = kmeans(p, 1, 1);
        CHECK(r.centroids.row(0)[0] == doctest::Approx(2.0 / 3.0));
        CHECK(r.centroids.row(0)[1] == doctest::Approx(2.0 / 3.0));
        double scatter = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            scatter += squared_euclidean(p.row(i), std::span<const double>(r.centroids.row(0)));
        CHECK(r.wcss == doctest::Approx(scatter));
    }
    SUBCASE("invalid k") {
        CHECK_THROWS_AS(kmeans(p, 0, 1), UsageError);
        CHECK_THROWS_AS(kmeans(p, 4, 1), UsageError);
    }
}

TEST_CASE("kmeans WCSS descends monotonically") {
    Rng rng(17);
    for (int rep = 0; rep < 5; ++rep) {
        auto p = gaussian_blobs(rng, {{0, 0}, {6, 0}, {0, 6}, {6, 6}}, 40, 1.0);
        auto r = kmeans(p, 4, 100 + static_cast<std::uint64_t>(rep));
        REQUIRE(!r.wcss_history.empty());
        for (std::size_t i = 1; i < r.wcss_history.size(); ++i)
            CHECK(r.wcss_history[i] <= r.wcss_history[i - 1] + 1e-9);
        CHECK(r.wcss <= r.wcss_history.back() + 1e-9);
    }
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
    Rng rng(5);
    auto p = gaussian_blobs(rng, {{0, 0}, {8, 8}}, 50, 1.0);
    auto a = kmeans(p, 2, 42);
    auto b = kmeans(p, 2, 42);
    CHECK(a.labels == b.labels);
    CHECK(a.wcss == b.wcss);
    CHECK(a.centroids.values == b.centroids.values);
}

TEST_CASE("core distances on a 1-D example") {
    auto p = from_rows({{0.0}, {1.0}, {3.0}, {7.0}});
    auto core = core_distances(p, 2);
    CHECK(core[0] == doctest::Approx(3.0));
    CHECK(core[1] == doctest::Approx(2.0));
    CHECK(core[2] == doctest::Approx(3.0));
    CHECK(core[3] == doctest::Approx(6.0));

    CHECK_THROWS_AS(core_distances(p, 4), UsageError);
    CHECK_THROWS_AS(core_distances(p, 0), UsageError);
}

TEST_CASE("mutual reachability dominates raw distance and core radii") {
    auto p = from_rows({{0.0}, {1.0}, {3.0}, {7.0}});
    auto core = core_distances(p, 2);
    CHECK(mutual_reachability(0, 1, core, 1.0) == doctest::Approx(3.0));
    CHECK(mutual_reachability(1, 3, core, 6.0) == doctest::Approx(6.0));
    CHECK(mutual_reachability(2, 2, core, 0.0) == doctest::Approx(3.0));
}

TEST_CASE("mst total weight matches brute-force Kruskal on random inputs") {
    Rng rng(23);
    for (int rep = 0; rep < 10; ++rep) {
        std::size_t n = 8 + rng.index(57);
        Points p;
        p.count = n;
        p.dim = 3;
        for (std::size_t i = 0; i < n * 3; ++i) p.values.push_back(rng.uniform(-10, 10));
        auto core = core_distances(p, 3);
        auto mst = mutual_reachability_mst(p, core);
        REQUIRE(mst.size() == n - 1);

        // independent Kruskal over all pairs
        struct E {
            double w;
            std::size_t a, b;
        };
        std::vector<E> all;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double d = std::sqrt(squared_euclidean(p.row(i), p.row(j)));
                all.push_back({std::max({core[i], core[j], d}), i, j});
            }
        std::sort(all.begin(), all.end(), [](const E& x, const E& y) { return x.w < y.w; });
        std::vector<std::size_t> uf(n);
        for (std::size_t i = 0; i < n; ++i) uf[i] = i;
        auto find = [&](std::size_t x) {
            while (uf[x] != x) x = uf[x] = uf[uf[x]];
            return x;
        };
        double kruskal_total = 0.0;
        std::size_t taken = 0;
        for (const auto& e : all) {
            auto ra = find(e.a), rb = find(e.b);
            if (ra == rb) continue;
            uf[ra] = rb;
            kruskal_total += e.w;
            ++taken;
        }
        REQUIRE(taken == n - 1);
        double prim_total = 0.0;
        for (const auto& e : mst) {
            prim_total += e.weight;
            CHECK(e.a < e.b);
        }
        CHECK(prim_total == doctest::Approx(kruskal_total).epsilon(1e-9));
        CHECK(std::is_sorted(mst.begin(), mst.end(),
                             [](const MstEdge& a, const MstEdge& b) { return a.weight < b.weight; }));
    }
}

TEST_CASE("hdbscan separates two 1-D groups with no noise") {
    auto p = from_rows({{0.0}, {1.0}, {2.0}, {100.0}, {101.0}, {102.0}});
    HdbscanParams params;
    params.min_cluster_size = 2;
    auto r = hdbscan(p, params);
    REQUIRE(r.num_clusters == 2);
    CHECK(r.labels[0] == r.labels[1]);
    CHECK(r.labels[1] == r.labels[2]);
    CHECK(r.labels[3] == r.labels[4]);
    CHECK(r.labels[4] == r.labels[5]);
    CHECK(r.labels[0] != r.labels[3]);
    for (auto l : r.labels) CHECK(l != kNoise);
    std::set<std::int64_t> ids(r.labels.begin(), r.labels.end());
    CHECK(ids == std::set<std::int64_t>{0, 1});
}

TEST_CASE("hdbscan marks scattered points as noise") {
    Rng rng(9);
    std::vector<std::int64_t> truth;
    auto p = gaussian_blobs(rng, {{0, 0}, {20, 0}}, 40, 0.5, &truth);
    std::size_t blob_points = p.count;
    // isolated stragglers at exponentially growing offsets, so they never
    // form a dense group of their own
    double offset = 1000.0;
    for (int i = 0; i < 8; ++i) {
        p.values.push_back(offset);
        p.values.push_back(offset);
        offset *= 3.0;
        ++p.count;
    }
    HdbscanParams params;
    params.min_cluster_size = 5;
    auto r = hdbscan(p, params);
    CHECK(r.num_clusters == 2);
    for (std::size_t i = 0; i < blob_points; ++i) CHECK(r.labels[i] != kNoise);
    std::size_t noisy = 0;
    for (std::size_t i = blob_points; i < p.count; ++i) noisy += r.labels[i] == kNoise;
    CHECK(noisy == 8);
    // both blobs pure
    CHECK(r.labels[0] == r.labels[39]);
    CHECK(r.labels[40] == r.labels[79]);
    CHECK(r.labels[0] != r.labels[40]);
}

TEST_CASE("hdbscan puts identical points in a single cluster") {
    Points p = Points::zeros(6, 2);
    HdbscanParams params;
    params.min_cluster_size = 3;
    auto r = hdbscan(p, params);
    CHECK(r.num_clusters == 1);
    for (auto l : r.labels) CHECK(l == 0);
}

TEST_CASE("hdbscan yields all noise below min_cluster_size") {
    auto p = from_rows({{0.0}, {1.0}});
    HdbscanParams params;
    params.min_cluster_size = 5;
    auto r = hdbscan(p, params);
    for (auto l : r.labels) CHECK(l == kNoise);
    CHECK(r.num_clusters == 0);
}

TEST_CASE("hdbscan rejects min_cluster_size below two") {
    HdbscanParams params;
    params.min_cluster_size = 1;
    CHECK_THROWS_AS(hdbscan(Points::zeros(10, 2), params), UsageError);
}

TEST_CASE("hdbscan matches the brute-force reference on random instances") {
    Rng rng(77);
    for (int rep = 0; rep < 20; ++rep) {
        std::size_t n = 10 + rng.index(41);
        Points p;
        p.count = n;
        p.dim = 2;
        // half clumped, half scattered, to exercise both cluster and noise paths
        for (std::size_t i = 0; i < n; ++i) {
            double cx = i % 2 == 0 ? 0.0 : 10.0;
            if (rng.uniform() < 0.3) {
                p.values.push_back(rng.uniform(-50, 50));
                p.values.push_back(rng.uniform(-50, 50));
            } else {
                p.values.push_back(cx + rng.normal());
                p.values.push_back(rng.normal());
            }
        }
        HdbscanParams params;
        params.min_cluster_size = 3 + static_cast<int>(rng.index(4));
        auto got = hdbscan(p, params);
        auto want = hdbscan_reference(p, params);
        CHECK(normalize_labels(got.labels) == normalize_labels(want));
    }
}

TEST_CASE("hdbscan labeling is invariant to point order") {
    Rng rng(13);
    std::vector<std::int64_t> truth;
    auto p = gaussian_blobs(rng, {{0, 0}, {15, 0}, {0, 15}}, 30, 0.8, &truth);
    HdbscanParams params;
    params.min_cluster_size = 8;
    auto base = hdbscan(p, params);

    std::vector<std::size_t> perm(p.count);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = p.count; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    Points shuffled;
    shuffled.count = p.count;
    shuffled.dim = p.dim;
    for (auto src : perm)
        shuffled.values.insert(shuffled.values.end(), p.row(src).begin(), p.row(src).end());
    auto moved = hdbscan(shuffled, params);

    std::vector<std::int64_t> unshuffled(p.count);
    for (std::size_t i = 0; i < p.count; ++i) unshuffled[perm[i]] = moved.labels[i];
    CHECK(normalize_labels(unshuffled) == normalize_labels(base.labels));
}

TEST_CASE("hdbscan multi-threaded run matches single-threaded") {
    Rng rng(19);
    auto p = gaussian_blobs(rng, {{0, 0}, {12, 12}}, 60, 1.0);
    HdbscanParams params;
    params.min_cluster_size = 10;
    auto one = hdbscan(p, params, 1);
    auto four = hdbscan(p, params, 4);
    CHECK(one.labels == four.labels);
    REQUIRE(one.mst.size() == four.mst.size());
    for (std::size_t i = 0; i < one.mst.size(); ++i) {
        CHECK(one.mst[i].a == four.mst[i].a);
        CHECK(one.mst[i].b == four.mst[i].b);
        CHECK(one.mst[i].weight == four.mst[i].weight);
    }
}

TEST_CASE("outlier scores are centroid distances, infinity for noise") {
    auto p = from_rows({{0.0, 0.0}, {2.0, 0.0}, {50.0, 50.0}});
    std::vector<std::int64_t> labels{0, 0, kNoise};
    auto scores = distance_to_center_outlier_scores(p, labels);
    CHECK(scores[0] == doctest::Approx(1.0));
    CHECK(scores[1] == doctest::Approx(1.0));
    CHECK(std::isinf(scores[2]));
}
