#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trackmine/embedding.hpp"
#include "trackmine/types.hpp"

namespace trackmine {

/// Dense n x dim point set, row-major doubles.
struct Points {
    std::size_t count = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    static Points zeros(std::size_t n, std::size_t d) { return {n, d, std::vector<double>(n * d, 0.0)}; }

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
    std::span<double> row(std::size_t i) { return {values.data() + i * dim, dim}; }
};

inline constexpr std::int64_t kNoise = -1;

/// track_id -> cluster id (kNoise = -1 for outliers) plus outlier scores.
struct ClusterAssignment {
    std::vector<std::int64_t> track_ids;
    std::vector<std::int64_t> cluster_ids;   // contiguous from 0, or kNoise
    std::vector<double> outlier_scores;
    std::string method;
    std::string params;
};

/// The single crop embedding chosen to stand for a whole track.
struct TrackEmbedding {
    std::int64_t track_id = 0;
    std::vector<float> vector;
    int frame = 0;             // source element
    std::size_t element_index = 0;
};

struct HdbscanParams {
    int min_cluster_size = 10;
    int min_samples = 0;  // 0 = follow min_cluster_size
    Metric metric = Metric::Euclidean;

    int effective_min_samples() const { return min_samples > 0 ? min_samples : min_cluster_size; }
};

/// Condensed hierarchy row: `child` departs `parent` at lambda = 1/distance.
/// Children < n are points; children >= n are sub-clusters of size child_size.
struct CondensedNode {
    std::int64_t parent = 0;
    std::int64_t child = 0;
    double lambda_val = 0.0;
    std::int64_t child_size = 1;
};

struct CondensedTree {
    std::size_t num_points = 0;
    std::vector<CondensedNode> nodes;
    std::vector<std::int64_t> cluster_labels;    // internal labels, root first
    std::vector<double> cluster_stability;       // parallel to cluster_labels
    std::vector<std::int64_t> selected_clusters; // internal labels of chosen flat clusters
};

struct MstEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double weight = 0.0;
};

struct HdbscanResult {
    std::vector<std::int64_t> labels;  // cluster id or kNoise, per point
    CondensedTree tree;
    std::vector<MstEdge> mst;          // mutual-reachability MST, sorted ascending
    std::size_t num_clusters = 0;
};

struct KMeansResult {
    std::vector<std::int64_t> labels;
    Points centroids;
    double wcss = 0.0;
    int iterations = 0;
    std::vector<double> wcss_history;  // per-iteration WCSS, monotone non-increasing
};

/// Picks the element whose crop embedding is closest (euclidean) to the
/// arithmetic mean of the track's crop embeddings; ties -> earliest frame.
TrackEmbedding representative_embedding(const Track& track, const EmbeddingMatrix& embeddings);

/// k-means++ seeding, Lloyd iterations until max centroid shift < 1e-6 or
/// 300 iterations. Empty clusters are re-seeded to the point farthest from
/// its current centroid. Deterministic given seed.
KMeansResult kmeans(const Points& points, std::size_t k, std::uint64_t seed);

/// Distance to the k-th nearest neighbor, self excluded. Throws for k >= n.
std::vector<double> core_distances(const Points& points, int k, Metric metric = Metric::Euclidean,
                                   int num_threads = 1);

inline double mutual_reachability(std::size_t i, std::size_t j, std::span<const double> core,
                                  double dist) {
    if (i == j) return core[i];
    return std::max({core[i], core[j], dist});
}

/// Minimum spanning tree of the complete mutual-reachability graph,
/// Prim's algorithm with O(n^2) distance evaluations. Edge-weight ties are
/// broken by the lower index pair. Result sorted by (weight, a, b).
std::vector<MstEdge> mutual_reachability_mst(const Points& points, std::span<const double> core,
                                             Metric metric = Metric::Euclidean, int num_threads = 1);

/// Full HDBSCAN: mutual-reachability MST, single-linkage hierarchy,
/// condensed tree at min_cluster_size, excess-of-mass cluster extraction.
/// n < min_cluster_size yields all-noise. Deterministic.
HdbscanResult hdbscan(const Points& points, const HdbscanParams& params, int num_threads = 1);

/// Euclidean distance to the centroid of the point's assigned cluster;
/// noise points get +infinity (always ranked most outlying).
std::vector<double> distance_to_center_outlier_scores(const Points& points,
                                                      std::span<const std::int64_t> labels);

}  // namespace trackmine
