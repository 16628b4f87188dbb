#include "trackmine/discovery.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <thread>
#include <unordered_map>

#include "trackmine/rng.hpp"

namespace trackmine {

TrackEmbedding representative_embedding(const Track& track, const EmbeddingMatrix& embeddings) {
    if (track.elements.empty())
        throw DataError("representative_embedding: track " + std::to_string(track.track_id) +
                        " has no embedded elements");
    const std::size_t dim = embeddings.dim;
    std::vector<double> mean(dim, 0.0);
    for (const auto& el : track.elements) {
        auto row = embeddings.row(el.embedding_index);
        for (std::size_t d = 0; d < dim; ++d) mean[d] += row[d];
    }
    for (double& m : mean) m /= static_cast<double>(track.elements.size());

    std::size_t best_idx = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < track.elements.size(); ++i) {
        auto row = embeddings.row(track.elements[i].embedding_index);
        double d2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            double diff = row[d] - mean[d];
            d2 += diff * diff;
        }
        if (d2 < best) {  // strict: ties keep the earliest frame
            best = d2;
            best_idx = i;
        }
    }
    const auto& el = track.elements[best_idx];
    auto row = embeddings.row(el.embedding_index);
    return TrackEmbedding{track.track_id, {row.begin(), row.end()}, el.frame, best_idx};
}

namespace {

double point_dist2(const Points& pts, std::size_t i, std::size_t j) {
    return squared_euclidean(pts.row(i), pts.row(j));
}

double point_dist(const Points& pts, std::size_t i, std::size_t j, Metric metric) {
    if (metric == Metric::Euclidean) return std::sqrt(point_dist2(pts, i, j));
    return embedding_distance(pts.row(i), pts.row(j), Metric::Cosine);
}

void parallel_for(std::size_t n, int num_threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (num_threads <= 1 || n < 2048) {
        fn(0, n);
        return;
    }
    std::size_t workers = std::min<std::size_t>(num_threads, n);
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

KMeansResult kmeans(const Points& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.count, dim = points.dim;
    if (k < 1) throw UsageError("kmeans: k must be >= 1");
    if (k > n) throw UsageError("kmeans: k (" + std::to_string(k) + ") exceeds point count (" +
                                std::to_string(n) + ")");
    Rng rng(seed);

    // k-means++ seeding
    Points centroids = Points::zeros(k, dim);
    std::vector<std::size_t> chosen;
    chosen.push_back(rng.index(n));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < k; ++c) {
        auto src = points.row(chosen[c]);
        std::copy(src.begin(), src.end(), centroids.row(c).begin());
        if (c + 1 == k) break;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], point_dist2(points, i, chosen[c]));
            total += d2[i];
        }
        std::size_t next = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            next = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= r && d2[i] > 0.0) {
                    next = i;
                    break;
                }
            }
        } else {
            // all remaining mass zero (duplicate-heavy input): lowest unchosen index
            std::vector<bool> used(n, false);
            for (auto idx : chosen) used[idx] = true;
            while (next < n && used[next]) ++next;
            if (next == n) next = 0;
        }
        chosen.push_back(next);
    }

    KMeansResult result;
    result.labels.assign(n, 0);
    constexpr int kMaxIterations = 300;
    constexpr double kShiftTol = 1e-6;

    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // assignment (ties -> lower centroid index)
        double wcss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                double d = squared_euclidean(points.row(i), std::span<const double>(centroids.row(c)));
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            result.labels[i] = static_cast<std::int64_t>(best_c);
            wcss += best;
        }

        // empty clusters grab the point farthest from its centroid
        std::vector<std::int64_t> counts(k, 0);
        for (auto l : result.labels) ++counts[l];
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t farthest = 0;
            double best = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[result.labels[i]] <= 1) continue;  // keep donors non-empty
                double d = squared_euclidean(points.row(i),
                                             std::span<const double>(centroids.row(result.labels[i])));
                if (d > best) {
                    best = d;
                    farthest = i;
                }
            }
            --counts[result.labels[farthest]];
            result.labels[farthest] = static_cast<std::int64_t>(c);
            ++counts[c];
        }

        // means
        Points next = Points::zeros(k, dim);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto row = points.row(i);
            auto dst = next.row(result.labels[i]);
            for (std::size_t d = 0; d < dim; ++d) dst[d] += row[d];
            ++counts[result.labels[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            auto dst = next.row(c);
            for (std::size_t d = 0; d < dim; ++d) dst[d] /= static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(squared_euclidean(std::span<const double>(dst),
                                                                std::span<const double>(centroids.row(c)))));
        }
        centroids = std::move(next);
        result.iterations = iter + 1;
        result.wcss_history.push_back(wcss);
        if (shift < kShiftTol) break;
    }

    result.wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        result.wcss += squared_euclidean(points.row(i),
                                         std::span<const double>(centroids.row(result.labels[i])));
    result.centroids = std::move(centroids);
    return result;
}

std::vector<double> core_distances(const Points& points, int k, Metric metric, int num_threads) {
    const std::size_t n = points.count;
    if (k < 1) throw UsageError("core_distances: k must be >= 1");
    if (static_cast<std::size_t>(k) >= n)
        throw UsageError("core_distances: k (" + std::to_string(k) + ") must be < point count (" +
                         std::to_string(n) + ")");
    std::vector<double> core(n, 0.0);
    parallel_for(n, num_threads, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> dists(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            std::size_t m = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                dists[m++] = metric == Metric::Euclidean ? point_dist2(points, i, j)
                                                         : point_dist(points, i, j, metric);
            }
            std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
            double kth = dists[k - 1];
            core[i] = metric == Metric::Euclidean ? std::sqrt(kth) : kth;
        }
    });
    return core;
}

std::vector<MstEdge> mutual_reachability_mst(const Points& points, std::span<const double> core,
                                             Metric metric, int num_threads) {
    const std::size_t n = points.count;
    std::vector<MstEdge> edges;
    if (n < 2) return edges;

    // Euclidean runs in the squared domain (max() commutes with squaring);
    // edge weights are un-squared at the end.
    const bool squared = metric == Metric::Euclidean;
    std::vector<double> core_w(n);
    for (std::size_t i = 0; i < n; ++i) core_w[i] = squared ? core[i] * core[i] : core[i];

    std::vector<char> in_tree(n, 0);
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> best_from(n, 0);
    std::size_t last = 0;
    in_tree[0] = 1;
    edges.reserve(n - 1);

    for (std::size_t added = 1; added < n; ++added) {
        parallel_for(n, num_threads, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t j = lo; j < hi; ++j) {
                if (in_tree[j]) continue;
                double d = squared ? point_dist2(points, last, j) : point_dist(points, last, j, metric);
                double w = std::max({core_w[last], core_w[j], d});
                if (w < best[j] || (w == best[j] && last < best_from[j])) {
                    best[j] = w;
                    best_from[j] = last;
                }
            }
        });
        std::size_t pick = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (in_tree[j]) continue;
            if (pick == n || best[j] < best[pick]) pick = j;
        }
        double w = best[pick];
        edges.push_back({std::min(best_from[pick], pick), std::max(best_from[pick], pick),
                         squared ? std::sqrt(w) : w});
        in_tree[pick] = 1;
        last = pick;
    }

    std::sort(edges.begin(), edges.end(), [](const MstEdge& a, const MstEdge& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.a != b.a) return a.a < b.a;
        return a.b < b.b;
    });
    return edges;
}

namespace {

struct LinkageNode {
    std::int64_t left = 0;
    std::int64_t right = 0;
    double distance = 0.0;
    std::int64_t size = 0;
};

// Union-find tracking the current dendrogram label of each component.
class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), label_(n), size_(n, 1) {
        for (std::size_t i = 0; i < n; ++i) {
            parent_[i] = i;
            label_[i] = static_cast<std::int64_t>(i);
        }
    }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    std::int64_t label(std::size_t root) const { return label_[root]; }
    std::int64_t size(std::size_t root) const { return size_[root]; }

    std::size_t merge(std::size_t ra, std::size_t rb, std::int64_t new_label) {
        if (size_[ra] < size_[rb]) std::swap(ra, rb);
        parent_[rb] = ra;
        size_[ra] += size_[rb];
        label_[ra] = new_label;
        return ra;
    }

private:
    std::vector<std::size_t> parent_;
    std::vector<std::int64_t> label_;
    std::vector<std::int64_t> size_;
};

std::vector<LinkageNode> single_linkage(std::span<const MstEdge> edges, std::size_t n) {
    std::vector<LinkageNode> linkage;
    linkage.reserve(n - 1);
    UnionFind uf(n);
    std::int64_t next = static_cast<std::int64_t>(n);
    for (const auto& e : edges) {
        std::size_t ra = uf.find(e.a), rb = uf.find(e.b);
        LinkageNode node{uf.label(ra), uf.label(rb), e.weight, uf.size(ra) + uf.size(rb)};
        linkage.push_back(node);
        uf.merge(ra, rb, next++);
    }
    return linkage;
}

// Iterative leaf collection for a dendrogram node.
void collect_leaves(const std::vector<LinkageNode>& linkage, std::size_t n, std::int64_t node,
                    std::vector<std::int64_t>& out) {
    std::deque<std::int64_t> todo{node};
    while (!todo.empty()) {
        std::int64_t cur = todo.front();
        todo.pop_front();
        if (cur < static_cast<std::int64_t>(n)) {
            out.push_back(cur);
        } else {
            const auto& ln = linkage[cur - n];
            todo.push_back(ln.left);
            todo.push_back(ln.right);
        }
    }
}

CondensedTree condense_tree(const std::vector<LinkageNode>& linkage, std::size_t n,
                            int min_cluster_size) {
    CondensedTree tree;
    tree.num_points = n;
    const std::int64_t root = static_cast<std::int64_t>(2 * n - 2);
    std::unordered_map<std::int64_t, std::int64_t> relabel;
    relabel[root] = static_cast<std::int64_t>(n);
    std::int64_t next_label = static_cast<std::int64_t>(n) + 1;
    tree.cluster_labels.push_back(static_cast<std::int64_t>(n));

    auto node_size = [&](std::int64_t node) -> std::int64_t {
        return node < static_cast<std::int64_t>(n) ? 1 : linkage[node - n].size;
    };

    std::deque<std::int64_t> todo{root};
    std::vector<std::int64_t> leaves;
    while (!todo.empty()) {
        std::int64_t node = todo.front();
        todo.pop_front();
        const auto& ln = linkage[node - n];
        double lambda = ln.distance > 0.0 ? 1.0 / ln.distance : std::numeric_limits<double>::infinity();
        std::int64_t parent_label = relabel.at(node);
        std::int64_t lsize = node_size(ln.left), rsize = node_size(ln.right);
        bool l_big = lsize >= min_cluster_size, r_big = rsize >= min_cluster_size;
        if (l_big && r_big) {
            relabel[ln.left] = next_label++;
            tree.nodes.push_back({parent_label, relabel[ln.left], lambda, lsize});
            tree.cluster_labels.push_back(relabel[ln.left]);
            relabel[ln.right] = next_label++;
            tree.nodes.push_back({parent_label, relabel[ln.right], lambda, rsize});
            tree.cluster_labels.push_back(relabel[ln.right]);
            if (ln.left >= static_cast<std::int64_t>(n)) todo.push_back(ln.left);
            if (ln.right >= static_cast<std::int64_t>(n)) todo.push_back(ln.right);
        } else if (!l_big && !r_big) {
            leaves.clear();
            collect_leaves(linkage, n, ln.left, leaves);
            collect_leaves(linkage, n, ln.right, leaves);
            for (auto p : leaves) tree.nodes.push_back({parent_label, p, lambda, 1});
        } else {
            std::int64_t big = l_big ? ln.left : ln.right;
            std::int64_t small = l_big ? ln.right : ln.left;
            // min_cluster_size >= 2 makes the surviving child an internal node
            relabel[big] = parent_label;  // cluster persists through the chaff split
            leaves.clear();
            collect_leaves(linkage, n, small, leaves);
            for (auto p : leaves) tree.nodes.push_back({parent_label, p, lambda, 1});
            todo.push_back(big);
        }
    }
    return tree;
}

// Stability = sum over child rows of (lambda_child - lambda_birth) * child_size.
std::unordered_map<std::int64_t, double> compute_stability(const CondensedTree& tree) {
    std::unordered_map<std::int64_t, double> births;
    for (const auto& row : tree.nodes)
        if (row.child >= static_cast<std::int64_t>(tree.num_points)) births[row.child] = row.lambda_val;
    births[static_cast<std::int64_t>(tree.num_points)] = 0.0;

    std::unordered_map<std::int64_t, double> stability;
    for (auto label : tree.cluster_labels) stability[label] = 0.0;
    for (const auto& row : tree.nodes)
        stability[row.parent] += (row.lambda_val - births[row.parent]) * static_cast<double>(row.child_size);
    return stability;
}

}  // namespace

HdbscanResult hdbscan(const Points& points, const HdbscanParams& params, int num_threads) {
    const std::size_t n = points.count;
    HdbscanResult result;
    result.labels.assign(n, kNoise);
    if (params.min_cluster_size < 2) throw UsageError("hdbscan: min_cluster_size must be >= 2");
    if (n < static_cast<std::size_t>(params.min_cluster_size)) {
        // fewer points than min_cluster_size: everything is noise
        result.tree.num_points = n;
        return result;
    }

    int k = std::min<int>(params.effective_min_samples(), static_cast<int>(n) - 1);
    auto core = core_distances(points, k, params.metric, num_threads);
    result.mst = mutual_reachability_mst(points, core, params.metric, num_threads);
    auto linkage = single_linkage(result.mst, n);
    result.tree = condense_tree(linkage, n, params.min_cluster_size);

    auto stability = compute_stability(result.tree);
    for (auto label : result.tree.cluster_labels)
        result.tree.cluster_stability.push_back(stability[label]);

    // cluster children per cluster, in creation order
    std::unordered_map<std::int64_t, std::vector<std::int64_t>> children;
    for (const auto& row : result.tree.nodes)
        if (row.child >= static_cast<std::int64_t>(n)) children[row.parent].push_back(row.child);

    // excess-of-mass selection, leaves first; the root is never selected
    // unless it is the only cluster
    std::vector<std::int64_t> node_list(result.tree.cluster_labels.begin() + 1,
                                        result.tree.cluster_labels.end());
    std::sort(node_list.rbegin(), node_list.rend());
    std::unordered_map<std::int64_t, bool> is_cluster;
    for (auto label : node_list) is_cluster[label] = true;
    for (auto node : node_list) {
        double subtree = 0.0;
        for (auto child : children[node]) subtree += stability[child];
        if (subtree > stability[node]) {
            is_cluster[node] = false;
            stability[node] = subtree;
        } else {
            std::deque<std::int64_t> todo(children[node].begin(), children[node].end());
            while (!todo.empty()) {
                std::int64_t sub = todo.front();
                todo.pop_front();
                is_cluster[sub] = false;
                for (auto c : children[sub]) todo.push_back(c);
            }
        }
    }
    std::vector<std::int64_t> selected;
    for (auto label : result.tree.cluster_labels)
        if (label != static_cast<std::int64_t>(n) && is_cluster[label]) selected.push_back(label);
    if (result.tree.cluster_labels.size() == 1) selected.push_back(static_cast<std::int64_t>(n));
    std::sort(selected.begin(), selected.end());
    result.tree.selected_clusters = selected;

    // membership: union everything except the rows where a selected cluster
    // departs its parent; a point's component then names its flat cluster
    std::unordered_map<std::int64_t, std::int64_t> cluster_id;
    for (std::size_t c = 0; c < selected.size(); ++c) cluster_id[selected[c]] = static_cast<std::int64_t>(c);

    std::int64_t max_label = static_cast<std::int64_t>(n);
    for (auto label : result.tree.cluster_labels) max_label = std::max(max_label, label);
    std::vector<std::int64_t> parent(max_label + 1);
    for (std::int64_t i = 0; i <= max_label; ++i) parent[i] = i;
    std::function<std::int64_t(std::int64_t)> find = [&](std::int64_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (const auto& row : result.tree.nodes) {
        if (cluster_id.count(row.child)) continue;  // boundary of a selected cluster
        parent[find(row.child)] = find(row.parent);
    }
    // re-root each selected cluster's component onto the cluster label itself
    std::unordered_map<std::int64_t, std::int64_t> root_to_cluster;
    for (auto label : selected) root_to_cluster[find(label)] = cluster_id[label];
    for (std::size_t p = 0; p < n; ++p) {
        auto it = root_to_cluster.find(find(static_cast<std::int64_t>(p)));
        result.labels[p] = it == root_to_cluster.end() ? kNoise : it->second;
    }
    result.num_clusters = selected.size();
    return result;
}

std::vector<double> distance_to_center_outlier_scores(const Points& points,
                                                      std::span<const std::int64_t> labels) {
    const std::size_t n = points.count, dim = points.dim;
    std::int64_t max_cluster = -1;
    for (auto l : labels) max_cluster = std::max(max_cluster, l);
    std::vector<std::vector<double>> centroids(max_cluster + 1, std::vector<double>(dim, 0.0));
    std::vector<std::int64_t> counts(max_cluster + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == kNoise) continue;
        auto row = points.row(i);
        auto& c = centroids[labels[i]];
        for (std::size_t d = 0; d < dim; ++d) c[d] += row[d];
        ++counts[labels[i]];
    }
    for (std::int64_t c = 0; c <= max_cluster; ++c)
        if (counts[c] > 0)
            for (double& v : centroids[c]) v /= static_cast<double>(counts[c]);

    std::vector<double> scores(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == kNoise) {
            scores[i] = std::numeric_limits<double>::infinity();
            continue;
        }
        scores[i] = std::sqrt(squared_euclidean(points.row(i),
                                                std::span<const double>(centroids[labels[i]])));
    }
    return scores;
}

}  // namespace trackmine
