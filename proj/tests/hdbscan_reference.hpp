#pragma once

// Brute-force density clustering reference for small inputs. Deliberately
// independent of the library internals: Kruskal over the full
// mutual-reachability edge list, recursive condensation and recursive
// excess-of-mass selection, flat membership by walking the condensed tree
// upward. Quadratic memory, only suitable for small n.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <vector>

#include "trackmine/discovery.hpp"
#include "trackmine/embedding.hpp"

namespace trackmine::test {

namespace refdetail {

struct Row {
    std::int64_t parent;
    std::int64_t child;
    double lambda;
    std::int64_t size;
};

struct Dendro {
    // merge t joins nodes left[t], right[t] at height[t]; node ids n+t
    std::vector<std::int64_t> left, right;
    std::vector<double> height;
    std::vector<std::int64_t> size;
};

inline std::int64_t dendro_size(const Dendro& d, std::size_t n, std::int64_t node) {
    return node < static_cast<std::int64_t>(n) ? 1 : d.size[node - n];
}

inline void leaves_of(const Dendro& d, std::size_t n, std::int64_t node,
                      std::vector<std::int64_t>& out) {
    if (node < static_cast<std::int64_t>(n)) {
        out.push_back(node);
        return;
    }
    leaves_of(d, n, d.left[node - n], out);
    leaves_of(d, n, d.right[node - n], out);
}

inline void condense_rec(const Dendro& d, std::size_t n, int mcs, std::int64_t node,
                         std::int64_t parent_label, std::int64_t& next_label,
                         std::vector<Row>& rows, std::vector<std::int64_t>& labels) {
    double h = d.height[node - n];
    double lambda = h > 0.0 ? 1.0 / h : std::numeric_limits<double>::infinity();
    std::int64_t l = d.left[node - n], r = d.right[node - n];
    std::int64_t ls = dendro_size(d, n, l), rs = dendro_size(d, n, r);
    bool lb = ls >= mcs, rb = rs >= mcs;
    if (lb && rb) {
        for (std::int64_t child : {l, r}) {
            std::int64_t lab = next_label++;
            rows.push_back({parent_label, lab, lambda, dendro_size(d, n, child)});
            labels.push_back(lab);
            if (child >= static_cast<std::int64_t>(n))
                condense_rec(d, n, mcs, child, lab, next_label, rows, labels);
        }
    } else if (!lb && !rb) {
        std::vector<std::int64_t> pts;
        leaves_of(d, n, l, pts);
        leaves_of(d, n, r, pts);
        for (auto p : pts) rows.push_back({parent_label, p, lambda, 1});
    } else {
        std::int64_t big = lb ? l : r, small = lb ? r : l;
        std::vector<std::int64_t> pts;
        leaves_of(d, n, small, pts);
        for (auto p : pts) rows.push_back({parent_label, p, lambda, 1});
        condense_rec(d, n, mcs, big, parent_label, next_label, rows, labels);
    }
}

// Returns the subtree's selection-adjusted stability; fills `selected`.
inline double eom_rec(std::int64_t node, const std::map<std::int64_t, double>& stability,
                      const std::map<std::int64_t, std::vector<std::int64_t>>& children,
                      bool is_root, std::vector<std::int64_t>& selected) {
    double sum = 0.0;
    std::vector<std::int64_t> below;
    auto it = children.find(node);
    if (it != children.end()) {
        for (auto c : it->second) {
            std::vector<std::int64_t> sub;
            sum += eom_rec(c, stability, children, false, sub);
            below.insert(below.end(), sub.begin(), sub.end());
        }
    }
    double own = stability.at(node);
    if (is_root || sum > own) {
        selected = std::move(below);
        return sum;
    }
    selected = {node};
    return own;
}

}  // namespace refdetail

inline std::vector<std::int64_t> hdbscan_reference(const Points& pts, const HdbscanParams& params) {
    using namespace refdetail;
    const std::size_t n = pts.count;
    std::vector<std::int64_t> out(n, kNoise);
    if (n < static_cast<std::size_t>(params.min_cluster_size)) return out;

    auto dist = [&](std::size_t i, std::size_t j) {
        return params.metric == Metric::Euclidean
                   ? std::sqrt(squared_euclidean(pts.row(i), pts.row(j)))
                   : embedding_distance(pts.row(i), pts.row(j), Metric::Cosine);
    };
    int k = std::min<int>(params.effective_min_samples(), static_cast<int>(n) - 1);
    std::vector<double> core(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> ds;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) ds.push_back(dist(i, j));
        std::sort(ds.begin(), ds.end());
        core[i] = ds[k - 1];
    }

    struct Edge {
        double w;
        std::size_t a, b;
    };
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            edges.push_back({std::max({core[i], core[j], dist(i, j)}), i, j});
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
        if (x.w != y.w) return x.w < y.w;
        if (x.a != y.a) return x.a < y.a;
        return x.b < y.b;
    });

    // Kruskal, then single linkage over the accepted edges in the same order
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<std::int64_t> comp_node(n);
    std::iota(comp_node.begin(), comp_node.end(), 0);
    Dendro d;
    std::int64_t next_node = static_cast<std::int64_t>(n);
    for (const auto& e : edges) {
        std::size_t ra = find(e.a), rb = find(e.b);
        if (ra == rb) continue;
        d.left.push_back(comp_node[ra]);
        d.right.push_back(comp_node[rb]);
        d.height.push_back(e.w);
        d.size.push_back(dendro_size(d, n, comp_node[ra]) + dendro_size(d, n, comp_node[rb]));
        parent[ra] = rb;
        comp_node[rb] = next_node++;
    }

    std::vector<Row> rows;
    std::vector<std::int64_t> cluster_labels{static_cast<std::int64_t>(n)};
    std::int64_t next_label = static_cast<std::int64_t>(n) + 1;
    condense_rec(d, n, params.min_cluster_size, static_cast<std::int64_t>(2 * n - 2),
                 static_cast<std::int64_t>(n), next_label, rows, cluster_labels);

    std::map<std::int64_t, double> births;
    births[static_cast<std::int64_t>(n)] = 0.0;
    for (const auto& r : rows)
        if (r.child >= static_cast<std::int64_t>(n)) births[r.child] = r.lambda;
    std::map<std::int64_t, double> stability;
    for (auto lab : cluster_labels) stability[lab] = 0.0;
    for (const auto& r : rows)
        stability[r.parent] += (r.lambda - births[r.parent]) * static_cast<double>(r.size);

    std::map<std::int64_t, std::vector<std::int64_t>> children;
    std::map<std::int64_t, std::int64_t> cluster_parent;
    for (const auto& r : rows)
        if (r.child >= static_cast<std::int64_t>(n)) {
            children[r.parent].push_back(r.child);
            cluster_parent[r.child] = r.parent;
        }

    std::vector<std::int64_t> selected;
    eom_rec(static_cast<std::int64_t>(n), stability, children, true, selected);
    if (cluster_labels.size() == 1) selected = {static_cast<std::int64_t>(n)};
    std::sort(selected.begin(), selected.end());
    std::map<std::int64_t, std::int64_t> id_of;
    for (std::size_t c = 0; c < selected.size(); ++c) id_of[selected[c]] = static_cast<std::int64_t>(c);

    for (const auto& r : rows) {
        if (r.child >= static_cast<std::int64_t>(n)) continue;
        std::int64_t at = r.parent;
        while (!id_of.count(at) && cluster_parent.count(at)) at = cluster_parent[at];
        if (id_of.count(at)) out[r.child] = id_of[at];
    }
    return out;
}

// Relabels clusters by first occurrence so two labelings of the same
// partition compare equal; noise stays kNoise.
inline std::vector<std::int64_t> normalize_labels(const std::vector<std::int64_t>& labels) {
    std::map<std::int64_t, std::int64_t> remap;
    std::vector<std::int64_t> out;
    out.reserve(labels.size());
    for (auto l : labels) {
        if (l == kNoise) {
            out.push_back(kNoise);
            continue;
        }
        auto [it, fresh] = remap.try_emplace(l, static_cast<std::int64_t>(remap.size()));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace trackmine::test
