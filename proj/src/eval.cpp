#include "trackmine/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace trackmine {

ContingencyTable ContingencyTable::from_labels(std::span<const std::int64_t> u,
                                               std::span<const std::int64_t> v) {
    if (u.size() != v.size()) throw DataError("contingency table: labeling length mismatch");
    if (u.empty()) throw DataError("contingency table: empty labelings");
    auto compact = [](std::span<const std::int64_t> labels) {
        std::unordered_map<std::int64_t, std::size_t> ids;
        std::vector<std::size_t> out(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
            out[i] = it->second;
        }
        return std::pair{out, ids.size()};
    };
    auto [ui, nu] = compact(u);
    auto [vi, nv] = compact(v);
    ContingencyTable t;
    t.rows = nu;
    t.cols = nv;
    t.counts.assign(nu * nv, 0);
    t.row_marginals.assign(nu, 0);
    t.col_marginals.assign(nv, 0);
    t.total = static_cast<std::int64_t>(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        ++t.counts[ui[i] * nv + vi[i]];
        ++t.row_marginals[ui[i]];
        ++t.col_marginals[vi[i]];
    }
    return t;
}

double entropy(std::span<const std::int64_t> marginals, std::int64_t total) {
    double h = 0.0;
    for (auto m : marginals) {
        if (m == 0) continue;
        double p = static_cast<double>(m) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

double mutual_information(const ContingencyTable& t) {
    double mi = 0.0;
    const double n = static_cast<double>(t.total);
    for (std::size_t i = 0; i < t.rows; ++i) {
        for (std::size_t j = 0; j < t.cols; ++j) {
            std::int64_t nij = t.at(i, j);
            if (nij == 0) continue;
            double p = static_cast<double>(nij) / n;
            mi += p * std::log(n * static_cast<double>(nij) /
                               (static_cast<double>(t.row_marginals[i]) *
                                static_cast<double>(t.col_marginals[j])));
        }
    }
    return mi;
}

double expected_mutual_information(const ContingencyTable& t) {
    // exact hypergeometric expectation over all admissible cell counts,
    // computed in log space with lgamma
    const std::int64_t n = t.total;
    const double log_n = std::lgamma(static_cast<double>(n) + 1.0);
    double emi = 0.0;
    for (std::size_t i = 0; i < t.rows; ++i) {
        const std::int64_t a = t.row_marginals[i];
        if (a == 0) continue;
        const double lg_a = std::lgamma(static_cast<double>(a) + 1.0);
        const double lg_na = std::lgamma(static_cast<double>(n - a) + 1.0);
        for (std::size_t j = 0; j < t.cols; ++j) {
            const std::int64_t b = t.col_marginals[j];
            if (b == 0) continue;
            const double lg_b = std::lgamma(static_cast<double>(b) + 1.0);
            const double lg_nb = std::lgamma(static_cast<double>(n - b) + 1.0);
            const std::int64_t lo = std::max<std::int64_t>(1, a + b - n);
            const std::int64_t hi = std::min(a, b);
            for (std::int64_t nij = lo; nij <= hi; ++nij) {
                double log_p = lg_a + lg_b + lg_na + lg_nb - log_n -
                               std::lgamma(static_cast<double>(nij) + 1.0) -
                               std::lgamma(static_cast<double>(a - nij) + 1.0) -
                               std::lgamma(static_cast<double>(b - nij) + 1.0) -
                               std::lgamma(static_cast<double>(n - a - b + nij) + 1.0);
                double term = (static_cast<double>(nij) / static_cast<double>(n)) *
                              std::log(static_cast<double>(n) * static_cast<double>(nij) /
                                       (static_cast<double>(a) * static_cast<double>(b)));
                emi += std::exp(log_p) * term;
            }
        }
    }
    return emi;
}

double ami(std::span<const std::int64_t> u, std::span<const std::int64_t> v,
           AmiNormalizer normalizer) {
    auto t = ContingencyTable::from_labels(u, v);
    if (t.rows == 1 && t.cols == 1) return 1.0;  // both single-cluster
    const double hu = entropy(t.row_marginals, t.total);
    const double hv = entropy(t.col_marginals, t.total);
    const double mi = mutual_information(t);
    const double emi = expected_mutual_information(t);
    const double norm = normalizer == AmiNormalizer::Mean ? 0.5 * (hu + hv) : std::max(hu, hv);
    const double denom = norm - emi;
    if (denom == 0.0) return 0.0;
    return (mi - emi) / denom;
}

SweepCurve ami_outlier_sweep(const ClusterAssignment& assignment,
                             std::span<const std::int64_t> gt,
                             std::span<const double> fractions) {
    const std::size_t n = assignment.cluster_ids.size();
    if (gt.size() != n) throw DataError("ami_outlier_sweep: ground-truth length mismatch");
    if (n == 0) throw DataError("ami_outlier_sweep: empty assignment");
    for (std::size_t i = 1; i < fractions.size(); ++i)
        if (fractions[i] <= fractions[i - 1])
            throw UsageError("ami_outlier_sweep: fractions must be strictly increasing");

    // NOISE points form one extra predicted cluster at evaluation time
    std::int64_t max_cluster = -1;
    for (auto c : assignment.cluster_ids) max_cluster = std::max(max_cluster, c);
    std::vector<std::int64_t> pred(n);
    bool has_noise = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (assignment.cluster_ids[i] == kNoise) {
            pred[i] = max_cluster + 1;
            has_noise = true;
        } else {
            pred[i] = assignment.cluster_ids[i];
        }
    }

    // global outlier ranking: highest score first, score ties drop lower
    // track_id first
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (assignment.outlier_scores[a] != assignment.outlier_scores[b])
            return assignment.outlier_scores[a] > assignment.outlier_scores[b];
        return assignment.track_ids[a] < assignment.track_ids[b];
    });
    std::vector<std::size_t> drop_rank(n);  // position in the drop order
    for (std::size_t r = 0; r < n; ++r) drop_rank[order[r]] = r;

    SweepCurve curve;
    for (double f : fractions) {
        auto dropped = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n)));
        if (dropped >= n) throw DataError("ami_outlier_sweep: fraction removes all points");
        std::vector<std::int64_t> su, sv;
        su.reserve(n - dropped);
        sv.reserve(n - dropped);
        for (std::size_t i = 0; i < n; ++i) {
            if (drop_rank[i] < dropped) continue;
            su.push_back(pred[i]);
            sv.push_back(gt[i]);
        }
        curve.points.push_back({f, ami(su, sv), false});
    }

    if (has_noise) {
        std::vector<std::int64_t> su, sv;
        for (std::size_t i = 0; i < n; ++i) {
            if (assignment.cluster_ids[i] == kNoise) continue;
            su.push_back(assignment.cluster_ids[i]);
            sv.push_back(gt[i]);
        }
        std::size_t noise_count = n - su.size();
        double f_auto = static_cast<double>(noise_count) / static_cast<double>(n);
        double a = su.empty() ? 0.0 : ami(su, sv);
        curve.automatic_point = SweepPoint{f_auto, a, true};
    }
    return curve;
}

std::vector<std::size_t> restrict_non_known(std::span<const std::string> gt_labels,
                                            const std::set<std::string>& known_categories) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < gt_labels.size(); ++i) {
        if (gt_labels[i] == kTrackingErrorLabel) continue;
        if (known_categories.count(gt_labels[i])) continue;
        out.push_back(i);
    }
    return out;
}

MiningStats mining_stats(const MiningCounts& c) {
    MiningStats s;
    s.frames = c.frames;
    s.duration_hours = c.duration_hours;
    s.proposals_total = c.proposals_total;
    s.tracks_total = c.tracks_total;
    s.tracks_labeled = c.tracks_labeled;
    s.tracks_unknown = c.tracks_unknown;
    s.tracking_errors = c.tracking_errors;
    if (c.frames == 0) {
        if (c.proposals_total > 0) throw DataError("mining_stats: zero frames with proposals present");
        s.proposals_per_frame = 0.0;
    } else {
        s.proposals_per_frame = static_cast<double>(c.proposals_total) / static_cast<double>(c.frames);
    }
    s.compression_per_frame =
        c.tracks_total > 0 ? static_cast<double>(c.proposals_total) / static_cast<double>(c.tracks_total)
                           : 0.0;
    if (c.tracks_labeled > 0) {
        s.error_rate = static_cast<double>(c.tracking_errors) / static_cast<double>(c.tracks_labeled);
        s.error_rate_defined = true;
    } else {
        s.error_rate = 0.0;
        s.error_rate_defined = false;
    }
    return s;
}

MiningStats mining_stats(const TrackCollection& tracks,
                         std::span<const AnnotationRecord> annotations,
                         std::int64_t frames, double duration_hours,
                         std::int64_t proposals_total) {
    std::set<std::int64_t> known_ids;
    for (const auto& t : tracks.tracks) known_ids.insert(t.track_id);
    MiningCounts c;
    c.frames = frames;
    c.duration_hours = duration_hours;
    c.proposals_total = proposals_total;
    c.tracks_total = static_cast<std::int64_t>(tracks.tracks.size());
    for (const auto& a : annotations) {
        if (!known_ids.count(a.track_id))
            throw DataError("mining_stats: annotation references missing track " +
                            std::to_string(a.track_id));
        ++c.tracks_labeled;
        if (a.gt_label == kTrackingErrorLabel) ++c.tracking_errors;
        if (a.gt_label == kUnknownValidLabel) ++c.tracks_unknown;
    }
    return mining_stats(c);
}

double percent_1dp(double rate) { return std::round(rate * 1000.0) / 10.0; }

}  // namespace trackmine
