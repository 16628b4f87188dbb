#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "trackmine/discovery.hpp"

namespace trackmine {

/// Cluster-vs-ground-truth contingency counts with marginals.
struct ContingencyTable {
    std::size_t rows = 0;  // clusters in u
    std::size_t cols = 0;  // classes in v
    std::vector<std::int64_t> counts;  // rows x cols
    std::vector<std::int64_t> row_marginals;
    std::vector<std::int64_t> col_marginals;
    std::int64_t total = 0;

    std::int64_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }

    /// Builds the table from two equal-length labelings; labels are
    /// compacted, so any integer values are accepted.
    static ContingencyTable from_labels(std::span<const std::int64_t> u,
                                        std::span<const std::int64_t> v);
};

double mutual_information(const ContingencyTable& t);  // nats
double entropy(std::span<const std::int64_t> marginals, std::int64_t total);  // nats

/// Exact expectation of MI under the hypergeometric model of random
/// labelings with fixed marginals.
double expected_mutual_information(const ContingencyTable& t);

enum class AmiNormalizer { Mean, Max };

/// AMI = (MI - E[MI]) / (norm(H(u), H(v)) - E[MI]), logs in nats.
/// Both labelings single-cluster -> 1; other zero denominators -> 0.
double ami(std::span<const std::int64_t> u, std::span<const std::int64_t> v,
           AmiNormalizer normalizer = AmiNormalizer::Mean);

struct SweepPoint {
    double fraction = 0.0;
    double ami = 0.0;
    bool is_automatic = false;
};

struct SweepCurve {
    std::vector<SweepPoint> points;                 // fractions strictly increasing
    std::optional<SweepPoint> automatic_point;      // HDBSCAN's own noise fraction
};

/// For each fraction f, drops the ceil(f*N) points with the largest outlier
/// score (global ranking; score ties drop the lower track_id first) and
/// computes AMI on the survivors. At f=0, NOISE points form one extra
/// predicted cluster. When the assignment contains NOISE, the automatic
/// point (noise fraction, AMI over non-noise) is also emitted.
SweepCurve ami_outlier_sweep(const ClusterAssignment& assignment,
                             std::span<const std::int64_t> gt,
                             std::span<const double> fractions);

/// Indices whose ground-truth label is outside the known-category set and is
/// not a tracking error.
std::vector<std::size_t> restrict_non_known(std::span<const std::string> gt_labels,
                                            const std::set<std::string>& known_categories);

struct MiningStats {
    std::int64_t frames = 0;
    double duration_hours = 0.0;
    std::int64_t proposals_total = 0;
    std::int64_t tracks_total = 0;
    std::int64_t tracks_labeled = 0;
    std::int64_t tracks_unknown = 0;
    std::int64_t tracking_errors = 0;
    double proposals_per_frame = 0.0;
    double compression_per_frame = 0.0;  // proposals_total / tracks_total
    double error_rate = 0.0;             // tracking_errors / tracks_labeled
    bool error_rate_defined = true;
};

struct MiningCounts {
    std::int64_t frames = 0;
    double duration_hours = 0.0;
    std::int64_t proposals_total = 0;
    std::int64_t tracks_total = 0;
    std::int64_t tracks_labeled = 0;
    std::int64_t tracks_unknown = 0;
    std::int64_t tracking_errors = 0;
};

MiningStats mining_stats(const MiningCounts& counts);

MiningStats mining_stats(const TrackCollection& tracks,
                         std::span<const AnnotationRecord> annotations,
                         std::int64_t frames, double duration_hours,
                         std::int64_t proposals_total);

/// Percent value rounded to one decimal, for reporting.
double percent_1dp(double rate);

}  // namespace trackmine
